"""Trajectory CSV reading/writing and small JSON/CSV emitters."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..partition_model import Trajectory

TRAJECTORY_HEADER = ["trial", "object_id", "action", "reward"]


class TrajectoryParseError(ValueError):
    """Malformed trajectory file; ``row`` is the 1-based line number (header is row 1)."""

    def __init__(self, message: str, row: int | None = None, path=None):
        self.row = row
        self.path = path
        where = f"{path}: " if path is not None else ""
        at = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}{at}{message}")


def trajectory_csv_text(traj: Trajectory) -> str:
    lines = [",".join(TRAJECTORY_HEADER)]
    for t, (x, a, g) in enumerate(zip(traj.contexts, traj.actions, traj.rewards), start=1):
        lines.append(f"{t},{int(x)},{int(a) + 1},{float(g)!r}")
    return "\n".join(lines) + "\n"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``trial,object_id,action,reward`` with 1-based trials and actions."""
    Path(path).write_text(trajectory_csv_text(traj))


def parse_trajectory_csv(text: str, n_actions: int = 2, path=None) -> Trajectory:
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != TRAJECTORY_HEADER:
        raise TrajectoryParseError(f"expected header {','.join(TRAJECTORY_HEADER)}", 1, path)
    contexts, actions, rewards = [], [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise TrajectoryParseError(f"expected 4 fields, got {len(row)}", line_no, path)
        try:
            trial, obj, action = int(row[0]), int(row[1]), int(row[2])
            reward = float(row[3])
        except ValueError as exc:
            raise TrajectoryParseError(f"unparsable field ({exc})", line_no, path) from None
        if trial != len(contexts) + 1:
            raise TrajectoryParseError(f"trial {trial} out of sequence, expected {len(contexts) + 1}", line_no, path)
        if not 1 <= action <= n_actions:
            raise TrajectoryParseError(f"action {action} outside 1..{n_actions}", line_no, path)
        if not 0.0 <= reward <= 1.0:
            raise TrajectoryParseError(f"reward {reward} outside [0, 1]", line_no, path)
        contexts.append(obj)
        actions.append(action - 1)
        rewards.append(reward)
    if not contexts:
        raise TrajectoryParseError("no data rows", None, path)
    return Trajectory(np.array(contexts), np.array(actions), np.array(rewards), n_actions)


def ingest_trajectory_csv(path, n_actions: int = 2) -> Trajectory:
    """Read a trajectory CSV, validating every row."""
    return parse_trajectory_csv(Path(path).read_text(), n_actions, path)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_rows(rows: list[dict], columns: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
