"""Context space for the 5-4 categorization task.

Nine objects described by four binary attributes, split into categories
A (five objects) and B (four objects). Actions are 0-based indices:
action 0 answers "A", action 1 answers "B".
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CATEGORIES = ("A", "B")

# id, shape, pattern, size, color, category
_FIVE_FOUR_TABLE = (
    (1, "circle", "striped", "small", "blue", "A"),
    (2, "circle", "striped", "big", "blue", "A"),
    (3, "circle", "striped", "small", "red", "A"),
    (4, "circle", "plain", "small", "red", "B"),
    (5, "circle", "plain", "big", "red", "A"),
    (6, "square", "striped", "small", "red", "B"),
    (7, "square", "striped", "big", "red", "A"),
    (8, "square", "plain", "big", "blue", "B"),
    (9, "square", "plain", "small", "blue", "B"),
)

_ALLOWED = {
    "shape": ("circle", "square"),
    "pattern": ("striped", "plain"),
    "size": ("small", "big"),
    "color": ("red", "blue"),
    "category": CATEGORIES,
}

SCHEDULE_KINDS = ("cyclic", "shuffled_blocks")


@dataclass(frozen=True)
class StimulusObject:
    id: int
    shape: str
    pattern: str
    size: str
    color: str
    category: str

    def __post_init__(self):
        for field, allowed in _ALLOWED.items():
            if getattr(self, field) not in allowed:
                raise ValueError(f"object {self.id}: {field}={getattr(self, field)!r} not in {allowed}")

    @property
    def category_action(self) -> int:
        """Index of the action that answers this object's category."""
        return CATEGORIES.index(self.category)


@dataclass(frozen=True)
class StimulusSet:
    objects: tuple[StimulusObject, ...]
    n_actions: int = 2

    def __post_init__(self):
        if self.n_actions < 2:
            raise ValueError("n_actions must be >= 2")
        ids = [o.id for o in self.objects]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError("object ids must be consecutive starting at 1")
        quads = {(o.shape, o.pattern, o.size, o.color) for o in self.objects}
        if len(quads) != len(self.objects):
            raise ValueError("attribute quadruples must be pairwise distinct")

    @property
    def ids(self) -> list[int]:
        return [o.id for o in self.objects]

    def __len__(self) -> int:
        return len(self.objects)

    def __getitem__(self, object_id: int) -> StimulusObject:
        if not 1 <= object_id <= len(self.objects):
            raise ValueError(f"unknown object id {object_id}")
        return self.objects[object_id - 1]

    def reward(self, object_id: int, action: int) -> float:
        return categorization_reward(self[object_id], action, self.n_actions)

    def reward_table(self) -> np.ndarray:
        """Array of shape (n_objects, n_actions); row i is object i+1."""
        return np.array(
            [[self.reward(o.id, a) for a in range(self.n_actions)] for o in self.objects]
        )

    def to_csv(self, path) -> None:
        """Write ``objects.csv`` with columns id,shape,pattern,size,color,category."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", "shape", "pattern", "size", "color", "category"])
            for o in self.objects:
                writer.writerow([o.id, o.shape, o.pattern, o.size, o.color, o.category])


@dataclass(frozen=True)
class ContextSchedule:
    kind: str = "cyclic"
    seed: int = 0
    horizon: int = 500

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"schedule kind must be one of {SCHEDULE_KINDS}, got {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "horizon": self.horizon}


def build_five_four_set() -> StimulusSet:
    """The canonical nine-object 5-4 category structure with two actions."""
    return StimulusSet(tuple(StimulusObject(*row) for row in _FIVE_FOUR_TABLE), n_actions=2)


def read_objects_csv(path) -> StimulusSet:
    rows = list(csv.DictReader(Path(path).open(newline="")))
    return StimulusSet(
        tuple(
            StimulusObject(int(r["id"]), r["shape"], r["pattern"], r["size"], r["color"], r["category"])
            for r in rows
        )
    )


def categorization_reward(obj: StimulusObject, action: int, n_actions: int = 2) -> float:
    """1.0 when ``action`` names the object's category, else 0.0."""
    if not 0 <= action < n_actions:
        raise ValueError(f"action {action} out of range [0, {n_actions})")
    return 1.0 if action == obj.category_action else 0.0


def generate_context_sequence(stimuli: StimulusSet, schedule: ContextSchedule) -> np.ndarray:
    """Sequence of object ids of length ``schedule.horizon``.

    ``cyclic`` repeats 1..m in order. ``shuffled_blocks`` concatenates
    independent seeded permutations of 1..m, truncating the last block.
    """
    m = len(stimuli)
    if m == 0:
        raise ValueError("stimulus set is empty")
    n = schedule.horizon
    if n < 1:
        raise ValueError("horizon must be >= 1")
    ids = np.arange(1, m + 1)
    if schedule.kind == "cyclic":
        return ids[np.arange(n) % m]
    rng = np.random.default_rng(schedule.seed)
    n_blocks = -(-n // m)
    blocks = [rng.permutation(ids) for _ in range(n_blocks)]
    return np.concatenate(blocks)[:n]
