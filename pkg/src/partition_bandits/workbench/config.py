"""Experiment configuration loaded from JSON."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from ..cell_bandits import CELL_KINDS, GRADIENT_BANDIT, REWARD_ASCENT, SIGNS
from ..inference import OptimizerConfig
from ..partition_model import CATALOG_NAMES
from ..selection import DEFAULT_C
from ..stimulus import ContextSchedule


def default_n_grid(n: int) -> list[int]:
    return sorted({N for N in (25, 50, 100, 150, 200, 250) if N <= n} | {n})


def default_c_grid(n: int) -> list[float]:
    return sorted([0.0, 0.004, 0.008, 0.012, 0.02, 0.04, 0.053, 0.06, 1.0 / math.log(n) ** 2])


@dataclass
class ExperimentConfig:
    n: int = 500
    agents_per_model: int = 100
    models: list[str] = field(default_factory=lambda: list(CATALOG_NAMES))
    cell_kind: str = GRADIENT_BANDIT
    sign: str = REWARD_ASCENT
    generator_theta: dict = field(default_factory=dict)
    n_grid: Optional[list[int]] = None
    c_grid: Optional[list[float]] = None
    split_N: Optional[int] = None
    c: float = DEFAULT_C
    stop_time: Optional[int] = None
    schedule: dict = field(default_factory=lambda: {"kind": "cyclic", "seed": 0})
    master_seed: int = 0
    optimizer: dict = field(default_factory=dict)
    workers: int = 1
    campaign: Optional[str] = None
    trajectories: Optional[list[str]] = None
    fit_window: Optional[list[int]] = None
    risk: dict = field(default_factory=dict)
    experts: dict = field(default_factory=dict)
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.agents_per_model < 1:
            raise ValueError("agents_per_model must be >= 1")
        if self.cell_kind not in CELL_KINDS:
            raise ValueError(f"cell_kind must be one of {CELL_KINDS}")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}")
        unknown = set(self.models) - set(CATALOG_NAMES)
        if unknown or not self.models:
            raise ValueError(f"models must be a nonempty subset of {CATALOG_NAMES}")
        if self.n_grid is None:
            self.n_grid = default_n_grid(self.n)
        if self.c_grid is None:
            self.c_grid = default_c_grid(self.n)
        if not self.n_grid or not self.c_grid:
            raise ValueError("sweep grids must be nonempty")
        if any(not 2 <= N <= self.n for N in self.n_grid):
            raise ValueError(f"every hold-out split must lie in [2, {self.n}]")
        if any(c < 0 for c in self.c_grid):
            raise ValueError("penalty constants must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.context_schedule()
        self.optimizer_config()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        return self if seed is None else replace(self, master_seed=seed)

    def context_schedule(self) -> ContextSchedule:
        s = dict(self.schedule)
        return ContextSchedule(s.get("kind", "cyclic"), int(s.get("seed", 0)), self.n)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig.from_dict(self.optimizer)

    def to_dict(self) -> dict:
        return asdict(self)
