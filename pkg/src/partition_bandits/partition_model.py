"""Partition-based contextual bandits.

A model splits the context space into disjoint cells and runs one cell
bandit per cell. At time t the action law is the current distribution of
the cell that owns the context X_t; only that cell is updated afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cell_bandits import (
    EXP3IX,
    GRADIENT_BANDIT,
    PARAM_DIM,
    REWARD_ASCENT,
    CellParams,
    CellState,
    cell_step,
    check_kind,
    init_cell,
)
from .stimulus import StimulusSet


@dataclass(frozen=True)
class Partition:
    cells: tuple[frozenset, ...]

    def __post_init__(self):
        cells = tuple(frozenset(int(x) for x in c) for c in self.cells)
        object.__setattr__(self, "cells", cells)
        if not cells:
            raise ValueError("a partition needs at least one cell")
        seen: set[int] = set()
        for c in cells:
            if not c:
                raise ValueError("cells must be nonempty")
            if seen & c:
                raise ValueError(f"cells overlap on {sorted(seen & c)}")
            seen |= c
        object.__setattr__(self, "_owner", {x: i for i, c in enumerate(cells) for x in c})

    @classmethod
    def from_lists(cls, cells: Sequence[Sequence[int]]) -> "Partition":
        return cls(tuple(frozenset(c) for c in cells))

    @property
    def D(self) -> int:
        return len(self.cells)

    @property
    def context_ids(self) -> frozenset:
        return frozenset(self._owner)

    def cell_of(self, context: int) -> int:
        try:
            return self._owner[int(context)]
        except KeyError:
            raise ValueError(f"context {context} is not covered by the partition") from None

    def cell_index(self, contexts) -> np.ndarray:
        return np.array([self.cell_of(x) for x in contexts], dtype=int)

    def as_lists(self) -> list[list[int]]:
        return [sorted(c) for c in self.cells]


def default_bounds(cell_kind: str, horizon: int) -> tuple[tuple[float, float], ...]:
    """Box (0, sqrt(n)) per coordinate, i.e. effective rates in (0, 1)."""
    return ((0.0, math.sqrt(horizon)),) * PARAM_DIM[check_kind(cell_kind)]


@dataclass(frozen=True)
class PartitionModelSpec:
    name: str
    partition: Partition
    cell_kind: str = GRADIENT_BANDIT
    bounds: Optional[tuple[tuple[float, float], ...]] = None
    horizon: int = 500
    sign: str = REWARD_ASCENT

    def __post_init__(self):
        check_kind(self.cell_kind)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        bounds = self.bounds if self.bounds is not None else default_bounds(self.cell_kind, self.horizon)
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != self.dim:
            raise ValueError(f"{self.cell_kind} needs {self.dim} bound interval(s)")
        for lo, hi in bounds:
            if not 0 <= lo < hi:
                raise ValueError(f"invalid bound [{lo}, {hi}]")
        object.__setattr__(self, "bounds", bounds)

    @property
    def dim(self) -> int:
        return PARAM_DIM[self.cell_kind]

    @property
    def D(self) -> int:
        return self.partition.D

    def feedback(self, reward: float) -> float:
        """Rewards drive Gradient Bandit cells; Exp3-IX cells see the loss 1 - reward."""
        return 1.0 - reward if self.cell_kind == EXP3IX else reward

    def midpoint(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.bounds])

    def theta(self, values) -> np.ndarray:
        """Coerce per-cell parameters to shape (D, d) and check the box.

        A scalar or a single d-vector is broadcast to every cell.
        """
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 0:
            arr = np.full((self.D, self.dim), float(arr))
        elif arr.ndim == 1 and arr.shape[0] == self.dim and self.D != self.dim:
            arr = np.tile(arr, (self.D, 1))
        elif arr.ndim == 1 and self.dim == 1:
            arr = arr.reshape(-1, 1)
        if arr.shape != (self.D, self.dim):
            raise ValueError(f"{self.name}: theta must have shape ({self.D}, {self.dim}), got {arr.shape}")
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        if np.any(arr < lo - 1e-12) or np.any(arr > hi + 1e-12):
            raise ValueError(f"{self.name}: theta outside the parameter box {self.bounds}")
        return np.clip(arr, lo, hi)

    def cell_params(self, theta: np.ndarray, cell: int) -> CellParams:
        return CellParams(self.cell_kind, tuple(theta[cell]), self.bounds, self.horizon, self.sign)


@dataclass(frozen=True)
class ModelRunState:
    cells: tuple[CellState, ...]
    t: int = 0


@dataclass
class Trajectory:
    """Observed (context, action, reward) sequence; actions are 0-based."""

    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    n_actions: int = 2
    generator_tag: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        self.contexts = np.asarray(self.contexts, dtype=int)
        self.actions = np.asarray(self.actions, dtype=int)
        self.rewards = np.asarray(self.rewards, dtype=float)
        n = len(self.contexts)
        if len(self.actions) != n or len(self.rewards) != n:
            raise ValueError("contexts, actions and rewards must have equal lengths")
        if n and (self.actions.min() < 0 or self.actions.max() >= self.n_actions):
            raise ValueError(f"actions must lie in [0, {self.n_actions})")
        if n and (self.rewards.min() < 0 or self.rewards.max() > 1):
            raise ValueError("rewards must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.contexts)

    @property
    def n(self) -> int:
        return len(self.contexts)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.n_actions == other.n_actions
            and np.array_equal(self.contexts, other.contexts)
            and np.array_equal(self.actions, other.actions)
            and np.array_equal(self.rewards, other.rewards)
        )


def init_run(spec: PartitionModelSpec, n_actions: int = 2) -> ModelRunState:
    return ModelRunState(tuple(init_cell(n_actions) for _ in range(spec.D)), 0)


def predict(spec: PartitionModelSpec, theta, state: ModelRunState, context: int) -> np.ndarray:
    """Action law at the current step: the owning cell's probabilities."""
    return state.cells[spec.partition.cell_of(context)].probs.copy()


def step(spec: PartitionModelSpec, theta, state: ModelRunState, context: int, action: int, reward: float) -> ModelRunState:
    theta = spec.theta(theta)
    c = spec.partition.cell_of(context)
    new_cell = cell_step(state.cells[c], action, spec.feedback(reward), spec.cell_params(theta, c))
    cells = state.cells[:c] + (new_cell,) + state.cells[c + 1:]
    return ModelRunState(cells, state.t + 1)


def simulate_agent(
    spec: PartitionModelSpec,
    theta,
    contexts: Sequence[int],
    reward_rule: Callable[[int, int], float],
    seed,
    n_actions: int = 2,
) -> Trajectory:
    """Draw a synthetic agent's actions along ``contexts``.

    ``reward_rule(context, action)`` gives the feedback; ``seed`` is anything
    accepted by ``numpy.random.default_rng``.
    """
    theta = spec.theta(theta)
    rng = np.random.default_rng(seed)
    params = [spec.cell_params(theta, c) for c in range(spec.D)]
    cells = [init_cell(n_actions) for _ in range(spec.D)]
    contexts = np.asarray(contexts, dtype=int)
    actions = np.empty(len(contexts), dtype=int)
    rewards = np.empty(len(contexts))
    for t, x in enumerate(contexts):
        c = spec.partition.cell_of(x)
        a = sample_action(cells[c].probs, rng)
        g = float(reward_rule(int(x), a))
        cells[c] = cell_step(cells[c], a, spec.feedback(g), params[c])
        actions[t] = a
        rewards[t] = g
    tag = {"model": spec.name, "theta": theta.tolist(), "seed": seed if isinstance(seed, int) else None}
    return Trajectory(contexts, actions, rewards, n_actions, tag)


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    a = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(a, len(probs) - 1)


CATALOG_NAMES = ("OneForAll", "ByShape", "ByPattern", "ByShapeExc", "ByPatternExc", "OnePerItem")

_FIVE_FOUR_CELLS = {
    "OneForAll": [[1, 2, 3, 4, 5, 6, 7, 8, 9]],
    "ByShape": [[1, 2, 3, 4, 5], [6, 7, 8, 9]],
    "ByPattern": [[1, 2, 3, 6, 7], [4, 5, 8, 9]],
    "ByShapeExc": [[1, 2, 3, 5], [6, 8, 9], [7], [4]],
    "ByPatternExc": [[1, 2, 3, 7], [4, 8, 9], [6], [5]],
    "OnePerItem": [[k] for k in range(1, 10)],
}


def canonical_catalog(
    stimuli: StimulusSet,
    cell_kind: str = GRADIENT_BANDIT,
    bounds=None,
    horizon: int = 500,
    sign: str = REWARD_ASCENT,
    names: Optional[Sequence[str]] = None,
) -> list[PartitionModelSpec]:
    """The six 5-4 task models, in increasing number of cells."""
    if len(stimuli) != 9 or stimuli.n_actions != 2:
        raise ValueError("the canonical catalog is defined for the 5-4 stimulus set only")
    _check_exceptions(stimuli)
    names = list(CATALOG_NAMES if names is None else names)
    unknown = set(names) - set(CATALOG_NAMES)
    if unknown:
        raise ValueError(f"unknown catalog models: {sorted(unknown)}")
    return [
        PartitionModelSpec(name, Partition.from_lists(_FIVE_FOUR_CELLS[name]), cell_kind, bounds, horizon, sign)
        for name in CATALOG_NAMES
        if name in names
    ]


def _check_exceptions(stimuli: StimulusSet) -> None:
    # Exception cells must be the minority-category members of each base cell.
    for attr, exc_model, base_model in (("shape", "ByShapeExc", "ByShape"), ("pattern", "ByPatternExc", "ByPattern")):
        singles = {next(iter(c)) for c in map(frozenset, _FIVE_FOUR_CELLS[exc_model]) if len(c) == 1}
        expected = set()
        for cell in _FIVE_FOUR_CELLS[base_model]:
            cats = [stimuli[i].category for i in cell]
            majority = max(set(cats), key=cats.count)
            expected |= {i for i in cell if stimuli[i].category != majority}
        if singles != expected:
            raise ValueError(f"{exc_model} exceptions {sorted(singles)} do not match {attr} minorities {sorted(expected)}")
