"""Partial log-likelihood and per-cell maximum-likelihood fitting.

The likelihood of a partition model factorizes over cells: each cell's
state only moves on the trials whose context it owns, so the joint MLE is
a collection of independent 1-D (Gradient Bandit) or 2-D (Exp3-IX) fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from scipy.optimize import differential_evolution

from .cell_bandits import population_log_likelihood
from .partition_model import PartitionModelSpec, Trajectory

UNDER_DETERMINED = "under-determined"
EMPTY_CELL = "empty"


@dataclass(frozen=True)
class LikelihoodWindow:
    """1-based inclusive range of trials entering the likelihood sum."""

    from_t: int
    to_t: int

    def __post_init__(self):
        if not 1 <= self.from_t <= self.to_t:
            raise ValueError(f"invalid window [{self.from_t}, {self.to_t}]")

    @classmethod
    def full(cls, n: int) -> "LikelihoodWindow":
        return cls(1, n)

    def check(self, n: int) -> "LikelihoodWindow":
        if self.to_t > n:
            raise ValueError(f"window [{self.from_t}, {self.to_t}] exceeds horizon {n}")
        return self

    @property
    def length(self) -> int:
        return self.to_t - self.from_t + 1

    def to_list(self) -> list[int]:
        return [self.from_t, self.to_t]


@dataclass(frozen=True)
class OptimizerConfig:
    """Differential-evolution settings.

    ``population_size`` is per parameter dimension (10 * d members by default);
    ``max_iterations`` counts generations after the initial one.
    """

    population_size: int = 10
    max_iterations: int = 20
    seed: int = 0
    restarts: int = 1
    prob_floor: float = 1e-12
    mutation: float = 0.8
    crossover: float = 0.5

    def __post_init__(self):
        if self.population_size < 4:
            raise ValueError("population_size must be >= 4")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "OptimizerConfig":
        d = dict(d or {})
        extra = set(d) - {f.name for f in fields(cls)}
        if extra:
            raise ValueError(f"unknown optimizer keys: {sorted(extra)}")
        return cls(**d)


@dataclass
class FitResult:
    model: str
    window: LikelihoodWindow
    theta: np.ndarray
    log_likelihood: float
    per_cell_ll: list[float]
    flags: dict[int, list[str]] = field(default_factory=dict)
    history: dict[int, list[float]] = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "window": self.window.to_list(),
            "theta": {str(c): [float(v) for v in row] for c, row in enumerate(self.theta)},
            "loglik": float(self.log_likelihood),
            "per_cell": {str(c): float(v) for c, v in enumerate(self.per_cell_ll)},
            "flags": {str(c): list(v) for c, v in sorted(self.flags.items())},
        }

    @classmethod
    def from_json(cls, d: dict) -> "FitResult":
        D = len(d["theta"])
        return cls(
            d["model"],
            LikelihoodWindow(*d["window"]),
            np.array([d["theta"][str(c)] for c in range(D)], dtype=float),
            float(d["loglik"]),
            [float(d["per_cell"][str(c)]) for c in range(D)],
            {int(k): list(v) for k, v in d.get("flags", {}).items()},
        )


def _window(window: Optional[LikelihoodWindow], n: int) -> LikelihoodWindow:
    return (window or LikelihoodWindow.full(n)).check(n)


def _cell_trials(spec: PartitionModelSpec, trajectory: Trajectory, window: LikelihoodWindow):
    """Per cell: (actions, feedback, counted) restricted to trials up to ``window.to_t``."""
    upto = window.to_t
    owner = spec.partition.cell_index(trajectory.contexts[:upto])
    t = np.arange(upto)
    counted = t >= window.from_t - 1
    feedback = np.array([spec.feedback(g) for g in trajectory.rewards[:upto]])
    out = []
    for c in range(spec.D):
        mask = owner == c
        out.append((trajectory.actions[:upto][mask], feedback[mask], counted[mask]))
    return out


def cell_log_likelihoods(
    spec: PartitionModelSpec,
    theta,
    trajectory: Trajectory,
    window: Optional[LikelihoodWindow] = None,
    prob_floor: float = 1e-12,
) -> list[float]:
    theta = spec.theta(theta)
    window = _window(window, trajectory.n)
    result = []
    for c, (acts, fb, counted) in enumerate(_cell_trials(spec, trajectory, window)):
        ll = population_log_likelihood(
            spec.cell_kind, theta[c:c + 1], acts, fb, counted,
            trajectory.n_actions, spec.horizon, spec.sign, prob_floor,
        )
        result.append(float(ll[0]))
    return result


def log_likelihood(
    spec: PartitionModelSpec,
    theta,
    trajectory: Trajectory,
    window: Optional[LikelihoodWindow] = None,
    prob_floor: float = 1e-12,
) -> float:
    """Sum of log p_t(A_t) over the window, the model being replayed from t = 1.

    Probabilities are floored at ``prob_floor`` before the log.
    """
    return float(sum(cell_log_likelihoods(spec, theta, trajectory, window, prob_floor)))


def maximize_de(objective, bounds, cfg: OptimizerConfig, seed) -> tuple[np.ndarray, float, list[float]]:
    """Maximize a population-vectorized ``objective`` over a box.

    ``objective`` maps an array (P, d) to (P,). Returns the best point, its
    value and the best value after every generation.
    """
    bounds = np.asarray(bounds, dtype=float)
    d = len(bounds)
    rng = np.random.default_rng(seed)
    size = max(5, cfg.population_size * d)
    init = bounds[:, 0] + rng.random((size, d)) * (bounds[:, 1] - bounds[:, 0])
    history: list[float] = []

    def negated(x):
        # scipy hands over shape (d, S) in vectorized mode
        return -objective(np.asarray(x).T)

    def record(intermediate_result):
        history.append(-float(intermediate_result.fun))

    res = differential_evolution(
        negated,
        bounds=[tuple(b) for b in bounds],
        strategy="currenttobest1bin",
        maxiter=cfg.max_iterations,
        init=init,
        mutation=cfg.mutation,
        recombination=cfg.crossover,
        tol=0.0,
        atol=0.0,
        polish=False,
        seed=rng,
        updating="deferred",
        vectorized=True,
        callback=record,
    )
    return np.asarray(res.x, dtype=float), -float(res.fun), history


def fit_mle(
    spec: PartitionModelSpec,
    trajectory: Trajectory,
    window: Optional[LikelihoodWindow] = None,
    cfg: OptimizerConfig = OptimizerConfig(),
) -> FitResult:
    """Maximum-likelihood parameters over the window, one DE run per cell.

    The search runs on rates theta/sqrt(n); results are reported on the raw
    scale. A cell without counted trials gets the box midpoint and the
    ``empty`` flag; fewer than 2*d counted trials sets ``under-determined``.
    """
    window = _window(window, trajectory.n)
    root = math.sqrt(spec.horizon)
    rate_bounds = np.array(spec.bounds) / root
    theta = np.tile(spec.midpoint(), (spec.D, 1))
    per_cell = []
    flags: dict[int, list[str]] = {}
    history: dict[int, list[float]] = {}
    for c, (acts, fb, counted) in enumerate(_cell_trials(spec, trajectory, window)):
        n_counted = int(np.count_nonzero(counted))
        if n_counted < 2 * spec.dim:
            flags.setdefault(c, []).append(UNDER_DETERMINED)
        if n_counted == 0:
            flags[c].append(EMPTY_CELL)
            per_cell.append(0.0)
            continue

        def objective(rates, acts=acts, fb=fb, counted=counted):
            return population_log_likelihood(
                spec.cell_kind, rates * root, acts, fb, counted,
                trajectory.n_actions, spec.horizon, spec.sign, cfg.prob_floor,
            )

        best_x, best_f = None, -np.inf
        for r in range(cfg.restarts):
            x, f, hist = maximize_de(objective, rate_bounds, cfg, np.random.SeedSequence([cfg.seed, c, r]))
            if r == 0:
                history[c] = hist
            if f > best_f:
                best_x, best_f = x, f
        theta[c] = np.clip(best_x * root, [b[0] for b in spec.bounds], [b[1] for b in spec.bounds])
        per_cell.append(float(objective(theta[c:c + 1] / root)[0]))
    return FitResult(spec.name, window, theta, float(sum(per_cell)), per_cell, flags, history)
