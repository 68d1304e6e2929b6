"""Hold-out and penalized maximum-likelihood model selection.

Both selectors break exact ties by catalog order, so listing the catalog in
increasing number of cells makes ties favor the parsimonious model.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .inference import FitResult, LikelihoodWindow, OptimizerConfig, fit_mle, log_likelihood
from .partition_model import PartitionModelSpec, Trajectory

DEFAULT_C = 0.012

CSV_COLUMNS = ["model", "D", "train_ll", "test_ll", "criterion", "penalty", "selected"]


def penalty(D: int, c: float, n: int) -> float:
    """c * log(n)^2 * D / n."""
    if n < 2:
        raise ValueError("penalty needs n >= 2")
    return c * math.log(n) ** 2 * D / n


def default_split(n: int) -> int:
    return math.ceil(n / 2)


@dataclass(frozen=True)
class HoldoutConfig:
    split_N: Optional[int] = None
    optimizer: OptimizerConfig = OptimizerConfig()

    def resolve(self, n: int) -> int:
        N = default_split(n) if self.split_N is None else self.split_N
        if N - 1 < 1:
            raise ValueError(f"hold-out split N={N} leaves no training trial")
        if N > n:
            raise ValueError(f"hold-out split N={N} exceeds horizon {n}")
        return N


@dataclass(frozen=True)
class PenalizedConfig:
    c: float = DEFAULT_C
    stop_time: Optional[int] = None
    optimizer: OptimizerConfig = OptimizerConfig()

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("penalty constant c must be nonnegative")

    def resolve(self, n: int) -> int:
        T = n if self.stop_time is None else self.stop_time
        if not 1 <= T <= n:
            raise ValueError(f"stop_time {T} outside [1, {n}]")
        return T


@dataclass
class ModelScore:
    model: str
    D: int
    fit: Optional[FitResult]
    train_ll: float
    criterion: float
    penalty: float = 0.0
    test_ll: Optional[float] = None


@dataclass
class SelectionReport:
    method: str
    scores: list[ModelScore]
    selected: str
    tie_broken: bool = False
    params: dict = field(default_factory=dict)

    def score(self, model: str) -> ModelScore:
        return next(s for s in self.scores if s.model == model)

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "selected": self.selected,
            "tie_broken": self.tie_broken,
            "models": [
                {
                    "model": s.model,
                    "D": s.D,
                    "fit": s.fit.to_json() if s.fit is not None else None,
                    "train_ll": s.train_ll,
                    "test_ll": s.test_ll,
                    "criterion": s.criterion,
                    "penalty": s.penalty,
                }
                for s in self.scores
            ],
        }

    def csv_rows(self) -> list[dict]:
        return [
            {
                "model": s.model,
                "D": s.D,
                "train_ll": repr(s.train_ll),
                "test_ll": "" if s.test_ll is None else repr(s.test_ll),
                "criterion": repr(s.criterion),
                "penalty": repr(s.penalty),
                "selected": int(s.model == self.selected),
            }
            for s in self.scores
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()


def extremal_index(values: Sequence[float], maximize: bool) -> tuple[int, bool]:
    """First index attaining the max (or min) and whether it was tied."""
    arr = np.asarray(values, dtype=float)
    best = arr.max() if maximize else arr.min()
    hits = np.flatnonzero(arr == best)
    return int(hits[0]), len(hits) > 1


def _check_catalog(catalog: Sequence[PartitionModelSpec]) -> None:
    if not catalog:
        raise ValueError("catalog is empty")
    ids = catalog[0].partition.context_ids
    for spec in catalog[1:]:
        if spec.partition.context_ids != ids:
            raise ValueError("all models must share the context space")


def holdout_select(
    catalog: Sequence[PartitionModelSpec], trajectory: Trajectory, cfg: HoldoutConfig = HoldoutConfig()
) -> SelectionReport:
    """Fit every model on trials 1..N-1, then pick the best test likelihood on N..n.

    Test-period probabilities come from replaying each model with its frozen
    training estimate, so they only depend on the history before each trial.
    """
    _check_catalog(catalog)
    n = trajectory.n
    N = cfg.resolve(n)
    train = LikelihoodWindow(1, N - 1)
    test = LikelihoodWindow(N, n)
    scores = []
    for spec in catalog:
        fit = fit_mle(spec, trajectory, train, cfg.optimizer)
        test_ll = log_likelihood(spec, fit.theta, trajectory, test, cfg.optimizer.prob_floor)
        scores.append(ModelScore(spec.name, spec.D, fit, fit.log_likelihood, test_ll, 0.0, test_ll))
    idx, tie = extremal_index([s.test_ll for s in scores], maximize=True)
    return SelectionReport("holdout", scores, scores[idx].model, tie, {"N": N, "n": n})


def penalized_from_fits(
    catalog: Sequence[PartitionModelSpec],
    fits: Sequence[FitResult],
    c: float,
    stop_time: int,
    n: int,
) -> SelectionReport:
    """Penalized criterion from already fitted models; the fits do not depend on c."""
    scores = []
    for spec, fit in zip(catalog, fits):
        pen = penalty(spec.D, c, n)
        crit = -fit.log_likelihood / stop_time + pen
        scores.append(ModelScore(spec.name, spec.D, fit, fit.log_likelihood, crit, pen))
    idx, tie = extremal_index([s.criterion for s in scores], maximize=False)
    return SelectionReport(
        "penalized", scores, scores[idx].model, tie, {"c": c, "stop_time": stop_time, "n": n}
    )


def penalized_fits(
    catalog: Sequence[PartitionModelSpec], trajectory: Trajectory, cfg: PenalizedConfig = PenalizedConfig()
) -> list[FitResult]:
    _check_catalog(catalog)
    window = LikelihoodWindow(1, cfg.resolve(trajectory.n))
    return [fit_mle(spec, trajectory, window, cfg.optimizer) for spec in catalog]


def penalized_select(
    catalog: Sequence[PartitionModelSpec], trajectory: Trajectory, cfg: PenalizedConfig = PenalizedConfig()
) -> SelectionReport:
    """argmin over models of -ll(stop_time)/stop_time + c log(n)^2 D / n."""
    fits = penalized_fits(catalog, trajectory, cfg)
    return penalized_from_fits(catalog, fits, cfg.c, cfg.resolve(trajectory.n), trajectory.n)
