"""Batch selection over campaigns and sweeps over N and c."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..inference import OptimizerConfig
from ..partition_model import PartitionModelSpec, Trajectory
from ..selection import (
    HoldoutConfig,
    PenalizedConfig,
    SelectionReport,
    holdout_select,
    penalized_fits,
    penalized_from_fits,
)
from .parallel import parallel_map

METHODS = ("holdout", "penalized")


@dataclass
class MismatchMatrix:
    """Selection frequencies: row = generating model, column = selected model."""

    generators: list[str]
    candidates: list[str]
    counts: np.ndarray

    @classmethod
    def from_selections(cls, pairs: Sequence[tuple[str, str]], candidates: Sequence[str]) -> "MismatchMatrix":
        candidates = list(candidates)
        generators = []
        for g, _ in pairs:
            if g not in generators:
                generators.append(g)
        # Generators first in catalog order when they belong to it.
        generators.sort(key=lambda g: candidates.index(g) if g in candidates else len(candidates))
        counts = np.zeros((len(generators), len(candidates)), dtype=int)
        for g, s in pairs:
            counts[generators.index(g), candidates.index(s)] += 1
        return cls(generators, candidates, counts)

    @property
    def frequencies(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(totals, 1)

    def frequency(self, generator: str, selected: str) -> float:
        return float(self.frequencies[self.generators.index(generator), self.candidates.index(selected)])

    def mismatch_rate(self, generator: str) -> float:
        """Fraction of agents from ``generator`` assigned to another model."""
        if generator not in self.candidates:
            raise ValueError(f"{generator} is not a candidate model")
        return 1.0 - self.frequency(generator, generator)

    def csv_rows(self) -> list[dict]:
        freqs = self.frequencies
        return [
            {"generator": g, "selected": s, "frequency": repr(float(freqs[i, j]))}
            for i, g in enumerate(self.generators)
            for j, s in enumerate(self.candidates)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, ["generator", "selected", "frequency"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "generators": self.generators,
            "candidates": self.candidates,
            "counts": self.counts.tolist(),
            "frequencies": self.frequencies.tolist(),
        }


@dataclass
class SweepResult:
    parameter: str
    values: list
    matrices: dict
    reports: dict = field(default_factory=dict)
    n_fits: int = 0

    def to_json(self) -> dict:
        return {
            "parameter": self.parameter,
            "values": self.values,
            "n_fits": self.n_fits,
            "matrices": {repr(v): self.matrices[v].to_json() for v in self.values},
        }

    def csv_rows(self) -> list[dict]:
        rows = []
        for v in self.values:
            for r in self.matrices[v].csv_rows():
                rows.append({self.parameter: repr(v), **r})
        return rows


def _generator(traj: Trajectory) -> str:
    tag = traj.generator_tag or {}
    return tag.get("model") or "unknown"


def _holdout_job(args):
    catalog, traj, N, opt = args
    return holdout_select(catalog, traj, HoldoutConfig(split_N=N, optimizer=opt))


def _penalized_fit_job(args):
    catalog, traj, stop_time, opt = args
    return penalized_fits(catalog, traj, PenalizedConfig(stop_time=stop_time, optimizer=opt))


def run_selection_batch(
    catalog: Sequence[PartitionModelSpec],
    trajectories: Sequence[Trajectory],
    method: str,
    split_N: Optional[int] = None,
    c: float = 0.012,
    stop_time: Optional[int] = None,
    optimizer: OptimizerConfig = OptimizerConfig(),
    workers: int = 1,
) -> tuple[list[SelectionReport], MismatchMatrix]:
    """Select a model for every trajectory; returns reports and the aggregate frequencies."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    catalog = list(catalog)
    if method == "holdout":
        reports = parallel_map(_holdout_job, [(catalog, t, split_N, optimizer) for t in trajectories], workers)
    else:
        fits = parallel_map(_penalized_fit_job, [(catalog, t, stop_time, optimizer) for t in trajectories], workers)
        reports = [
            penalized_from_fits(catalog, f, c, PenalizedConfig(c, stop_time).resolve(t.n), t.n)
            for f, t in zip(fits, trajectories)
        ]
    pairs = [(_generator(t), r.selected) for t, r in zip(trajectories, reports)]
    return reports, MismatchMatrix.from_selections(pairs, [s.name for s in catalog])


def sweep_holdout(
    catalog: Sequence[PartitionModelSpec],
    trajectories: Sequence[Trajectory],
    n_grid: Sequence[int],
    optimizer: OptimizerConfig = OptimizerConfig(),
    workers: int = 1,
) -> SweepResult:
    """Hold-out selection at every split N; each N refits on its own training window."""
    catalog = list(catalog)
    names = [s.name for s in catalog]
    result = SweepResult("N", list(n_grid), {})
    for N in n_grid:
        reports, matrix = run_selection_batch(catalog, trajectories, "holdout", split_N=N, optimizer=optimizer, workers=workers)
        result.matrices[N] = matrix
        result.reports[N] = reports
        result.n_fits += len(trajectories) * len(names)
    return result


def sweep_penalty(
    catalog: Sequence[PartitionModelSpec],
    trajectories: Sequence[Trajectory],
    c_grid: Sequence[float],
    stop_time: Optional[int] = None,
    optimizer: OptimizerConfig = OptimizerConfig(),
    workers: int = 1,
) -> SweepResult:
    """Penalized selection for every c; each (trajectory, model) is fitted once and reused."""
    catalog = list(catalog)
    names = [s.name for s in catalog]
    fits = parallel_map(_penalized_fit_job, [(catalog, t, stop_time, optimizer) for t in trajectories], workers)
    result = SweepResult("c", list(c_grid), {}, n_fits=len(trajectories) * len(names))
    for c in c_grid:
        reports = [
            penalized_from_fits(catalog, f, c, PenalizedConfig(c, stop_time).resolve(t.n), t.n)
            for f, t in zip(fits, trajectories)
        ]
        pairs = [(_generator(t), r.selected) for t, r in zip(trajectories, reports)]
        result.matrices[c] = MismatchMatrix.from_selections(pairs, names)
        result.reports[c] = reports
    return result
