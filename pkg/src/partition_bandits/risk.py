"""Empirical conditional KL and squared Hellinger risks against a known generator.

Conditional divergences are computed exactly over the finite action set given
the realized history; only the outer expectation over histories is Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cell_bandits import cell_step, init_cell
from .inference import LikelihoodWindow
from .partition_model import PartitionModelSpec, sample_action


def conditional_kl(true_probs, cand_probs) -> float:
    """KL(p* || p) with 0 log 0 = 0; +inf when p vanishes where p* does not."""
    p = np.asarray(true_probs, dtype=float)
    q = np.asarray(cand_probs, dtype=float)
    if np.array_equal(p, q):
        return 0.0
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    return max(float(np.sum(p[support] * np.log(p[support] / q[support]))), 0.0)


def conditional_hellinger_sq(true_probs, cand_probs) -> float:
    """1 - sum sqrt(p* p), clipped into [0, 1]."""
    p = np.asarray(true_probs, dtype=float)
    q = np.asarray(cand_probs, dtype=float)
    if np.array_equal(p, q):
        return 0.0
    return min(max(1.0 - float(np.sum(np.sqrt(p * q))), 0.0), 1.0)


@dataclass(frozen=True)
class RiskEstimate:
    kl: float
    hellinger_sq: float
    window: LikelihoodWindow
    n_trajectories: int
    n_infinite: int = 0
    kl_se: float = 0.0
    hellinger_se: float = 0.0

    def to_json(self) -> dict:
        return {
            "kl": self.kl,
            "hellinger_sq": self.hellinger_sq,
            "window": self.window.to_list(),
            "n_trajectories": self.n_trajectories,
            "n_infinite": self.n_infinite,
            "kl_se": self.kl_se,
            "hellinger_se": self.hellinger_se,
        }


class _Runner:
    """Forward state of one partition model along an externally given history."""

    def __init__(self, spec: PartitionModelSpec, theta, n_actions: int):
        self.spec = spec
        theta = spec.theta(theta)
        self.params = [spec.cell_params(theta, c) for c in range(spec.D)]
        self.cells = [init_cell(n_actions) for _ in range(spec.D)]

    def probs(self, context: int) -> np.ndarray:
        return self.cells[self.spec.partition.cell_of(context)].probs

    def update(self, context: int, action: int, reward: float) -> None:
        c = self.spec.partition.cell_of(context)
        self.cells[c] = cell_step(self.cells[c], action, self.spec.feedback(reward), self.params[c])


def trajectory_risk(
    generator: tuple[PartitionModelSpec, object],
    candidate: tuple[PartitionModelSpec, object],
    contexts: Sequence[int],
    reward_rule: Callable[[int, int], float],
    window: Optional[LikelihoodWindow] = None,
    n_trajectories: int = 100,
    seed=0,
    n_actions: int = 2,
) -> RiskEstimate:
    """Monte Carlo estimate of the stochastic KL and Hellinger risks.

    Each trajectory is drawn from the generator; along it both models are
    run on the same realized history and the conditional divergences are
    averaged over the window. Infinite KL terms are counted and left out of
    the KL average.
    """
    gen_spec, gen_theta = generator
    cand_spec, cand_theta = candidate
    if gen_spec.partition.context_ids != cand_spec.partition.context_ids:
        raise ValueError("generator and candidate must share the context space")
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    contexts = np.asarray(contexts, dtype=int)
    n = len(contexts)
    window = (window or LikelihoodWindow.full(n)).check(n)
    streams = np.random.SeedSequence(seed).spawn(n_trajectories)
    kl_means, h_means = [], []
    n_inf = 0
    for ss in streams:
        rng = np.random.default_rng(ss)
        gen = _Runner(gen_spec, gen_theta, n_actions)
        cand = _Runner(cand_spec, cand_theta, n_actions)
        kl_sum, h_sum, kl_count = 0.0, 0.0, 0
        for t in range(window.to_t):
            x = int(contexts[t])
            p_star = gen.probs(x)
            if t >= window.from_t - 1:
                p = cand.probs(x)
                kl = conditional_kl(p_star, p)
                if math.isinf(kl):
                    n_inf += 1
                else:
                    kl_sum += kl
                    kl_count += 1
                h_sum += conditional_hellinger_sq(p_star, p)
            a = sample_action(p_star, rng)
            g = float(reward_rule(x, a))
            gen.update(x, a, g)
            cand.update(x, a, g)
        kl_means.append(kl_sum / kl_count if kl_count else math.nan)
        h_means.append(h_sum / window.length)
    kl_arr = np.array(kl_means)
    kl_arr = kl_arr[~np.isnan(kl_arr)]
    h_arr = np.array(h_means)
    m = len(streams)
    return RiskEstimate(
        kl=float(kl_arr.mean()) if len(kl_arr) else math.inf,
        hellinger_sq=float(h_arr.mean()),
        window=window,
        n_trajectories=m,
        n_infinite=n_inf,
        kl_se=float(kl_arr.std(ddof=1) / math.sqrt(len(kl_arr))) if len(kl_arr) > 1 else 0.0,
        hellinger_se=float(h_arr.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0,
    )
