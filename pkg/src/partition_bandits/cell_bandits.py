"""Non-contextual softmax bandits run inside one partition cell.

Two families are provided, Gradient Bandit (one learning rate) and
Exp3-IX (learning rate and implicit-exploration term). Parameters are kept
on their raw scale; the effective rates are ``value / sqrt(n)`` with ``n``
the horizon of the experiment.

State is a cumulative score vector; action probabilities are always the
softmax of the scaled scores, never updated multiplicatively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

GRADIENT_BANDIT = "gradient_bandit"
EXP3IX = "exp3ix"
CELL_KINDS = (GRADIENT_BANDIT, EXP3IX)

REWARD_ASCENT = "reward_ascent"
LITERAL_PAPER = "literal_paper"
SIGNS = (REWARD_ASCENT, LITERAL_PAPER)

PARAM_DIM = {GRADIENT_BANDIT: 1, EXP3IX: 2}


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def check_kind(kind: str) -> str:
    if kind not in CELL_KINDS:
        raise ValueError(f"unknown cell bandit kind {kind!r}; expected one of {CELL_KINDS}")
    return kind


@dataclass(frozen=True)
class CellParams:
    kind: str
    values: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...]
    horizon: int
    sign: str = REWARD_ASCENT

    def __post_init__(self):
        check_kind(self.kind)
        d = PARAM_DIM[self.kind]
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "bounds", tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        if len(self.values) != d or len(self.bounds) != d:
            raise ValueError(f"{self.kind} takes {d} parameter(s)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}")
        for v, (lo, hi) in zip(self.values, self.bounds):
            if not 0 <= lo < hi:
                raise ValueError(f"invalid bound [{lo}, {hi}]")
            if not lo <= v <= hi:
                raise ValueError(f"parameter {v} outside [{lo}, {hi}]")

    @property
    def rates(self) -> tuple[float, ...]:
        """Parameters divided by sqrt(horizon)."""
        root = math.sqrt(self.horizon)
        return tuple(v / root for v in self.values)


@dataclass(frozen=True)
class CellState:
    probs: np.ndarray
    cumulative_scores: np.ndarray
    local_time: int = 0

    @property
    def n_actions(self) -> int:
        return len(self.probs)


def init_cell(n_actions: int) -> CellState:
    if n_actions < 2:
        raise ValueError("a cell bandit needs at least 2 actions")
    return CellState(np.full(n_actions, 1.0 / n_actions), np.zeros(n_actions), 0)


def _check_action(state: CellState, action: int) -> None:
    if not 0 <= action < state.n_actions:
        raise ValueError(f"action {action} out of range [0, {state.n_actions})")


def _check_unit(name: str, x: float) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} {x} outside [0, 1]")


def gradient_step(state: CellState, action: int, reward: float, params: CellParams) -> CellState:
    """One Gradient Bandit update.

    scores[b] += (1{action == b} - probs[b]) * reward, then
    probs = softmax(sign * theta/sqrt(n) * scores), with sign +1 for
    ``reward_ascent`` and -1 for ``literal_paper``.
    """
    if params.kind != GRADIENT_BANDIT:
        raise ValueError("gradient_step needs gradient_bandit parameters")
    _check_action(state, action)
    _check_unit("reward", reward)
    indicator = np.zeros(state.n_actions)
    indicator[action] = 1.0
    scores = state.cumulative_scores + (indicator - state.probs) * reward
    sign = 1.0 if params.sign == REWARD_ASCENT else -1.0
    probs = softmax(sign * params.rates[0] * scores)
    return CellState(probs, scores, state.local_time + 1)


def exp3ix_step(state: CellState, action: int, loss: float, params: CellParams) -> CellState:
    """One Exp3-IX update with the implicit-exploration loss estimate."""
    if params.kind != EXP3IX:
        raise ValueError("exp3ix_step needs exp3ix parameters")
    _check_action(state, action)
    _check_unit("loss", loss)
    eta, gamma = params.rates
    scores = state.cumulative_scores.copy()
    scores[action] += loss / (gamma + state.probs[action])
    probs = softmax(-eta * scores)
    return CellState(probs, scores, state.local_time + 1)


def cell_step(state: CellState, action: int, feedback: float, params: CellParams) -> CellState:
    """Dispatch on ``params.kind``; ``feedback`` is a reward or a loss accordingly."""
    if params.kind == GRADIENT_BANDIT:
        return gradient_step(state, action, feedback, params)
    return exp3ix_step(state, action, feedback, params)


def population_log_likelihood(
    kind: str,
    values: np.ndarray,
    actions: np.ndarray,
    feedback: np.ndarray,
    counted: np.ndarray,
    n_actions: int,
    horizon: int,
    sign: str = REWARD_ASCENT,
    prob_floor: float = 1e-12,
) -> np.ndarray:
    """Cell log-likelihood for a whole population of parameter vectors at once.

    ``values`` has shape (P, d) on the raw scale. ``actions``/``feedback`` are the
    cell's own trials in time order; ``counted`` marks which of them enter the
    sum (the state still evolves through all of them). Returns shape (P,).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    pop = values.shape[0]
    rates = values / math.sqrt(horizon)
    scores = np.zeros((pop, n_actions))
    probs = np.full((pop, n_actions), 1.0 / n_actions)
    total = np.zeros(pop)
    rows = np.arange(pop)
    if kind == GRADIENT_BANDIT:
        scale = rates[:, 0:1] * (1.0 if sign == REWARD_ASCENT else -1.0)
        for a, g, c in zip(actions, feedback, counted):
            if c:
                total += np.log(np.maximum(probs[:, a], prob_floor))
            if g != 0.0:
                scores -= probs * g
                scores[:, a] += g
                probs = softmax(scale * scores)
    elif kind == EXP3IX:
        eta = rates[:, 0:1]
        gamma = rates[:, 1]
        for a, g, c in zip(actions, feedback, counted):
            if c:
                total += np.log(np.maximum(probs[:, a], prob_floor))
            if g != 0.0:
                scores[rows, a] += g / (gamma + probs[:, a])
                probs = softmax(-eta * scores)
    else:
        check_kind(kind)
    return total


@dataclass(frozen=True)
class TheoreticalConstants:
    epsilon: float
    T_epsilon: int
    L_epsilon: float
    A_epsilon: float
    extras: dict = field(default_factory=dict)


def safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def exp3ix_lipschitz(epsilon: float, n: int, R: float) -> float:
    return math.sqrt(R**2 / n + epsilon**2) / (epsilon**3 * R) * safe_exp(1.0 / epsilon**2)


def gradient_lipschitz(n_actions: int, epsilon: float, R: float) -> float:
    ke = n_actions * epsilon
    return math.sqrt(2.0) / (R * epsilon) * math.log(math.sqrt(1.0 / ke)) / math.sqrt(ke)


def a_constant(L: float, d: int, R: float, r: float, epsilon: float) -> float:
    return L * math.sqrt(d) * (R - r) + 2.0 * math.log(1.0 / epsilon)


def sigma_constant(A_epsilon: float, dims) -> float:
    """log(A_eps) * sum_m exp(-D_m) over a model collection with cell counts ``dims``."""
    return math.log(A_epsilon) * sum(math.exp(-D) for D in dims)


def theoretical_constants(
    kind: str, n_actions: int, epsilon: float, n: int, R: float, r: float = 0.0
) -> TheoreticalConstants:
    """Horizon T_eps and Lipschitz constant L_eps guaranteeing the eps-floor.

    Exp3-IX needs eps in (0, 1/K). Gradient Bandit needs eps in (0, 1) and
    additionally eps < 1/K for the horizon to be positive.
    """
    check_kind(kind)
    if R <= 0 or not 0 <= r < R:
        raise ValueError("need 0 <= r < R")
    if n < 1:
        raise ValueError("n must be >= 1")
    root = math.sqrt(n)
    if kind == EXP3IX:
        if not 0 < epsilon < 1.0 / n_actions:
            raise ValueError(f"exp3ix requires epsilon in (0, 1/K) = (0, {1.0 / n_actions})")
        T = min(math.floor((1.0 / n_actions - epsilon) * root / R), n)
        L = exp3ix_lipschitz(epsilon, n, R)
    else:
        if not 0 < epsilon < 1:
            raise ValueError("gradient_bandit requires epsilon in (0, 1)")
        T = min(math.floor(math.log(math.sqrt(1.0 / (n_actions * epsilon))) * root / R), n)
        L = gradient_lipschitz(n_actions, epsilon, R)
    if T < 1:
        raise ValueError(f"no positive horizon for epsilon={epsilon}, n={n}, R={R} (T_eps={T})")
    A = a_constant(L, PARAM_DIM[kind], R, r, epsilon)
    return TheoreticalConstants(epsilon, T, L, A)


def with_values(params: CellParams, values) -> CellParams:
    return replace(params, values=tuple(values))
