"""Exp4 over a finite set of experts, and selection among expert sets.

An expert produces, before every trial, a probability vector over actions
that depends only on the observed past and the current context. Exp4 keeps
exponential weights over experts driven by importance-weighted scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cell_bandits import TheoreticalConstants, safe_exp, softmax
from .inference import FitResult, LikelihoodWindow, OptimizerConfig, maximize_de
from .partition_model import PartitionModelSpec, Trajectory, init_run, predict, sample_action, step
from .selection import ModelScore, SelectionReport, extremal_index

FEEDBACK_MODES = ("loss", "reward")


class Expert:
    """Base class: replayable advice as a function of the observed history."""

    name: str = "expert"

    def reset(self, n_actions: int):
        raise NotImplementedError

    def advise(self, state, context: int) -> np.ndarray:
        raise NotImplementedError

    def update(self, state, context: int, action: int, reward: float):
        raise NotImplementedError


class PolicyExpert(Expert):
    """A partition model with frozen parameters, updated on the observed trials."""

    def __init__(self, spec: PartitionModelSpec, theta, name: Optional[str] = None):
        self.spec = spec
        self.theta = spec.theta(theta)
        self.name = name or spec.name

    def reset(self, n_actions: int):
        return init_run(self.spec, n_actions)

    def advise(self, state, context):
        return predict(self.spec, self.theta, state, context)

    def update(self, state, context, action, reward):
        return step(self.spec, self.theta, state, context, action, reward)


class CallableExpert(Expert):
    """Wraps ``fn(past_contexts, past_actions, past_rewards, context) -> probs``."""

    def __init__(self, fn: Callable, name: str = "callable"):
        self.fn = fn
        self.name = name

    def reset(self, n_actions):
        return ((), (), ())

    def advise(self, state, context):
        xs, acts, rews = state
        return np.asarray(self.fn(xs, acts, rews, context), dtype=float)

    def update(self, state, context, action, reward):
        xs, acts, rews = state
        return (xs + (context,), acts + (action,), rews + (reward,))


@dataclass(frozen=True)
class ExpertSetModel:
    name: str
    experts: tuple
    bounds: Optional[tuple[float, float]] = None
    horizon: int = 500
    feedback_mode: str = "loss"

    def __post_init__(self):
        object.__setattr__(self, "experts", tuple(self.experts))
        if not self.experts:
            raise ValueError("an expert set needs at least one expert")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.feedback_mode not in FEEDBACK_MODES:
            raise ValueError(f"feedback_mode must be one of {FEEDBACK_MODES}")
        lo, hi = self.bounds if self.bounds is not None else (0.0, math.sqrt(self.horizon))
        if not 0 <= lo < hi:
            raise ValueError(f"invalid bound [{lo}, {hi}]")
        object.__setattr__(self, "bounds", (float(lo), float(hi)))

    @property
    def size(self) -> int:
        return len(self.experts)

    def feedback(self, reward: float) -> float:
        """The g entering the Exp4 scores: 1 - reward in loss mode."""
        return 1.0 - reward if self.feedback_mode == "loss" else reward


@dataclass(frozen=True)
class Exp4State:
    q: np.ndarray
    scores: np.ndarray
    t: int = 0


def exp4_init(model: ExpertSetModel) -> Exp4State:
    J = model.size
    return Exp4State(np.full(J, 1.0 / J), np.zeros(J), 0)


def _check_advice(model: ExpertSetModel, advice) -> np.ndarray:
    advice = np.asarray(advice, dtype=float)
    if advice.ndim != 2 or advice.shape[0] != model.size:
        raise ValueError(f"expected advice from {model.size} experts, got shape {advice.shape}")
    if np.any(advice < 0) or not np.allclose(advice.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("each advice row must be a probability vector")
    return advice


def exp4_predict(model: ExpertSetModel, theta: float, state: Exp4State, advice) -> np.ndarray:
    """Mixture sum_j q(j) * advice_j."""
    advice = _check_advice(model, advice)
    return state.q @ advice


def exp4_step(
    model: ExpertSetModel, theta: float, state: Exp4State, advice, action: int, feedback: float
) -> Exp4State:
    """scores[j] += advice_j(action) * g / pi(action); q = softmax(-theta/sqrt(n) * scores)."""
    advice = _check_advice(model, advice)
    if not 0.0 <= feedback <= 1.0:
        raise ValueError(f"feedback {feedback} outside [0, 1]")
    pi = state.q @ advice
    if pi[action] <= 0:
        raise ValueError(f"mixture gives zero probability to the played action {action}")
    scores = state.scores + advice[:, action] * feedback / pi[action]
    q = softmax(-(theta / math.sqrt(model.horizon)) * scores)
    return Exp4State(q, scores, state.t + 1)


def advice_matrix(model: ExpertSetModel, trajectory: Trajectory, upto: Optional[int] = None) -> np.ndarray:
    """Advice of every expert along the observed trajectory, shape (J, upto, K)."""
    upto = trajectory.n if upto is None else upto
    K = trajectory.n_actions
    out = np.empty((model.size, upto, K))
    for j, expert in enumerate(model.experts):
        state = expert.reset(K)
        for t in range(upto):
            x = int(trajectory.contexts[t])
            out[j, t] = expert.advise(state, x)
            state = expert.update(state, x, int(trajectory.actions[t]), float(trajectory.rewards[t]))
    return out


def exp4_population_log_likelihood(
    model: ExpertSetModel,
    thetas: np.ndarray,
    advice: np.ndarray,
    actions: np.ndarray,
    feedback: np.ndarray,
    prob_floor: float = 1e-12,
) -> np.ndarray:
    """Sum over the given trials of log pi_t(A_t), for a population of thetas."""
    rates = np.asarray(thetas, dtype=float).reshape(-1, 1) / math.sqrt(model.horizon)
    P, J = rates.shape[0], advice.shape[0]
    scores = np.zeros((P, J))
    q = np.full((P, J), 1.0 / J)
    total = np.zeros(P)
    for t, (a, g) in enumerate(zip(actions, feedback)):
        xi_a = advice[:, t, a]
        pi_a = q @ xi_a
        total += np.log(np.maximum(pi_a, prob_floor))
        if g != 0.0:
            scores += xi_a[None, :] * (g / np.maximum(pi_a, prob_floor))[:, None]
            q = softmax(-rates * scores)
    return total


def exp4_log_likelihood(
    model: ExpertSetModel, theta: float, trajectory: Trajectory, stop_time: Optional[int] = None, prob_floor: float = 1e-12
) -> float:
    T = trajectory.n if stop_time is None else stop_time
    adv = advice_matrix(model, trajectory, T)
    fb = np.array([model.feedback(g) for g in trajectory.rewards[:T]])
    return float(exp4_population_log_likelihood(model, np.array([theta]), adv, trajectory.actions[:T], fb, prob_floor)[0])


def simulate_exp4(
    model: ExpertSetModel,
    theta: float,
    contexts: Sequence[int],
    reward_rule: Callable[[int, int], float],
    seed,
    n_actions: int = 2,
) -> Trajectory:
    lo, hi = model.bounds
    if not lo <= theta <= hi:
        raise ValueError(f"theta {theta} outside [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    states = [e.reset(n_actions) for e in model.experts]
    exp4 = exp4_init(model)
    contexts = np.asarray(contexts, dtype=int)
    actions = np.empty(len(contexts), dtype=int)
    rewards = np.empty(len(contexts))
    for t, x in enumerate(contexts):
        x = int(x)
        advice = np.array([e.advise(s, x) for e, s in zip(model.experts, states)])
        a = sample_action(exp4_predict(model, theta, exp4, advice), rng)
        g = float(reward_rule(x, a))
        exp4 = exp4_step(model, theta, exp4, advice, a, model.feedback(g))
        states = [e.update(s, x, a, g) for e, s in zip(model.experts, states)]
        actions[t] = a
        rewards[t] = g
    tag = {"model": model.name, "theta": [theta], "seed": seed if isinstance(seed, int) else None}
    return Trajectory(contexts, actions, rewards, n_actions, tag)


def exp4_theoretical_constants(
    n_experts: int, rho: float, epsilon: float, n: int, R: float, r: float = 0.0
) -> TheoreticalConstants:
    """T_eps = floor((1/|F| - eps/rho) sqrt(n)/R) ^ n and L_eps = exp(1/eps^2)/(R eps^2)."""
    if n_experts < 1 or rho <= 0:
        raise ValueError("need |F| >= 1 and rho > 0")
    if not 0 < epsilon < rho / n_experts:
        raise ValueError(f"epsilon must lie in (0, rho/|F|) = (0, {rho / n_experts})")
    if R <= 0 or not 0 <= r < R:
        raise ValueError("need 0 <= r < R")
    T = min(math.floor((1.0 / n_experts - epsilon / rho) * math.sqrt(n) / R), n)
    if T < 1:
        raise ValueError(f"no positive horizon for epsilon={epsilon}, n={n}, R={R}")
    L = safe_exp(1.0 / epsilon**2) / (R * epsilon**2)
    A = L * (R - r) + 2.0 * math.log(1.0 / epsilon)
    return TheoreticalConstants(epsilon, T, L, A, {"rho": rho, "n_experts": n_experts})


def fit_exp4(
    model: ExpertSetModel,
    trajectory: Trajectory,
    stop_time: Optional[int] = None,
    cfg: OptimizerConfig = OptimizerConfig(),
) -> FitResult:
    """MLE of the scalar Exp4 rate over trials 1..stop_time."""
    T = trajectory.n if stop_time is None else stop_time
    window = LikelihoodWindow(1, T).check(trajectory.n)
    adv = advice_matrix(model, trajectory, T)
    fb = np.array([model.feedback(g) for g in trajectory.rewards[:T]])
    acts = trajectory.actions[:T]
    root = math.sqrt(model.horizon)

    def objective(rates):
        return exp4_population_log_likelihood(model, rates[:, 0] * root, adv, acts, fb, cfg.prob_floor)

    best_x, best_f, history = None, -np.inf, []
    for r in range(cfg.restarts):
        x, f, hist = maximize_de(objective, np.array([model.bounds]) / root, cfg, np.random.SeedSequence([cfg.seed, 0, r]))
        if r == 0:
            history = hist
        if f > best_f:
            best_x, best_f = x, f
    theta = float(np.clip(best_x[0] * root, *model.bounds))
    ll = float(objective(np.array([[theta / root]]))[0])
    return FitResult(model.name, window, np.array([[theta]]), ll, [ll], {}, {0: history})


def expert_set_select(
    models: Sequence[ExpertSetModel],
    trajectory: Trajectory,
    stop_time: Optional[int] = None,
    cfg: OptimizerConfig = OptimizerConfig(),
) -> SelectionReport:
    """Pick the expert set whose fitted Exp4 has the largest stopped log-likelihood.

    Every model has one parameter, so no penalty is applied.
    """
    if not models:
        raise ValueError("no expert-set models given")
    T = trajectory.n if stop_time is None else stop_time
    scores = []
    for m in models:
        fit = fit_exp4(m, trajectory, T, cfg)
        scores.append(ModelScore(m.name, m.size, fit, fit.log_likelihood, fit.log_likelihood))
    idx, tie = extremal_index([s.criterion for s in scores], maximize=True)
    return SelectionReport("experts", scores, scores[idx].model, tie, {"stop_time": T, "n": trajectory.n})
