import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from partition_bandits.inference import LikelihoodWindow
from partition_bandits.partition_model import canonical_catalog
from partition_bandits.risk import conditional_hellinger_sq, conditional_kl, trajectory_risk
from partition_bandits.workbench.campaign import default_generator_theta


def test_kl_oracle():
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    assert conditional_kl([0.5, 0.5], [0.9, 0.1]) == pytest.approx(expected, rel=1e-6)
    assert conditional_kl([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.510826, abs=5e-7)


def test_hellinger_oracle():
    expected = 1 - (math.sqrt(0.45) + math.sqrt(0.05))
    assert conditional_hellinger_sq([0.5, 0.5], [0.9, 0.1]) == pytest.approx(expected, rel=1e-6)
    assert conditional_hellinger_sq([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.105573, abs=5e-7)


def test_kl_edge_cases():
    assert conditional_kl([0.3, 0.7], [0.3, 0.7]) == 0.0
    assert conditional_kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert conditional_kl([0.5, 0.5], [1.0, 0.0]) == math.inf
    assert conditional_hellinger_sq([1.0, 0.0], [0.0, 1.0]) == 1.0


probs = st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=5)


@settings(max_examples=1000, deadline=None)
@given(probs, st.data())
def test_divergence_inequalities(raw_p, data):
    raw_q = data.draw(st.lists(st.floats(1e-6, 1.0), min_size=len(raw_p), max_size=len(raw_p)))
    p = np.array(raw_p) / sum(raw_p)
    q = np.array(raw_q) / sum(raw_q)
    kl = conditional_kl(p, q)
    h2 = conditional_hellinger_sq(p, q)
    assert kl >= 0
    assert 0 <= h2 <= 1
    assert 2 * h2 <= kl + 1e-12


@pytest.fixture(scope="module")
def catalog100(stimuli):
    return canonical_catalog(stimuli, horizon=100)


def test_risk_of_generator_is_zero(catalog100, contexts, stimuli):
    gen = catalog100[-1]
    th = default_generator_theta(gen, 100)
    est = trajectory_risk((gen, th), (gen, th), contexts[:100], stimuli.reward, n_trajectories=20, seed=1)
    assert est.kl == 0.0 and est.hellinger_sq == 0.0
    assert est.n_infinite == 0


def test_risk_window_and_determinism(catalog100, contexts, stimuli):
    gen, cand = catalog100[-1], catalog100[0]
    args = ((gen, default_generator_theta(gen, 100)), (cand, 3.0), contexts[:100], stimuli.reward)
    a = trajectory_risk(*args, LikelihoodWindow(50, 100), n_trajectories=10, seed=3)
    b = trajectory_risk(*args, LikelihoodWindow(50, 100), n_trajectories=10, seed=3)
    assert a == b
    assert a.kl > 0 and a.window.to_list() == [50, 100]
    assert 2 * a.hellinger_sq <= a.kl


def test_standard_error_scaling(catalog100, contexts, stimuli):
    gen, cand = catalog100[-1], catalog100[0]
    args = ((gen, default_generator_theta(gen, 100)), (cand, 0.3), contexts[:100], stimuli.reward)
    small = trajectory_risk(*args, n_trajectories=100, seed=5)
    big = trajectory_risk(*args, n_trajectories=400, seed=6)
    # se ~ 1/sqrt(m): the ratio should be near 2
    assert 1.5 < small.kl_se / big.kl_se < 2.7
    assert 1.5 < small.hellinger_se / big.hellinger_se < 2.7


def test_context_space_mismatch(catalog100, contexts, stimuli):
    from partition_bandits.partition_model import Partition, PartitionModelSpec

    other = PartitionModelSpec("x", Partition.from_lists([[1, 2]]), horizon=100)
    with pytest.raises(ValueError):
        trajectory_risk((catalog100[0], 1.0), (other, 1.0), contexts[:10], stimuli.reward)
