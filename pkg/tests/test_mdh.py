import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from toys import ConstDynamics, TableObservation, table_problem, zero_reward

from hypoplan.belief import CategoricalBelief, GaussianBelief, HybridBelief, ParticleBelief
from hypoplan.estimators import UpdaterConfig
from hypoplan.mdh import (
    HypothesisSet,
    ResolutionSpec,
    UnderlyingProblem,
    composite_reward,
    construct,
    discounted_sum,
    entropy_reward,
    expected_state_reward,
    generate_belief,
    generate_state,
    hypothesis_reward,
    resolution_time_reward,
)
from hypoplan.problems import linear


def base_problem(reward=zero_reward):
    return UnderlyingProblem(1, (0, 1), ConstDynamics(0), TableObservation({0: 1.0, 1: 1.0}), reward, 0.9)


def test_construct_clones_all_but_dynamics():
    models = (ConstDynamics(0), ConstDynamics(1), ConstDynamics(2))
    prob = construct(base_problem(), HypothesisSet(models, ("a", "b", "c")), ResolutionSpec(0.2, 5))
    assert prob.n_hypotheses == 3
    assert prob.labels == ("a", "b", "c")
    for cp, model in zip(prob.conditioned_problems, models):
        assert cp.dynamics is model
        assert cp.observation is prob.conditioned_problems[0].observation
        assert cp.state_reward is prob.conditioned_problems[0].state_reward
        assert cp.actions == (0, 1)


def test_construct_rejects_bad_inputs():
    two = (ConstDynamics(0), ConstDynamics(1))
    with pytest.raises(ValueError, match="at least 2"):
        HypothesisSet((ConstDynamics(0),), ("a",))
    with pytest.raises(ValueError, match="unique"):
        HypothesisSet(two, ("a", "a"))
    with pytest.raises(ValueError, match="reward kind"):
        construct(base_problem(), HypothesisSet(two, ("a", "b")), ResolutionSpec(0.2, 5), "bogus")
    with pytest.raises(ValueError, match="weight"):
        construct(base_problem(), HypothesisSet(two, ("a", "b")), ResolutionSpec(0.2, 5), weight=-1.0)
    with pytest.raises(ValueError, match="uniform prior"):
        construct(base_problem(), HypothesisSet(two, ("a", "b")), ResolutionSpec(0.6, 5))
    with pytest.raises(ValueError):
        ResolutionSpec(0.0, 5)
    with pytest.raises(ValueError):
        ResolutionSpec(0.2, 0)
    with pytest.raises(ValueError):
        UnderlyingProblem(1, (), ConstDynamics(0), None, zero_reward, 0.9)
    with pytest.raises(ValueError):
        UnderlyingProblem(1, (0,), ConstDynamics(0), None, zero_reward, 1.0)


def test_entropy_reward_examples():
    assert entropy_reward(CategoricalBelief.uniform(3)) == pytest.approx(-math.log(3))
    assert entropy_reward(CategoricalBelief([1.0, 0.0])) == 0.0


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6))
def test_entropy_reward_is_nonpositive(v):
    p = np.asarray(v) / np.sum(v)
    assert entropy_reward(CategoricalBelief(p)) <= 1e-15


def test_resolution_reward_pays_once_by_deadline():
    spec = ResolutionSpec(0.2, 3)
    low, high = CategoricalBelief([0.5, 0.5]), CategoricalBelief([0.9, 0.1])
    assert resolution_time_reward(low, 1, False, spec) == (0.0, False)
    assert resolution_time_reward(high, 3, False, spec) == (1.0, True)
    assert resolution_time_reward(high, 3, True, spec) == (0.0, True)
    # after the deadline the crossing still latches but is not paid
    assert resolution_time_reward(high, 4, False, spec) == (0.0, True)
    # exactly at the threshold counts
    assert resolution_time_reward(CategoricalBelief([0.8, 0.2]), 2, False, spec) == (1.0, True)


def test_resolution_reward_over_a_trajectory():
    prob = table_problem([0, 1], {0: 0.9, 1: 0.1})
    b = HybridBelief.from_prior([ParticleBelief.uniform(np.zeros((4, 1)))] * 2)
    rng = np.random.default_rng(0)
    paid = []
    for _ in range(6):
        nxt, _, _ = generate_belief(prob, b, 0, rng)
        paid.append(hypothesis_reward(prob, b, nxt))
        b = nxt
    # likelihood ratio 9 per step: 0.9 after one update, then resolved forever
    assert paid == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    assert b.resolved


def test_composite_reward_decomposition():
    params = linear.LinearParams()
    prob = linear.build_problem(params, reward_kind="entropy", weight=2.5)
    rng = np.random.default_rng(0)
    b = linear.initial_belief(prob, params, rng)
    nxt, _, r = generate_belief(prob, b, 1, rng)
    base = expected_state_reward(prob, b, 1)
    assert base == pytest.approx(-0.1)
    assert r == pytest.approx(base + 2.5 * entropy_reward(nxt.hypothesis))
    assert composite_reward(prob.with_reward("entropy", 0.0), b, 1, nxt) == pytest.approx(base)
    assert composite_reward(prob.with_reward("none", 9.0), b, 1, nxt) == pytest.approx(base)


def test_expected_state_reward_gaussian_and_particles():
    def quadratic(states, action, step=0, detected=None):
        return -np.atleast_2d(states)[:, 0] ** 2

    base = base_problem(quadratic)
    prob = construct(base, HypothesisSet((ConstDynamics(0), ConstDynamics(1)), ("a", "b")),
                     ResolutionSpec(0.2, 5), updater=(UpdaterConfig("unscented"), UpdaterConfig("particle", 2)))
    g = GaussianBelief([1.0], [[0.5]])
    pts = ParticleBelief(np.array([[0.0], [2.0]]), np.array([0.5, 0.5]))
    b = HybridBelief.from_prior([g, pts], [0.25, 0.75])
    # E[-x^2] = -(m^2 + v); sigma points are exact for quadratics
    expected = 0.25 * -(1.0 + 0.5) + 0.75 * -(0.5 * 0.0 + 0.5 * 4.0)
    assert expected_state_reward(prob, b, 0) == pytest.approx(expected, rel=1e-9)


class EchoObservation(TableObservation):
    def sample(self, state, action, rng):
        return np.array(state, dtype=float), True


def test_generate_belief_draws_from_the_hypothesis_belief():
    obs_model = EchoObservation({0: 1.0, 1: 1.0, 2: 1.0})
    base = UnderlyingProblem(1, (0,), ConstDynamics(0), obs_model, zero_reward, 0.9)
    hyps = HypothesisSet(tuple(ConstDynamics(v) for v in range(3)), ("a", "b", "c"))
    prob = construct(base, hyps, ResolutionSpec(0.2, 5), updater=UpdaterConfig("particle", 2))
    rng = np.random.default_rng(0)
    start = [ParticleBelief.uniform(np.zeros((2, 1)))] * 3
    b = HybridBelief.from_prior(start, [0.0, 1.0, 0.0])
    assert {float(generate_belief(prob, b, 0, rng)[1][0]) for _ in range(50)} == {1.0}
    b = HybridBelief.from_prior(start, [0.2, 0.3, 0.5])
    draws = np.array([generate_belief(prob, b, 0, rng)[1][0] for _ in range(3000)])
    freq = np.bincount(draws.astype(int), minlength=3) / draws.size
    assert np.all(np.abs(freq - [0.2, 0.3, 0.5]) < 0.03)


def test_generate_state_uses_detection_outcome():
    seen = []

    def reward(states, action, step=0, detected=None):
        seen.append((step, detected))
        return np.ones(len(states))

    base = base_problem(reward)
    nxt, obs, r = generate_state(base, np.array([3.0]), 1, np.random.default_rng(0), step=7)
    assert nxt[0] == 0.0 and obs[0] == 0.0 and r == 1.0
    assert seen == [(7, True)]


def test_discounted_sum():
    assert discounted_sum([1.0, 1.0, 1.0], 0.5) == pytest.approx(1.75)
    assert discounted_sum([], 0.9) == 0.0
