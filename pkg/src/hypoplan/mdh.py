"""Multiple-dynamics-hypothesis belief MDP.

An underlying POMDP is cloned once per dynamics hypothesis; the clones
share action set, observation model, state reward and discount.  The
resulting :class:`MDHProblem` is a belief MDP over hybrid beliefs whose
generative model samples a hypothesis, then a state, then an observation,
and runs the multiple-model update on it.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np

from .belief import (
    CategoricalBelief,
    HybridBelief,
    ParticleBelief,
    entropy,
    sample_hypothesis,
    sample_state,
)
from .estimators import UpdaterConfig, mm_update, sigma_points

REWARD_KINDS = ("none", "entropy", "resolution_time")


class Dynamics(Protocol):
    def sample(self, states: np.ndarray, action, rng: np.random.Generator) -> np.ndarray:
        """Batch draw of next states, shape (N, d) -> (N, d)."""

    def propagate(self, states: np.ndarray, action) -> np.ndarray:
        """Noise-free part of the transition, used by sigma-point filters."""

    def process_cov(self, action) -> np.ndarray | None:
        """Additive process-noise covariance per step (None for none)."""


class ObservationModel(Protocol):
    def sample(self, state: np.ndarray, action, rng: np.random.Generator) -> tuple[np.ndarray, bool]:
        """Draw one observation; the flag tells whether the sensor detected its target."""

    def log_likelihood(self, observation, states: np.ndarray, action) -> np.ndarray:
        """log p(o | a, s') for every row of ``states``."""

    def predict(self, states: np.ndarray, action) -> np.ndarray:
        """Noise-free measurement per state row (sigma-point filters)."""

    def noise_cov(self, action) -> np.ndarray:
        """Additive measurement-noise covariance."""


# state_reward(states (N, d), action, step, detected) -> (N,) rewards.
# detected=None asks for the expectation over the detection event.
StateReward = Callable[..., np.ndarray]


@dataclass(frozen=True)
class UnderlyingProblem:
    state_dimension: int
    actions: tuple
    dynamics: Any
    observation: Any
    state_reward: StateReward
    discount: float
    name: str = "problem"

    def __post_init__(self):
        if len(self.actions) == 0:
            raise ValueError("action set must be nonempty")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        object.__setattr__(self, "actions", tuple(self.actions))

    def with_dynamics(self, dynamics, name: str | None = None) -> "UnderlyingProblem":
        return dataclasses.replace(self, dynamics=dynamics, name=name or self.name)


@dataclass(frozen=True)
class HypothesisSet:
    models: tuple
    labels: tuple

    def __post_init__(self):
        if len(self.models) < 2:
            raise ValueError("a hypothesis set needs at least 2 dynamics models")
        if len(self.labels) != len(self.models):
            raise ValueError("one label per model")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"hypothesis labels must be unique: {self.labels}")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return len(self.models)


@dataclass(frozen=True)
class ResolutionSpec:
    epsilon: float = 0.2
    deadline: int = 30

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.deadline < 1:
            raise ValueError("deadline must be a positive number of steps")

    @property
    def threshold(self) -> float:
        return 1.0 - self.epsilon

    def check_against(self, n_hypotheses: int) -> None:
        if self.threshold <= 1.0 / n_hypotheses:
            raise ValueError(
                f"threshold {self.threshold} is met by the uniform prior over {n_hypotheses} hypotheses"
            )


@dataclass(frozen=True)
class MDHProblem:
    conditioned_problems: tuple
    updaters: tuple
    resolution: ResolutionSpec
    hypothesis_reward_kind: str = "resolution_time"
    weight: float = 0.0
    labels: tuple = ()

    def __post_init__(self):
        probs = tuple(self.conditioned_problems)
        ups = tuple(self.updaters)
        if len(ups) != len(probs):
            raise ValueError(f"{len(ups)} updaters for {len(probs)} conditioned problems")
        if self.hypothesis_reward_kind not in REWARD_KINDS:
            raise ValueError(f"reward kind must be one of {REWARD_KINDS}")
        if self.weight < 0.0:
            raise ValueError("weight must be >= 0")
        first = probs[0]
        for p in probs[1:]:
            if (
                p.actions != first.actions
                or p.observation is not first.observation
                or p.state_reward is not first.state_reward
                or p.discount != first.discount
                or p.state_dimension != first.state_dimension
            ):
                raise ValueError("conditioned problems may differ only in their dynamics")
        labels = tuple(self.labels) or tuple(f"H{i}" for i in range(len(probs)))
        object.__setattr__(self, "conditioned_problems", probs)
        object.__setattr__(self, "updaters", ups)
        object.__setattr__(self, "labels", labels)

    @property
    def n_hypotheses(self) -> int:
        return len(self.conditioned_problems)

    @property
    def actions(self) -> tuple:
        return self.conditioned_problems[0].actions

    @property
    def discount(self) -> float:
        return self.conditioned_problems[0].discount

    def with_reward(self, kind: str, weight: float) -> "MDHProblem":
        return dataclasses.replace(self, hypothesis_reward_kind=kind, weight=weight)

    # belief-MDP interface used by the tree search
    def generate_belief(self, belief: HybridBelief, action, rng: np.random.Generator):
        return generate_belief(self, belief, action, rng)


def construct(
    base: UnderlyingProblem,
    hypotheses: HypothesisSet,
    resolution: ResolutionSpec,
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: UpdaterConfig | Sequence[UpdaterConfig] = UpdaterConfig(),
) -> MDHProblem:
    """Clone ``base`` once per hypothesis, swapping in that hypothesis' dynamics."""
    resolution.check_against(len(hypotheses))
    conditioned = tuple(
        base.with_dynamics(model, name=f"{base.name}[{label}]")
        for model, label in zip(hypotheses.models, hypotheses.labels)
    )
    if isinstance(updater, UpdaterConfig):
        updaters = (updater,) * len(conditioned)
    else:
        updaters = tuple(updater)
    return MDHProblem(conditioned, updaters, resolution, reward_kind, weight, hypotheses.labels)


def generate_state(problem: UnderlyingProblem, state: np.ndarray, action, rng, step: int = 0):
    """State-level generative model: (s', o, r) with r = R_x(s, a) given the detection outcome."""
    state = np.asarray(state, dtype=float)
    nxt = problem.dynamics.sample(state[None, :], action, rng)[0]
    obs, detected = problem.observation.sample(nxt, action, rng)
    r = float(problem.state_reward(state[None, :], action, step, detected)[0])
    return nxt, obs, r


def expected_state_reward(problem: MDHProblem, belief: HybridBelief, action) -> float:
    """sum_i b_H[i] E_{s ~ b_x[i]}[R_x(s, a)] (sigma points for Gaussians)."""
    reward = problem.conditioned_problems[0].state_reward
    step = belief.time_step
    total = 0.0
    for p, cond, cfg in zip(belief.hypothesis.probabilities, belief.conditionals, problem.updaters):
        if isinstance(cond, ParticleBelief):
            r = cond.weights @ reward(cond.particles, action, step, None)
        else:
            pts, wm, _ = sigma_points(cond.mean, cond.covariance, _as_unscented(cfg))
            r = wm @ reward(pts, action, step, None)
        total += p * float(r)
    return total


def _as_unscented(cfg: UpdaterConfig) -> UpdaterConfig:
    return cfg if cfg.kind == "unscented" else UpdaterConfig("unscented")


def entropy_reward(belief_h: CategoricalBelief) -> float:
    """Negative Shannon entropy (nats); always <= 0."""
    return -entropy(belief_h)


def resolution_time_reward(
    belief_h: CategoricalBelief, time_step: int, resolved: bool, spec: ResolutionSpec
) -> tuple[float, bool]:
    """Sparse decision reward: 1.0 once, the first time max(b_H) >= 1 - eps by the deadline.

    The returned flag latches on any threshold crossing, including after
    the deadline, so late decisions are still recorded; they are not paid.
    """
    crossed = float(np.max(belief_h.probabilities)) >= spec.threshold
    reward = 1.0 if crossed and time_step <= spec.deadline and not resolved else 0.0
    return reward, resolved or crossed


def hypothesis_reward(problem: MDHProblem, belief: HybridBelief, next_belief: HybridBelief) -> float:
    """rho_H of one transition, evaluated on the post-update belief."""
    kind = problem.hypothesis_reward_kind
    if kind == "entropy":
        return entropy_reward(next_belief.hypothesis)
    if kind == "resolution_time":
        r, _ = resolution_time_reward(
            next_belief.hypothesis, next_belief.time_step, belief.resolved, problem.resolution
        )
        return r
    return 0.0


def composite_reward(problem: MDHProblem, belief: HybridBelief, action, next_belief: HybridBelief) -> float:
    base = expected_state_reward(problem, belief, action)
    if problem.weight == 0.0 or problem.hypothesis_reward_kind == "none":
        return base
    return base + problem.weight * hypothesis_reward(problem, belief, next_belief)


def generate_belief(problem: MDHProblem, belief: HybridBelief, action, rng: np.random.Generator):
    """Belief-level generative model: returns (next_belief, observation, reward)."""
    h = sample_hypothesis(belief, rng)
    s = sample_state(belief, h, rng)
    _, obs, _ = generate_state(problem.conditioned_problems[h], s, action, rng, belief.time_step)
    nxt = mm_update(problem, belief, action, obs, rng)
    return nxt, obs, composite_reward(problem, belief, action, nxt)


def discounted_sum(rewards: Sequence[float], discount: float) -> float:
    return math.fsum(r * discount**k for k, r in enumerate(rewards))
