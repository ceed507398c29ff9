"""Linear-Gaussian test bench with closed-form reference recursions.

Two-dimensional position/velocity state; hypotheses differ in the
velocity retention factor.  Action 0 measures position, action 1
measures velocity.  Because everything is linear and Gaussian, the
multiple-model Kalman recursion here is exact and serves as an oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..belief import GaussianBelief, HybridBelief, ParticleBelief
from ..estimators import UpdaterConfig
from ..mdh import HypothesisSet, MDHProblem, ResolutionSpec, UnderlyingProblem, construct
from ..scenario import Scenario

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class LinearParams:
    retention: tuple = (1.0, 0.8, 0.5)
    dt: float = 1.0
    process_sigma: float = 0.1
    position_sigma: float = 0.5
    velocity_sigma: float = 0.2
    prior_mean: tuple = (0.0, 1.0)
    prior_sigma: tuple = (1.0, 0.5)
    measure_cost: tuple = (0.0, 0.1)
    discount: float = 0.95
    horizon: int = 20


class LinearDynamics:
    def __init__(self, A: np.ndarray, Q: np.ndarray):
        self.A = np.asarray(A, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        self._chol = np.linalg.cholesky(self.Q)

    def propagate(self, states, action):
        return states @ self.A.T

    def sample(self, states, action, rng):
        noise = rng.standard_normal(states.shape) @ self._chol.T
        return states @ self.A.T + noise

    def process_cov(self, action):
        return self.Q


class LinearObservation:
    def __init__(self, H: dict, R: dict):
        self.H = {a: np.atleast_2d(np.asarray(h, dtype=float)) for a, h in H.items()}
        self.R = {a: np.atleast_2d(np.asarray(r, dtype=float)) for a, r in R.items()}

    def predict(self, states, action):
        return states @ self.H[action].T

    def noise_cov(self, action):
        return self.R[action]

    def sample(self, state, action, rng):
        mean = self.H[action] @ state
        chol = np.linalg.cholesky(self.R[action])
        return mean + chol @ rng.standard_normal(mean.size), True

    def log_likelihood(self, observation, states, action):
        z = np.atleast_1d(observation)
        d = z - states @ self.H[action].T
        R = self.R[action]
        sol = np.linalg.solve(R, d.T).T
        _, logdet = np.linalg.slogdet(R)
        return -0.5 * (np.sum(d * sol, axis=1) + logdet + z.size * _LOG_2PI)


def _transition(params: LinearParams, retention: float):
    A = np.array([[1.0, params.dt], [0.0, retention]])
    q = params.process_sigma**2
    Q = q * np.array([[params.dt**3 / 3.0, params.dt**2 / 2.0], [params.dt**2 / 2.0, params.dt]])
    return A, Q


def build_problem(
    params: LinearParams = LinearParams(),
    resolution: ResolutionSpec = ResolutionSpec(0.2, 20),
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: UpdaterConfig = UpdaterConfig("unscented"),
) -> MDHProblem:
    cost = np.asarray(params.measure_cost, dtype=float)

    def reward(states, action, step=0, detected=None):
        return np.full(len(states), -cost[action])

    observation = LinearObservation(
        {0: [[1.0, 0.0]], 1: [[0.0, 1.0]]},
        {0: [[params.position_sigma**2]], 1: [[params.velocity_sigma**2]]},
    )
    models = [LinearDynamics(*_transition(params, r)) for r in params.retention]
    base = UnderlyingProblem(2, (0, 1), models[0], observation, reward, params.discount, "linear")
    hyps = HypothesisSet(tuple(models), tuple(f"H{i} retention={r:g}" for i, r in enumerate(params.retention)))
    return construct(base, hyps, resolution, reward_kind, weight, updater)


def prior(params: LinearParams) -> GaussianBelief:
    return GaussianBelief(np.array(params.prior_mean, dtype=float), np.diag(np.square(params.prior_sigma)))


def initial_belief(problem: MDHProblem, params: LinearParams, rng: np.random.Generator) -> HybridBelief:
    g = prior(params)
    conds = []
    for cfg in problem.updaters:
        if cfg.kind == "particle":
            pts = rng.multivariate_normal(g.mean, g.covariance, size=cfg.particle_count)
            conds.append(ParticleBelief.uniform(pts))
        else:
            conds.append(g)
    return HybridBelief.from_prior(conds)


def build_scenario(
    params: LinearParams = LinearParams(),
    resolution: ResolutionSpec = ResolutionSpec(0.2, 20),
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: UpdaterConfig = UpdaterConfig("unscented"),
) -> Scenario:
    problem = build_problem(params, resolution, reward_kind, weight, updater)
    g = prior(params)
    return Scenario(
        problem,
        params.horizon,
        lambda rng: initial_belief(problem, params, rng),
        lambda rng: rng.multivariate_normal(g.mean, g.covariance),
    )


def kalman_mm_recursion(problem: MDHProblem, params: LinearParams, actions, observations):
    """Exact multiple-model Kalman filter; returns the hypothesis posterior after each step.

    Independent of the unscented machinery: plain matrix Kalman equations
    with the predictive density N(z; H m, H P H^T + R) as the likelihood.
    """
    n = problem.n_hypotheses
    g = prior(params)
    means = [g.mean.copy() for _ in range(n)]
    covs = [g.covariance.copy() for _ in range(n)]
    logp = np.full(n, -np.log(n))
    obs_model = problem.conditioned_problems[0].observation
    history = []
    for a, z in zip(actions, observations):
        z = np.atleast_1d(z)
        H, R = obs_model.H[a], obs_model.R[a]
        for i, cp in enumerate(problem.conditioned_problems):
            A, Q = cp.dynamics.A, cp.dynamics.Q
            m = A @ means[i]
            P = A @ covs[i] @ A.T + Q
            S = H @ P @ H.T + R
            innov = z - H @ m
            K = P @ H.T @ np.linalg.inv(S)
            means[i] = m + K @ innov
            covs[i] = (np.eye(2) - K @ H) @ P
            _, logdet = np.linalg.slogdet(S)
            logp[i] += -0.5 * (innov @ np.linalg.solve(S, innov) + logdet + z.size * _LOG_2PI)
        logp -= np.max(logp)
        p = np.exp(logp)
        p /= p.sum()
        logp = np.log(p)
        history.append(p)
    return np.array(history)
