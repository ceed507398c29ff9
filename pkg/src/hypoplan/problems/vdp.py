"""Van der Pol tracking benchmark.

Three objects follow Van der Pol flows with different stiffness; a sensor
at the origin reads eight range beams every epoch and may point one
accurate measurement at a chosen object.  The object of interest (OOI)
has three candidate stiffness values, one per hypothesis.

State rows are flat ``[x1, y1, x2, y2, x3, y3]``.  Actions are 0-based
object indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..belief import HybridBelief, ParticleBelief
from ..estimators import UpdaterConfig
from ..mdh import HypothesisSet, MDHProblem, ResolutionSpec, UnderlyingProblem, construct
from ..scenario import Scenario

N_OBJECTS = 3


@dataclass(frozen=True)
class VdpParams:
    mu: tuple = (0.6, 2.0, 1.4)
    hypothesis_mus: tuple = (1.4, 3.0, 0.75)
    ooi: int = 2
    process_sigma: float = 0.05
    beam_sigma: float = 2.0
    accurate_sigma: float = 0.5
    detect_probs: tuple = (0.95, 0.80, 0.65)
    n_beams: int = 8
    max_range: float = 2.5
    dt: float = 0.5
    rk4_step: float = 0.0125
    init_box: float = 0.5
    init_center: tuple = (1.0, 1.0)
    discount: float = 0.95
    reward_sign: float = 1.0
    horizon: int = 30
    particle_count: int = 250

    def __post_init__(self):
        if len(self.mu) != N_OBJECTS or len(self.detect_probs) != N_OBJECTS:
            raise ValueError("mu and detect_probs need one entry per object")
        if any(m == 0.0 for m in (*self.mu, *self.hypothesis_mus)):
            raise ValueError("VDP stiffness mu must be nonzero")
        if not all(0.0 <= p <= 1.0 for p in self.detect_probs):
            raise ValueError("detection probabilities must lie in [0, 1]")
        if min(self.process_sigma, self.beam_sigma, self.accurate_sigma) < 0.0:
            raise ValueError("noise sigmas must be >= 0")
        if self.dt <= 0.0 or self.rk4_step <= 0.0:
            raise ValueError("dt and rk4_step must be positive")
        if not 0 <= self.ooi < N_OBJECTS:
            raise ValueError("ooi must index one of the objects")

    @property
    def substeps(self) -> int:
        return max(1, int(math.ceil(self.dt / self.rk4_step - 1e-9)))


def vdp_derivative(point, mu: float) -> tuple[float, float]:
    """Planar VDP flow: (mu (x - x^3/3 - y), x / mu)."""
    x, y = point
    return mu * (x - x**3 / 3.0 - y), x / mu


@njit(cache=True, fastmath=True)
def _rk4_vdp(states, mus, dt, substeps):
    n, d = states.shape
    out = np.empty_like(states)
    h = dt / substeps
    for j in range(d // 2):
        mu = mus[j]
        inv = 1.0 / mu
        xs = states[:, 2 * j].copy()
        ys = states[:, 2 * j + 1].copy()
        # particle loop innermost so it vectorizes
        for _ in range(substeps):
            for i in range(n):
                x = xs[i]
                y = ys[i]
                k1x = mu * (x - x * x * x / 3.0 - y)
                k1y = x * inv
                x2 = x + 0.5 * h * k1x
                y2 = y + 0.5 * h * k1y
                k2x = mu * (x2 - x2 * x2 * x2 / 3.0 - y2)
                k2y = x2 * inv
                x3 = x + 0.5 * h * k2x
                y3 = y + 0.5 * h * k2y
                k3x = mu * (x3 - x3 * x3 * x3 / 3.0 - y3)
                k3y = x3 * inv
                x4 = x + h * k3x
                y4 = y + h * k3y
                k4x = mu * (x4 - x4 * x4 * x4 / 3.0 - y4)
                k4y = x4 * inv
                xs[i] = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                ys[i] = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        out[:, 2 * j] = xs
        out[:, 2 * j + 1] = ys
    return out


def rk4_propagate(states: np.ndarray, mus, dt: float, substeps: int) -> np.ndarray:
    """Advance every object by ``dt`` using ``substeps`` RK4 steps (no noise)."""
    states = np.ascontiguousarray(np.atleast_2d(states), dtype=float)
    return _rk4_vdp(states, np.asarray(mus, dtype=float), float(dt), int(substeps))


class VdpDynamics:
    def __init__(self, mus, params: VdpParams):
        self.mus = np.asarray(mus, dtype=float)
        self.dt = params.dt
        self.substeps = params.substeps
        self.sigma = params.process_sigma
        self._q = np.eye(2 * N_OBJECTS) * self.sigma**2

    def propagate(self, states, action=None):
        return rk4_propagate(states, self.mus, self.dt, self.substeps)

    def sample(self, states, action, rng):
        nxt = self.propagate(states)
        if self.sigma > 0.0:
            nxt += self.sigma * rng.standard_normal(nxt.shape)
        return nxt

    def process_cov(self, action):
        return self._q


@njit(cache=True)
def _sector(x, y, n_beams):
    b = math.atan2(y, x)
    if b < 0.0:
        b += 2.0 * math.pi
    k = int(b / (2.0 * math.pi / n_beams))
    return min(k, n_beams - 1)


@njit(cache=True)
def _expected_beams(state, n_beams, max_range, sectors, ranges, beams):
    for k in range(n_beams):
        beams[k] = max_range
    for j in range(state.size // 2):
        x = state[2 * j]
        y = state[2 * j + 1]
        r = math.sqrt(x * x + y * y)
        s = _sector(x, y, n_beams)
        sectors[j] = s
        ranges[j] = r
        if r < beams[s]:
            beams[s] = r


@njit(cache=True)
def _log_censored(o, m, sigma):
    # readings are clipped at zero: a zero reading carries the mass P(m + noise <= 0)
    if o <= 0.0:
        if sigma == 0.0:
            return 0.0 if m <= 0.0 else -np.inf
        return math.log(max(0.5 * math.erfc(m / (sigma * math.sqrt(2.0))), 1e-300))
    if sigma == 0.0:
        return 0.0 if o == m else -np.inf
    z = (o - m) / sigma
    return -0.5 * z * z - math.log(sigma) - 0.5 * math.log(2.0 * math.pi)


@njit(cache=True)
def _vdp_loglik(obs, states, action, p_detect, beam_sigma, acc_sigma, max_range):
    n, d = states.shape
    nb = obs.size
    k_obj = d // 2
    out = np.empty(n)
    sectors = np.empty(k_obj, dtype=np.int64)
    ranges = np.empty(k_obj)
    beams = np.empty(nb)
    for i in range(n):
        _expected_beams(states[i], nb, max_range, sectors, ranges, beams)
        st = sectors[action]
        total = 0.0
        for k in range(nb):
            if k != st:
                total += _log_censored(obs[k], beams[k], beam_sigma)
        miss = _log_censored(obs[st], beams[st], beam_sigma)
        hit = _log_censored(obs[st], ranges[action], acc_sigma)
        if p_detect >= 1.0:
            mix = hit
        elif p_detect <= 0.0:
            mix = miss
        else:
            a = math.log(p_detect) + hit
            b = math.log(1.0 - p_detect) + miss
            hi = max(a, b)
            if hi == -np.inf:
                mix = -np.inf
            else:
                mix = hi + math.log(math.exp(a - hi) + math.exp(b - hi))
        out[i] = total + mix
    return out


class VdpObservation:
    def __init__(self, params: VdpParams):
        self.p_detect = np.asarray(params.detect_probs, dtype=float)
        self.beam_sigma = params.beam_sigma
        self.acc_sigma = params.accurate_sigma
        self.n_beams = params.n_beams
        self.max_range = params.max_range

    def expected(self, state):
        """Noise-free beam vector, per-object sectors and ranges."""
        state = np.ascontiguousarray(state, dtype=float)
        sectors = np.empty(state.size // 2, dtype=np.int64)
        ranges = np.empty(state.size // 2)
        beams = np.empty(self.n_beams)
        _expected_beams(state, self.n_beams, self.max_range, sectors, ranges, beams)
        return beams, sectors, ranges

    def sample(self, state, action, rng):
        beams, sectors, ranges = self.expected(state)
        obs = beams + self.beam_sigma * rng.standard_normal(self.n_beams)
        detected = bool(rng.random() < self.p_detect[action])
        if detected:
            obs[sectors[action]] = ranges[action] + self.acc_sigma * rng.standard_normal()
        return np.maximum(obs, 0.0), detected

    def log_likelihood(self, observation, states, action):
        return _vdp_loglik(
            np.asarray(observation, dtype=float),
            np.ascontiguousarray(states, dtype=float),
            int(action),
            float(self.p_detect[action]),
            self.beam_sigma,
            self.acc_sigma,
            self.max_range,
        )


def base_reward(state, action: int, detected: bool, sign: float = 1.0) -> float:
    """Distance of the targeted object from the sensor if the accurate measurement landed."""
    if not detected:
        return 0.0
    return sign * math.hypot(state[2 * action], state[2 * action + 1])


def make_state_reward(params: VdpParams):
    p = np.asarray(params.detect_probs, dtype=float)
    sign = params.reward_sign

    def state_reward(states, action, step=0, detected=None):
        states = np.atleast_2d(states)
        d = np.hypot(states[:, 2 * action], states[:, 2 * action + 1])
        if detected is None:
            return sign * p[action] * d
        return sign * d if detected else np.zeros(len(states))

    return state_reward


def build_problem(
    params: VdpParams = VdpParams(),
    resolution: ResolutionSpec = ResolutionSpec(0.2, 30),
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: UpdaterConfig | None = None,
) -> MDHProblem:
    updater = updater or UpdaterConfig("particle", params.particle_count)
    obs = VdpObservation(params)
    nominal = VdpDynamics(params.mu, params)
    base = UnderlyingProblem(
        2 * N_OBJECTS, tuple(range(N_OBJECTS)), nominal, obs, make_state_reward(params), params.discount, "vdp"
    )
    models = []
    for m in params.hypothesis_mus:
        mus = list(params.mu)
        mus[params.ooi] = m
        models.append(VdpDynamics(mus, params))
    labels = tuple(f"H{i} mu={m:g}" for i, m in enumerate(params.hypothesis_mus))
    return construct(base, HypothesisSet(tuple(models), labels), resolution, reward_kind, weight, updater)


def sample_box(params: VdpParams, rng: np.random.Generator, n: int) -> np.ndarray:
    c = np.tile(np.asarray(params.init_center, dtype=float), N_OBJECTS)
    return c + params.init_box * (rng.random((n, 2 * N_OBJECTS)) - 0.5)


def initial_belief(problem: MDHProblem, params: VdpParams, rng: np.random.Generator) -> HybridBelief:
    # one shared prior cloud so hypotheses start from identical conditionals
    counts = {cfg.particle_count for cfg in problem.updaters}
    clouds = {n: ParticleBelief.uniform(sample_box(params, rng, n)) for n in sorted(counts)}
    return HybridBelief.from_prior([clouds[cfg.particle_count] for cfg in problem.updaters])


def build_scenario(
    params: VdpParams = VdpParams(),
    resolution: ResolutionSpec = ResolutionSpec(0.2, 30),
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: UpdaterConfig | None = None,
) -> Scenario:
    problem = build_problem(params, resolution, reward_kind, weight, updater)
    return Scenario(
        problem,
        params.horizon,
        lambda rng: initial_belief(problem, params, rng),
        lambda rng: sample_box(params, rng, 1)[0],
    )
