"""Space-domain-awareness sensor tasking benchmark.

Five objects on planar low Earth orbits under two-body gravity plus
cannonball drag in an exponential atmosphere.  A ground station at a fixed
inertial point measures range and range-rate of one tasked object per
step.  The object of interest (OOI) may have deployed a panel, which
multiplies its drag; each multiplier is one hypothesis.  Leaving the
nominal tasking plan costs 1 per step.

Units are km, s.  State rows are flat ``[x, y, vx, vy] * n_objects``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from ..belief import GaussianBelief, HybridBelief
from ..estimators import UpdaterConfig
from ..mdh import HypothesisSet, MDHProblem, ResolutionSpec, UnderlyingProblem, construct
from ..scenario import Scenario

EARTH_RADIUS = 6378.137
MU_EARTH = 398600.4418
_LOG_2PI = math.log(2.0 * math.pi)


class OrbitDecayError(ValueError):
    """An object fell below the Earth's surface."""


@dataclass(frozen=True)
class SdaParams:
    mu_earth: float = MU_EARTH
    earth_radius: float = EARTH_RADIUS
    n_objects: int = 5
    ooi: int = 0
    altitudes: tuple = (500.0, 550.0, 600.0, 650.0, 700.0)
    catalog_seed: int = 7
    ephemeris_path: Optional[str] = None
    # ballistic coefficient Cd*A/m in m^2/kg, one per object
    ballistic_coeffs: tuple = (1.0, 0.02, 0.02, 0.02, 0.02)
    drag_multipliers: tuple = (1.0, 5.0, 20.0)
    rho0: float = 6.967e-13  # kg/m^3 at reference_altitude
    reference_altitude: float = 500.0
    scale_height: float = 63.822
    step_seconds: float = 60.0
    horizon_seconds: float = 3600.0
    decision_deadline_seconds: float = 1600.0
    max_substep_seconds: float = 6.0
    nominal_plan: Optional[tuple] = None
    station: tuple = (EARTH_RADIUS, 0.0)
    obs_noise: tuple = (0.005, 5e-6)  # range km, range-rate km/s
    prior_position_sigma: float = 0.05
    prior_velocity_sigma: float = 5e-5
    accel_noise: float = 1e-9  # km/s^2 white acceleration
    discount: float = 0.95

    def __post_init__(self):
        m = self.drag_multipliers
        if len(m) < 2 or any(b <= a for a, b in zip(m, m[1:])) or m[0] < 0.0:
            raise ValueError(f"drag_multipliers must be nonnegative and strictly increasing, got {m}")
        if len(self.ballistic_coeffs) != self.n_objects:
            raise ValueError("one ballistic coefficient per object")
        if self.ephemeris_path is None and len(self.altitudes) != self.n_objects:
            raise ValueError("one altitude per object")
        if not 0 <= self.ooi < self.n_objects:
            raise ValueError("ooi must index one of the objects")
        if self.step_seconds <= 0.0 or self.max_substep_seconds <= 0.0:
            raise ValueError("step lengths must be positive")
        if min(self.obs_noise) < 0.0 or len(self.obs_noise) != 2:
            raise ValueError("obs_noise is (range sigma, range-rate sigma), both >= 0")
        if self.nominal_plan is not None:
            if len(self.nominal_plan) == 0:
                raise ValueError("nominal_plan must be nonempty")
            if any(not 0 <= a < self.n_objects for a in self.nominal_plan):
                raise ValueError("nominal_plan entries must be object indices")

    @property
    def horizon_steps(self) -> int:
        return int(round(self.horizon_seconds / self.step_seconds))

    @property
    def deadline_steps(self) -> int:
        return int(math.ceil(self.decision_deadline_seconds / self.step_seconds - 1e-9))

    @property
    def substeps(self) -> int:
        return max(1, int(math.ceil(self.step_seconds / self.max_substep_seconds - 1e-9)))

    def plan(self) -> tuple:
        """Nominal tasking sequence; defaults to round-robin over the non-OOI objects."""
        if self.nominal_plan is not None:
            return tuple(int(a) for a in self.nominal_plan)
        others = [i for i in range(self.n_objects) if i != self.ooi]
        return tuple(others[t % len(others)] for t in range(self.horizon_steps))


# --------------------------------------------------------------------------
# catalog


def circular_state(radius: float, phase: float, mu: float = MU_EARTH) -> np.ndarray:
    v = math.sqrt(mu / radius)
    return np.array([radius * math.cos(phase), radius * math.sin(phase), -v * math.sin(phase), v * math.cos(phase)])


def default_catalog(params: SdaParams) -> np.ndarray:
    """Near-circular prograde orbits at the configured altitudes with seeded phases."""
    rng = np.random.default_rng(params.catalog_seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, params.n_objects)
    rows = [circular_state(params.earth_radius + h, p, params.mu_earth) for h, p in zip(params.altitudes, phases)]
    return np.concatenate(rows)


def load_ephemeris(path: str) -> np.ndarray:
    """Read ``id x y vx vy`` rows (km, km/s); '#' starts a comment.  Rows are ordered by id."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.replace(",", " ").split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected 'id x y vx vy', got {line.strip()!r}")
            try:
                rows.append((int(parts[0]), [float(v) for v in parts[1:]]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: no ephemeris rows")
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate object ids")
    rows.sort(key=lambda r: r[0])
    return np.concatenate([np.asarray(r[1]) for r in rows])


def catalog(params: SdaParams) -> np.ndarray:
    state = load_ephemeris(params.ephemeris_path) if params.ephemeris_path else default_catalog(params)
    if state.size != 4 * params.n_objects:
        raise ValueError(f"catalog has {state.size // 4} objects, expected {params.n_objects}")
    return state


# --------------------------------------------------------------------------
# dynamics


@njit(cache=True, fastmath=True)
def _accel(x, y, vx, vy, mu, bstar, rho0, h0, hs, re):
    r2 = x * x + y * y
    r = math.sqrt(r2)
    g = -mu / (r2 * r)
    ax = g * x
    ay = g * y
    if bstar > 0.0:
        rho = rho0 * math.exp(-(r - re - h0) / hs)
        v = math.sqrt(vx * vx + vy * vy)
        # 0.5 rho B |v| v with rho in kg/m^3, B in m^2/kg, v in km/s -> km/s^2
        k = 0.5 * rho * bstar * 1000.0 * v
        ax -= k * vx
        ay -= k * vy
    return ax, ay


@njit(cache=True, fastmath=True)
def _rk4_orbits(states, bstars, dt, substeps, mu, rho0, h0, hs, re):
    n, d = states.shape
    out = np.empty_like(states)
    h = dt / substeps
    for i in range(n):
        for j in range(d // 4):
            b = bstars[j]
            x = states[i, 4 * j]
            y = states[i, 4 * j + 1]
            vx = states[i, 4 * j + 2]
            vy = states[i, 4 * j + 3]
            for _ in range(substeps):
                a1x, a1y = _accel(x, y, vx, vy, mu, b, rho0, h0, hs, re)
                x2 = x + 0.5 * h * vx
                y2 = y + 0.5 * h * vy
                u2 = vx + 0.5 * h * a1x
                w2 = vy + 0.5 * h * a1y
                a2x, a2y = _accel(x2, y2, u2, w2, mu, b, rho0, h0, hs, re)
                x3 = x + 0.5 * h * u2
                y3 = y + 0.5 * h * w2
                u3 = vx + 0.5 * h * a2x
                w3 = vy + 0.5 * h * a2y
                a3x, a3y = _accel(x3, y3, u3, w3, mu, b, rho0, h0, hs, re)
                x4 = x + h * u3
                y4 = y + h * w3
                u4 = vx + h * a3x
                w4 = vy + h * a3y
                a4x, a4y = _accel(x4, y4, u4, w4, mu, b, rho0, h0, hs, re)
                x = x + h / 6.0 * (vx + 2.0 * u2 + 2.0 * u3 + u4)
                y = y + h / 6.0 * (vy + 2.0 * w2 + 2.0 * w3 + w4)
                vx = vx + h / 6.0 * (a1x + 2.0 * a2x + 2.0 * a3x + a4x)
                vy = vy + h / 6.0 * (a1y + 2.0 * a2y + 2.0 * a3y + a4y)
            out[i, 4 * j] = x
            out[i, 4 * j + 1] = y
            out[i, 4 * j + 2] = vx
            out[i, 4 * j + 3] = vy
    return out


def propagate_orbits(states, bstars, dt: float, substeps: int, params: SdaParams) -> np.ndarray:
    """RK4 propagation of every object in every row; raises OrbitDecayError on reentry."""
    states = np.ascontiguousarray(np.atleast_2d(states), dtype=float)
    out = _rk4_orbits(
        states,
        np.asarray(bstars, dtype=float),
        float(dt),
        int(substeps),
        params.mu_earth,
        params.rho0,
        params.reference_altitude,
        params.scale_height,
        params.earth_radius,
    )
    r = np.hypot(out[:, 0::4], out[:, 1::4])
    if not np.all(r > params.earth_radius):
        raise OrbitDecayError("an object dropped below the Earth's surface")
    return out


def white_accel_cov(sigma: float, dt: float, n_objects: int) -> np.ndarray:
    """Discrete process covariance of white acceleration noise on [x, y, vx, vy] blocks."""
    q = sigma**2
    block = np.zeros((4, 4))
    for k in range(2):
        block[k, k] = q * dt**3 / 3.0
        block[k, k + 2] = block[k + 2, k] = q * dt**2 / 2.0
        block[k + 2, k + 2] = q * dt
    return np.kron(np.eye(n_objects), block)


class OrbitDynamics:
    def __init__(self, bstars, params: SdaParams):
        self.bstars = np.asarray(bstars, dtype=float)
        self.params = params
        self.dt = params.step_seconds
        self.substeps = params.substeps
        self._q = white_accel_cov(params.accel_noise, self.dt, params.n_objects)
        self._chol = np.linalg.cholesky(self._q) if params.accel_noise > 0.0 else None

    def propagate(self, states, action=None):
        return propagate_orbits(states, self.bstars, self.dt, self.substeps, self.params)

    def sample(self, states, action, rng):
        nxt = self.propagate(states)
        if self._chol is not None:
            nxt += rng.standard_normal(nxt.shape) @ self._chol.T
        return nxt

    def process_cov(self, action):
        return self._q


# --------------------------------------------------------------------------
# sensor


def range_and_rate(states: np.ndarray, obj: int, station) -> np.ndarray:
    """(N, 2) noise-free range and range-rate of object ``obj`` from a fixed station."""
    states = np.atleast_2d(states)
    dx = states[:, 4 * obj] - station[0]
    dy = states[:, 4 * obj + 1] - station[1]
    rng_ = np.hypot(dx, dy)
    rate = (dx * states[:, 4 * obj + 2] + dy * states[:, 4 * obj + 3]) / rng_
    return np.stack([rng_, rate], axis=1)


class RangeSensor:
    def __init__(self, params: SdaParams):
        self.station = np.asarray(params.station, dtype=float)
        self.sigma = np.asarray(params.obs_noise, dtype=float)
        self._r = np.diag(self.sigma**2)

    def predict(self, states, action):
        return range_and_rate(states, int(action), self.station)

    def noise_cov(self, action):
        return self._r

    def sample(self, state, action, rng):
        z = self.predict(state, action)[0]
        return z + self.sigma * rng.standard_normal(2), True

    def log_likelihood(self, observation, states, action):
        d = (np.asarray(observation, dtype=float) - self.predict(states, action)) / self.sigma
        return -0.5 * np.sum(d * d, axis=1) - float(np.sum(np.log(self.sigma))) - _LOG_2PI


def base_reward(action: int, step_index: int, plan: tuple) -> float:
    """0 on the nominal plan, -1 for a deviation."""
    return 0.0 if action == plan[step_index % len(plan)] else -1.0


def make_state_reward(plan: tuple):
    def state_reward(states, action, step=0, detected=None):
        return np.full(len(np.atleast_2d(states)), base_reward(action, step, plan))

    return state_reward


# --------------------------------------------------------------------------
# problem assembly


def build_problem(
    params: SdaParams = SdaParams(),
    resolution: Optional[ResolutionSpec] = None,
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: Optional[UpdaterConfig] = None,
) -> MDHProblem:
    resolution = resolution or ResolutionSpec(0.2, params.deadline_steps)
    updater = updater or UpdaterConfig("unscented")
    sensor = RangeSensor(params)
    plan = params.plan()
    base_b = np.asarray(params.ballistic_coeffs, dtype=float)
    nominal = OrbitDynamics(base_b, params)
    base = UnderlyingProblem(
        4 * params.n_objects,
        tuple(range(params.n_objects)),
        nominal,
        sensor,
        make_state_reward(plan),
        params.discount,
        "sda",
    )
    models = []
    for m in params.drag_multipliers:
        b = base_b.copy()
        b[params.ooi] *= m
        models.append(OrbitDynamics(b, params))
    labels = tuple(f"H{i} drag x{m:g}" for i, m in enumerate(params.drag_multipliers))
    return construct(base, HypothesisSet(tuple(models), labels), resolution, reward_kind, weight, updater)


def prior(params: SdaParams) -> GaussianBelief:
    var = np.tile(
        [params.prior_position_sigma**2] * 2 + [params.prior_velocity_sigma**2] * 2, params.n_objects
    )
    return GaussianBelief(catalog(params), np.diag(var))


def initial_belief(problem: MDHProblem, params: SdaParams) -> HybridBelief:
    g = prior(params)
    return HybridBelief.from_prior([g] * problem.n_hypotheses)


def sample_initial_state(params: SdaParams, rng: np.random.Generator) -> np.ndarray:
    g = prior(params)
    return g.mean + np.sqrt(np.diag(g.covariance)) * rng.standard_normal(g.mean.size)


def build_scenario(
    params: SdaParams = SdaParams(),
    resolution: Optional[ResolutionSpec] = None,
    reward_kind: str = "resolution_time",
    weight: float = 0.0,
    updater: Optional[UpdaterConfig] = None,
) -> Scenario:
    problem = build_problem(params, resolution, reward_kind, weight, updater)
    return Scenario(
        problem,
        params.horizon_steps,
        lambda rng: initial_belief(problem, params),
        lambda rng: sample_initial_state(params, rng),
        params.plan(),
    )
