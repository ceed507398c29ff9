"""Bayesian updaters and the multiple-model hypothesis update.

Each conditional belief is predicted and corrected by its own updater; the
hypothesis probabilities are then reweighted by every updater's marginal
observation likelihood and renormalized.  Marginal likelihoods are carried
in log space internally so long observation vectors cannot underflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .belief import (
    BeliefError,
    CategoricalBelief,
    GaussianBelief,
    HybridBelief,
    ParticleBelief,
    normalize_probabilities,
    repair_covariance,
)

if TYPE_CHECKING:
    from .mdh import MDHProblem

UPDATER_KINDS = ("particle", "unscented")
_LOG_2PI = math.log(2.0 * math.pi)


class NumericalError(ArithmeticError):
    """A filter step could not be completed (singular or non-PSD matrices)."""


@dataclass(frozen=True)
class UpdaterConfig:
    kind: str = "particle"
    particle_count: int = 250
    ess_threshold_fraction: float = 0.5
    ukf_spread: float = 1e-3
    ukf_secondary_scaling: float = 2.0
    ukf_tertiary_scaling: float = 0.0

    def __post_init__(self):
        if self.kind not in UPDATER_KINDS:
            raise ValueError(f"kind must be one of {UPDATER_KINDS}, got {self.kind!r}")
        if self.kind == "particle" and self.particle_count < 2:
            raise ValueError("particle_count must be >= 2")
        if not 0.0 < self.ess_threshold_fraction <= 1.0:
            raise ValueError("ess_threshold_fraction must lie in (0, 1]")
        if self.ukf_spread <= 0.0:
            raise ValueError("ukf_spread must be > 0")


def logsumexp(a: np.ndarray) -> float:
    hi = np.max(a)
    if not np.isfinite(hi):
        return float(hi)
    return float(hi + np.log(np.sum(np.exp(a - hi))))


# --------------------------------------------------------------------------
# particle filter


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling (one uniform offset)."""
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    c = np.cumsum(weights)
    c[-1] = 1.0
    return np.searchsorted(c, positions, side="right").clip(max=n - 1)


def pf_predict(belief: ParticleBelief, action, dynamics, rng: np.random.Generator) -> ParticleBelief:
    """Propagate every particle by one draw of the transition model."""
    return ParticleBelief(dynamics.sample(belief.particles, action, rng), belief.weights)


def _pf_correct_log(
    belief: ParticleBelief,
    action,
    observation,
    log_likelihood: Callable,
    ess_threshold_fraction: float = 0.5,
    rng: np.random.Generator | None = None,
) -> tuple[ParticleBelief, float]:
    ll = np.asarray(log_likelihood(observation, belief.particles, action), dtype=float)
    with np.errstate(divide="ignore"):
        logw = np.log(belief.weights) + ll
    log_marginal = float(logsumexp(logw))
    if not np.isfinite(log_marginal):
        return ParticleBelief(belief.particles, belief.weights, degenerate=True), -math.inf
    w = np.exp(logw - log_marginal)
    w /= w.sum()
    particles = belief.particles
    n = w.size
    if rng is not None and 1.0 / np.sum(w * w) < ess_threshold_fraction * n:
        idx = systematic_resample(w, rng)
        particles = particles[idx]
        w = np.full(n, 1.0 / n)
    return ParticleBelief(particles, w), log_marginal


def pf_correct(
    belief: ParticleBelief,
    action,
    observation,
    log_likelihood: Callable,
    ess_threshold_fraction: float = 0.5,
    rng: np.random.Generator | None = None,
) -> tuple[ParticleBelief, float]:
    """Bayes-correct particle weights with ``log_likelihood(obs, particles, action)``.

    Returns the posterior and the marginal likelihood sum_j w_j p(o | x_j).
    Systematic resampling runs when ``rng`` is given and the effective
    sample size drops below ``ess_threshold_fraction * N``.  If every
    particle has zero likelihood the input belief comes back flagged
    ``degenerate`` with marginal likelihood 0.
    """
    post, log_marginal = _pf_correct_log(
        belief, action, observation, log_likelihood, ess_threshold_fraction, rng
    )
    return post, math.exp(log_marginal)


# --------------------------------------------------------------------------
# unscented Kalman filter


def sigma_weights(n: int, alpha: float, beta: float, kappa: float):
    """Scaled sigma-point weights (mean weights, covariance weights, lambda)."""
    lam = alpha**2 * (n + kappa) - n
    wm = np.full(2 * n + 1, 0.5 / (n + lam))
    wc = wm.copy()
    wm[0] = lam / (n + lam)
    wc[0] = wm[0] + (1.0 - alpha**2 + beta)
    return wm, wc, lam


def _matrix_sqrt(cov: np.ndarray) -> np.ndarray:
    """Lower factor ``S`` with ``S S^T = cov``; falls back to eigh for PSD-singular input."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        try:
            cov = repair_covariance(cov)
        except BeliefError as exc:
            raise NumericalError(str(exc)) from exc
        eigval, eigvec = np.linalg.eigh(cov)
        return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


def sigma_points(mean: np.ndarray, cov: np.ndarray, config: UpdaterConfig):
    n = mean.size
    wm, wc, lam = sigma_weights(
        n, config.ukf_spread, config.ukf_secondary_scaling, config.ukf_tertiary_scaling
    )
    s = _matrix_sqrt((n + lam) * cov)
    pts = np.empty((2 * n + 1, n))
    pts[0] = mean
    pts[1 : n + 1] = mean + s.T
    pts[n + 1 :] = mean - s.T
    return pts, wm, wc


def _unscented_moments(pts: np.ndarray, wm: np.ndarray, wc: np.ndarray):
    # offsets from the center point keep the large negative center weight
    # from cancelling digits when states are far from the origin
    ref = pts[0]
    off = pts - ref
    mean = ref + wm @ off
    d = off - (mean - ref)
    cov = (wc[:, None] * d).T @ d
    return mean, d, cov


def ukf_predict(
    belief: GaussianBelief, action, dynamics, config: UpdaterConfig = UpdaterConfig("unscented")
) -> GaussianBelief:
    """Unscented transform through ``dynamics.propagate`` plus its process noise."""
    pts, wm, wc = sigma_points(belief.mean, belief.covariance, config)
    prop = np.asarray(dynamics.propagate(pts, action), dtype=float)
    mean, _, cov = _unscented_moments(prop, wm, wc)
    q = dynamics.process_cov(action)
    if q is not None:
        cov = cov + q
    try:
        cov = repair_covariance(cov)
    except BeliefError as exc:
        raise NumericalError(f"predicted covariance lost PSD: {exc}") from exc
    return GaussianBelief(mean, cov)


def _ukf_correct_log(
    belief: GaussianBelief, action, observation, obs_model, config: UpdaterConfig
) -> tuple[GaussianBelief, float]:
    pts, wm, wc = sigma_points(belief.mean, belief.covariance, config)
    zs = np.asarray(obs_model.predict(pts, action), dtype=float)
    if zs.ndim == 1:
        zs = zs[:, None]
    z_mean, dz, s = _unscented_moments(zs, wm, wc)
    s = s + np.atleast_2d(obs_model.noise_cov(action))
    dx = pts - belief.mean
    pxz = (wc[:, None] * dx).T @ dz
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(s)
        raise NumericalError(f"innovation covariance is singular (condition number {cond:.3e})") from exc
    innov = np.atleast_1d(np.asarray(observation, dtype=float)) - z_mean
    # K = Pxz S^-1 via two triangular solves
    sinv_pxz_t = np.linalg.solve(chol.T, np.linalg.solve(chol, pxz.T))
    gain = sinv_pxz_t.T
    mean = belief.mean + gain @ innov
    cov = belief.covariance - gain @ s @ gain.T
    try:
        cov = repair_covariance(cov)
    except BeliefError as exc:
        raise NumericalError(f"posterior covariance lost PSD: {exc}") from exc
    white = np.linalg.solve(chol, innov)
    m = innov.size
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    log_marginal = -0.5 * (float(white @ white) + log_det + m * _LOG_2PI)
    return GaussianBelief(mean, cov), log_marginal


def ukf_correct(
    belief: GaussianBelief,
    action,
    observation,
    obs_model,
    config: UpdaterConfig = UpdaterConfig("unscented"),
) -> tuple[GaussianBelief, float]:
    """Unscented measurement update.

    The returned marginal likelihood is the Gaussian density of the
    innovation under the innovation covariance.
    """
    post, log_marginal = _ukf_correct_log(belief, action, observation, obs_model, config)
    return post, math.exp(log_marginal)


# --------------------------------------------------------------------------
# multiple-model update


def predict_correct(problem, config: UpdaterConfig, cond, action, observation, rng):
    """One predict/correct cycle of a single updater; returns (pred, post, log marginal)."""
    if config.kind == "particle":
        if not isinstance(cond, ParticleBelief):
            raise TypeError("particle updater needs a ParticleBelief")
        pred = pf_predict(cond, action, problem.dynamics, rng)
        post, logm = _pf_correct_log(
            pred,
            action,
            observation,
            problem.observation.log_likelihood,
            config.ess_threshold_fraction,
            rng,
        )
    else:
        if not isinstance(cond, GaussianBelief):
            raise TypeError("unscented updater needs a GaussianBelief")
        pred = ukf_predict(cond, action, problem.dynamics, config)
        post, logm = _ukf_correct_log(pred, action, observation, problem.observation, config)
    return pred, post, logm


def mm_update(
    problem: "MDHProblem",
    belief: HybridBelief,
    action,
    observation,
    rng: np.random.Generator,
) -> HybridBelief:
    """Multiple-model belief update over all dynamics hypotheses.

    If every hypothesis assigns the observation zero likelihood, the
    hypothesis probabilities are kept, conditionals keep their predicted
    values and ``zero_likelihood_events`` is incremented.
    """
    from .mdh import resolution_time_reward

    n = belief.n_hypotheses
    preds, posts = [], []
    logm = np.empty(n)
    # common random numbers: every hypothesis replays the same stream, so
    # filter noise cancels in the likelihood ratios between hypotheses
    bitgen = rng.bit_generator
    start = bitgen.state
    for i in range(n):
        bitgen.state = start
        pred, post, logm[i] = predict_correct(
            problem.conditioned_problems[i],
            problem.updaters[i],
            belief.conditionals[i],
            action,
            observation,
            rng,
        )
        preds.append(pred)
        posts.append(post)

    events = belief.zero_likelihood_events
    if not np.any(np.isfinite(logm)):
        probs = belief.hypothesis.probabilities
        conds = tuple(preds)
        events += 1
    else:
        with np.errstate(divide="ignore"):
            logp = np.log(belief.hypothesis.probabilities) + logm
        probs = normalize_probabilities(np.exp(logp - logsumexp(logp)))
        conds = tuple(posts[i] if np.isfinite(logm[i]) else preds[i] for i in range(n))
    hyp = CategoricalBelief(probs)
    t = belief.time_step + 1
    _, resolved = resolution_time_reward(hyp, t, belief.resolved, problem.resolution)
    return HybridBelief(hyp, conds, t, resolved, events)
