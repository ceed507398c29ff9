"""Belief containers: categorical, particle, Gaussian and the hybrid mixture.

A hybrid belief is a categorical distribution over dynamics hypotheses
paired with one conditional belief over the underlying state per
hypothesis.  All containers are immutable; updates build new objects.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

PROB_TOL = 1e-9
PROB_FLOOR = 1e-12
PSD_REPAIR_TOL = 1e-8


class BeliefError(ValueError):
    """Raised when a belief violates its structural invariants."""


def normalize_probabilities(p: np.ndarray, floor: float = PROB_FLOOR) -> np.ndarray:
    """Renormalize ``p`` and clamp tiny entries to ``floor``.

    The clamp keeps every hypothesis alive (no log(0), no permanent
    extinction by underflow).
    """
    p = np.asarray(p, dtype=float)
    total = p.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise BeliefError(f"cannot normalize probabilities {p!r}")
    p = p / total
    if floor > 0.0 and np.any(p < floor):
        p = np.maximum(p, floor)
        p = p / p.sum()
    return p


@dataclass(frozen=True)
class CategoricalBelief:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise BeliefError("categorical belief needs a non-empty 1-D vector")
        if np.any(p < 0.0) or not np.all(np.isfinite(p)):
            raise BeliefError(f"negative or non-finite probability in {p!r}")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise BeliefError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __len__(self) -> int:
        return self.probabilities.size

    @classmethod
    def uniform(cls, n: int) -> "CategoricalBelief":
        return cls(np.full(n, 1.0 / n))

    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. lowest index on ties
        return int(np.argmax(self.probabilities))


@dataclass(frozen=True)
class ParticleBelief:
    particles: np.ndarray
    weights: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        x = np.asarray(self.particles, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        w = np.asarray(self.weights, dtype=float)
        if x.shape[0] == 0 or w.shape != (x.shape[0],):
            raise BeliefError(
                f"particle count {x.shape[0]} does not match weight count {w.shape}"
            )
        if np.any(w < 0.0) or abs(float(w.sum()) - 1.0) > PROB_TOL:
            raise BeliefError(f"particle weights must be nonnegative and sum to 1 (sum {w.sum()!r})")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "particles", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, particles: np.ndarray) -> "ParticleBelief":
        n = len(particles)
        return cls(particles, np.full(n, 1.0 / n))

    @property
    def dimension(self) -> int:
        return self.particles.shape[1]

    def __len__(self) -> int:
        return self.particles.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles

    def covariance(self) -> np.ndarray:
        d = self.particles - self.mean()
        return (self.weights[:, None] * d).T @ d

    def effective_sample_size(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))


def repair_covariance(cov: np.ndarray, tol: float = PSD_REPAIR_TOL) -> np.ndarray:
    """Symmetrize and clip slightly negative eigenvalues at zero.

    Raises :class:`BeliefError` when the most negative eigenvalue is below
    ``-tol`` (the matrix is not a covariance up to roundoff).
    """
    cov = 0.5 * (cov + cov.T)
    try:
        np.linalg.cholesky(cov)
        return cov
    except np.linalg.LinAlgError:
        pass
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval[0] >= 0.0:
        return cov
    if eigval[0] < -tol * max(1.0, abs(eigval[-1])):
        raise BeliefError(f"covariance is not PSD (smallest eigenvalue {eigval[0]:.3e})")
    eigval = np.clip(eigval, 0.0, None)
    return (eigvec * eigval) @ eigvec.T


@dataclass(frozen=True)
class GaussianBelief:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if m.ndim != 1 or c.shape != (m.size, m.size):
            raise BeliefError(f"mean shape {m.shape} and covariance shape {c.shape} disagree")
        if c.size and float(np.max(np.abs(c - c.T))) > PROB_TOL:
            c = repair_covariance(c)
        m.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", c)

    @property
    def dimension(self) -> int:
        return self.mean.size


ConditionalBelief = Union[ParticleBelief, GaussianBelief]


@dataclass(frozen=True)
class HybridBelief:
    """Joint belief over (hypothesis, underlying state).

    ``time_step`` counts completed updates since the prior and ``resolved``
    latches once the hypothesis posterior first crosses the decision
    threshold; together they keep the sparse resolution reward Markov.
    """

    hypothesis: CategoricalBelief
    conditionals: tuple
    time_step: int = 0
    resolved: bool = False
    zero_likelihood_events: int = 0
    _dimension: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        conds = tuple(self.conditionals)
        if len(conds) != len(self.hypothesis):
            raise BeliefError(
                f"{len(conds)} conditional beliefs for {len(self.hypothesis)} hypotheses"
            )
        dims = {c.dimension for c in conds}
        if len(dims) != 1:
            raise BeliefError(f"conditional beliefs disagree on state dimension: {dims}")
        if self.time_step < 0:
            raise BeliefError("time_step must be nonnegative")
        object.__setattr__(self, "conditionals", conds)
        object.__setattr__(self, "_dimension", dims.pop())

    @classmethod
    def from_prior(
        cls, conditionals: Sequence[ConditionalBelief], probabilities=None
    ) -> "HybridBelief":
        n = len(conditionals)
        cat = CategoricalBelief.uniform(n) if probabilities is None else CategoricalBelief(probabilities)
        return cls(cat, tuple(conditionals))

    @property
    def n_hypotheses(self) -> int:
        return len(self.conditionals)

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def probabilities(self) -> np.ndarray:
        return self.hypothesis.probabilities


def sample_hypothesis(belief: HybridBelief, rng: np.random.Generator) -> int:
    p = belief.hypothesis.probabilities
    # inverse-CDF on the cumulative sum; searchsorted is cheaper than rng.choice
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), p.size - 1))


def sample_state(belief: HybridBelief, hypothesis: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 <= hypothesis < belief.n_hypotheses:
        raise IndexError(f"hypothesis {hypothesis} out of range for {belief.n_hypotheses}")
    cond = belief.conditionals[hypothesis]
    if isinstance(cond, ParticleBelief):
        c = np.cumsum(cond.weights)
        j = min(np.searchsorted(c, rng.random() * c[-1], side="right"), len(cond) - 1)
        return cond.particles[j].copy()
    return gaussian_draw(cond.mean, cond.covariance, rng)


def gaussian_draw(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(mean.size)
    try:
        return mean + np.linalg.cholesky(cov) @ z
    except np.linalg.LinAlgError:
        # singular (e.g. zero) covariance: eigh copes where cholesky fails
        eigval, eigvec = np.linalg.eigh(cov)
        return mean + (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ z


def conditional_moments(cond: ConditionalBelief) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(cond, ParticleBelief):
        return cond.mean(), cond.covariance()
    return cond.mean.copy(), cond.covariance.copy()


def marginal_moments(belief: HybridBelief) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the state marginal (law of total variance)."""
    w = belief.hypothesis.probabilities
    moments = [conditional_moments(c) for c in belief.conditionals]
    if len(moments) == 1:
        return moments[0]
    means = np.array([m for m, _ in moments])
    mean = w @ means
    d = means - mean
    cov = sum(wi * c for wi, (_, c) in zip(w, moments)) + (w[:, None] * d).T @ d
    return mean, cov


def entropy(belief: CategoricalBelief) -> float:
    """Shannon entropy in nats, with 0 log 0 = 0."""
    p = belief.probabilities
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))
