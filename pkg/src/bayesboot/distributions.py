"""Splittable random streams and the sampling kernels built on them.

Every stochastic routine in the package takes a :class:`RandomStream`.  A
stream is identified by a 64-bit seed plus a path of child indices, so the
stream handed to replicate ``k`` depends only on ``(seed, k)`` and never on
the order in which replicates are executed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ParameterDomainError

_SEED_LIMIT = 2**64


@dataclass
class RandomStream:
    """A reproducible source of uniforms, addressable by ``(seed, path)``.

    Two streams with equal seed and path produce identical draw sequences.
    Children created with distinct indices are independent (they are
    distinct spawn keys of one :class:`numpy.random.SeedSequence`).

    Streams are stateful and single-owner: hand each worker its own child
    rather than sharing one stream between threads.
    """

    seed: int
    path: tuple[int, ...] = ()
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ParameterDomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if any(int(i) < 0 for i in self.path):
            raise ParameterDomainError("child indices must be nonnegative")
        self.seed = seed
        self.path = tuple(int(i) for i in self.path)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, index: int) -> "RandomStream":
        """Fresh stream at ``path + (index,)``; does not consume from ``self``."""
        return RandomStream(self.seed, self.path + (int(index),))

    def uniform(self, size=None):
        return self.generator.random(size)

    def standard_exponential(self, size=None):
        return self.generator.standard_exponential(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, high, size=None):
        """Uniform integers on ``{0, ..., high-1}``."""
        return self.generator.integers(0, high, size=size)


def sample_beta(alpha, beta, stream: RandomStream, size=None):
    """Draw from Beta(alpha, beta).

    When either parameter equals one the closed-form inverse CDF is used and
    exactly one uniform is consumed per draw.  Otherwise numpy's Gamma-ratio
    sampler is used (two Gamma variates per draw).
    """
    alpha = float(alpha)
    beta = float(beta)
    if not (alpha > 0 and beta > 0) or not (np.isfinite(alpha) and np.isfinite(beta)):
        raise ParameterDomainError(f"Beta parameters must be positive, got ({alpha}, {beta})")
    if alpha == 1.0 and beta == 1.0:
        return stream.uniform(size)
    if alpha == 1.0:
        # CDF 1 - (1-x)^beta
        return -np.expm1(np.log1p(-stream.uniform(size)) / beta)
    if beta == 1.0:
        return stream.uniform(size) ** (1.0 / alpha)
    return stream.generator.beta(alpha, beta, size)


def sample_gamma(shape, rate, stream: RandomStream, size=None):
    """Gamma draw in the (shape, rate) parametrisation; mean ``shape / rate``."""
    if not (shape > 0 and rate > 0):
        raise ParameterDomainError(f"Gamma parameters must be positive, got ({shape}, {rate})")
    return stream.generator.standard_gamma(shape, size) / rate


def sample_dirichlet(params, stream: RandomStream, size=None):
    """Draw a Dirichlet weight vector by normalising independent Gammas.

    With ``size`` given, returns an array of shape ``(size, k)`` whose rows
    are independent draws.
    """
    params = np.asarray(params, dtype=float)
    if params.ndim != 1 or params.size == 0:
        raise ParameterDomainError("Dirichlet needs a nonempty parameter vector")
    if not np.all(params > 0) or not np.all(np.isfinite(params)):
        raise ParameterDomainError("Dirichlet parameters must be positive and finite")
    shape = params.shape if size is None else (size,) + params.shape
    if np.all(params == 1.0):
        g = stream.standard_exponential(shape)
    else:
        g = stream.generator.standard_gamma(np.broadcast_to(params, shape))
    return g / g.sum(axis=-1, keepdims=True)


def sample_binomial(m, p, stream: RandomStream, size=None):
    """Binomial(m, p) counts; ``m`` and ``p`` may be arrays of equal shape."""
    m_arr = np.asarray(m)
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0) or np.any(p_arr > 1) or np.any(~np.isfinite(p_arr)):
        raise ParameterDomainError("binomial probability must lie in [0, 1]")
    if np.any(m_arr < 0) or np.any(m_arr != np.floor(m_arr)):
        raise ParameterDomainError("binomial size must be a nonnegative integer")
    return stream.generator.binomial(m_arr.astype(np.int64), p_arr, size)


@dataclass(frozen=True)
class LatticeDistribution:
    """A distribution on ``{0/m, 1/m, ..., m/m}``."""

    m: int
    mass: np.ndarray

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        if self.m < 1 or mass.shape != (self.m + 1,):
            raise ParameterDomainError("lattice needs m >= 1 and m + 1 masses")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > 1e-12:
            raise ParameterDomainError("lattice masses must be nonnegative and sum to 1")
        object.__setattr__(self, "mass", mass)

    @classmethod
    def binomial(cls, m: int, p: float) -> "LatticeDistribution":
        """Distribution of Bin(m, p) / m."""
        if not 0 <= p <= 1:
            raise ParameterDomainError("p must lie in [0, 1]")
        mass = stats.binom.pmf(np.arange(m + 1), m, p)
        return cls(m, mass / mass.sum())

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.m

    def mean(self) -> float:
        return float(np.dot(self.support, self.mass))

    def variance(self) -> float:
        return float(np.dot((self.support - self.mean()) ** 2, self.mass))


class InterpolatedCdf:
    """Continuous, piecewise-linear CDF through given increasing knots."""

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, t):
        return np.interp(t, self.knots, self.values, left=0.0, right=1.0)

    def quantile(self, p):
        """Inverse of the interpolated CDF on ``(0, 1)``."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise ParameterDomainError("quantile level must lie in (0, 1)")
        return np.interp(p, self.values, self.knots)


def interpolated_cdf(dist: LatticeDistribution) -> InterpolatedCdf:
    """Midpoint-interpolated version of a lattice CDF.

    The knot at ``j/m`` takes the average of the step CDF just at and just
    below ``j/m``; boundary knots at ``-1/(2m)`` and ``1 + 1/(2m)`` carry the
    values 0 and 1.
    """
    m = dist.m
    step = np.cumsum(dist.mass)
    step[-1] = 1.0
    below = np.concatenate(([0.0], step[:-1]))
    mid = 0.5 * (step + below)
    knots = np.concatenate(([-0.5 / m], dist.support, [1.0 + 0.5 / m]))
    values = np.concatenate(([0.0], mid, [1.0]))
    return InterpolatedCdf(knots, values)
