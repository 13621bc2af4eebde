"""Moment-based fitting of the prior strength ``a`` and of the prior guess.

Under Dir(a F0) the data satisfy

    E int (F_n - F0)^2 dF0 = (1/n) (1 + (n-1)/(a+1)) int F0 (1 - F0) dF0,

and the last integral is 1/6 for every continuous F0.  Matching the observed
discrepancy ``D`` to this expectation gives ``a``.  Given ``a``, the sample
variance and third moment determine the scale and skewness of F0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import RandomStream, sample_dirichlet
from .errors import InsufficientDataError, ParameterDomainError, UnsupportedPriorError
from .model import DataSample, DirichletPrior, EmpiricalGuess, NormalGuess, PriorGuess, WeightedAtoms

A_MAX = 1e6


@dataclass(frozen=True)
class EBFitResult:
    """Fitted prior strength; ``a = inf`` when the data fit F0 too well."""

    a: float
    discrepancy: float
    n: int
    clamped: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def infinite(self) -> bool:
        return math.isinf(self.a)

    def as_dict(self) -> dict:
        return {"a": "inf" if self.infinite else self.a, "D": self.discrepancy, "n": self.n,
                "clamped": self.clamped, **self.diagnostics}


def discrepancy(data: DataSample, guess: PriorGuess) -> float:
    """``D = int (F_n - F0)^2 dF0``, exact in the ``u = F0(x)`` scale."""
    if not guess.continuous:
        raise UnsupportedPriorError("fitting a needs a continuous prior guess")
    u = np.sort(np.asarray(guess.cdf(data.values), dtype=float))
    n = u.size
    edges = np.concatenate(([0.0], u, [1.0]))
    level = np.arange(n + 1) / n
    # (F_n - u) is linear in u on each piece, so each piece integrates exactly
    hi = edges[1:] - level
    lo = edges[:-1] - level
    return float(np.sum(hi**3 - lo**3) / 3.0)


def expected_discrepancy(n: int, a: float) -> float:
    """Prior expectation of ``D`` under Dir(a F0), continuous F0."""
    if math.isinf(a):
        return 1.0 / (6.0 * n)
    return (1.0 + (n - 1.0) / (a + 1.0)) / (6.0 * n)


def fit_a_from_discrepancy(d: float, n: int, a_max: float = A_MAX) -> EBFitResult:
    """Invert ``expected_discrepancy(n, a) = d`` for ``a``."""
    if n < 2:
        raise InsufficientDataError("fitting a needs at least two observations")
    excess = 6.0 * n * d - 1.0
    diag = {"D_at_a0": expected_discrepancy(n, 0.0), "D_at_inf": expected_discrepancy(n, math.inf)}
    if excess <= 0:
        return EBFitResult(math.inf, d, n, clamped=True, diagnostics=diag)
    a = (n - 1.0) / excess - 1.0
    clamped = False
    if a < 0:
        a, clamped = 0.0, True
    elif a > a_max:
        a, clamped = a_max, True
    return EBFitResult(a, d, n, clamped=clamped, diagnostics=diag)


def fit_a(data: DataSample, guess: PriorGuess, a_max: float = A_MAX) -> EBFitResult:
    """Moment estimate of the prior strength ``a`` for a fixed continuous guess."""
    if data.n < 2:
        raise InsufficientDataError("fitting a needs at least two observations")
    return fit_a_from_discrepancy(discrepancy(data, guess), data.n, a_max)


def weight_integral(guess: PriorGuess) -> float:
    """``int F0 (1 - F0) dF0`` by adaptive quadrature; 1/6 for continuous F0."""
    lo, hi = guess.support()

    def f(x):
        u = float(guess.cdf(x))
        return u * (1.0 - u) * float(guess.density(x))

    # split at the median so the bulk is never missed on infinite ranges
    mid = float(guess.inverse_cdf(0.5))
    left, _ = integrate.quad(f, lo, mid, epsabs=1e-14, epsrel=1e-12, limit=200)
    right, _ = integrate.quad(f, mid, hi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return left + right


# ---------------------------------------------------------------------------
# prior guess parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorFit:
    family: str
    a: float
    mean: float
    variance: float
    third_moment: float | None = None

    @property
    def guess(self) -> PriorGuess:
        if self.family == "normal":
            return NormalGuess(self.mean, math.sqrt(self.variance))
        raise UnsupportedPriorError(f"no guess object for family {self.family!r}")

    def as_dict(self) -> dict:
        out = {"family": self.family, "a": self.a, "mean": self.mean, "variance": self.variance}
        if self.third_moment is not None:
            out["third_moment"] = self.third_moment
        return out


def sample_third_moment(data: DataSample) -> float:
    """Unbiased-form third moment ``n / ((n-1)(n-2)) sum (x - xbar)^3``."""
    n = data.n
    if n < 3:
        raise InsufficientDataError("the third-moment equation needs n >= 3")
    d = data.values - data.mean()
    return float(n / ((n - 1.0) * (n - 2.0)) * np.sum(d**3))


def fit_prior_params(data: DataSample, family: str = "normal", a: float = 1.0,
                     match_skew: bool = False) -> PriorFit:
    """Fit F0's location, scale (and third moment) given ``a``.

    ``family="normal"`` returns mean and variance; ``family="general"``
    also solves the third-moment equation.  Asking a normal family to match
    skewness warns, as it has no free third moment.
    """
    if not a > 0:
        raise ParameterDomainError("the prior scale is undefined for a <= 0")
    if data.n < 2:
        raise InsufficientDataError("fitting F0 needs at least two observations")
    s2 = float(data.values.var(ddof=1))
    factor = 1.0 if math.isinf(a) else (a + 1.0) / a
    mean, var = data.mean(), factor * s2
    if family == "normal":
        if match_skew:
            warnings.warn("normal family has zero third moment; skewness equation ignored",
                          stacklevel=2)
        return PriorFit("normal", a, mean, var)
    if family == "general":
        k3 = sample_third_moment(data)
        skew_factor = 1.0 if math.isinf(a) else (a + 1.0) * (a + 2.0) / a**2
        return PriorFit("general", a, mean, var, k3 * skew_factor)
    raise ParameterDomainError(f"unknown family {family!r}; choose normal or general")


# ---------------------------------------------------------------------------
# cross-validation split
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CVSplit:
    """Training points define Dir(a F_a); the rest update it."""

    prior: DirichletPrior
    train: np.ndarray
    test: np.ndarray

    @property
    def posterior_atoms(self) -> np.ndarray:
        """Atoms of ``a F_a + (n-a) F_{n-a}``, each with unit mass."""
        return np.concatenate((self.train, self.test))

    def replicate(self, stream: RandomStream) -> WeightedAtoms:
        """Flat-Dirichlet draw from the posterior Dir(a F_a + (n-a) F_{n-a})."""
        atoms = self.posterior_atoms
        return WeightedAtoms(atoms, sample_dirichlet(np.ones(atoms.size), stream), check=False)


def cv_split(data: DataSample, a: int, stream: RandomStream) -> CVSplit:
    """Randomly hold out ``a`` points as a training set for the prior guess."""
    n = data.n
    if int(a) != a or not 1 <= a <= n - 1:
        raise ParameterDomainError(f"a must be an integer in [1, n-1], got {a}")
    a = int(a)
    perm = stream.generator.permutation(n)
    train = data.values[np.sort(perm[:a])]
    test = data.values[np.sort(perm[a:])]
    split = CVSplit(DirichletPrior(float(a), EmpiricalGuess(train, source="cv")), train, test)
    if not np.array_equal(np.sort(split.posterior_atoms), data.values):
        raise AssertionError("posterior measure differs from the full data")
    return split
