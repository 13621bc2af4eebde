"""Dirichlet priors, the posterior-mean mixture CDF and plug-in functionals.

A Dir(a F0) prior combined with data x_1..x_n has posterior mean CDF

    F_nB(t) = a/(a+n) F0(t) + n/(a+n) F_n(t),

which is what :class:`MixtureCdf` represents.  Replicates of the random
distribution are carried around as :class:`WeightedAtoms`, and parameters
of interest are :class:`Functional` objects evaluated on those atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .distributions import RandomStream
from .errors import ArgumentOrderError, ParameterDomainError, UnsupportedPriorError


# ---------------------------------------------------------------------------
# prior guesses
# ---------------------------------------------------------------------------


class PriorGuess:
    """Base class for the prior guess distribution F0.

    Subclasses provide ``cdf``, ``inverse_cdf``, ``density`` and the first
    three central moments.  Sampling always goes through ``inverse_cdf`` of
    stream uniforms, which is what makes bootstrap output transform exactly
    under monotone maps of the data.
    """

    continuous = True
    name = "guess"

    def cdf(self, t):
        raise NotImplementedError

    def inverse_cdf(self, p):
        raise NotImplementedError

    def density(self, t):
        raise UnsupportedPriorError(f"{self.name} prior guess has no density")

    def sample(self, stream: RandomStream, size=None):
        return self.inverse_cdf(stream.uniform(size))

    @property
    def mean(self) -> float:
        raise UnsupportedPriorError(f"{self.name} prior guess has no closed-form mean")

    @property
    def variance(self) -> float:
        raise UnsupportedPriorError(f"{self.name} prior guess has no closed-form variance")

    @property
    def third_central_moment(self) -> float:
        raise UnsupportedPriorError(f"{self.name} prior guess has no closed-form third moment")

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class NormalGuess(PriorGuess):
    mu: float = 0.0
    sigma: float = 1.0
    name = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterDomainError("normal prior guess needs sigma > 0")

    def cdf(self, t):
        return special.ndtr((np.asarray(t, dtype=float) - self.mu) / self.sigma)

    def inverse_cdf(self, p):
        return self.mu + self.sigma * special.ndtri(p)

    def density(self, t):
        z = (np.asarray(t, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.sigma**2

    @property
    def third_central_moment(self):
        return 0.0


@dataclass(frozen=True)
class UniformGuess(PriorGuess):
    lo: float = 0.0
    hi: float = 1.0
    name = "uniform"

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ParameterDomainError("uniform prior guess needs lo < hi")

    def cdf(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def inverse_cdf(self, p):
        return self.lo + (self.hi - self.lo) * np.asarray(p, dtype=float)

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= self.lo) & (t <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    @property
    def mean(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def variance(self):
        return (self.hi - self.lo) ** 2 / 12.0

    @property
    def third_central_moment(self):
        return 0.0

    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class ExponentialGuess(PriorGuess):
    rate: float = 1.0
    name = "exp"

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterDomainError("exponential prior guess needs rate > 0")

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.maximum(t, 0.0)), 0.0)

    def inverse_cdf(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)), 0.0)

    def cumulative_hazard(self, t):
        return self.rate * np.maximum(np.asarray(t, dtype=float), 0.0)

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def variance(self):
        return 1.0 / self.rate**2

    @property
    def third_central_moment(self):
        return 2.0 / self.rate**3

    def support(self):
        return (0.0, math.inf)


class EmpiricalGuess(PriorGuess):
    """Step-function guess built from previously observed values."""

    continuous = False
    name = "empirical"

    def __init__(self, values, source: str | None = None):
        values = np.sort(np.asarray(values, dtype=float))
        if values.size == 0 or not np.all(np.isfinite(values)):
            raise ParameterDomainError("empirical prior guess needs finite values")
        self.values = values
        self.source = source

    @classmethod
    def from_file(cls, path: str) -> "EmpiricalGuess":
        return cls(read_table(path, ndmin=1).ravel(), source=str(path))

    def cdf(self, t):
        return np.searchsorted(self.values, t, side="right") / self.values.size

    def inverse_cdf(self, p):
        # inf{t : cdf(t) >= p}
        p = np.asarray(p, dtype=float)
        idx = np.ceil(p * self.values.size).astype(np.int64) - 1
        return self.values[np.clip(idx, 0, self.values.size - 1)]

    @property
    def mean(self):
        return float(self.values.mean())

    @property
    def variance(self):
        return float(self.values.var())

    @property
    def third_central_moment(self):
        return float(np.mean((self.values - self.values.mean()) ** 3))


class TransformedGuess(PriorGuess):
    """The guess of ``g(X)`` for ``X ~ base`` and strictly increasing ``g``.

    Used to carry a prior through a monotone change of data scale, e.g. a
    log-normal guess as ``exp`` of a normal one.
    """

    def __init__(self, base: PriorGuess, forward: Callable, inverse: Callable,
                 derivative: Callable | None = None, name: str = "transformed"):
        self.base = base
        self.forward = forward
        self.inverse = inverse
        self.derivative = derivative
        self.continuous = base.continuous
        self.name = name

    def _pullback(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.asarray(self.inverse(t), dtype=float)
        # points outside the range of g sit below or above all of the mass
        off = np.isnan(x)
        if off.any():
            centre = float(self.forward(self.base.inverse_cdf(0.5)))
            x = np.where(off, np.where(t < centre, -np.inf, np.inf), x)
        return x

    def cdf(self, t):
        return self.base.cdf(self._pullback(t))

    def inverse_cdf(self, p):
        return self.forward(self.base.inverse_cdf(p))

    def density(self, t):
        if self.derivative is None:
            return super().density(t)
        x = self._pullback(t)
        with np.errstate(invalid="ignore"):
            d = self.base.density(x) / self.derivative(x)
        return np.where(np.isfinite(x), d, 0.0)


def read_table(path, ndmin: int = 2) -> np.ndarray:
    """Numeric table from a CSV or whitespace file; a header row is skipped."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParameterDomainError(f"{path}: no data rows")
    delim = "," if "," in lines[0] else None
    try:
        [float(tok) for tok in lines[0].split(delim)]
    except ValueError:
        lines = lines[1:]
    try:
        return np.loadtxt(lines, delimiter=delim, dtype=float, ndmin=ndmin)
    except ValueError as exc:
        raise ParameterDomainError(f"{path}: {exc}") from None


def parse_prior(spec: str) -> PriorGuess:
    """Parse ``normal:MU,SIGMA``, ``uniform:L,U``, ``exp:RATE`` or ``empirical:PATH``."""
    family, _, args = spec.partition(":")
    family = family.strip().lower()
    if family == "empirical":
        if not args:
            raise ParameterDomainError("empirical prior needs a file path")
        return EmpiricalGuess.from_file(args)
    try:
        nums = [float(x) for x in args.split(",")] if args else []
    except ValueError:
        raise ParameterDomainError(f"bad prior parameters in {spec!r}") from None
    if family == "normal" and len(nums) == 2:
        return NormalGuess(*nums)
    if family == "uniform" and len(nums) == 2:
        return UniformGuess(*nums)
    if family in ("exp", "exponential") and len(nums) == 1:
        return ExponentialGuess(nums[0])
    raise ParameterDomainError(f"cannot parse prior spec {spec!r}")


# ---------------------------------------------------------------------------
# prior, data, mixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DirichletPrior:
    """Dir(a F0); ``a = 0`` is the noninformative limit."""

    a: float
    guess: PriorGuess = field(default_factory=NormalGuess)

    def __post_init__(self):
        if not (self.a >= 0 and math.isfinite(self.a)):
            raise ParameterDomainError(f"prior strength a must be finite and >= 0, got {self.a}")


class DataSample:
    """Sorted observations; ``cdf`` is the empirical CDF."""

    def __init__(self, values):
        values = np.sort(np.asarray(values, dtype=float).ravel())
        if values.size < 1:
            raise ParameterDomainError("need at least one observation")
        if not np.all(np.isfinite(values)):
            raise ParameterDomainError("observations must be finite")
        values.setflags(write=False)
        self.values = values

    @property
    def n(self) -> int:
        return self.values.size

    def cdf(self, t):
        return np.searchsorted(self.values, t, side="right") / self.n

    def mean(self) -> float:
        return float(self.values.mean())

    def variance(self) -> float:
        """Population (1/n) variance."""
        return float(self.values.var())

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"DataSample(n={self.n})"


def bb_size(n: int, a: float) -> tuple[int, float]:
    """Number of BB draws and weight of the last one.

    For integer ``a`` this is ``(n + a, 1.0)``; for ``a = m + beta`` with
    ``0 < beta < 1`` it is ``(n + m + 1, beta)``.
    """
    m = math.floor(a)
    frac = a - m
    if frac == 0.0:
        return n + int(m), 1.0
    return n + int(m) + 1, frac


class MixtureCdf:
    """Posterior-mean CDF ``(a F0 + n F_n) / (a + n)``."""

    def __init__(self, prior: DirichletPrior, data: DataSample):
        self.prior = prior
        self.data = data

    @property
    def a(self) -> float:
        return self.prior.a

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def prior_weight(self) -> float:
        return self.a / (self.a + self.n)

    def cdf(self, t):
        w = self.prior_weight
        fn = self.data.cdf(t)
        if w == 0.0:
            return fn
        return w * self.prior.guess.cdf(t) + (1.0 - w) * fn

    def prob(self, intervals) -> float:
        """F_nB mass of a union of half-open intervals ``(lo, hi]``."""
        return float(sum(self.cdf(hi) - self.cdf(lo) for lo, hi in _check_intervals(intervals)))

    def draw(self, stream: RandomStream, size: int):
        """``size`` draws plus a mask marking those taken from F0.

        Always consumes two uniforms per draw (one choosing the component,
        one inverted), so stream alignment does not depend on the data.
        """
        u = stream.uniform(size)
        v = stream.uniform(size)
        from_prior = u < self.prior_weight
        idx = np.minimum((v * self.n).astype(np.int64), self.n - 1)
        out = self.data.values[idx]
        if np.any(from_prior):
            out = out.copy()
            out[from_prior] = self.prior.guess.inverse_cdf(v[from_prior])
        return out, from_prior

    def sample(self, stream: RandomStream, size=None):
        k = 1 if size is None else int(size)
        out, _ = self.draw(stream, k)
        return float(out[0]) if size is None else out


def mixture_sample(mix: MixtureCdf, stream: RandomStream, size=None):
    """Draw from F_nB: F0 with probability a/(a+n), else a uniform data value."""
    return mix.sample(stream, size)


# ---------------------------------------------------------------------------
# weighted atoms and functionals
# ---------------------------------------------------------------------------


class WeightedAtoms:
    """Finite discrete distribution: atoms with weights summing to one."""

    __slots__ = ("atoms", "weights", "_sorted")

    def __init__(self, atoms, weights=None, check: bool = True):
        atoms = np.asarray(atoms, dtype=float).ravel()
        if weights is None:
            weights = np.full(atoms.size, 1.0 / atoms.size)
        weights = np.asarray(weights, dtype=float).ravel()
        if check:
            if atoms.size == 0 or atoms.shape != weights.shape:
                raise ParameterDomainError("atoms and weights must be nonempty and equally long")
            if not np.all(np.isfinite(atoms)):
                raise ParameterDomainError("atoms must be finite")
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise ParameterDomainError("weights must be nonnegative and sum to 1")
        self.atoms = atoms
        self.weights = weights
        self._sorted = None

    def sorted(self):
        """Atoms in ascending order with matching weights and cumulative weights."""
        if self._sorted is None:
            order = np.argsort(self.atoms, kind="stable")
            a = self.atoms[order]
            w = self.weights[order]
            self._sorted = (a, w, np.cumsum(w))
        return self._sorted

    def cdf(self, t):
        a, _, cw = self.sorted()
        idx = np.searchsorted(a, t, side="right")
        return np.where(idx > 0, cw[np.maximum(idx - 1, 0)], 0.0)

    def __len__(self):
        return self.atoms.size

    def __repr__(self):
        return f"WeightedAtoms(k={self.atoms.size})"


_CUM_TOL = 1e-12


def _quantile(w: WeightedAtoms, p: float) -> float:
    a, _, cw = w.sorted()
    # inf{t : cumweight(t) >= p}; the slack absorbs summation rounding
    i = int(np.searchsorted(cw, p - _CUM_TOL, side="left"))
    return float(a[min(i, a.size - 1)])


def _check_intervals(intervals):
    out = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if not lo <= hi:
            raise ParameterDomainError(f"interval ({lo}, {hi}] is reversed")
        out.append((lo, hi))
    return tuple(out)


class Functional:
    """A parameter theta(F), evaluable on any :class:`WeightedAtoms`."""

    name = "functional"

    def __call__(self, w: WeightedAtoms) -> float:
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Mean(Functional):
    name = "mean"

    def __call__(self, w):
        return float(np.dot(w.weights, w.atoms))


class Quantile(Functional):
    def __init__(self, p: float):
        if not 0 < p < 1:
            raise ParameterDomainError(f"quantile level must lie in (0, 1), got {p}")
        self.p = float(p)
        self.name = "median" if self.p == 0.5 else f"quantile:{self.p:g}"

    def __call__(self, w):
        return _quantile(w, self.p)


def Median() -> Quantile:
    return Quantile(0.5)


class StdDev(Functional):
    """Weighted population standard deviation."""

    name = "sd"

    def __call__(self, w):
        m = np.dot(w.weights, w.atoms)
        return float(math.sqrt(max(np.dot(w.weights, (w.atoms - m) ** 2), 0.0)))


class Variance(Functional):
    name = "var"

    def __call__(self, w):
        m = np.dot(w.weights, w.atoms)
        return float(np.dot(w.weights, (w.atoms - m) ** 2))


class Prob(Functional):
    """F(A) for A a finite union of half-open intervals ``(lo, hi]``."""

    def __init__(self, intervals: Sequence[tuple[float, float]]):
        self.intervals = _check_intervals(intervals)
        self.name = "prob:" + ";".join(f"{lo:g},{hi:g}" for lo, hi in self.intervals)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            inside |= (x > lo) & (x <= hi)
        return inside

    def __call__(self, w):
        return float(np.sum(w.weights[self.contains(w.atoms)]))


class MAD(Functional):
    """Mean absolute deviation about the (inf-definition) median."""

    name = "mad"

    def __call__(self, w):
        med = _quantile(w, 0.5)
        return float(np.dot(w.weights, np.abs(w.atoms - med)))


class Plugin(Functional):
    """Wrap an arbitrary ``fn(atoms, weights) -> float``."""

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray], float], name: str = "plugin"):
        self.fn = fn
        self.name = name

    def __call__(self, w):
        return float(self.fn(w.atoms, w.weights))


def eval_functional(f: Functional, w: WeightedAtoms) -> float:
    return f(w)


def parse_functional(spec: str) -> Functional:
    """``mean | median | sd | var | mad | quantile:P | prob:L,U[;L,U...]``."""
    head, _, args = spec.strip().partition(":")
    head = head.lower()
    try:
        if head == "mean":
            return Mean()
        if head == "median":
            return Median()
        if head in ("sd", "stddev"):
            return StdDev()
        if head in ("var", "variance"):
            return Variance()
        if head == "mad":
            return MAD()
        if head == "quantile":
            return Quantile(float(args))
        if head == "prob":
            pieces = [p.split(",") for p in args.split(";") if p]
            return Prob([(float(lo), float(hi)) for lo, hi in pieces])
    except ValueError:
        pass
    raise ParameterDomainError(f"cannot parse functional spec {spec!r}")


# ---------------------------------------------------------------------------
# closed-form posterior moments
# ---------------------------------------------------------------------------


def posterior_cov(mix: MixtureCdf, s: float, t: float) -> tuple[float, float]:
    """Covariance of (F(s), F(t)) under the exact posterior and under the BB."""
    if s > t:
        raise ArgumentOrderError(f"posterior_cov needs s <= t, got s={s}, t={t}")
    num = float(mix.cdf(s) * (1.0 - mix.cdf(t)))
    m = mix.n + mix.a
    return num / (m + 1.0), num / m


def posterior_skew(mix: MixtureCdf, t: float) -> tuple[float, float]:
    """Third central moment of F(t): exact posterior and BB."""
    f = float(mix.cdf(t))
    core = f * (1.0 - f) * (1.0 - 2.0 * f)
    m = mix.n + mix.a
    return 2.0 * core / ((m + 1.0) * (m + 2.0)), core / m**2


def _prior_mixture_terms(mix: MixtureCdf):
    a, n = mix.a, mix.n
    xbar = mix.data.mean()
    vn = mix.data.variance()
    if a == 0:
        return a, n, xbar, vn, 0.0, 0.0
    g = mix.prior.guess
    return a, n, xbar, vn, g.mean, g.variance


def mean_posterior_moments(mix: MixtureCdf) -> tuple[float, float]:
    """Exact posterior mean and variance of the mean functional."""
    a, n, xbar, vn, m0, v0 = _prior_mixture_terms(mix)
    s = a + n
    nu0 = (a * m0 + n * xbar) / s
    bracket = (a / s) * v0 + (n / s) * vn + (a / s) * (n / s) * (xbar - m0) ** 2
    return nu0, bracket / (s + 1.0)


def variance_posterior_expectation(mix: MixtureCdf) -> float:
    """Exact posterior expectation of the variance functional sigma^2(F)."""
    a, n, xbar, vn, m0, v0 = _prior_mixture_terms(mix)
    s = a + n
    bracket = (a / s) * v0 + (n / s) * vn + (a / s) * (n / s) * (xbar - m0) ** 2
    return s / (s + 1.0) * bracket
