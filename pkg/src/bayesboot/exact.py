"""Exact posteriors for a set probability and for the median.

Both are available in closed form under a Dirichlet process prior and serve
as oracles for the bootstrap approximations, which are provided alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special, stats

from .distributions import InterpolatedCdf, LatticeDistribution, interpolated_cdf
from .errors import DegeneratePosteriorError, ParameterDomainError, TiesUnsupportedError, UnsupportedPriorError
from .model import DataSample, DirichletPrior, MixtureCdf, Prob, bb_size
from .quadrature import log_quad_J

# ---------------------------------------------------------------------------
# set probabilities
# ---------------------------------------------------------------------------


def _guess_prob(prior: DirichletPrior, intervals) -> float:
    g = prior.guess
    return float(sum(g.cdf(hi) - g.cdf(lo) for lo, hi in intervals))


def prob_posterior(prior: DirichletPrior, data: DataSample | None, intervals) -> tuple[float, float]:
    """Beta parameters of the posterior of ``F(A)``, ``A`` a union of ``(lo, hi]``.

    ``data=None`` gives the prior law of ``F(A)``.
    """
    ind = Prob(intervals)
    k = 0 if data is None else int(np.count_nonzero(ind.contains(data.values)))
    n = 0 if data is None else data.n
    a = prior.a
    if a + n == 0:
        raise DegeneratePosteriorError("need a > 0 or at least one observation")
    if a == 0:
        if k in (0, n):
            raise DegeneratePosteriorError(
                f"with a=0 the set must hold some but not all data points (holds {k} of {n})")
        return float(k), float(n - k)
    f0 = _guess_prob(prior, ind.intervals)
    alpha = a * f0 + k
    beta = a * (1.0 - f0) + n - k
    if not (alpha > 0 and beta > 0):
        raise DegeneratePosteriorError(f"posterior Beta({alpha}, {beta}) is degenerate")
    return alpha, beta


@dataclass(frozen=True)
class BinomialApprox:
    """Law of ``Bin(m, p) / m`` with its midpoint-interpolated CDF."""

    lattice: LatticeDistribution
    interpolated: InterpolatedCdf
    p: float

    @property
    def m(self) -> int:
        return self.lattice.m

    def __call__(self, t):
        return self.interpolated(t)

    def mean(self) -> float:
        return self.lattice.mean()

    def variance(self) -> float:
        return self.lattice.variance()


def binomial_approx(m: int, p: float) -> BinomialApprox:
    lat = LatticeDistribution.binomial(int(m), float(p))
    return BinomialApprox(lat, interpolated_cdf(lat), float(p))


def bb_prob_approx(prior: DirichletPrior, data: DataSample, intervals) -> BinomialApprox:
    """BB approximation of the posterior of ``F(A)``: ``Bin(n + a, F_nB(A)) / (n + a)``.

    A fractional ``a`` is rounded up, matching the number of BB draws.
    """
    mix = MixtureCdf(prior, data)
    p = min(max(mix.prob(Prob(intervals).intervals), 0.0), 1.0)
    m = data.n + math.ceil(prior.a)
    return binomial_approx(m, p)


def ks_beta_vs_binomial(m: int, p: float, points: int = 4001) -> float:
    """Sup distance between Beta(mp, m(1-p)) and the interpolated Bin(m, p)/m.

    The interpolated CDF is piecewise linear, so the sup over each linear
    piece is found on a fine grid plus all knots.
    """
    approx = binomial_approx(m, p)
    grid = np.union1d(np.linspace(0.0, 1.0, points), approx.interpolated.knots.clip(0, 1))
    exact = stats.beta.cdf(grid, m * p, m * (1.0 - p))
    return float(np.max(np.abs(exact - approx(grid))))


# ---------------------------------------------------------------------------
# the median
# ---------------------------------------------------------------------------


class MedianPosterior:
    """Exact posterior of the median: atoms on the data plus a density.

    Parameters
    ----------
    prior : DirichletPrior
        For ``a > 0`` the guess must have a density.
    data : DataSample
        Distinct observations.
    """

    def __init__(self, prior: DirichletPrior, data: DataSample):
        x = data.values
        if np.any(np.diff(x) == 0):
            raise TiesUnsupportedError("the exact median posterior needs distinct data")
        self.prior = prior
        self.data = data
        a, n = prior.a, data.n
        j = np.arange(1, n + 1)
        if a == 0:
            denom = 2 ** (n - 1)
            self.masses = np.array([float(Fraction(math.comb(n - 1, k - 1), denom)) for k in j])
        else:
            if not prior.guess.continuous:
                raise UnsupportedPriorError("the exact median posterior needs a continuous prior guess")
            f0 = np.asarray(prior.guess.cdf(x), dtype=float)
            logm = (special.gammaln(a + n) - special.gammaln(a * f0 + j)
                    - special.gammaln(a * (1.0 - f0) + n - j + 1) - (a + n - 1) * math.log(2.0))
            self.masses = np.exp(logm)

    @property
    def atoms(self) -> np.ndarray:
        return self.data.values

    def _log_density_u(self, u: float, j: int) -> float:
        # density per unit of u = F0(t), for t with exactly j data points <= t
        a, n = self.prior.a, self.data.n
        al = a * u + j
        ga = a * (1.0 - u) + n - j
        return (math.lgamma(a + n) - math.lgamma(al) - math.lgamma(ga)
                + math.log(a) + log_quad_J(al, ga))

    def density(self, t) -> np.ndarray:
        """Continuous part ``g_n(t)``; zero when ``a = 0``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape)
        if self.prior.a == 0:
            return out
        g = self.prior.guess
        u = np.asarray(g.cdf(t), dtype=float)
        f = np.asarray(g.density(t), dtype=float)
        j = np.searchsorted(self.data.values, t, side="right")
        for i in range(t.size):
            if f[i] > 0 and 0 < u[i] < 1:
                out[i] = f[i] * math.exp(self._log_density_u(float(u[i]), int(j[i])))
        return out

    def _gaps(self):
        u = np.concatenate(([0.0], np.asarray(self.prior.guess.cdf(self.data.values), float), [1.0]))
        return u

    def _panel(self, j: int, lo: float, hi: float, order: int) -> float:
        xi, wi = np.polynomial.legendre.leggauss(order)
        nodes = lo + 0.5 * (hi - lo) * (xi + 1.0)
        vals = np.array([math.exp(self._log_density_u(float(v), j)) for v in nodes])
        return 0.5 * (hi - lo) * float(wi @ vals)

    def _gap_masses(self, order: int) -> np.ndarray:
        cache = self.__dict__.setdefault("_gap_cache", {})
        if order not in cache:
            u = self._gaps()
            cache[order] = np.array([self._panel(j, u[j], u[j + 1], order) if u[j + 1] > u[j] else 0.0
                                     for j in range(self.data.n + 1)])
        return cache[order]

    def continuous_mass(self, order: int = 24, upto: float | None = None) -> float:
        """Integral of the density, by Gauss-Legendre in the ``u = F0(t)`` scale.

        Each gap between consecutive data points (and each tail) is one
        panel; the integrand is smooth within a panel.
        """
        if self.prior.a == 0:
            return 0.0
        full = self._gap_masses(order)
        if upto is None:
            return float(full.sum())
        u = self._gaps()
        cut = float(self.prior.guess.cdf(upto))
        j = int(np.searchsorted(u, cut, side="right")) - 1
        total = float(full[:j].sum())
        if 0 <= j <= self.data.n and cut > u[j]:
            total += self._panel(j, u[j], cut, order)
        return total

    def total_mass(self, order: int = 24) -> float:
        return float(self.masses.sum()) + self.continuous_mass(order)

    def cdf(self, t: float, order: int = 24) -> float:
        atoms = float(self.masses[self.data.values <= t].sum())
        return atoms + self.continuous_mass(order, upto=t)


def median_posterior(prior: DirichletPrior, data: DataSample) -> MedianPosterior:
    return MedianPosterior(prior, data)


def bb_median_cdf(prior: DirichletPrior, data: DataSample, t: float) -> float:
    """``Pr(BB median <= t)``, the BB median being ``inf{s : F*(s) >= 1/2}``.

    With ``N`` draws of which the last has weight ``beta`` (``beta = 1`` for
    integer ``a``), ``F*(t) = (K + beta L) / (n + a)`` with ``K ~ Bin(N-1, p)``,
    ``L ~ Bern(p)`` and ``p = F_nB(t)``.  For integer ``n + a`` this is
    ``Pr[Bin(n + a, p) >= ceil((n + a) / 2)]``.
    """

    mix = MixtureCdf(prior, data)
    p = float(min(max(mix.cdf(t), 0.0), 1.0))
    size, beta = bb_size(data.n, prior.a)
    half = 0.5 * (data.n + prior.a)

    def tail(x):  # Pr[K >= x]
        k = math.ceil(x - 1e-12)
        return float(stats.binom.sf(k - 1, size - 1, p))

    return p * tail(half - beta) + (1.0 - p) * tail(half)
