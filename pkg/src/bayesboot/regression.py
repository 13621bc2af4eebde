"""Bayesian bootstrap for the linear model with unknown residual distribution.

Model: ``y_i = x_i' beta + sigma * eps_i`` with ``eps_i ~ F`` and
``F ~ Dir(a Phi)``.  Under a flat prior on ``beta`` and ``log sigma`` the
posterior of ``(beta, sigma)`` is the normal-theory one, and given
``(beta, sigma)`` the residual law is Dir(a Phi + sum delta(eps_i)).
A replicate draws ``(beta*, sigma*)`` and then ``n + a`` residuals from the
conditional posterior mean of F.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .distributions import RandomStream, sample_gamma
from .engine import PosteriorDraws, bb_weights, map_replicates
from .errors import DegeneratePosteriorError, ParameterDomainError, SingularDesignError
from .model import (
    DataSample,
    DirichletPrior,
    MixtureCdf,
    NormalGuess,
    WeightedAtoms,
    _quantile,
    read_table,
)

_COND_LIMIT = 1e12


class RegressionData:
    """Design matrix ``X`` (n x p) and responses ``y``."""

    def __init__(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ParameterDomainError("X must be n x p with one response per row")
        n, p = X.shape
        if not n > p:
            raise ParameterDomainError(f"need n > p, got n={n}, p={p}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ParameterDomainError("design and responses must be finite")
        if np.unique(y).size < n:
            warnings.warn("tied responses: the residual posterior assumes distinct y", stacklevel=2)
        X.setflags(write=False)
        y.setflags(write=False)
        self.X = X
        self.y = y

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_csv(cls, path: str, intercept: bool = False) -> "RegressionData":
        """Read rows ``y,x1,...,xp``; optionally prepend a column of ones."""
        arr = read_table(path)
        y, X = arr[:, 0], arr[:, 1:]
        if intercept:
            X = np.column_stack((np.ones(len(y)), X))
        return cls(X, y)


@dataclass(frozen=True)
class RegressionFit:
    beta: np.ndarray
    sigma2: float
    residuals: np.ndarray
    leverage: np.ndarray  # h_i^2 = x_i' M^-1 x_i / n
    M_inv: np.ndarray
    condition: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def h(self) -> np.ndarray:
        return np.sqrt(self.leverage)


def least_squares(data: RegressionData) -> RegressionFit:
    """Least squares with the ``n - p`` variance divisor."""
    X, y, n, p = data.X, data.y, data.n, data.p
    M = X.T @ X / n
    cond = float(np.linalg.cond(M))
    if not cond < _COND_LIMIT:
        raise SingularDesignError(f"design is singular (condition number {cond:.3g})")
    M_inv = np.linalg.inv(M)
    beta = np.linalg.solve(M, X.T @ y / n)
    resid = y - X @ beta
    sigma2 = float(resid @ resid / (n - p))
    if sigma2 == 0.0 or sigma2 < 1e-28 * max(float(y @ y) / n, 1e-300):
        warnings.warn("residual variance is zero; sigma posterior is degenerate", stacklevel=2)
        sigma2 = 0.0
    lev = np.einsum("ij,jk,ik->i", X, M_inv, X) / n
    return RegressionFit(beta, sigma2, resid, lev, M_inv, cond)


# ---------------------------------------------------------------------------
# posterior mean residual density
# ---------------------------------------------------------------------------


def residual_density(t, e, h, a: float):
    """``a/(a+n) phi(t) + 1/(a+n) sum phi((t - e_i)/h_i)/h_i``."""
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), e.shape)
    if np.any(h <= 0):
        raise ParameterDomainError("kernel widths must be positive")
    if not a >= 0:
        raise ParameterDomainError("a must be >= 0")
    n = e.size
    z = (t[..., None] - e) / h
    kern = np.sum(np.exp(-0.5 * z * z) / h, axis=-1) / math.sqrt(2.0 * math.pi)
    phi = np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    return (a * phi + kern) / (a + n)


def posterior_residual_density(fit: RegressionFit, a: float, t, sigma: float | None = None):
    """Posterior mean density of the standardised residual at ``t``.

    ``sigma`` is treated as known; it defaults to the fitted ``sigma``.
    """
    s = fit.sigma if sigma is None else float(sigma)
    if not s > 0:
        raise DegeneratePosteriorError("sigma must be positive")
    return residual_density(t, fit.residuals / s, fit.h, a)


# ---------------------------------------------------------------------------
# replicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionReplicate:
    beta: np.ndarray
    sigma: float
    residuals: WeightedAtoms
    from_prior: np.ndarray

    def pseudo_responses(self, data: RegressionData) -> np.ndarray:
        """``y_i* = x_i' beta* + sigma* eps_i*`` for the first ``n`` residual draws."""
        eps = self.residuals.atoms
        if eps.size < data.n:
            raise ParameterDomainError("replicate has fewer residuals than observations")
        return data.X @ self.beta + self.sigma * eps[: data.n]


def draw_beta_sigma(data: RegressionData, fit: RegressionFit, stream: RandomStream):
    """``(beta*, sigma*)`` from the vague-prior posterior."""
    if not fit.sigma2 > 0:
        raise DegeneratePosteriorError("cannot draw sigma when the fitted variance is zero")
    n, p = data.n, data.p
    k = 0.5 * (n - p)
    prec = float(sample_gamma(k, k * fit.sigma2, stream))
    sigma = 1.0 / math.sqrt(prec)
    chol = np.linalg.cholesky(fit.M_inv / n)
    beta = fit.beta + sigma * (chol @ stream.standard_normal(p))
    return beta, sigma


def informative_bb_replicate(data: RegressionData, fit: RegressionFit, a: float,
                             stream: RandomStream) -> RegressionReplicate:
    """One replicate with residuals drawn from ``(a Phi + sum delta(eps_i)) / (a + n)``."""
    if not a >= 0:
        raise ParameterDomainError("a must be >= 0")
    beta, sigma = draw_beta_sigma(data, fit, stream)
    eps = (data.y - data.X @ beta) / sigma
    mix = MixtureCdf(DirichletPrior(float(a), NormalGuess()), DataSample(eps))
    w = bb_weights(data.n, a)
    atoms, from_prior = mix.draw(stream, w.size)
    return RegressionReplicate(beta, sigma, WeightedAtoms(atoms, w / w.sum(), check=False), from_prior)


def vague_bb_replicate(data: RegressionData, fit: RegressionFit,
                       stream: RandomStream) -> RegressionReplicate:
    """Vague-prior replicate: ``a -> 0``, residuals resampled from the ``n`` values."""
    return informative_bb_replicate(data, fit, 0.0, stream)


# ---------------------------------------------------------------------------
# functionals of (beta, sigma, F)
# ---------------------------------------------------------------------------


class RegressionFunctional:
    name = "regression-functional"

    def __call__(self, rep: RegressionReplicate) -> float:
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Decile(RegressionFunctional):
    """``x' beta + sigma F^-1(j / 10)``."""

    def __init__(self, x, j: int):
        if not 1 <= j <= 9:
            raise ParameterDomainError("decile index must be in 1..9")
        self.x = np.asarray(x, dtype=float)
        self.j = int(j)
        self.name = f"decile:{self.j}"

    def __call__(self, rep):
        return float(self.x @ rep.beta + rep.sigma * _quantile(rep.residuals, self.j / 10.0))


class ProbLe(RegressionFunctional):
    """``Pr{Y(x) <= y} = F((y - x' beta) / sigma)``."""

    def __init__(self, x, y: float):
        self.x = np.asarray(x, dtype=float)
        self.y = float(y)
        self.name = f"prob-le:{self.y:g}"

    def __call__(self, rep):
        z = (self.y - self.x @ rep.beta) / rep.sigma
        return float(rep.residuals.cdf(z))


class AbsDev(RegressionFunctional):
    """``E|Y(x) - x' beta| = sigma * int |e| dF``; the same for every ``x``."""

    def __init__(self, x=None):
        self.x = None if x is None else np.asarray(x, dtype=float)
        self.name = "absdev"

    def __call__(self, rep):
        r = rep.residuals
        return float(rep.sigma * np.dot(np.abs(r.atoms), r.weights))


def parse_regression_functional(spec: str, x) -> RegressionFunctional:
    """``decile:J``, ``prob-le:Y`` or ``absdev`` at covariate vector ``x``."""
    name, _, arg = spec.partition(":")
    try:
        if name == "decile":
            return Decile(x, int(arg))
        if name == "prob-le":
            return ProbLe(x, float(arg))
    except ValueError:
        raise ParameterDomainError(f"bad argument in {spec!r}") from None
    if name == "absdev" and not arg:
        return AbsDev(x)
    raise ParameterDomainError(f"cannot parse regression functional {spec!r}")


def run_regression(data: RegressionData, f: RegressionFunctional, a: float = 0.0,
                   boot: int = 1000, seed: int = 0, workers: int = 1) -> PosteriorDraws:
    fit = least_squares(data)
    x = getattr(f, "x", None)
    if x is not None and x.shape != (data.p,):
        raise ParameterDomainError(f"covariate vector must have length {data.p}")
    vals = map_replicates(lambda s: f(informative_bb_replicate(data, fit, a, s)), boot, seed, workers)
    return PosteriorDraws(vals, seed=seed, scheme="regression-bb", meta={"functional": f.name, "a": a})
