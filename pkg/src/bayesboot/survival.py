"""Right-censored data on the cumulative hazard scale.

Estimators (Nelson-Aalen, Kaplan-Meier), the weird bootstrap, Beta process
posteriors with their discretised simulation, the weird Bayesian bootstrap
and the censored resampling BB.

A cumulative hazard is represented by its jumps (:class:`HazardPath`).  The
continuous part of a prior guess hazard is discretised on a grid with
``resolution`` cells per gap between distinct observation times; each cell
contributes one jump at its midpoint.  The discrete hazard of a cell
``(u, v]`` is ``(F0(v) - F0(u)) / (1 - F0(u))``, so the product integral of
the prior jumps reproduces F0 exactly at cell edges.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import RandomStream
from .engine import PosteriorDraws, map_replicates
from .errors import InsufficientDataError, ParameterDomainError, UnsupportedPriorError
from .model import PriorGuess, bb_size, read_table

DEFAULT_RESOLUTION = 20


class SurvivalData:
    """Observations ``(X_i, delta_i)`` with optional case weights.

    Weights are one for observed data; resampled data sets may carry a
    fractional last weight.  At tied times events are counted before
    censorings.
    """

    def __init__(self, times, events, weights=None):
        times = np.asarray(times, dtype=float).ravel()
        events = np.asarray(events).ravel()
        if times.shape != events.shape:
            raise ParameterDomainError("times and events must have equal length")
        if not np.all(np.isin(events, (0, 1))):
            raise ParameterDomainError("event indicators must be 0 or 1")
        if np.any(times < 0) or np.any(np.isnan(times)):
            raise ParameterDomainError("times must be nonnegative")
        if weights is None:
            weights = np.ones(times.size)
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != times.shape or np.any(weights <= 0):
            raise ParameterDomainError("weights must be positive, one per observation")
        order = np.lexsort((1 - events, times))
        self.times = times[order]
        self.events = events[order].astype(bool)
        self.weights = weights[order]
        for arr in (self.times, self.events, self.weights):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def integer_weights(self) -> bool:
        return bool(np.all(self.weights == np.round(self.weights)))

    @classmethod
    def from_csv(cls, path: str) -> "SurvivalData":
        """Read rows ``time,event``."""
        arr = read_table(path)
        if arr.shape[1] != 2:
            raise ParameterDomainError("survival CSV needs two columns: time,event")
        return cls(arr[:, 0], arr[:, 1].astype(int))

    def risk_table(self):
        """Distinct times with event weight, censor weight and at-risk weight."""
        t, idx = np.unique(self.times, return_inverse=True)
        d = np.bincount(idx, weights=self.weights * self.events, minlength=t.size)
        c = np.bincount(idx, weights=self.weights * ~self.events, minlength=t.size)
        removed = d + c
        # at risk just before t_k: total weight minus everything strictly earlier
        Y = self.weights.sum() - np.concatenate(([0.0], np.cumsum(removed)[:-1]))
        Y = np.where(np.abs(Y - np.round(Y)) < 1e-9, np.round(Y), Y)
        return t, d, c, Y

    def counting(self, t):
        """``N_n(t)`` and ``Y_n(t)`` at the points ``t``."""
        t = np.asarray(t, dtype=float)
        ev = self.times[self.events]
        wev = self.weights[self.events]
        cum_ev = np.concatenate(([0.0], np.cumsum(wev)))
        N = cum_ev[np.searchsorted(ev, t, side="right")]
        cum_all = np.concatenate(([0.0], np.cumsum(self.weights)))
        Y = cum_all[-1] - cum_all[np.searchsorted(self.times, t, side="left")]
        return N, Y

    def __repr__(self):
        return f"SurvivalData(n={self.n}, events={int(self.events.sum())})"


class HazardPath:
    """Cumulative hazard with jumps in ``[0, 1]`` at strictly increasing times."""

    def __init__(self, times, jumps, check: bool = True):
        times = np.asarray(times, dtype=float).ravel()
        jumps = np.asarray(jumps, dtype=float).ravel()
        if check:
            if times.shape != jumps.shape:
                raise ParameterDomainError("times and jumps must have equal length")
            if np.any(np.diff(times) <= 0):
                raise ParameterDomainError("jump times must be strictly increasing")
            if np.any(jumps < 0) or np.any(jumps > 1):
                raise ParameterDomainError("hazard jumps must lie in [0, 1]")
        self.times = times
        self.jumps = jumps
        self._surv = None

    def _index(self, t):
        return np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")

    def cumulative(self, t):
        """``A(t)``: sum of jumps at times ``<= t``."""
        cum = np.concatenate(([0.0], np.cumsum(self.jumps)))
        return cum[self._index(t)]

    @property
    def survival_steps(self) -> np.ndarray:
        if self._surv is None:
            self._surv = np.concatenate(([1.0], np.cumprod(1.0 - self.jumps)))
        return self._surv

    def cdf(self, t):
        """Product-integral CDF ``1 - prod_{s <= t} (1 - dA(s))``."""
        return 1.0 - self.survival_steps[self._index(t)]

    def median(self) -> float:
        """``inf{t : F(t) >= 1/2}``; ``inf`` if never reached."""
        F = 1.0 - self.survival_steps[1:]
        hit = np.flatnonzero(F >= 0.5)
        return float(self.times[hit[0]]) if hit.size else math.inf

    def __len__(self):
        return self.times.size

    def __repr__(self):
        return f"HazardPath(jumps={self.times.size})"


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def nelson_aalen(data: SurvivalData) -> HazardPath:
    """Jumps ``dN_n / Y_n`` at the observed event times."""
    if data.n < 1:
        raise InsufficientDataError("need at least one observation")
    t, d, _, Y = data.risk_table()
    keep = d > 0
    return HazardPath(t[keep], d[keep] / Y[keep])


@dataclass(frozen=True)
class StepCdf:
    """Right-continuous step CDF with values ``values[k]`` on ``[times[k], times[k+1])``."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        idx = np.searchsorted(self.times, np.asarray(t, dtype=float), side="right")
        return np.concatenate(([0.0], self.values))[idx]


def _km(times, d, c, Y, total) -> np.ndarray:
    # survival after t_k is R_k / total * prod_{j<k} R_j / (R_j - c_j) with
    # R_j = Y_j - d_j; factors without censoring are exactly one, so the
    # uncensored case reduces to a single division
    R = Y - d
    ratio = np.ones_like(R)
    cens = (c > 0) & (R - c > 0)
    ratio[cens] = R[cens] / (R[cens] - c[cens])
    P = np.concatenate(([1.0], np.cumprod(ratio)[:-1]))
    return (total - R * P) / total


def kaplan_meier(data: SurvivalData) -> StepCdf:
    """Kaplan-Meier CDF, events before censorings at tied times."""
    if data.n < 1:
        raise InsufficientDataError("need at least one observation")
    t, d, c, Y = data.risk_table()
    return StepCdf(t, _km(t, d, c, Y, float(data.weights.sum())))


def censoring_km(data: SurvivalData) -> StepCdf:
    """Kaplan-Meier CDF of the censoring times.

    Lifetimes ending at a tied time leave the risk set before the
    censorings at that time.
    """
    t, d, c, Y = data.risk_table()
    Yc = Y - d
    safe = np.where(Yc > 0, Yc, 1.0)
    surv = np.cumprod(np.where(Yc > 0, 1.0 - c / safe, 1.0))
    return StepCdf(t, 1.0 - surv)


# ---------------------------------------------------------------------------
# weird bootstrap
# ---------------------------------------------------------------------------


def _binomial_jumps(size, prob, stream: RandomStream):
    size = np.asarray(size, dtype=np.int64)
    k = stream.generator.binomial(size, np.clip(prob, 0.0, 1.0))
    return k / size


def weird_bootstrap_draw(data: SurvivalData, stream: RandomStream) -> HazardPath:
    """Independent jumps ``Bin(Y_n, dA_n) / Y_n`` at the event times."""
    if not np.any(data.events):
        raise InsufficientDataError("the weird bootstrap needs at least one event")
    if not data.integer_weights:
        raise ParameterDomainError("the weird bootstrap needs integer case weights")
    na = nelson_aalen(data)
    _, Y = data.counting(na.times)
    return HazardPath(na.times, _binomial_jumps(Y, na.jumps, stream), check=False)


# ---------------------------------------------------------------------------
# Beta process prior and posterior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BetaProcessPrior:
    """Beta process with prior guess ``A0`` (from a lifetime guess F0) and concentration c.

    Give ``a`` for the Dirichlet link ``c(s) = a F0[s, inf)`` or ``c`` for a
    constant concentration.  ``c = 0`` (or ``a = 0``) is the noninformative
    limit.
    """

    guess: PriorGuess
    a: float | None = None
    c: float | None = None
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if (self.a is None) == (self.c is None):
            raise ParameterDomainError("give exactly one of a (Dirichlet link) or c (constant)")
        level = self.a if self.a is not None else self.c
        if not (level >= 0 and math.isfinite(level)):
            raise ParameterDomainError("concentration must be finite and >= 0")
        if int(self.resolution) < 1:
            raise ParameterDomainError("resolution must be >= 1")
        lo, _ = self.guess.support()
        if not self.guess.continuous or lo < 0:
            raise UnsupportedPriorError("the lifetime guess must be continuous on [0, inf)")

    @property
    def dirichlet_link(self) -> bool:
        return self.a is not None

    @property
    def max_c(self) -> float:
        return float(self.a if self.dirichlet_link else self.c)

    @property
    def vanishing(self) -> bool:
        return self.max_c == 0.0

    def concentration(self, s):
        s = np.asarray(s, dtype=float)
        if self.dirichlet_link:
            return self.a * (1.0 - np.asarray(self.guess.cdf(s), dtype=float))
        return np.full(s.shape, float(self.c))

    def cell_hazard(self, u, v):
        """Discrete prior hazard of cells ``(u, v]``."""
        Fu = np.asarray(self.guess.cdf(u), dtype=float)
        Fv = np.asarray(self.guess.cdf(v), dtype=float)
        S = 1.0 - Fu
        return np.where(S > 0, (Fv - Fu) / np.where(S > 0, S, 1.0), 1.0).clip(0.0, 1.0)


@dataclass(frozen=True)
class BetaPosterior:
    """Posterior Beta parameters at each jump location.

    ``alpha = c dA0 + dN`` and ``beta = c (1 - dA0) + Y - dN``;
    ``alpha + beta = c + Y``.
    """

    times: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    is_event: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.alpha + self.beta

    @property
    def mean_jumps(self) -> np.ndarray:
        return self.alpha / self.total

    @property
    def mean_path(self) -> HazardPath:
        return HazardPath(self.times, self.mean_jumps, check=False)

    def variance(self) -> np.ndarray:
        m = self.mean_jumps
        return m * (1.0 - m) / (self.total + 1.0)


def _grid_cells(edges, resolution):
    lo = np.repeat(edges[:-1], resolution)
    width = np.repeat(np.diff(edges), resolution) / resolution
    k = np.tile(np.arange(resolution), edges.size - 1)
    return lo + k * width, lo + (k + 1) * width


def beta_posterior_params(prior: BetaProcessPrior, data: SurvivalData,
                          horizon: float | None = None) -> BetaPosterior:
    """Discretised Beta process posterior: prior cells plus event-time jumps."""
    t, d, _, Y = (np.empty(0),) * 4
    if data.n:
        t, d, _, Y = data.risk_table()
    last = float(t[-1]) if t.size else 0.0
    if horizon is None:
        if not t.size:
            raise ParameterDomainError("with no data a horizon is required")
        horizon = last
    if horizon < last:
        raise ParameterDomainError("horizon must cover all observations")
    if prior.vanishing and horizon > last:
        warnings.warn("c = 0 beyond the last observation: posterior truncated there", stacklevel=2)
        horizon = last
    ev_times = t[d > 0]
    ev_d = d[d > 0]
    ev_Y = Y[d > 0]
    ev_c = prior.concentration(ev_times)
    parts_t = [ev_times]
    parts_a = [ev_d]
    parts_b = [ev_c + ev_Y - ev_d]
    parts_e = [np.ones(ev_times.size, dtype=bool)]
    if not prior.vanishing:
        edges = np.concatenate(([0.0], t[t > 0]))
        if horizon > edges[-1]:
            edges = np.append(edges, horizon)
        if edges.size > 1:
            u, v = _grid_cells(edges, int(prior.resolution))
            mid = 0.5 * (u + v)
            dA0 = prior.cell_hazard(u, v)
            c = prior.concentration(mid)
            _, Ymid = data.counting(mid) if data.n else (None, np.zeros(mid.size))
            keep = c * dA0 > 0
            parts_t.append(mid[keep])
            parts_a.append((c * dA0)[keep])
            parts_b.append((c * (1.0 - dA0) + Ymid)[keep])
            parts_e.append(np.zeros(int(keep.sum()), dtype=bool))
    times = np.concatenate(parts_t)
    order = np.argsort(times, kind="stable")
    alpha = np.concatenate(parts_a)[order]
    beta = np.concatenate(parts_b)[order]
    return BetaPosterior(times[order], alpha, np.maximum(beta, 0.0), np.concatenate(parts_e)[order])


def beta_posterior_draw(prior: BetaProcessPrior, data: SurvivalData, stream: RandomStream,
                        horizon: float | None = None, post: BetaPosterior | None = None) -> HazardPath:
    """Independent Beta increments at every jump location of the posterior."""
    post = post or beta_posterior_params(prior, data, horizon)
    jumps = np.ones(post.times.size)
    free = post.beta > 0
    if np.any(free):
        jumps[free] = stream.generator.beta(post.alpha[free], post.beta[free])
    return HazardPath(post.times, jumps, check=False)


def weird_bb_draw(prior: BetaProcessPrior, data: SurvivalData, stream: RandomStream,
                  horizon: float | None = None, post: BetaPosterior | None = None) -> HazardPath:
    """Jumps ``Bin(m, dA_nB) / m`` with ``m = c + Y_n`` rounded to an integer >= 1."""
    post = post or beta_posterior_params(prior, data, horizon)
    m = np.maximum(np.rint(post.total), 1.0)
    return HazardPath(post.times, _binomial_jumps(m, post.mean_jumps, stream), check=False)


# ---------------------------------------------------------------------------
# censored resampling BB
# ---------------------------------------------------------------------------


def _invert_steps(cdf: StepCdf, u):
    """``inf{t : F(t) >= u}``; ``inf`` beyond the total mass."""
    idx = np.searchsorted(cdf.values, u - 1e-12, side="left")
    out = np.full(np.shape(u), math.inf)
    ok = idx < cdf.times.size
    out[ok] = cdf.times[idx[ok]]
    return out


def censored_resample_bb(prior: BetaProcessPrior, data: SurvivalData, stream: RandomStream,
                         post: BetaPosterior | None = None) -> SurvivalData:
    """One resampled censored data set of BB size ``n + a``.

    Lifetimes come from the Bayes estimate F_nB (with the prior guess tail
    beyond the last observation), censoring times from the Kaplan-Meier
    estimate of the censoring distribution.

    Notes
    -----
    Intervals from this scheme can be poorly calibrated when a sizeable
    fraction of the data is censored. Prefer ``weird-bb`` in that case.
    """
    if not prior.dirichlet_link:
        raise ParameterDomainError("censored resampling needs the Dirichlet link c(s) = a F0[s, inf)")
    a = float(prior.a)
    size, last_w = bb_size(data.n, a)
    post = post or beta_posterior_params(prior, data)
    path = post.mean_path
    steps = StepCdf(path.times, 1.0 - path.survival_steps[1:])
    u = stream.uniform(size)
    life = _invert_steps(steps, u)
    # beyond the last observation the posterior hazard is the prior one
    tail = np.isinf(life)
    if a > 0 and np.any(tail):
        g = prior.guess
        m = float(data.times[-1])
        S_m = float(path.survival_steps[-1])
        S0_m = 1.0 - float(g.cdf(m))
        if S_m > 0 and S0_m > 0:
            life[tail] = g.inverse_cdf(np.clip(1.0 - (1.0 - u[tail]) * S0_m / S_m, 0.0, 1.0 - 1e-16))
    v = stream.uniform(size)
    if np.any(~data.events):
        cens = _invert_steps(censoring_km(data), v)
    else:
        cens = np.full(size, math.inf)
    times = np.minimum(life, cens)
    events = (life <= cens).astype(int)
    if np.any(np.isinf(times)):
        raise ParameterDomainError("resampled lifetime is unbounded and uncensored")
    w = np.ones(size)
    w[-1] = last_w
    return SurvivalData(times, events, w)


# ---------------------------------------------------------------------------
# functionals and runs
# ---------------------------------------------------------------------------


class HazardFunctional:
    """``A(t0)``, ``F(t0)`` or the median survival time of a hazard path."""

    def __init__(self, kind: str, t0: float | None = None):
        if kind not in ("A", "F", "median"):
            raise ParameterDomainError(f"unknown hazard functional {kind!r}")
        if kind != "median" and t0 is None:
            raise ParameterDomainError(f"{kind} needs a time t0")
        self.kind = kind
        self.t0 = t0

    def __call__(self, path: HazardPath) -> float:
        if self.kind == "A":
            return float(path.cumulative(self.t0))
        if self.kind == "F":
            return float(path.cdf(self.t0))
        return path.median()

    def __repr__(self):
        return "median" if self.kind == "median" else f"{self.kind}:{self.t0:g}"


def hazard_functional(f: HazardFunctional, path: HazardPath) -> float:
    return f(path)


def parse_hazard_functional(spec: str) -> HazardFunctional:
    """``A:T0``, ``F:T0`` or ``median``."""
    kind, _, arg = spec.partition(":")
    if kind == "median" and not arg:
        return HazardFunctional("median")
    try:
        return HazardFunctional(kind, float(arg))
    except ValueError:
        raise ParameterDomainError(f"cannot parse hazard functional {spec!r}") from None


SURVIVAL_SCHEMES = ("weird", "beta", "weird-bb", "resample")


def run_survival(scheme: str, f: HazardFunctional, data: SurvivalData,
                 prior: BetaProcessPrior | None = None, boot: int = 1000, seed: int = 0,
                 workers: int = 1) -> PosteriorDraws:
    if scheme == "weird":
        fn = lambda s: f(weird_bootstrap_draw(data, s))  # noqa: E731
    else:
        if prior is None:
            raise ParameterDomainError(f"scheme {scheme!r} needs a Beta process prior")
        post = beta_posterior_params(prior, data)
        if scheme == "beta":
            fn = lambda s: f(beta_posterior_draw(prior, data, s, post=post))  # noqa: E731
        elif scheme == "weird-bb":
            fn = lambda s: f(weird_bb_draw(prior, data, s, post=post))  # noqa: E731
        elif scheme == "resample":
            fn = lambda s: f(nelson_aalen(censored_resample_bb(prior, data, s, post=post)))  # noqa: E731
        else:
            raise ParameterDomainError(f"unknown survival scheme {scheme!r}; choose from {SURVIVAL_SCHEMES}")
    vals = map_replicates(fn, boot, seed, workers)
    return PosteriorDraws(vals, seed=seed, scheme=scheme, meta={"functional": repr(f)})
