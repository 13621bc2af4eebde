"""Replicate generation, percentile intervals, two-sample and band procedures.

Three replicate schemes are available:

``bb``
    Draw ``n + a`` values from F_nB and weight them equally (with the
    fractional-``a`` rule for the last draw).  ``a = 0`` is Efron's bootstrap.
``rubin``
    Dirichlet(1, ..., 1) weights on the observed values.
``stick``
    Truncated stick-breaking draw from the exact posterior Dir(aF0 + nF_n).

Replicate ``k`` of a run always consumes the child stream ``k`` of the run
seed, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import RandomStream, sample_beta, sample_dirichlet
from .errors import (
    BayesBootError,
    GridDomainError,
    NumericError,
    ParameterDomainError,
    ReplicateError,
)
from .model import (
    DataSample,
    DirichletPrior,
    Functional,
    MixtureCdf,
    WeightedAtoms,
    bb_size,
)

SCHEMES = ("bb", "efron", "rubin", "stick")
DEFAULT_BOOT_INTERVAL = 1000
DEFAULT_BOOT_ESTIMATE = 100
DEFAULT_STICK_TOL = 1e-8
STICK_CAP = 10_000_000


# ---------------------------------------------------------------------------
# single replicates
# ---------------------------------------------------------------------------


def bb_weights(n: int, a: float) -> np.ndarray:
    size, last = bb_size(n, a)
    w = np.ones(size)
    w[-1] = last
    return w / (n + a)


def bb_replicate(mix: MixtureCdf, stream: RandomStream) -> WeightedAtoms:
    """One Bayesian bootstrap replicate F*_BB."""
    w = bb_weights(mix.n, mix.a)
    atoms, _ = mix.draw(stream, w.size)
    w_sum = w.sum()
    if w_sum != 1.0:
        w = w / w_sum
    return WeightedAtoms(atoms, w, check=False)


def rubin_replicate(data: DataSample, stream: RandomStream) -> WeightedAtoms:
    """Rubin's degenerate-prior replicate: flat Dirichlet weights on the data."""
    w = sample_dirichlet(np.ones(data.n), stream)
    return WeightedAtoms(data.values, w, check=False)


def stick_breaking_draw(prior: DirichletPrior, data: DataSample,
                        tol: float = DEFAULT_STICK_TOL,
                        stream: RandomStream | None = None) -> WeightedAtoms:
    """Truncated stick-breaking draw from Dir(a F0 + n F_n).

    Sticks ``B_i ~ Beta(1, a + n)`` are broken until the leftover mass drops
    below ``tol``; the retained weights are renormalised to sum to one and
    the atoms are i.i.d. draws from F_nB.
    """
    if stream is None:
        raise ParameterDomainError("stick_breaking_draw needs a stream")
    if not 0 < tol < 1:
        raise ParameterDomainError(f"tol must lie in (0, 1), got {tol}")
    mix = MixtureCdf(prior, data)
    conc = prior.a + data.n
    expected = math.log(tol) / math.log(conc / (conc + 1.0))
    chunk = int(min(max(64, 1.25 * expected), STICK_CAP))
    log_rem = 0.0
    pieces = []
    used = 0
    while True:
        b = sample_beta(1.0, conc, stream, size=chunk)
        lr = log_rem + np.cumsum(np.log1p(-b))
        hit = np.flatnonzero(lr < math.log(tol))
        if hit.size:
            stop = int(hit[0]) + 1
            b, lr = b[:stop], lr[:stop]
        before = np.concatenate(([log_rem], lr[:-1]))
        pieces.append(b * np.exp(before))
        used += b.size
        log_rem = float(lr[-1])
        if hit.size:
            break
        if used >= STICK_CAP:
            raise NumericError(
                f"stick breaking needed more than {STICK_CAP} sticks",
                achieved=math.exp(log_rem),
            )
    w = np.concatenate(pieces)
    w /= w.sum()
    atoms, _ = mix.draw(stream, w.size)
    return WeightedAtoms(atoms, w, check=False)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


def _midpoint_knots(sorted_values: np.ndarray):
    """Distinct values and the averaged step CDF at each of them."""
    vals, counts = np.unique(sorted_values, return_counts=True)
    cum = np.cumsum(counts) / sorted_values.size
    below = np.concatenate(([0.0], cum[:-1]))
    return vals, 0.5 * (cum + below)


@dataclass
class PosteriorDraws:
    """Sorted replicate values of a functional plus run metadata."""

    values: np.ndarray
    seed: int | None = None
    scheme: str = "bb"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size < 1:
            raise ParameterDomainError("need at least one draw")
        self.values = v

    @property
    def boot(self) -> int:
        return self.values.size

    def mean(self) -> float:
        return float(self.values.mean())

    def sd(self) -> float:
        return float(self.values.std())

    def step_cdf(self, t):
        return np.searchsorted(self.values, t, side="right") / self.boot

    def interpolated_quantile(self, p):
        """Inverse of the midpoint-interpolated replicate CDF."""
        vals, knots = _midpoint_knots(self.values)
        return np.interp(p, knots, vals)

    def inf_quantile(self, p):
        """``inf{t : step_cdf(t) >= p}``."""
        idx = np.ceil(np.asarray(p, dtype=float) * self.boot - 1e-9).astype(np.int64) - 1
        return self.values[np.clip(idx, 0, self.boot - 1)]

    def summary(self, grid=(0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975)) -> dict:
        return {
            "count": self.boot,
            "mean": self.mean(),
            "sd": self.sd(),
            "quantiles": {f"{p:g}": float(self.interpolated_quantile(p)) for p in grid},
        }


@dataclass
class IntervalResult:
    lower: float
    upper: float
    level: float
    estimate: float
    warning: str | None = None

    def as_dict(self) -> dict:
        out = {"lower": self.lower, "upper": self.upper, "level": self.level,
               "estimate": self.estimate}
        if self.warning:
            out["warning"] = self.warning
        return out


def percentile_interval(draws: PosteriorDraws, alpha: float = 0.05,
                        method: str = "midpoint") -> IntervalResult:
    """Percentile interval ``[G^-1(alpha), G^-1(1 - alpha)]`` from replicate draws.

    ``method="midpoint"`` inverts the linearly interpolated replicate CDF
    whose knot at each distinct draw is the average of the step CDF just
    below and at that draw.  ``method="inf"`` uses the raw step CDF.
    """
    if not 0 < alpha < 0.5:
        raise ParameterDomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    if method == "midpoint":
        lo, hi = draws.interpolated_quantile([alpha, 1.0 - alpha])
    elif method == "inf":
        lo, hi = draws.inf_quantile([alpha, 1.0 - alpha])
    else:
        raise ParameterDomainError(f"unknown interval method {method!r}")
    warning = None
    if draws.boot * alpha < 1:
        warning = f"boot={draws.boot} is too small to resolve alpha={alpha}"
    return IntervalResult(float(lo), float(hi), 1.0 - 2.0 * alpha, draws.mean(), warning)


# ---------------------------------------------------------------------------
# running many replicates
# ---------------------------------------------------------------------------


def for_each_replicate(fn: Callable[[int, RandomStream], None], boot: int, seed: int,
                       workers: int = 1) -> None:
    """Call ``fn(k, child_k)`` for ``k = 0..boot-1`` across ``workers`` threads."""
    if boot < 1:
        raise ParameterDomainError(f"boot must be >= 1, got {boot}")
    root = RandomStream(seed)

    def run(lo: int, hi: int):
        for k in range(lo, hi):
            try:
                fn(k, root.child(k))
            except BayesBootError as exc:
                raise ReplicateError(k, exc) from exc

    workers = max(1, int(workers))
    if workers == 1 or boot < 2 * workers:
        run(0, boot)
        return
    edges = np.linspace(0, boot, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
        for fut in futures:
            fut.result()


def map_replicates(fn: Callable[[RandomStream], float], boot: int, seed: int,
                   workers: int = 1) -> np.ndarray:
    """Evaluate ``fn(child_k)`` for ``k = 0..boot-1``; results in index order."""
    out = np.empty(max(int(boot), 0))

    def store(k, s):
        out[k] = fn(s)

    for_each_replicate(store, boot, seed, workers)
    return out


def replicate_fn(scheme: str, prior: DirichletPrior, data: DataSample,
                 tol: float = DEFAULT_STICK_TOL) -> Callable[[RandomStream], WeightedAtoms]:
    """Factory turning a scheme name into ``stream -> WeightedAtoms``."""
    if scheme == "efron":
        prior = DirichletPrior(0.0, prior.guess)
        scheme = "bb"
    if scheme == "bb":
        mix = MixtureCdf(prior, data)
        return lambda s: bb_replicate(mix, s)
    if scheme == "rubin":
        return lambda s: rubin_replicate(data, s)
    if scheme == "stick":
        return lambda s: stick_breaking_draw(prior, data, tol, s)
    raise ParameterDomainError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def run_bootstrap(scheme: str, f: Functional, prior: DirichletPrior, data: DataSample,
                  boot: int = DEFAULT_BOOT_INTERVAL, seed: int = 0, workers: int = 1,
                  tol: float = DEFAULT_STICK_TOL) -> PosteriorDraws:
    """``boot`` replicate values of ``f`` under the chosen scheme."""
    make = replicate_fn(scheme, prior, data, tol)
    vals = map_replicates(lambda s: f(make(s)), boot, seed, workers)
    return PosteriorDraws(vals, seed=seed, scheme=scheme,
                          meta={"functional": repr(f), "a": prior.a, "n": data.n})


def two_sample_bb(f1: Functional, f2: Functional,
                  prior1: DirichletPrior, data1: DataSample,
                  prior2: DirichletPrior, data2: DataSample,
                  boot: int = DEFAULT_BOOT_INTERVAL, seed: int = 0,
                  coupled: bool = False, workers: int = 1) -> PosteriorDraws:
    """Replicates of ``f1(F1*) - f2(F2*)`` from independent BB draws.

    With ``coupled=True`` both samples read the same sub-stream of each
    replicate, which is useful for checking shift equivariance.
    """
    mix1 = MixtureCdf(prior1, data1)
    mix2 = MixtureCdf(prior2, data2)

    def one(s: RandomStream) -> float:
        s1 = s.child(0)
        s2 = s.child(0) if coupled else s.child(1)
        return f1(bb_replicate(mix1, s1)) - f2(bb_replicate(mix2, s2))

    vals = map_replicates(one, boot, seed, workers)
    return PosteriorDraws(vals, seed=seed, scheme="bb-two-sample",
                          meta={"coupled": coupled})


# ---------------------------------------------------------------------------
# simultaneous band
# ---------------------------------------------------------------------------


def mixture_quantile(mix: MixtureCdf, p: float, rtol: float = 1e-13) -> float:
    """``inf{t : F_nB(t) >= p}`` by bisection."""
    g = mix.prior.guess
    lo = min(mix.data.values[0], float(g.inverse_cdf(1e-12))) if mix.a > 0 else mix.data.values[0]
    hi = max(mix.data.values[-1], float(g.inverse_cdf(1 - 1e-12))) if mix.a > 0 else mix.data.values[-1]
    lo -= 1.0 + abs(lo)
    if mix.cdf(hi) < p:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mix.cdf(mid) >= p:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * max(1.0, abs(hi)):
            break
    return hi


@dataclass
class BandResult:
    c: float
    d: float
    grid: np.ndarray
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    coverage: float
    theta_min: np.ndarray = field(repr=False)
    theta_max: np.ndarray = field(repr=False)


def _min_sum_pair(theta_min: np.ndarray, theta_max: np.ndarray, need: int):
    """Minimise c + d subject to #{b : -c <= theta_min_b, theta_max_b <= d} >= need."""
    c_vals = -theta_min
    order = np.argsort(c_vals, kind="stable")
    best = None
    active: list[float] = []
    i = 0
    B = c_vals.size
    while i < B:
        c = c_vals[order[i]]
        # admit every replicate whose requirement on c is met
        while i < B and c_vals[order[i]] <= c:
            bisect.insort(active, float(theta_max[order[i]]))
            i += 1
        if len(active) >= need:
            d = active[need - 1]
            if best is None or c + d < best[0] + best[1]:
                best = (float(c), float(d))
    return best


def confidence_band(prior: DirichletPrior, data: DataSample, alpha: float = 0.05,
                    grid=None, boot: int = DEFAULT_BOOT_INTERVAL, seed: int = 0,
                    points: int = 101, workers: int = 1) -> BandResult:
    """Asymmetric simultaneous band for F from standardised BB deviations.

    ``grid`` may be an array of evaluation points or an ``(lo, hi)`` pair
    (``points`` equally spaced values); by default it spans the 5% to 95%
    quantiles of F_nB.
    """
    if not 0 < alpha < 0.5:
        raise ParameterDomainError(f"alpha must lie in (0, 1/2), got {alpha}")
    mix = MixtureCdf(prior, data)
    if grid is None:
        grid = (mixture_quantile(mix, 0.05), mixture_quantile(mix, 0.95))
    grid = np.asarray(grid, dtype=float)
    if grid.shape == (2,) and points != 2:
        grid = np.linspace(grid[0], grid[1], points)
    center = mix.cdf(grid)
    if np.any(center <= 0) or np.any(center >= 1):
        raise GridDomainError("band grid must avoid points where F_nB is 0 or 1")
    scale = np.sqrt(center * (1.0 - center))

    t_min = np.empty(boot)
    t_max = np.empty(boot)

    def one(k: int, s: RandomStream):
        z = (bb_replicate(mix, s).cdf(grid) - center) / scale
        t_min[k] = z.min()
        t_max[k] = z.max()

    for_each_replicate(one, boot, seed, workers)
    need = math.ceil((1.0 - 2.0 * alpha) * boot - 1e-9)
    c, d = _min_sum_pair(t_min, t_max, need)
    covered = np.mean((-c <= t_min) & (t_max <= d))
    return BandResult(c, d, grid, center, center - c * scale, center + d * scale,
                      float(covered), t_min, t_max)
