"""Acceptance criteria, one test each; every test records a PASS/FAIL line."""

import io
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from bayesboot.cli import run
from bayesboot.corrections import CorrectionSpec, bias_correct, bias_variance_correct
from bayesboot.distributions import RandomStream, sample_beta, sample_binomial
from bayesboot.empirical_bayes import fit_a, weight_integral
from bayesboot.engine import bb_replicate, percentile_interval, run_bootstrap
from bayesboot.exact import ks_beta_vs_binomial, median_posterior, prob_posterior
from bayesboot.model import (
    DataSample,
    DirichletPrior,
    ExponentialGuess,
    Mean,
    MixtureCdf,
    NormalGuess,
    Prob,
    Quantile,
    StdDev,
    TransformedGuess,
    UniformGuess,
    mean_posterior_moments,
    posterior_cov,
    posterior_skew,
    variance_posterior_expectation,
)
from bayesboot.regression import RegressionData, draw_beta_sigma, least_squares, posterior_residual_density
from bayesboot.survival import (
    BetaProcessPrior,
    SurvivalData,
    kaplan_meier,
    nelson_aalen,
    weird_bb_draw,
    weird_bootstrap_draw,
)

from conftest import ks_against


def test_1_moment_matching(report):
    start = time.perf_counter()
    data = DataSample(np.random.default_rng(101).normal(size=20))
    mix = MixtureCdf(DirichletPrior(5.0, NormalGuess()), data)
    grid = np.array([-1.2, -0.5, 0.0, 0.4, 1.1])
    root = RandomStream(1)
    B = 200_000
    vals = np.empty((B, grid.size))
    for k in range(B):
        vals[k] = bb_replicate(mix, root.child(k)).cdf(grid)
    mean_gap = float(np.max(np.abs(vals.mean(axis=0) - mix.cdf(grid))))
    cov_mc = np.cov(vals.T)
    cov_th = np.array([[posterior_cov(mix, min(s, t), max(s, t))[1] for t in grid] for s in grid])
    cov_rel = float(np.max(np.abs(cov_mc / cov_th - 1)))
    elapsed = time.perf_counter() - start
    ok = mean_gap <= 0.005 and cov_rel <= 0.10 and elapsed < 30
    report(1, ok, f"mean gap {mean_gap:.4f} (<= 0.005), cov rel err {cov_rel:.3f} (<= 0.10), {elapsed:.1f}s")
    assert ok


def test_2_skewness_ratio(report):
    start = time.perf_counter()
    n, a = 20, 5.0
    t = float(NormalGuess().inverse_cdf(0.25))
    # five points at or below t and fifteen above, so F_nB(t) = (5/4 + 5) / 25
    x = np.concatenate([t - 1 - np.arange(5.0), t + 0.1 + np.arange(15.0)])
    mix = MixtureCdf(DirichletPrior(a, NormalGuess()), DataSample(x))
    m = n + a
    p = float(mix.cdf(t))
    bayes, bb = posterior_skew(mix, t)
    ratio = bayes / bb
    target = 2 * m**2 / ((m + 1) * (m + 2))
    N = 1_000_000
    u = sample_beta(m * p, m * (1 - p), RandomStream(2), size=N)
    v = sample_binomial(int(m), p, RandomStream(3), size=N) / m
    mc_u = float(np.mean((u - u.mean()) ** 3))
    mc_v = float(np.mean((v - v.mean()) ** 3))
    rel_u, rel_v = abs(mc_u / bayes - 1), abs(mc_v / bb - 1)
    elapsed = time.perf_counter() - start
    ok = (abs(p - 0.25) < 1e-12 and abs(ratio - target) < 1e-12 and rel_u <= 0.2 and rel_v <= 0.2
          and elapsed < 60)
    report(2, ok, f"ratio {ratio:.6f} vs {target:.6f}; MC rel err bayes {rel_u:.3f}, bb {rel_v:.3f} (<= 0.2)")
    assert ok


def test_3_beta_vs_binomial(report):
    start = time.perf_counter()
    ks = {(m, p): ks_beta_vs_binomial(m, p) for m in (30, 100) for p in (0.1, 0.3, 0.5)}
    elapsed = time.perf_counter() - start
    bad = {k: v for k, v in ks.items() if v > 0.02}
    ok = not bad and elapsed < 5
    detail = ", ".join(f"m={m} p={p}: {v:.4f}" for (m, p), v in ks.items())
    report(3, ok, f"KS (<= 0.02) {detail}")
    assert ok, f"KS above 0.02 for {sorted(bad)}"


def test_4_stick_breaking_oracle(report):
    start = time.perf_counter()
    x = np.random.default_rng(104).normal(size=15)
    prior = DirichletPrior(3.0, NormalGuess())
    data = DataSample(x)
    f = Prob([(-math.inf, float(np.median(x)))])
    draws = run_bootstrap("stick", f, prior, data, boot=10_000, seed=4)
    al, be = prob_posterior(prior, data, f.intervals)
    ks = ks_against(draws.values, stats.beta(al, be).cdf)
    elapsed = time.perf_counter() - start
    ok = ks <= 0.03 and elapsed < 60
    report(4, ok, f"KS {ks:.4f} (<= 0.03) against Beta({al:.3f}, {be:.3f}), {elapsed:.1f}s")
    assert ok


def test_5_five_method_agreement(report):
    start = time.perf_counter()
    x = np.random.default_rng(105).normal(size=200)
    prior = DirichletPrior(5.0, NormalGuess())
    data = DataSample(x)
    scale = x.std() / math.sqrt(200)
    ends = {}
    for s in ("stick", "bb", "rubin", "efron"):
        r = percentile_interval(run_bootstrap(s, Mean(), prior, data, boot=4000, seed=5), 0.05)
        ends[s] = np.array([r.lower, r.upper])
    ends["delta"] = x.mean() + stats.norm.ppf([0.05, 0.95]) * scale
    names = sorted(ends)
    worst = max(np.max(np.abs(ends[a] - ends[b])) for i, a in enumerate(names) for b in names[i + 1:])
    elapsed = time.perf_counter() - start
    ok = worst < 0.3 * scale and elapsed < 120
    report(5, ok, f"max pairwise endpoint gap {worst / scale:.3f} sigma/sqrt(n) (< 0.3), {elapsed:.1f}s")
    assert ok


def test_6_correction_exactness(report):
    x = np.random.default_rng(106).normal(size=50)
    prior = DirichletPrior(5.0, NormalGuess())
    data = DataSample(x)
    mix = MixtureCdf(prior, data)
    nu_sd = variance_posterior_expectation(mix)
    r1 = bias_correct(run_bootstrap("bb", StdDev(), prior, data, boot=2000, seed=6),
                      CorrectionSpec("square", nu_sd))
    e1 = abs(float(np.mean(r1.h_draws)) - nu_sd)
    nu0, t2 = mean_posterior_moments(mix)
    r2 = bias_variance_correct(run_bootstrap("bb", Mean(), prior, data, boot=2000, seed=7),
                               CorrectionSpec("identity", nu0, math.sqrt(t2)))
    e2 = abs(float(np.mean(r2.h_draws)) - nu0)
    e3 = abs(float(np.std(r2.h_draws)) - math.sqrt(t2))
    ok = max(e1, e2, e3) <= 1e-12
    report(6, ok, f"|mean h - nu0| sd {e1:.1e}, mean {e2:.1e}; |sd - tau0| {e3:.1e} (<= 1e-12)")
    assert ok


def test_7_median_posterior_mass(report):
    data = DataSample([0.12, 0.3, 0.47, 0.66, 0.91])
    total = median_posterior(DirichletPrior(1.0, UniformGuess(0, 1)), data).total_mass()
    limit = np.array([math.comb(4, j) / 16 for j in range(5)])
    exact = median_posterior(DirichletPrior(0.0), data).masses
    tiny = median_posterior(DirichletPrior(1e-14, UniformGuess(0, 1)), data).masses
    err = float(max(np.max(np.abs(exact - limit)), np.max(np.abs(tiny - limit))))
    ok = abs(total - 1) <= 1e-4 and err <= 1e-12 and exact.sum() == 1.0
    report(7, ok, f"a=1 total mass {total:.10f}; a->0 max atom error {err:.1e}, sum {float(exact.sum())!r}")
    assert ok


def _polya(a, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = rng.normal() if rng.random() < a / (a + i) else out[rng.integers(i)]
    return out


def test_8_empirical_bayes(report):
    start = time.perf_counter()
    families = [NormalGuess(), NormalGuess(3, 0.2), UniformGuess(-1, 4), ExponentialGuess(2.0),
                TransformedGuess(NormalGuess(), np.exp, np.log, np.exp)]
    w_err = max(abs(weight_integral(g) - 1 / 6) for g in families)
    rng = np.random.default_rng(108)
    fits = np.array([fit_a(DataSample(_polya(5.0, 100, rng)), NormalGuess()).a for _ in range(500)])
    med = float(np.median(fits))
    elapsed = time.perf_counter() - start
    ok = w_err <= 1e-9 and 2.5 <= med <= 10 and elapsed < 120
    report(8, ok, f"max |int F0(1-F0) dF0 - 1/6| {w_err:.1e}; median fitted a {med:.2f} in [2.5, 10]")
    assert ok


def test_9_regression_posterior(report):
    rng = np.random.default_rng(109)
    n = 40
    x = rng.uniform(0, 5, n)
    data = RegressionData(np.column_stack([np.ones(n), x]), 2 - 0.7 * x + rng.normal(0, 0.8, n))
    fit = least_squares(data)
    root = RandomStream(9)
    N = 100_000
    prec = np.empty(N)
    z = np.empty((N, 2))
    for k in range(N):
        b, s = draw_beta_sigma(data, fit, root.child(k))
        prec[k] = 1 / s**2
        z[k] = (b - fit.beta) / s
    prec_err = abs(prec.mean() * fit.sigma2 - 1)
    target = fit.M_inv / n
    cov_err = float(np.linalg.norm(np.cov(z.T) - target) / np.linalg.norm(target))
    mass, _ = integrate.quad(lambda t: float(posterior_residual_density(fit, 2.0, t)), -np.inf, np.inf,
                             limit=200)
    ok = prec_err <= 0.01 and cov_err <= 0.05 and abs(mass - 1) <= 1e-4
    report(9, ok, f"E[1/sigma^2] rel err {prec_err:.4f} (<= 0.01), beta cov rel err {cov_err:.4f} (<= 0.05), "
                  f"density mass {mass:.8f}")
    assert ok


def test_10_survival_collapses(report):
    start = time.perf_counter()
    x = np.random.default_rng(110).exponential(size=30)
    full = SurvivalData(x, np.ones(30, int))
    km_ok = np.array_equal(kaplan_meier(full)(x), DataSample(x).cdf(x))
    na = nelson_aalen(full)
    na_ok = np.array_equal(na.jumps, np.array([1.0 / (30 - i) for i in range(30)]))

    rng = np.random.default_rng(111)
    life = rng.exponential(1.0, 50)
    event = np.ones(50, int)
    censored = rng.choice(50, size=15, replace=False)
    event[censored] = 0
    life[censored] *= rng.uniform(size=15)
    data = SurvivalData(life, event)
    cfrac = 1 - data.events.mean()
    prior = BetaProcessPrior(ExponentialGuess(1.0), c=0.0)
    t0 = float(np.quantile(data.times, 0.6))
    A1 = [weird_bb_draw(prior, data, RandomStream(12).child(k)).cumulative(t0) for k in range(10_000)]
    A2 = [weird_bootstrap_draw(data, RandomStream(13).child(k)).cumulative(t0) for k in range(10_000)]
    ks = stats.ks_2samp(np.round(A1, 12), np.round(A2, 12)).statistic

    na = nelson_aalen(data)
    _, Y = data.counting(na.times)
    root = RandomStream(14)
    N = 40_000
    J = np.array([weird_bootstrap_draw(data, root.child(k)).jumps for k in range(N)])
    var_th = na.jumps * (1 - na.jumps) / Y
    mean_z = np.abs(J.mean(axis=0) - na.jumps) / np.maximum(np.sqrt(var_th / N), 1e-300)
    var_mc = J.var(axis=0)
    m4 = np.mean((J - J.mean(axis=0)) ** 4, axis=0)
    var_se = np.sqrt(np.maximum(m4 - var_mc**2, 0) / N)
    var_z = np.abs(var_mc - var_th) / np.maximum(var_se, 1e-300)
    free = var_th > 0
    moments_ok = bool(np.all(mean_z[free] <= 5) and np.all(var_z[free] <= 5)
                      and np.all(J[:, ~free] == na.jumps[~free]))
    elapsed = time.perf_counter() - start
    ok = km_ok and na_ok and ks <= 0.03 and moments_ok and elapsed < 60
    report(10, ok, f"KM=ECDF {km_ok}, NA jumps exact {na_ok}, weird-bb vs weird KS {ks:.4f} (<= 0.03), "
                   f"moment z max {max(mean_z[free].max(), var_z[free].max()):.2f} (<= 5) at "
                   f"{int(free.sum())} event times, censoring {cfrac:.2f}, {elapsed:.1f}s")
    assert ok


def test_11_transformation_invariance(report):
    base = NormalGuess(0.2, 1.1)
    x = np.random.default_rng(112).normal(0.2, 1.1, size=30)
    q = Quantile(0.4)
    d1 = run_bootstrap("bb", q, DirichletPrior(4.0, base), DataSample(x), boot=1000, seed=11)
    d2 = run_bootstrap("bb", q, DirichletPrior(4.0, TransformedGuess(base, np.exp, np.log, np.exp)),
                       DataSample(np.exp(x)), boot=1000, seed=11)
    draw_err = float(np.max(np.abs(d2.values / np.exp(d1.values) - 1)))
    r1 = percentile_interval(d1, 0.05, method="inf")
    r2 = percentile_interval(d2, 0.05, method="inf")
    end_err = max(abs(r2.lower / math.exp(r1.lower) - 1), abs(r2.upper / math.exp(r1.upper) - 1))
    ok = draw_err <= 1e-12 and end_err <= 1e-12
    report(11, ok, f"max rel error draws {draw_err:.1e}, endpoints {end_err:.1e} (<= 1e-12)")
    assert ok


@pytest.fixture
def cli_files(tmp_path):
    rng = np.random.default_rng(113)
    d = tmp_path / "d.csv"
    np.savetxt(d, rng.normal(size=30))
    d2 = tmp_path / "d2.csv"
    np.savetxt(d2, rng.normal(0.5, 1, size=25))
    s = tmp_path / "s.csv"
    life, cens = rng.exponential(2, 30), rng.exponential(6, 30)
    np.savetxt(s, np.column_stack([np.minimum(life, cens), life <= cens]), delimiter=",", fmt=["%.5f", "%d"])
    r = tmp_path / "r.csv"
    xr = rng.uniform(0, 2, 25)
    np.savetxt(r, np.column_stack([1 + xr + rng.normal(size=25), xr]), delimiter=",")
    return {"d": str(d), "d2": str(d2), "s": str(s), "r": str(r)}


def test_12_determinism(report, cli_files):
    f = cli_files
    commands = [
        ["interval", "--data", f["d"], "--a", "2", "--functional", "median", "--boot", "400"],
        ["interval", "--data", f["d"], "--a", "3", "--scheme", "stick", "--boot", "100",
         "--correct", "bias-variance"],
        ["estimate", "--data", f["d"], "--scheme", "rubin", "--format", "tsv-histogram"],
        ["band", "--data", f["d"], "--boot", "300", "--points", "21"],
        ["twosample", "--data1", f["d"], "--data2", f["d2"], "--boot", "300"],
        ["exact", "prob", "--data", f["d"], "--a", "4", "--set", "0,1"],
        ["eb", "fit-a", "--data", f["d"]],
        ["regress", "--data", f["r"], "--intercept", "--at", "1,1", "--a", "1.5", "--boot", "300"],
        ["survival", "--data", f["s"], "--scheme", "weird-bb", "--a", "1", "--boot", "300"],
        ["survival", "--data", f["s"], "--scheme", "resample", "--a", "2", "--boot", "200"],
    ]
    bad = []
    for argv in commands:
        outs = []
        for workers in ("1", "1", "4"):
            buf = io.StringIO()
            code = run([*argv, "--seed", "12345", "--workers", workers], out=buf)
            outs.append((code, buf.getvalue()))
        if not (outs[0] == outs[1] == outs[2] and outs[0][0] == 0):
            bad.append(" ".join(argv[:2]))
    ok = not bad
    report(12, ok, f"{len(commands)} commands byte-identical across repeats and worker counts"
                   + (f"; mismatched: {bad}" if bad else ""))
    assert ok
