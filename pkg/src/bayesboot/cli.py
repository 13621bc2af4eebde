"""Command-line interface: ``bb <command> [options]``.

Every command prints one JSON document (keys sorted, seed echoed) or, with
``--format tsv-histogram``, rows ``bin_left<TAB>bin_right<TAB>count`` of the
replicate values.  Exit status is 2 for usage or input errors and 3 when a
computation fails.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys

import numpy as np

from . import __version__
from .corrections import CorrectionSpec, bias_correct, bias_variance_correct
from .empirical_bayes import fit_a, fit_prior_params
from .engine import (
    DEFAULT_BOOT_ESTIMATE,
    DEFAULT_BOOT_INTERVAL,
    SCHEMES,
    PosteriorDraws,
    confidence_band,
    percentile_interval,
    run_bootstrap,
    two_sample_bb,
)
from .errors import BayesBootError, ParameterDomainError
from .exact import bb_median_cdf, median_posterior, prob_posterior
from .model import (
    read_table,
    DataSample,
    DirichletPrior,
    Mean,
    MixtureCdf,
    StdDev,
    Variance,
    mean_posterior_moments,
    parse_functional,
    parse_prior,
    variance_posterior_expectation,
)
from .regression import RegressionData, least_squares, parse_regression_functional, run_regression
from .survival import SURVIVAL_SCHEMES, BetaProcessPrior, SurvivalData, parse_hazard_functional, run_survival


class UsageError(Exception):
    pass


def _clean(obj):
    """Make a result JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _load_column(path: str) -> DataSample:
    try:
        return DataSample(read_table(path, ndmin=1).ravel())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read data from {path}: {exc}") from None


def _parse_set(spec: str):
    try:
        return [tuple(float(v) for v in part.split(",")) for part in spec.split(";")]
    except ValueError:
        raise UsageError(f"cannot parse set {spec!r}; use L,U;L,U") from None


def _parse_floats(spec: str):
    try:
        return [float(v) for v in spec.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse number list {spec!r}") from None


def _parsed(fn, spec, *extra):
    """Apply a spec-string parser, reporting failures as usage errors."""
    try:
        return fn(spec, *extra)
    except ParameterDomainError as exc:
        raise UsageError(str(exc)) from None


def _histogram(draws: PosteriorDraws, bins: int) -> str:
    counts, edges = np.histogram(draws.values, bins=bins)
    return "".join(f"{edges[i]!r}\t{edges[i + 1]!r}\t{int(c)}\n" for i, c in enumerate(counts))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _prior(args, a_attr="a", prior_attr="prior") -> DirichletPrior:
    return DirichletPrior(getattr(args, a_attr), _parsed(parse_prior, getattr(args, prior_attr)))


def _correction_spec(args, f, prior, data) -> CorrectionSpec:
    nu0, tau0 = args.nu0, args.tau0
    mix = MixtureCdf(prior, data)
    if nu0 is None:
        if isinstance(f, Mean) and args.h == "identity":
            nu0, t2 = mean_posterior_moments(mix)
            if tau0 is None and args.correct == "bias-variance":
                tau0 = math.sqrt(t2)
        elif isinstance(f, StdDev) and args.h == "square":
            nu0 = variance_posterior_expectation(mix)
        elif isinstance(f, Variance) and args.h == "identity":
            nu0 = variance_posterior_expectation(mix)
        else:
            raise UsageError("--nu0 is required for this functional and transform")
    if args.correct == "bias-variance" and tau0 is None:
        raise UsageError("--tau0 is required for the bias-variance correction")
    return CorrectionSpec(args.h, nu0, tau0)


def cmd_interval(args, default_boot):
    data = _load_column(args.data)
    prior = _prior(args)
    f = _parsed(parse_functional, args.functional)
    boot = args.boot or default_boot
    draws = run_bootstrap(args.scheme, f, prior, data, boot=boot, seed=args.seed,
                          workers=args.workers)
    if args.format == "tsv-histogram":
        return _histogram(draws, args.bins)
    doc = {"draws": draws.summary(), "estimate": draws.mean()}
    if args.command == "interval":
        if args.correct == "none":
            res = percentile_interval(draws, args.alpha, args.method)
        else:
            spec = _correction_spec(args, f, prior, data)
            fn = bias_correct if args.correct == "bias" else bias_variance_correct
            res = fn(draws, spec, args.alpha, args.method)
        doc["interval"] = res.as_dict()
    return doc


def cmd_band(args):
    data = _load_column(args.data)
    res = confidence_band(_prior(args), data, alpha=args.alpha, boot=args.boot or DEFAULT_BOOT_INTERVAL,
                          seed=args.seed, points=args.points, workers=args.workers)
    return {"c": res.c, "d": res.d, "coverage": res.coverage, "grid": res.grid,
            "center": res.center, "lower": res.lower, "upper": res.upper}


def cmd_twosample(args):
    d1, d2 = _load_column(args.data1), _load_column(args.data2)
    f = _parsed(parse_functional, args.functional)
    draws = two_sample_bb(f, f, _prior(args, "a1", "prior1"), d1, _prior(args, "a2", "prior2"), d2,
                          boot=args.boot or DEFAULT_BOOT_INTERVAL, seed=args.seed, workers=args.workers)
    if args.format == "tsv-histogram":
        return _histogram(draws, args.bins)
    return {"draws": draws.summary(), "estimate": draws.mean(),
            "interval": percentile_interval(draws, args.alpha, args.method).as_dict()}


def cmd_exact(args):
    prior = _prior(args)
    if args.kind == "prob":
        data = _load_column(args.data) if args.data else None
        al, be = prob_posterior(prior, data, _parse_set(args.set))
        return {"alpha": al, "beta": be, "mean": al / (al + be)}
    if not args.data:
        raise UsageError("exact median needs --data")
    data = _load_column(args.data)
    mp = median_posterior(prior, data)
    doc = {"atoms": data.values, "masses": mp.masses,
           "bb_cdf_at_atoms": [bb_median_cdf(prior, data, float(x)) for x in data.values]}
    if prior.a > 0:
        lo, hi = (float(v) for v in prior.guess.inverse_cdf(np.array([0.005, 0.995])))
        lo, hi = min(lo, data.values[0]), max(hi, data.values[-1])
        grid = np.linspace(lo, hi, args.points)
        doc.update(density_grid=grid, density=mp.density(grid), continuous_mass=mp.continuous_mass())
    return doc


def cmd_eb(args):
    data = _load_column(args.data)
    if args.kind == "fit-a":
        return fit_a(data, _parsed(parse_prior, args.prior)).as_dict()
    return fit_prior_params(data, args.family, args.a).as_dict()


def cmd_regress(args):
    try:
        rd = RegressionData.from_csv(args.data, intercept=args.intercept)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read regression data: {exc}") from None
    x = np.array(_parse_floats(args.at))
    f = _parsed(parse_regression_functional, args.functional, x)
    draws = run_regression(rd, f, a=args.a, boot=args.boot or DEFAULT_BOOT_INTERVAL,
                           seed=args.seed, workers=args.workers)
    if args.format == "tsv-histogram":
        return _histogram(draws, args.bins)
    fit = least_squares(rd)
    return {"beta_hat": fit.beta, "sigma_hat": fit.sigma, "draws": draws.summary(),
            "estimate": draws.mean(), "interval": percentile_interval(draws, args.alpha, args.method).as_dict()}


def cmd_survival(args):
    try:
        data = SurvivalData.from_csv(args.data)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read survival data: {exc}") from None
    f = _parsed(parse_hazard_functional, args.functional)
    prior = None
    if args.scheme != "weird":
        if (args.a is None) == (args.c is None):
            raise UsageError(f"scheme {args.scheme} needs exactly one of --a or --c")
        prior = BetaProcessPrior(_parsed(parse_prior, args.prior), a=args.a, c=args.c, resolution=args.resolution)
    draws = run_survival(args.scheme, f, data, prior, boot=args.boot or DEFAULT_BOOT_INTERVAL,
                         seed=args.seed, workers=args.workers)
    if args.format == "tsv-histogram":
        return _histogram(draws, args.bins)
    return {"draws": draws.summary(), "estimate": draws.mean(),
            "interval": percentile_interval(draws, args.alpha, args.method).as_dict()}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bb", description="Bayesian bootstrap tools")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (generated and echoed if absent)")
    common.add_argument("--boot", type=int, default=None, help="number of replicates")
    common.add_argument("--alpha", type=float, default=0.05, help="tail probability per side")
    common.add_argument("--workers", type=int, default=1, help="worker processes; output does not depend on it")
    common.add_argument("--format", choices=("json", "tsv-histogram"), default="json")
    common.add_argument("--bins", type=int, default=20, help="histogram bins for tsv-histogram")
    common.add_argument("--method", choices=("midpoint", "inf"), default="midpoint",
                        help="quantile rule for interval endpoints")

    def dp(sp, suffix=""):
        sp.add_argument(f"--prior{suffix}", default="normal:0,1",
                        help="prior guess: normal:MU,SIGMA | uniform:L,U | exp:RATE | empirical:PATH")
        sp.add_argument(f"--a{suffix}", type=float, default=0.0, help="prior precision (0 gives the plain BB)")

    for name in ("interval", "estimate"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--data", required=True)
        dp(sp)
        sp.add_argument("--functional", default="mean",
                        help="mean | median | sd | var | mad | quantile:P | prob:L,U[;L,U...]")
        sp.add_argument("--scheme", choices=SCHEMES, default="bb")
        sp.add_argument("--correct", choices=("none", "bias", "bias-variance"), default="none",
                        help="interval correction on the h scale")
        sp.add_argument("--h", choices=("identity", "square", "log"), default="identity",
                        help="transform h applied before correcting")
        sp.add_argument("--nu0", type=float, default=None, help="target posterior mean of h(theta)")
        sp.add_argument("--tau0", type=float, default=None, help="target posterior sd of h(theta)")

    sp = sub.add_parser("band", parents=[common])
    sp.add_argument("--data", required=True)
    dp(sp)
    sp.add_argument("--points", type=int, default=101, help="grid size for the band")

    sp = sub.add_parser("twosample", parents=[common])
    sp.add_argument("--data1", required=True)
    sp.add_argument("--data2", required=True)
    dp(sp, "1")
    dp(sp, "2")
    sp.add_argument("--functional", default="mean")

    sp = sub.add_parser("exact", parents=[common])
    sp.add_argument("kind", choices=("prob", "median"))
    sp.add_argument("--data", default=None)
    dp(sp)
    sp.add_argument("--set", default="-inf,0", help="union of intervals L,U[;L,U...] for exact prob")
    sp.add_argument("--points", type=int, default=101, help="density grid size for exact median")

    sp = sub.add_parser("eb", parents=[common])
    sp.add_argument("kind", choices=("fit-a", "fit-prior"))
    sp.add_argument("--data", required=True)
    sp.add_argument("--prior", default="normal:0,1")
    sp.add_argument("--family", choices=("normal", "general"), default="normal",
                    help="fit-prior family; general also matches the third moment")
    sp.add_argument("--a", type=float, default=1.0, help="prior precision used by fit-prior")

    sp = sub.add_parser("regress", parents=[common])
    sp.add_argument("--data", required=True, help="CSV rows y,x1,...,xp")
    sp.add_argument("--intercept", action="store_true", help="prepend a column of ones")
    sp.add_argument("--functional", default="decile:5", help="decile:J | prob-le:Y | absdev")
    sp.add_argument("--at", required=True, help="covariate vector x1,...,xp")
    sp.add_argument("--a", type=float, default=0.0, help="prior precision for the residual distribution")

    sp = sub.add_parser("survival", parents=[common])
    sp.add_argument("--data", required=True, help="CSV rows time,event")
    sp.add_argument("--scheme", choices=SURVIVAL_SCHEMES, default="weird")
    sp.add_argument("--functional", default="median", help="A:T0 | F:T0 | median")
    sp.add_argument("--prior", default="exp:1", help="prior lifetime distribution")
    sp.add_argument("--a", type=float, default=None, help="Dirichlet-linked concentration a F0[s, inf)")
    sp.add_argument("--c", type=float, default=None, help="Beta process concentration (constant)")
    sp.add_argument("--resolution", type=int, default=20, help="prior cells per data gap")
    return p


_DISPATCH = {
    "interval": lambda a: cmd_interval(a, DEFAULT_BOOT_INTERVAL),
    "estimate": lambda a: cmd_interval(a, DEFAULT_BOOT_ESTIMATE),
    "band": cmd_band,
    "twosample": cmd_twosample,
    "exact": cmd_exact,
    "eb": cmd_eb,
    "regress": cmd_regress,
    "survival": cmd_survival,
}

# options that do not change results and are therefore not echoed
_NOT_ECHOED = {"workers", "format", "bins"}


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = secrets.randbits(63)
    try:
        result = _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"bb: error: {exc}", file=sys.stderr)
        return 2
    except BayesBootError as exc:
        print(f"bb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if isinstance(result, str):
        out.write(result)
        return 0
    config = {k: v for k, v in vars(args).items() if k not in _NOT_ECHOED}
    doc = {"command": args.command, "config": config, "seed": args.seed, "result": result}
    out.write(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
