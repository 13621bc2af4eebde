"""Bayesian bootstrap under Dirichlet process priors."""

__version__ = "0.1.0"

from .corrections import CorrectionSpec, bias_correct, bias_variance_correct
from .distributions import (
    InterpolatedCdf,
    LatticeDistribution,
    RandomStream,
    interpolated_cdf,
    sample_beta,
    sample_binomial,
    sample_dirichlet,
    sample_gamma,
)
from .empirical_bayes import EBFitResult, cv_split, fit_a, fit_prior_params, weight_integral
from .engine import (
    IntervalResult,
    PosteriorDraws,
    bb_replicate,
    confidence_band,
    percentile_interval,
    rubin_replicate,
    run_bootstrap,
    stick_breaking_draw,
    two_sample_bb,
)
from .errors import *  # noqa: F401,F403
from .exact import MedianPosterior, bb_median_cdf, bb_prob_approx, median_posterior, prob_posterior
from .model import (
    MAD,
    DataSample,
    DirichletPrior,
    EmpiricalGuess,
    ExponentialGuess,
    Mean,
    Median,
    MixtureCdf,
    NormalGuess,
    Prob,
    Quantile,
    StdDev,
    TransformedGuess,
    UniformGuess,
    Variance,
    WeightedAtoms,
    eval_functional,
    mixture_sample,
    parse_functional,
    parse_prior,
)
from .quadrature import quad_J
