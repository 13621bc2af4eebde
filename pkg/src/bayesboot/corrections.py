"""Bias and bias+variance corrections of BB percentile intervals.

When the exact posterior mean ``nu0`` of ``h(theta)`` is known for some
monotone ``h``, the replicate distribution of ``h(theta*)`` is shifted so its
mean is ``nu0``.  If the posterior standard deviation ``tau0`` is known too,
it is also rescaled to have that spread.  Interval endpoints are mapped back
through ``h^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import IntervalResult, PosteriorDraws, percentile_interval
from .errors import CorrectionDomainError, DegeneratePosteriorError, ParameterDomainError


@dataclass(frozen=True)
class Transform:
    name: str
    forward: Callable
    inverse: Callable
    lower: float  # open lower end of the domain of h


TRANSFORMS = {
    "identity": Transform("identity", lambda x: x, lambda y: y, -np.inf),
    # square on [0, inf), inverse sqrt
    "square": Transform("square", np.square, np.sqrt, 0.0),
    "log": Transform("log", np.log, np.exp, 0.0),
}


@dataclass(frozen=True)
class CorrectionSpec:
    """Known posterior mean (and optionally SD) of ``h(theta)``."""

    h: str
    nu0: float
    tau0: float | None = None

    def __post_init__(self):
        if self.h not in TRANSFORMS:
            raise ParameterDomainError(f"unknown transform {self.h!r}; choose from {sorted(TRANSFORMS)}")
        if self.tau0 is not None and not self.tau0 > 0:
            raise ParameterDomainError("tau0 must be positive")

    @property
    def transform(self) -> Transform:
        return TRANSFORMS[self.h]


@dataclass
class CorrectedInterval(IntervalResult):
    epsilon: float = 0.0
    delta: float = 0.0
    h_draws: np.ndarray | None = None

    def as_dict(self) -> dict:
        out = super().as_dict()
        out.update(epsilon=self.epsilon, delta=self.delta)
        return out


def _h_values(draws: PosteriorDraws, tr: Transform) -> np.ndarray:
    v = draws.values
    if tr.name == "square" and np.any(v < 0):
        raise CorrectionDomainError("square transform needs nonnegative draws")
    if tr.name == "log" and np.any(v <= 0):
        raise CorrectionDomainError("log transform needs positive draws")
    return tr.forward(v)


def _back(tr: Transform, y: float) -> float:
    if tr.name == "square" and y < 0:
        raise CorrectionDomainError(f"corrected value {y} is outside the range of h=square")
    return float(tr.inverse(y))


def _finish(draws, tr, alpha, shift, hq, corrected, epsilon, delta, method):
    base = percentile_interval(draws, alpha, method)
    lo = _back(tr, shift(hq[0]))
    hi = _back(tr, shift(hq[1]))
    back = corrected
    if tr.name == "square":
        back = np.sqrt(np.maximum(corrected, 0.0))
    elif tr.name == "log":
        back = np.exp(corrected)
    return CorrectedInterval(lo, hi, base.level, float(np.mean(back)), base.warning,
                             epsilon=epsilon, delta=delta, h_draws=corrected)


def bias_correct(draws: PosteriorDraws, spec: CorrectionSpec, alpha: float = 0.05,
                 method: str = "midpoint") -> CorrectedInterval:
    """Shift the h-scale replicate distribution so its mean equals ``nu0``."""
    tr = spec.transform
    hv = _h_values(draws, tr)
    epsilon = float(np.mean(hv)) - spec.nu0
    q = percentile_interval(draws, alpha, method)
    hq = tr.forward(np.array([q.lower, q.upper]))
    return _finish(draws, tr, alpha, lambda y: y - epsilon, hq, hv - epsilon,
                   epsilon, 0.0, method)


def bias_variance_correct(draws: PosteriorDraws, spec: CorrectionSpec, alpha: float = 0.05,
                          method: str = "midpoint") -> CorrectedInterval:
    """Affinely map the h-scale replicates to mean ``nu0`` and SD ``tau0``."""
    if spec.tau0 is None:
        raise ParameterDomainError("bias_variance_correct needs tau0")
    tr = spec.transform
    hv = _h_values(draws, tr)
    mean = float(np.mean(hv))
    epsilon = mean - spec.nu0
    sd = float(np.sqrt(np.mean((hv - mean) ** 2)))
    delta = sd / spec.tau0 - 1.0
    if not 1.0 + delta > 0:
        raise DegeneratePosteriorError("replicates have zero spread; cannot rescale")
    nu0 = spec.nu0

    def shift(y):
        return (y + nu0 * delta - epsilon) / (1.0 + delta)

    q = percentile_interval(draws, alpha, method)
    hq = tr.forward(np.array([q.lower, q.upper]))
    return _finish(draws, tr, alpha, shift, hq, shift(hv), epsilon, delta, method)
