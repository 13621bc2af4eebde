"""Corner-graded Gauss quadrature for the median-density integral.

``quad_J(alpha, gamma)`` evaluates

    J = int_0^{1/2} int_0^{1/2} u^(alpha-1) w^(gamma-1) / (1 - u - w) du dw.

With ``X = 1 - 2u`` and ``Y = 1 - 2w``,

    J = 2^(1 - alpha - gamma) * I,
    I = int_0^1 int_0^1 (1-X)^(alpha-1) (1-Y)^(gamma-1) / (X + Y) dX dY.

The integrand of I is singular only at the corner ``X = Y = 0``, where it
behaves like ``1 / (X + Y)`` (a log-type singularity).  The unit square is
split into dyadic L-shaped shells toward that corner; each shell is
integrated by adaptive tensor Gauss quadrature and the final small square is
closed with the exact integral of ``1 / (X + Y)``.  Cells touching ``X = 1``
(or ``Y = 1``) use Gauss-Jacobi rules that carry the weight
``(1-X)^(alpha-1)`` exactly, so parameters below one cost nothing extra.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import NumericError, ParameterDomainError

_ORDER = 10
_MAX_LEVELS = 80
_MAX_DEPTH = 30
_GL = np.polynomial.legendre.leggauss(_ORDER)


@lru_cache(maxsize=256)
def _jacobi(power: float):
    # nodes/weights on [-1, 1] for weight (1 - xi)^power
    return special.roots_jacobi(_ORDER, power, 0.0)


class _Axis:
    """One coordinate direction carrying the weight ``(1 - X)^power``."""

    def __init__(self, power: float):
        self.power = power
        self.jac = _jacobi(power) if power != 0.0 else None

    def rule(self, a: float, b: float):
        half = 0.5 * (b - a)
        if b == 1.0 and self.jac is not None:
            xi, w = self.jac
            # 1 - X = half * (1 - xi) on this cell
            return a + half * (xi + 1.0), w * half ** (self.power + 1.0)
        xi, w = _GL
        x = a + half * (xi + 1.0)
        return x, w * half * np.exp(self.power * np.log1p(-x))


def _cell(ax: _Axis, ay: _Axis, x0, x1, y0, y1) -> float:
    xs, wx = ax.rule(x0, x1)
    ys, wy = ay.rule(y0, y1)
    return float(wx @ (1.0 / (xs[:, None] + ys[None, :])) @ wy)


def _adaptive(ax, ay, x0, x1, y0, y1, whole, side_tol, depth):
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)
    quads = ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1))
    parts = [_cell(ax, ay, *c) for c in quads]
    fine = sum(parts)
    err = abs(fine - whole)
    # corner cells contribute O(side), so a budget proportional to side keeps
    # every shell (and every refinement row) at a bounded share of the total
    if err <= side_tol * (x1 - x0):
        return fine
    if depth >= _MAX_DEPTH:
        raise NumericError("quad_J: cell refinement did not converge", achieved=err)
    return sum(
        _adaptive(ax, ay, *c, whole=p, side_tol=side_tol, depth=depth + 1)
        for c, p in zip(quads, parts)
    )


def _graded(ax: _Axis, ay: _Axis, side_tol: float, rtol: float) -> float:
    total = 0.0
    side = 1.0
    shell = 0.0
    for _ in range(_MAX_LEVELS):
        h = 0.5 * side
        shell = 0.0
        for c in ((h, side, 0.0, h), (0.0, h, h, side), (h, side, h, side)):
            shell += _adaptive(ax, ay, *c, whole=_cell(ax, ay, *c), side_tol=side_tol, depth=0)
        total += shell
        side = h
        if shell <= rtol * total:
            # remaining square [0, side]^2, where the integrand ~ 1/(X + Y)
            return total + 2.0 * math.log(2.0) * side
    raise NumericError("quad_J: corner refinement did not converge", achieved=shell / total)


def integral_i(alpha: float, gamma: float, rtol: float = 1e-8) -> float:
    """The rescaled integral I, with ``J = 2^(1-alpha-gamma) * I``."""
    alpha = float(alpha)
    gamma = float(gamma)
    if not (alpha > 0 and gamma > 0) or not (math.isfinite(alpha) and math.isfinite(gamma)):
        raise ParameterDomainError(f"quad_J needs positive parameters, got ({alpha}, {gamma})")
    ax = _Axis(alpha - 1.0)
    ay = _Axis(gamma - 1.0)
    # a coarse pass fixes the absolute scale of the error budget
    scale = _graded(ax, ay, side_tol=1e-3, rtol=1e-3)
    return _graded(ax, ay, side_tol=0.05 * rtol * scale, rtol=0.1 * rtol)


def log_quad_J(alpha: float, gamma: float, rtol: float = 1e-8) -> float:
    """Natural log of J, safe for parameters in the thousands."""
    return (1.0 - alpha - gamma) * math.log(2.0) + math.log(integral_i(alpha, gamma, rtol))


def quad_J(alpha: float, gamma: float, rtol: float = 1e-8) -> float:
    """Evaluate J[alpha, gamma] to relative accuracy of order ``rtol``."""
    return math.exp(log_quad_J(alpha, gamma, rtol))
