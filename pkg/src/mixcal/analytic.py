"""Population ECE and MCE of linear classifiers under the unit-noise model.

For a weight vector ``theta_hat`` the score ``v = theta_hat^T X`` is a
two-component mixture ``N(+-m, s^2)`` with ``m = theta_hat^T theta`` and
``s = ||theta_hat||``.  The classifier reports ``logistic(2v)`` while the
true conditional probability of ``y = +1`` given ``v`` is
``logistic(2 rho v)``, ``rho = m / s^2``.  The gap between the two is odd in
``v``, so its absolute value is even and the mixture collapses to the
single component ``N(m, s^2)``.

Inputs must already be on the ``sigma = 1`` scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import DegenerateClassifierError, DimensionError, InvalidParameterError
from .numerics import DEFAULT_QUAD, QuadratureSpec, expectation_gaussian, solve_bisection

MCE_TOL = 1e-10
_BOUND_SDS = 12.0
_BOUND_FLOOR = 12.0


@dataclass(frozen=True)
class Alignment:
    rho: float
    m: float
    s: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and math.isfinite(self.m) and math.isfinite(self.s)):
            raise InvalidParameterError("alignment entries must be finite")
        if not self.s > 0:
            raise DegenerateClassifierError("alignment needs s > 0")

    @classmethod
    def from_ms(cls, m: float, s: float) -> "Alignment":
        return cls(m / (s * s), m, s)


@dataclass(frozen=True)
class MceSolution:
    value: float
    v_star: float
    at_boundary: bool


def alignment(theta_hat, theta_star) -> Alignment:
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_hat.shape != theta_star.shape:
        raise DimensionError(f"theta_hat {theta_hat.shape} vs theta_star {theta_star.shape}")
    s2 = float(theta_hat @ theta_hat)
    if s2 == 0:
        raise DegenerateClassifierError("theta_hat is the zero vector")
    m = float(theta_hat @ theta_star)
    return Alignment(m / s2, m, math.sqrt(s2))


def conditional_accuracy(rho, v):
    """``P(y = +1 | theta_hat^T x = v) = logistic(2 rho v)``."""
    return expit(2.0 * np.multiply(rho, v))


def _gap(rho: float, c: float):
    def f(v):
        return np.abs(expit(2.0 * rho * v) - expit(2.0 * c * v))

    return f


def _ece(rho, m, s, spec):
    if rho == 1.0:
        return 0.0
    return expectation_gaussian(_gap(rho, 1.0), m, s, spec, breakpoints=(0.0,))


def analytic_ece(theta_hat, theta_star, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``E_{v ~ N(m, s^2)} |logistic(2 rho v) - logistic(2 v)|``."""
    a = alignment(theta_hat, theta_star)
    return _ece(a.rho, a.m, a.s, spec)


def analytic_ece_shrunk(a: Alignment, c: float, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """ECE when the reported logit is shrunk to ``2 c v``.

    Computed through the change of variables ``v = u / c``: the shrunk
    classifier is the plain one with weights ``c theta_hat``, whose
    alignment is ``(rho / c, c m, c s)``.
    """
    if not 0 < c <= 1:
        raise InvalidParameterError(f"shrink factor must lie in (0, 1], got {c}")
    return _ece(a.rho / c, c * a.m, c * a.s, spec)


def default_v_bound(a: Alignment) -> float:
    return max(abs(a.m) + _BOUND_SDS * a.s, _BOUND_FLOOR)


def _log_dlogistic(x: float) -> float:
    # log of logistic'(x) = logistic(x) logistic(-x), stable for any x
    ax = abs(x)
    return -ax - 2.0 * math.log1p(math.exp(-ax))


def analytic_mce(
    a: Alignment, c: float = 1.0, v_bound: Optional[float] = None, tol: float = MCE_TOL
) -> MceSolution:
    """``sup_v |logistic(2 rho v) - logistic(2 c v)|`` and its maximiser.

    Evenness restricts the search to ``v >= 0``.  The interior maximiser
    solves ``rho logistic'(2 rho v) = c logistic'(2 c v)``; the log of the
    difference of the two sides is strictly monotone on ``(0, inf)`` when
    ``rho > 0``, and it is bisected.  Without an interior root inside
    ``(0, v_bound]`` (always the case for ``rho <= 0``) the value at the
    bound is returned, flagged ``at_boundary``.
    """
    if not 0 < c <= 1:
        raise InvalidParameterError(f"shrink factor must lie in (0, 1], got {c}")
    rho = a.rho
    if rho == c:
        return MceSolution(0.0, 0.0, False)
    bound = default_v_bound(a) if v_bound is None else float(v_bound)
    if not bound > 0:
        raise InvalidParameterError("v_bound must be positive")

    def gap(v):
        return abs(float(expit(2.0 * rho * v)) - float(expit(2.0 * c * v)))

    if rho > 0:
        log_ratio = math.log(rho / c)

        def station(v):
            return log_ratio + _log_dlogistic(2.0 * rho * v) - _log_dlogistic(2.0 * c * v)

        if (station(0.0) > 0) != (station(bound) > 0):
            v_star = solve_bisection(station, 0.0, bound, tol)
            return MceSolution(gap(v_star), v_star, False)
    return MceSolution(gap(bound), bound, True)


def _neg_slope(v):
    # -2 v logistic'(2 v), the t-derivative of the shrunk gap at t = 0
    v = np.abs(v)
    return -2.0 * v * expit(2.0 * v) * expit(-2.0 * v)


def ece_derivative_at_zero(a: Alignment, spec: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Right derivative in the shrink coefficient ``t`` of the ECE at ``t = 0``.

    Valid for ``rho < 1``, where the gap has a fixed sign on ``v > 0``:
    ``E_{|V|}[-2 v logistic'(2 v)]`` with ``V ~ N(m, s^2)``.
    """
    if not a.rho < 1:
        raise InvalidParameterError(f"derivative formula needs rho < 1, got {a.rho}")
    return expectation_gaussian(_neg_slope, a.m, a.s, spec, breakpoints=(0.0,))


def mce_derivative_at_zero(a: Alignment, v_bound: Optional[float] = None) -> float:
    """Right derivative in ``t`` of the MCE at ``t = 0``.

    By the envelope theorem this is ``-2 v* logistic'(2 v*)`` at the
    unshrunk maximiser ``v*``.  For ``rho == 0`` the maximiser escapes to
    infinity and the search bound stands in for it.
    """
    if not 0 <= a.rho < 1:
        raise InvalidParameterError(f"MCE derivative needs 0 <= rho < 1, got {a.rho}")
    sol = analytic_mce(a, 1.0, v_bound)
    return float(_neg_slope(sol.v_star))


def maximizer(rho: float, v_bound: float = 50.0, tol: float = MCE_TOL) -> float:
    """Unshrunk MCE maximiser ``v*(rho)`` for ``0 < rho < 1``."""
    return analytic_mce(Alignment(rho, rho, 1.0), 1.0, v_bound, tol).v_star
