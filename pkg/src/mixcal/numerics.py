"""Deterministic randomness, Gaussian expectations and scalar solvers.

Every stochastic routine in the package draws from an :class:`RngState`,
a Philox counter-based generator keyed by ``(seed, stream)``.  Experiments
use ``stream = trial_index`` so trials can run on any number of workers
and still produce identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import roots_hermite

from .errors import BracketError, InvalidParameterError, NumericalFailure

_U64 = 1 << 64

# Half-width, in standard deviations, of the window used by the piecewise
# rule.  Gaussian mass outside it is below 1e-32.
TAIL_SDS = 12.0

# Absolute slack added to the relative refinement test so that integrals
# whose exact value is (numerically) zero still register as converged.  The
# rounding part scales with E|f|, since cancellation in the node sum costs
# about eps * E|f|.
_ABS_FLOOR = 1e-15
_ROUNDING = 64 * np.finfo(float).eps


class RngState:
    """Counter-based generator for one ``(seed, stream)`` pair.

    The Philox key is ``seed + 2**64 * stream``; distinct streams are
    distinct keys, so their counter sequences never overlap.
    """

    __slots__ = ("seed", "stream", "_gen")

    def __init__(self, seed: int, stream: int = 0):
        for name, value in (("seed", seed), ("stream", stream)):
            if int(value) != value or not 0 <= value < _U64:
                raise InvalidParameterError(f"{name} must be an integer in [0, 2**64), got {value!r}")
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen = np.random.Generator(np.random.Philox(key=self.seed + _U64 * self.stream))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    @property
    def counter(self) -> int:
        words = self._gen.bit_generator.state["state"]["counter"]
        return sum(int(w) << (64 * i) for i, w in enumerate(words))

    def __repr__(self):
        return f"RngState(seed={self.seed}, stream={self.stream}, counter={self.counter})"


def make_rng(seed: int, stream: int = 0) -> RngState:
    return RngState(seed, stream)


def sample_std_normal(rng: RngState, count: int) -> np.ndarray:
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    return rng.generator.standard_normal(count)


def sample_beta(rng: RngState, alpha: float, beta: float, size: int | None = None):
    """Draw ``Beta(alpha, beta)`` variates as ``G1 / (G1 + G2)``.

    ``G1 ~ Gamma(alpha)`` and ``G2 ~ Gamma(beta)``; numpy's gamma sampler is
    Marsaglia-Tsang with the usual boost for shapes below one.  Returns a
    float when ``size`` is None, otherwise an array.
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidParameterError(f"Beta shapes must be positive, got ({alpha}, {beta})")
    gen = rng.generator
    g1 = gen.standard_gamma(alpha, size)
    g2 = gen.standard_gamma(beta, size)
    total = np.asarray(g1 + g2, dtype=float)
    if np.any(total == 0.0):
        # Both gammas underflowed (tiny shapes): the law is then concentrated
        # on {0, 1} with P(1) = alpha / (alpha + beta).
        coin = gen.random(total.shape) < alpha / (alpha + beta)
        out = np.where(total > 0, np.divide(g1, total, where=total > 0, out=np.zeros_like(total)), coin)
    else:
        out = np.asarray(g1 / total)
    return float(out) if size is None else out


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 128
    refine_tolerance: float = 1e-8
    max_nodes: int = 2048

    def __post_init__(self):
        if self.node_count < 2:
            raise InvalidParameterError("node_count must be >= 2")
        if self.max_nodes < self.node_count:
            raise InvalidParameterError("max_nodes must be >= node_count")
        if not self.refine_tolerance > 0:
            raise InvalidParameterError("refine_tolerance must be positive")


DEFAULT_QUAD = QuadratureSpec()


@lru_cache(maxsize=None)
def _hermite_cached(n: int):
    x, w = roots_hermite(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite_nodes(node_count: int):
    """Physicists' Gauss-Hermite rule for the weight ``exp(-x**2)``.

    The returned arrays are cached and read-only.
    """
    if node_count < 1:
        raise InvalidParameterError("node_count must be >= 1")
    return _hermite_cached(int(node_count))


@lru_cache(maxsize=None)
def _legendre_cached(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _hermite_estimate(f, mean, sd, n):
    x, w = gauss_hermite_nodes(n)
    vals = np.asarray(f(mean + math.sqrt(2.0) * sd * x), dtype=float)
    root_pi = math.sqrt(math.pi)
    return float(np.dot(w, vals)) / root_pi, float(np.dot(w, np.abs(vals))) / root_pi


def _piecewise_estimate(f, mean, sd, edges, n):
    x, w = _legendre_cached(n)
    total, mass = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        v = half * x + 0.5 * (a + b)
        dens = np.exp(-0.5 * ((v - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
        vals = np.asarray(f(v), dtype=float) * dens
        total += half * float(np.dot(w, vals))
        mass += half * float(np.dot(w, np.abs(vals)))
    return total, mass


def expectation_gaussian(
    f: Callable[[np.ndarray], np.ndarray],
    mean: float,
    sd: float,
    spec: QuadratureSpec = DEFAULT_QUAD,
    breakpoints: Iterable[float] = (),
) -> float:
    """Return ``E f(V)`` for ``V ~ N(mean, sd**2)``.

    ``f`` must accept a numpy array.  Without breakpoints this is
    Gauss-Hermite after the change of variables ``v = mean + sqrt(2) sd x``.
    Points where ``f`` is not smooth (``|.|`` kinks) should be passed in
    ``breakpoints``; the integral is then split there and each piece is done
    by Gauss-Legendre on the window ``mean +/- 12 sd``, which restores
    spectral convergence.  Node counts double from ``spec.node_count``
    until two successive estimates agree to ``spec.refine_tolerance``.
    """
    if not sd > 0:
        raise InvalidParameterError(f"sd must be positive, got {sd}")
    lo, hi = mean - TAIL_SDS * sd, mean + TAIL_SDS * sd
    kinks = sorted({float(b) for b in breakpoints if lo < b < hi})
    if kinks:
        edges = [lo, *kinks, hi]

        def rule(n):
            return _piecewise_estimate(f, mean, sd, edges, n)
    else:

        def rule(n):
            return _hermite_estimate(f, mean, sd, n)

    n = spec.node_count
    older, (prev, _) = math.nan, rule(n)
    while 2 * n <= spec.max_nodes:
        n *= 2
        cur, mass = rule(n)
        slack = _ABS_FLOOR + _ROUNDING * mass
        if abs(cur - prev) <= spec.refine_tolerance * max(abs(cur), abs(prev)) + slack:
            return cur
        older, prev = prev, cur
    raise NumericalFailure(
        f"Gaussian quadrature did not converge within {spec.max_nodes} nodes",
        estimates=(older, prev),
    )


def solve_bisection(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    """Root of ``g`` on ``[lo, hi]`` by bisection, to bracket width ``tol``."""
    if not tol > 0:
        raise InvalidParameterError("tol must be positive")
    if lo > hi:
        lo, hi = hi, lo
    g_lo, g_hi = g(lo), g(hi)
    if g_lo == 0:
        return lo
    if g_hi == 0:
        return hi
    if (g_lo > 0) == (g_hi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]: g={g_lo}, {g_hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g_mid = g(mid)
        if g_mid == 0:
            return mid
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compensated_sum(values: Sequence[float] | Iterable[float]) -> float:
    """Order-deterministic, correctly rounded sum (``math.fsum``)."""
    return math.fsum(values)


def compensated_mean(values) -> float:
    values = list(values)
    if not values:
        raise InvalidParameterError("mean of an empty sequence")
    return math.fsum(values) / len(values)
