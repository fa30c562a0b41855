"""Fisher, Mixup, noise-scale and pseudo-label estimators of theta.

All weight estimates use the ``1/n`` normalisation, ``theta_hat =
mean(x_i * y_i)``, which is unbiased for theta.  The sign classifier does
not care about the scale, but every alignment computation does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .model import Dataset
from .numerics import RngState, sample_beta

METHODS = ("fisher", "mixup_closed", "mixup_mc", "semi_init", "semi_final", "semi_final_mix")


@dataclass(frozen=True)
class BetaMixLaw:
    """Law of the Mixup weight; ``alpha == 0`` is the point mass at zero."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta > 0):
            raise InvalidParameterError(f"need alpha >= 0 and beta > 0, got ({self.alpha}, {self.beta})")

    @property
    def degenerate(self) -> bool:
        return self.alpha == 0

    @classmethod
    def symmetric_for_shrink(cls, t: float) -> "BetaMixLaw":
        """The ``Beta(a, a)`` law whose shrink coefficient is ``t``.

        For ``alpha == beta == a`` the coefficient is ``a / (2a + 1)``, so
        ``a = t / (1 - 2t)``; any ``t`` in ``[0, 1/2)`` is reachable.
        """
        if not 0 <= t < 0.5:
            raise InvalidParameterError(f"shrink coefficient must lie in [0, 1/2), got {t}")
        if t == 0:
            return cls(0.0, 1.0)
        a = t / (1.0 - 2.0 * t)
        return cls(a, a)


@dataclass(frozen=True, eq=False)
class Estimate:
    theta_hat: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        th = np.array(self.theta_hat, dtype=float)
        th.setflags(write=False)
        if th.ndim != 1:
            raise DimensionError("theta_hat must be a vector")
        if not np.all(np.isfinite(th)):
            raise InvalidParameterError("theta_hat has non-finite entries")
        if self.method not in METHODS:
            raise InvalidParameterError(f"unknown method {self.method!r}")
        object.__setattr__(self, "theta_hat", th)


@dataclass(frozen=True, eq=False)
class SemiResult:
    init: Estimate
    pseudo_labels: np.ndarray
    final: Estimate
    final_mix: Optional[Estimate] = None
    gamma_hat: Optional[float] = None

    def noise_component(self, theta_star) -> np.ndarray:
        """``final - gamma_hat * theta``: the noise part of the pooled estimate."""
        if self.gamma_hat is None:
            raise InvalidParameterError("gamma_hat needs the true labels of the unlabeled points")
        return self.final.theta_hat - self.gamma_hat * np.asarray(theta_star, dtype=float)


def shrink_coefficient(law: BetaMixLaw) -> float:
    """``t = 2 E[lam (1 - lam)] = 2ab / ((a + b)(a + b + 1))``."""
    a, b = law.alpha, law.beta
    if a == 0:
        return 0.0
    return 2.0 * a * b / ((a + b) * (a + b + 1.0))


def fisher_estimator(dataset: Dataset) -> Estimate:
    theta = dataset.labels @ dataset.features / dataset.n
    return Estimate(theta, "fisher", {"n": dataset.n})


def _moment_term(dataset: Dataset) -> np.ndarray:
    # xbar * ybar, the cross term that Mixup mixes in
    return dataset.features.mean(axis=0) * dataset.labels.mean()


def mixup_shrink(theta_hat, cross, t: float) -> np.ndarray:
    return (1.0 - t) * np.asarray(theta_hat) + t * np.asarray(cross)


def mixup_estimator_closed(dataset: Dataset, law: BetaMixLaw) -> Estimate:
    """``(1 - t) theta_fisher + t xbar ybar``; exact when ``t == 0``."""
    t = shrink_coefficient(law)
    fisher = fisher_estimator(dataset).theta_hat
    if t == 0:
        return Estimate(fisher, "mixup_closed", {"t": 0.0})
    return Estimate(mixup_shrink(fisher, _moment_term(dataset), t), "mixup_closed", {"t": t})


def mixup_estimator_mc(dataset: Dataset, law: BetaMixLaw, draws: int, rng: RngState, lambdas=None) -> Estimate:
    """Monte Carlo average over sampled mixing weights.

    For a fixed ``lam`` the pairwise Mixup average
    ``(1/n^2) sum_ij x_ij(lam) y_ij(lam)`` equals
    ``(1 - w) theta_fisher + w xbar ybar`` with ``w = 2 lam (1 - lam)``, so
    each draw costs O(p) instead of O(n^2 p).  ``lambdas`` overrides the
    sampled weights (used by tests).  ``meta["stderr"]`` holds the
    per-coordinate standard error.
    """
    if lambdas is None:
        if draws < 1:
            raise InvalidParameterError("draws must be >= 1")
        if law.degenerate:
            raise InvalidParameterError("alpha = 0 is a point mass; use mixup_estimator_closed")
        lam = sample_beta(rng, law.alpha, law.beta, size=draws)
    else:
        lam = np.asarray(lambdas, dtype=float).reshape(-1)
    w = 2.0 * lam * (1.0 - lam)
    k = w.size
    w_mean = math.fsum(w) / k
    fisher = fisher_estimator(dataset).theta_hat
    cross = _moment_term(dataset)
    theta = mixup_shrink(fisher, cross, w_mean)
    w_sd = float(np.std(w, ddof=1)) if k > 1 else 0.0
    stderr = np.abs(cross - fisher) * w_sd / math.sqrt(k)
    return Estimate(theta, "mixup_mc", {"draws": k, "t_hat": w_mean, "stderr": stderr})


def estimate_sigma(dataset: Dataset, theta_hat) -> float:
    """``sqrt(sum_i ||x_i - y_i theta_hat||^2 / (p n))``."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta_hat.shape != (dataset.p,):
        raise DimensionError("theta_hat length does not match the dataset")
    resid = dataset.features - dataset.labels[:, None] * theta_hat
    return math.sqrt(float(np.sum(resid * resid)) / (dataset.p * dataset.n))


def pseudo_label(theta_init, unlabeled) -> np.ndarray:
    """``sgn(theta_init^T x)`` with ties sent to +1."""
    theta_init = np.asarray(theta_init, dtype=float)
    x = np.atleast_2d(np.asarray(unlabeled, dtype=float))
    if x.shape[1] != theta_init.size:
        raise DimensionError(f"unlabeled has {x.shape[1]} columns, theta has {theta_init.size}")
    return np.where(x @ theta_init >= 0, 1, -1).astype(np.int64)


class PseudoLabelPool:
    """Running sums over the pooled labeled + pseudo-labeled set.

    Lets callers stream the unlabeled data in chunks; a single chunk gives
    the same numbers as :func:`semi_supervised_estimator`.
    """

    def __init__(self, labeled: Dataset):
        self.init = fisher_estimator(labeled)
        p = labeled.p
        self.n_l = labeled.n
        self.sum_xy = labeled.labels @ labeled.features
        self.sum_x = labeled.features.sum(axis=0)
        self.sum_y = int(labeled.labels.sum())
        self.u_xy = np.zeros(p)
        self.u_x = np.zeros(p)
        self.u_y = 0
        self.n_u = 0
        self.agree = 0
        self.scored = 0

    def add(self, unlabeled, true_labels=None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(unlabeled, dtype=float))
        labels = pseudo_label(self.init.theta_hat, x)
        self.u_xy = self.u_xy + labels @ x
        self.u_x = self.u_x + x.sum(axis=0)
        self.u_y += int(labels.sum())
        self.n_u += x.shape[0]
        if true_labels is not None:
            true_labels = np.asarray(true_labels).reshape(-1)
            if true_labels.size != labels.size:
                raise DimensionError("true_labels length does not match the chunk")
            self.agree += int(labels @ true_labels)
            self.scored += labels.size
        return labels

    def final(self) -> Estimate:
        total = self.n_l + self.n_u
        theta = (self.sum_xy + self.u_xy) / total
        return Estimate(theta, "semi_final", {"n_l": self.n_l, "n_u": self.n_u})

    def pooled_cross(self) -> np.ndarray:
        total = self.n_l + self.n_u
        return ((self.sum_x + self.u_x) / total) * ((self.sum_y + self.u_y) / total)

    def final_mix(self, t: float) -> Estimate:
        theta = mixup_shrink(self.final().theta_hat, self.pooled_cross(), t)
        return Estimate(theta, "semi_final_mix", {"t": t, "n_l": self.n_l, "n_u": self.n_u})

    def gamma_hat(self) -> Optional[float]:
        if self.scored == 0 or self.scored != self.n_u:
            return None
        return self.agree / self.scored


def semi_supervised_estimator(labeled: Dataset, unlabeled, law: Optional[BetaMixLaw] = None, true_labels=None) -> SemiResult:
    """Pseudo-labeling: fit on labeled data, label the rest, refit on the pool.

    With ``law`` the refit also gets the Mixup shrink over the pooled set.
    ``true_labels`` (simulation only) enables the ``gamma_hat`` diagnostic,
    the mean agreement ``(1/n_u) sum y_u * y_true``.
    """
    pool = PseudoLabelPool(labeled)
    unlabeled = np.asarray(unlabeled, dtype=float)
    if unlabeled.size == 0:
        pseudo = np.zeros(0, dtype=np.int64)
    else:
        unlabeled = np.atleast_2d(unlabeled)
        if unlabeled.shape[1] != labeled.p:
            raise DimensionError(f"unlabeled has {unlabeled.shape[1]} columns, labeled has {labeled.p}")
        pseudo = pool.add(unlabeled, true_labels)
    init = Estimate(pool.init.theta_hat, "semi_init", pool.init.meta)
    final_mix = pool.final_mix(shrink_coefficient(law)) if law is not None else None
    return SemiResult(init, pseudo, pool.final(), final_mix, pool.gamma_hat())
