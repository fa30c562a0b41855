"""Sample-based calibration: confidence scores, binned ECE/MCE, MC oracles."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List

import numpy as np
from scipy.special import expit

from ._io import dumps_json
from .analytic import alignment
from .errors import DegenerateClassifierError, EmptyReportError, InvalidParameterError
from .model import Dataset
from .numerics import RngState

SCHEMES = ("equal_width", "equal_mass")

# Rows of X sampled at a time by the Monte Carlo oracle.
_MC_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class ScoredSamples:
    """Column-wise scored predictions of a binary max-class predictor.

    ``confidence`` is the max-class probability in ``[0.5, 1]``,
    ``predicted`` is +-1 (ties go to +1), ``correct`` is boolean.
    """

    confidence: np.ndarray
    predicted: np.ndarray
    correct: np.ndarray

    def __post_init__(self):
        conf = np.asarray(self.confidence, dtype=float).reshape(-1)
        pred = np.asarray(self.predicted, dtype=np.int64).reshape(-1)
        corr = np.asarray(self.correct, dtype=bool).reshape(-1)
        if not conf.size == pred.size == corr.size:
            raise InvalidParameterError("score columns differ in length")
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "correct", corr)

    def __len__(self):
        return self.confidence.size

    @classmethod
    def from_confidence(cls, confidence, correct) -> "ScoredSamples":
        conf = np.asarray(confidence, dtype=float)
        return cls(conf, np.ones(conf.shape, dtype=np.int64), correct)


@dataclass(frozen=True)
class BinSpec:
    scheme: str = "equal_width"
    count: int = 15

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidParameterError(f"unknown binning scheme {self.scheme!r}")
        if self.count < 1:
            raise InvalidParameterError("bin count must be >= 1")


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    count: int
    mean_confidence: float
    accuracy: float


@dataclass(frozen=True)
class ReliabilityReport:
    bins: List[Bin]
    ece1: float
    ece2: float
    mce_binned: float
    total: int

    def to_dict(self) -> dict:
        return {
            "bins": [asdict(b) for b in self.bins],
            "ece1": self.ece1,
            "ece2": self.ece2,
            "mce_binned": self.mce_binned,
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReliabilityReport":
        return cls([Bin(**b) for b in d["bins"]], d["ece1"], d["ece2"], d["mce_binned"], d["total"])

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    def to_csv(self) -> str:
        lines = ["lo,hi,count,mean_confidence,accuracy"]
        for b in self.bins:
            lines.append(
                ",".join([format(b.lo, ".17g"), format(b.hi, ".17g"), str(b.count),
                          format(b.mean_confidence, ".17g"), format(b.accuracy, ".17g")])
            )
        return "\n".join(lines) + "\n"

    def write(self, path, fmt: str = "json") -> None:
        text = self.to_json() if fmt == "json" else self.to_csv()
        Path(path).write_text(text)

    @classmethod
    def read_json(cls, path) -> "ReliabilityReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def confidence_scores(theta_hat, dataset: Dataset) -> ScoredSamples:
    """Score ``dataset`` with ``p_+(x) = logistic(2 theta_hat^T x)``."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if not np.any(theta_hat):
        raise DegenerateClassifierError("theta_hat is the zero vector")
    v = dataset.features @ theta_hat
    predicted = np.where(v >= 0, 1, -1)
    # max(p, 1 - p) == logistic(2|v|), computed without cancellation
    confidence = expit(2.0 * np.abs(v))
    return ScoredSamples(confidence, predicted, predicted == dataset.labels)


def _equal_mass_bounds(conf_sorted: np.ndarray, count: int) -> np.ndarray:
    n = conf_sorted.size
    block = -(-n // count)
    bounds = [0]
    for k in range(1, count):
        r = max(min(k * block, n), bounds[-1])
        if 0 < r < n and conf_sorted[r] == conf_sorted[r - 1]:
            # move the cut past the whole tie group
            r = int(np.searchsorted(conf_sorted, conf_sorted[r - 1], side="right"))
        bounds.append(r)
    bounds.append(n)
    return np.asarray(bounds)


def binned_calibration(scores: ScoredSamples, spec: BinSpec = BinSpec()) -> ReliabilityReport:
    """Plug-in ECE (``ece1``), squared-gap ECE (``ece2``) and binned MCE.

    Empty bins get zero weight and are left out of the MCE.  Samples are
    put in canonical order first, so the report does not depend on the
    input order.
    """
    n = len(scores)
    if n == 0:
        raise EmptyReportError("no scores to bin")
    order = np.lexsort((scores.correct, scores.confidence))
    conf = scores.confidence[order]
    corr = scores.correct[order].astype(float)

    if spec.scheme == "equal_width":
        edges = np.linspace(0.5, 1.0, spec.count + 1)
        idx = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, spec.count - 1)
        bounds = np.searchsorted(idx, np.arange(spec.count + 1), side="left")
    else:
        bounds = _equal_mass_bounds(conf, spec.count)
        edges = None

    bins = []
    terms1, terms2, gaps = [], [], []
    last_hi = 0.5
    for b in range(spec.count):
        lo_i, hi_i = int(bounds[b]), int(bounds[b + 1])
        k = hi_i - lo_i
        if edges is not None:
            lo, hi = float(edges[b]), float(edges[b + 1])
        elif k:
            lo, hi = float(conf[lo_i]), float(conf[hi_i - 1])
        else:
            lo = hi = last_hi
        last_hi = hi
        if k == 0:
            bins.append(Bin(lo, hi, 0, 0.0, 0.0))
            continue
        mean_conf = math.fsum(conf[lo_i:hi_i]) / k
        acc = math.fsum(corr[lo_i:hi_i]) / k
        gap = abs(acc - mean_conf)
        bins.append(Bin(lo, hi, k, mean_conf, acc))
        terms1.append(k * gap)
        terms2.append(k * gap * gap)
        gaps.append(gap)
    return ReliabilityReport(bins, math.fsum(terms1) / n, math.fsum(terms2) / n, max(gaps), n)


def mc_model_ece(theta_hat, theta_star, samples: int, rng: RngState):
    """Monte Carlo ``E |logistic(2 rho v) - logistic(2 v)|`` over ``v = theta_hat^T X``.

    ``X`` is drawn from the unit-noise model with mean ``theta_star``.
    Returns ``(estimate, stderr)``.
    """
    if samples < 1:
        raise InvalidParameterError("samples must be >= 1")
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    rho = alignment(theta_hat, theta_star).rho
    gen = rng.generator
    sums, sq = [], []
    left = samples
    while left:
        k = min(left, _MC_CHUNK)
        y = 2 * gen.integers(0, 2, size=k) - 1
        x = y[:, None] * theta_star + gen.standard_normal((k, theta_star.size))
        v = x @ theta_hat
        g = np.abs(expit(2.0 * rho * v) - expit(2.0 * v))
        sums.append(float(g.sum()))
        sq.append(float(g @ g))
        left -= k
    mean = math.fsum(sums) / samples
    if samples == 1:
        return mean, math.inf
    var = max(math.fsum(sq) / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)


def grid_mce(rho: float, c: float, v_max: float, grid_points: int):
    """Dense-grid maximum of ``|logistic(2 rho v) - logistic(2 c v)|`` on ``[0, v_max]``.

    Returns ``(value, v_at_max)``.
    """
    if grid_points < 2:
        raise InvalidParameterError("grid_points must be >= 2")
    v = np.linspace(0.0, v_max, grid_points)
    g = np.abs(expit(2.0 * rho * v) - expit(2.0 * c * v))
    i = int(np.argmax(g))
    return float(g[i]), float(v[i])


def mc_model_mce_scan(theta_hat, theta_star, grid_points: int) -> float:
    """Grid oracle for the plain-classifier MCE on ``[0, |m| + 12 s]``."""
    if grid_points < 1000:
        raise InvalidParameterError("grid_points must be >= 1000")
    a = alignment(theta_hat, theta_star)
    return grid_mce(a.rho, 1.0, abs(a.m) + 12.0 * a.s, grid_points)[0]
