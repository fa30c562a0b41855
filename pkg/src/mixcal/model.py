"""The two-class spherical Gaussian model and its datasets.

Labels are fair signs and ``x | y ~ N(y * theta, sigma**2 I)``.  The
analytic calibration routines assume ``sigma == 1``; use
:func:`normalize_unit_sigma` to get there.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .numerics import RngState


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ModelParams:
    theta: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        theta = _frozen(self.theta)
        if theta.ndim != 1 or theta.size < 1:
            raise DimensionError("theta must be a non-empty vector")
        if not np.all(np.isfinite(theta)):
            raise InvalidParameterError("theta must be finite")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def p(self) -> int:
        return self.theta.size

    @classmethod
    def canonical(cls, p: int, theta_norm: float, sigma: float = 1.0) -> "ModelParams":
        """``theta = theta_norm * e_1``; the model is rotation invariant."""
        if p < 1:
            raise InvalidParameterError("p must be >= 1")
        theta = np.zeros(p)
        theta[0] = theta_norm
        return cls(theta, sigma)


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = _frozen(self.features)
        if x.ndim == 1:
            x = _frozen(x.reshape(1, -1))
        y = np.array(self.labels, dtype=np.int64).reshape(-1)
        y.setflags(write=False)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DimensionError("features must be an n x p matrix with n >= 1")
        if y.size != x.shape[0]:
            raise DimensionError(f"{y.size} labels for {x.shape[0]} feature rows")
        if not np.all((y == 1) | (y == -1)):
            raise InvalidParameterError("labels must be -1 or +1")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def to_csv(self, path) -> None:
        write_dataset_csv(self, path)

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        return read_dataset_csv(path)


@dataclass(frozen=True)
class FeatureMap:
    """Closed set of feature maps: ``identity`` or ``scale(factor)``."""

    kind: str = "identity"
    factor: float | None = None

    def __post_init__(self):
        if self.kind == "identity":
            if self.factor is not None:
                raise InvalidParameterError("identity map takes no factor")
        elif self.kind == "scale":
            if self.factor is None or not self.factor > 0:
                raise InvalidParameterError("scale map needs a positive factor")
        else:
            raise InvalidParameterError(f"unknown feature map {self.kind!r}")

    @classmethod
    def identity(cls) -> "FeatureMap":
        return cls("identity")

    @classmethod
    def scale(cls, factor: float) -> "FeatureMap":
        return cls("scale", float(factor))


def sample_dataset(params: ModelParams, n: int, rng: RngState) -> Dataset:
    """Draw ``n`` labelled points; labels first, then features."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    labels, features = _draw(params, n, rng)
    return Dataset(features, labels)


def _draw(params: ModelParams, n: int, rng: RngState):
    gen = rng.generator
    labels = 2 * gen.integers(0, 2, size=n) - 1
    noise = gen.standard_normal((n, params.p))
    return labels, labels[:, None] * params.theta + params.sigma * noise


def shift_model(params: ModelParams, delta) -> ModelParams:
    delta = np.asarray(delta, dtype=float)
    if delta.shape != params.theta.shape:
        raise DimensionError(f"delta has shape {delta.shape}, expected {params.theta.shape}")
    return ModelParams(params.theta + delta, params.sigma)


def check_ood_condition(theta_star, theta_prime, p: int, n: int) -> bool:
    """True when the shift satisfies ``(theta' - theta*)^T theta* <= p / (2n)``."""
    theta_star = np.asarray(theta_star, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    if theta_star.shape != theta_prime.shape:
        raise DimensionError("theta_star and theta_prime differ in length")
    return float((theta_prime - theta_star) @ theta_star) <= p / (2.0 * n)


def boundary_shift(theta_star, multiple: float, p: int, n: int) -> np.ndarray:
    """Shift along ``theta*`` with ``delta^T theta* = multiple * p / (2n)``."""
    theta_star = np.asarray(theta_star, dtype=float)
    norm2 = float(theta_star @ theta_star)
    if norm2 == 0:
        raise InvalidParameterError("cannot shift along a zero theta")
    return multiple * (p / (2.0 * n)) * theta_star / norm2


def normalize_unit_sigma(dataset: Dataset, params: ModelParams):
    """Divide features and theta by sigma, returning sigma = 1 copies."""
    if params.sigma == 1.0:
        return dataset, params
    s = params.sigma
    return Dataset(dataset.features / s, dataset.labels), ModelParams(params.theta / s, 1.0)


def apply_feature_map(dataset: Dataset, fmap: FeatureMap) -> Dataset:
    if fmap.kind == "identity":
        return dataset
    return Dataset(dataset.features * fmap.factor, dataset.labels)


def write_dataset_csv(dataset: Dataset, path) -> None:
    """Header ``y,x1,...,xp``; one sample per row, floats to 17 digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"x{j + 1}" for j in range(dataset.p)])
        for y, row in zip(dataset.labels, dataset.features):
            w.writerow([int(y)] + [format(v, ".17g") for v in row])


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0] != "y":
            raise InvalidParameterError(f"{path}: expected header starting with 'y'")
        expected = ["y"] + [f"x{j + 1}" for j in range(len(header) - 1)]
        if header != expected:
            raise InvalidParameterError(f"{path}: malformed header {header}")
        rows = [r for r in reader if r]
    if not rows:
        raise InvalidParameterError(f"{path}: no data rows")
    labels = [int(float(r[0])) for r in rows]
    features = [[float(v) for v in r[1:]] for r in rows]
    if any(len(r) != len(header) - 1 for r in features):
        raise DimensionError(f"{path}: ragged rows")
    return Dataset(np.array(features, dtype=float), labels)
