import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.integrate import quad
from scipy.special import expit

from mixcal.analytic import analytic_ece
from mixcal.errors import DimensionError, InvalidParameterError
from mixcal.model import (
    Dataset,
    FeatureMap,
    ModelParams,
    apply_feature_map,
    boundary_shift,
    check_ood_condition,
    normalize_unit_sigma,
    read_dataset_csv,
    sample_dataset,
    shift_model,
    write_dataset_csv,
)
from mixcal.numerics import make_rng


def test_params_validation():
    with pytest.raises(DimensionError):
        ModelParams(np.zeros(0))
    with pytest.raises(InvalidParameterError):
        ModelParams(np.ones(2), 0.0)
    with pytest.raises(InvalidParameterError):
        ModelParams(np.array([1.0, np.nan]))


def test_canonical_direction():
    p = ModelParams.canonical(4, 2.5, 3.0)
    assert np.array_equal(p.theta, [2.5, 0, 0, 0]) and p.sigma == 3.0 and p.p == 4


def test_dataset_validation():
    with pytest.raises(InvalidParameterError):
        Dataset(np.zeros((2, 2)), [1, 0])
    with pytest.raises(DimensionError):
        Dataset(np.zeros((2, 2)), [1])


def test_noiseless_limit():
    d = sample_dataset(ModelParams(np.array([1.0, 0.0]), 1e-12), 500, make_rng(0))
    assert np.allclose(d.features, d.labels[:, None] * np.array([1.0, 0.0]), atol=1e-10)


def test_zero_theta_class_means():
    n = 10**5
    d = sample_dataset(ModelParams(np.zeros(3)), n, make_rng(1))
    for lab in (-1, 1):
        rows = d.features[d.labels == lab]
        assert np.all(np.abs(rows.mean(axis=0)) < 4 / math.sqrt(rows.shape[0]))


def test_cross_moment_recovers_theta():
    n = 10**5
    theta = np.array([1.0, 0, 0, 0, 0])
    d = sample_dataset(ModelParams(theta), n, make_rng(2))
    est = d.labels @ d.features / n
    assert np.all(np.abs(est - theta) < 4 / math.sqrt(n))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(10, 2000))
def test_label_balance(seed, n):
    d = sample_dataset(ModelParams.canonical(2, 1.0), n, make_rng(seed))
    frac = np.mean(d.labels == 1)
    assert abs(frac - 0.5) <= 4 / math.sqrt(4 * n)


def test_sampling_reproducible():
    a = sample_dataset(ModelParams.canonical(3, 1.0), 50, make_rng(4, 2))
    b = sample_dataset(ModelParams.canonical(3, 1.0), 50, make_rng(4, 2))
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


def test_shift_model():
    p = ModelParams(np.array([1.0, 0.0]))
    assert np.array_equal(shift_model(p, np.zeros(2)).theta, p.theta)
    assert np.array_equal(shift_model(p, np.array([0.0, 1.0])).theta, [1.0, 1.0])
    with pytest.raises(DimensionError):
        shift_model(p, np.zeros(3))


def test_ood_condition():
    t = np.array([1.0, 0.0])
    assert check_ood_condition(t, t, 2, 10)
    assert check_ood_condition(t, np.array([2.0, 0.0]), 2, 1)
    assert not check_ood_condition(t, np.array([3.0, 0.0]), 2, 2)
    with pytest.raises(DimensionError):
        check_ood_condition(t, np.zeros(3), 2, 2)


def test_boundary_shift_quarter():
    theta = np.array([0.6, 0.8, 0.0])
    d = boundary_shift(theta, 0.5, 1000, 1000)
    assert d @ theta == pytest.approx(1000 / 4000, rel=1e-14)
    assert check_ood_condition(theta, theta + d, 1000, 1000)


def test_normalize_unit_sigma():
    d = Dataset(np.array([[2.0, 4.0]]), [1])
    p = ModelParams(np.array([2.0, 0.0]), 2.0)
    d2, p2 = normalize_unit_sigma(d, p)
    assert np.array_equal(d2.features, [[1.0, 2.0]]) and np.array_equal(p2.theta, [1.0, 0.0]) and p2.sigma == 1
    d3, p3 = normalize_unit_sigma(d, ModelParams(np.array([2.0, 0.0])))
    assert d3 is d


def _raw_scale_ece(theta_hat, theta_star, sigma):
    # direct integral on the original scale: score v = theta_hat^T x, reported
    # logistic(2 v / sigma^2), truth logistic(2 m v / (sigma^2 s^2))
    m, s2 = theta_hat @ theta_star, theta_hat @ theta_hat
    sd = sigma * math.sqrt(s2)

    def f(v):
        return abs(expit(2 * m * v / (sigma**2 * s2)) - expit(2 * v / sigma**2)) * stats.norm.pdf(v, m, sd)

    return quad(f, m - 14 * sd, m + 14 * sd, points=[0.0], epsabs=1e-14, limit=200)[0]


@pytest.mark.parametrize("seed", range(5))
def test_explicit_sigma_matches_normalised(seed):
    rng = np.random.default_rng(seed)
    p = 4
    theta_star = rng.normal(size=p)
    theta_hat = theta_star + 0.7 * rng.normal(size=p)
    sigma = rng.uniform(0.5, 3.0)
    got = analytic_ece(theta_hat / sigma, theta_star / sigma)
    assert abs(got - _raw_scale_ece(theta_hat, theta_star, sigma)) <= 1e-10


def test_feature_maps():
    d = Dataset(np.array([[2.0, 4.0]]), [1])
    assert apply_feature_map(d, FeatureMap.identity()) is d
    assert np.array_equal(apply_feature_map(d, FeatureMap.scale(0.5)).features, [[1.0, 2.0]])
    with pytest.raises(InvalidParameterError):
        FeatureMap.scale(0.0)
    with pytest.raises(InvalidParameterError):
        FeatureMap("warp")


def test_csv_round_trip(tmp_path):
    d = sample_dataset(ModelParams.canonical(3, 1.0, 1.7), 25, make_rng(8))
    path = tmp_path / "d.csv"
    write_dataset_csv(d, path)
    assert path.read_text().splitlines()[0] == "y,x1,x2,x3"
    back = read_dataset_csv(path)
    assert np.array_equal(back.features, d.features) and np.array_equal(back.labels, d.labels)


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("label,a\n1,0.5\n")
    with pytest.raises(InvalidParameterError):
        read_dataset_csv(path)
