import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixcal.analytic import Alignment, alignment, analytic_ece, analytic_mce
from mixcal.empirical import (
    BinSpec,
    ReliabilityReport,
    ScoredSamples,
    binned_calibration,
    confidence_scores,
    grid_mce,
    mc_model_ece,
    mc_model_mce_scan,
)
from mixcal.errors import DegenerateClassifierError, EmptyReportError, InvalidParameterError
from mixcal.model import Dataset
from mixcal.numerics import make_rng


def _calibrated_stream(seed, n):
    rng = np.random.default_rng(seed)
    conf = rng.uniform(0.5, 1.0, size=n)
    return ScoredSamples.from_confidence(conf, rng.random(n) < conf)


@st.composite
def score_sets(draw):
    n = draw(st.integers(1, 60))
    # few distinct values so equal-mass ties actually occur
    conf = draw(st.lists(st.sampled_from([0.5, 0.55, 0.6, 0.7, 0.75, 0.9, 1.0]), min_size=n, max_size=n))
    corr = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    return ScoredSamples.from_confidence(conf, corr)


def test_confidence_examples():
    d = Dataset(np.array([[1.0, -1.0], [50.0, 0.0]]), [1, 1])
    s = confidence_scores(np.array([1.0, 1.0]), d)
    assert s.confidence[0] == 0.5 and s.predicted[0] == 1
    s = confidence_scores(np.array([1.0, 0.0]), d)
    assert abs(s.confidence[1] - 1) <= 1e-15
    with pytest.raises(DegenerateClassifierError):
        confidence_scores(np.zeros(2), d)


def test_confidence_flip_symmetry():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 3))
    th = rng.normal(size=3)
    a = confidence_scores(th, Dataset(x, np.ones(50)))
    b = confidence_scores(-th, Dataset(-x, np.ones(50)))
    assert np.array_equal(a.confidence, b.confidence)


def test_binned_examples():
    r = binned_calibration(ScoredSamples.from_confidence([0.5] * 4, [True, False, True, False]))
    assert r.ece1 == 0
    r = binned_calibration(ScoredSamples.from_confidence([0.8] * 10, [True] * 6 + [False] * 4), BinSpec(count=1))
    assert r.ece1 == pytest.approx(0.2, abs=1e-15) and r.mce_binned == pytest.approx(0.2, abs=1e-15)
    assert r.ece2 == pytest.approx(0.04, abs=1e-15)


def test_binned_empty():
    with pytest.raises(EmptyReportError):
        binned_calibration(ScoredSamples.from_confidence([], []))


def test_calibrated_stream_small_ece():
    assert binned_calibration(_calibrated_stream(1, 10**5)).ece1 <= 0.01


def test_binspec_validation():
    with pytest.raises(InvalidParameterError):
        BinSpec("quantile")
    with pytest.raises(InvalidParameterError):
        BinSpec(count=0)


@settings(max_examples=60)
@given(score_sets(), st.sampled_from(["equal_width", "equal_mass"]), st.integers(1, 8))
def test_report_invariants(scores, scheme, count):
    r = binned_calibration(scores, BinSpec(scheme, count))
    assert sum(b.count for b in r.bins) == r.total == len(scores)
    assert len(r.bins) == count
    for b in r.bins:
        assert 0 <= b.accuracy <= 1 and 0 <= b.mean_confidence <= 1
        assert abs(b.accuracy * b.count - round(b.accuracy * b.count)) < 1e-9
    assert 0 <= r.ece1 <= r.mce_binned + 1e-15 <= 1 + 1e-15
    assert r.ece2 <= r.mce_binned * r.ece1 + 1e-15


@settings(max_examples=60)
@given(score_sets(), st.sampled_from(["equal_width", "equal_mass"]), st.integers(1, 8), st.randoms())
def test_permutation_invariance(scores, scheme, count, rnd):
    perm = list(range(len(scores)))
    rnd.shuffle(perm)
    shuffled = ScoredSamples(scores.confidence[perm], scores.predicted[perm], scores.correct[perm])
    a = binned_calibration(scores, BinSpec(scheme, count))
    b = binned_calibration(shuffled, BinSpec(scheme, count))
    assert a == b


@settings(max_examples=60)
@given(score_sets(), st.integers(1, 8))
def test_equal_mass_ties_not_split(scores, count):
    r = binned_calibration(scores, BinSpec("equal_mass", count))
    full = [b for b in r.bins if b.count]
    for lo_bin, hi_bin in zip(full, full[1:]):
        assert lo_bin.hi < hi_bin.lo


def test_equal_mass_block_sizes():
    conf = np.linspace(0.5, 1.0, 100)
    r = binned_calibration(ScoredSamples.from_confidence(conf, np.ones(100, bool)), BinSpec("equal_mass", 15))
    # ceil(100 / 15) = 7 per bin; the last bin gets the remaining 2
    assert [b.count for b in r.bins] == [7] * 14 + [2]


def test_report_serialisation(tmp_path):
    r = binned_calibration(_calibrated_stream(2, 500), BinSpec("equal_width", 5))
    d = json.loads(r.to_json())
    assert set(d) == {"bins", "ece1", "ece2", "mce_binned", "total"}
    assert set(d["bins"][0]) == {"lo", "hi", "count", "mean_confidence", "accuracy"}
    path = tmp_path / "r.json"
    r.write(path)
    assert ReliabilityReport.read_json(path) == r
    lines = r.to_csv().splitlines()
    assert lines[0] == "lo,hi,count,mean_confidence,accuracy" and len(lines) == 6


def test_mc_ece_calibrated_is_exactly_zero():
    est, se = mc_model_ece([1.0, 0.0], [1.0, 0.0], 1000, make_rng(0))
    assert est == 0 and se == 0


def test_mc_ece_matches_quadrature():
    est, se = mc_model_ece([1.0, 1.0], [1.0, 0.0], 10**6, make_rng(3))
    assert abs(est - analytic_ece([1.0, 1.0], [1.0, 0.0])) <= 3 * se


def test_mce_scan_examples():
    assert mc_model_mce_scan([1.0, 0.0], [1.0, 0.0], 1000) == 0
    th, star = np.array([1.0, 1.0]), np.array([1.0, 0.0])
    exact = analytic_mce(alignment(th, star)).value
    coarse = mc_model_mce_scan(th, star, 2000)
    assert exact - 1e-4 <= coarse <= exact + 1e-6
    with pytest.raises(InvalidParameterError):
        mc_model_mce_scan(th, star, 10)


def test_grid_mce_matches_solver():
    value, _ = grid_mce(0.5, 1.0, 20.0, 10**6)
    assert abs(value - analytic_mce(Alignment(0.5, 0.5, 1.0)).value) <= 1e-8
