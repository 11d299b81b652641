import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensroc.bands import (
    BAND_COLUMNS,
    build_bands,
    default_log_floor,
    normal_quantile,
    read_bands_csv,
    simultaneous_bands,
    to_log_axis,
    write_bands_csv,
)
from ensroc.binomial import threshold_profile
from ensroc.roc import estimate_roc
from ensroc.votes import VoteMatrix


def z_by_bisection(level):
    """Two-sided normal critical value from math.erf by bisection."""
    target = 0.5 + level / 2
    lo, hi = 0.0, 20.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if 0.5 * (1 + math.erf(mid / math.sqrt(2))) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _estimate(votes, m_eval=None):
    return estimate_roc(threshold_profile(votes, m_eval), votes.labels)


@pytest.mark.parametrize("level", [0.5, 0.9, 0.95, 0.99, 0.9995, 1 - 1e-6])
def test_quantile_against_bisection(level):
    assert normal_quantile(level) == pytest.approx(z_by_bisection(level), abs=1e-8)


def test_z_095():
    assert abs(normal_quantile(0.95) - 1.959964) <= 1e-5


def test_zero_variance_bands_collapse():
    v = VoteMatrix(np.array([0, 0, 5, 5]), 5, np.array([0, 1, 0, 1]))
    band = build_bands(_estimate(v), 0.95, "classifier")
    np.testing.assert_array_equal(band.fpr_lo, band.mean_fpr)
    np.testing.assert_array_equal(band.tpr_hi, band.mean_tpr)


def test_clamped_at_threshold_zero(random_votes):
    band = build_bands(_estimate(random_votes), 0.95, "full")
    assert band.fpr_hi[0] == 1.0 and band.tpr_hi[0] == 1.0
    assert band.fpr_lo[0] < 1.0


def test_half_widths(random_votes):
    est = _estimate(random_votes)
    band = build_bands(est, 0.9, "classifier")
    z = normal_quantile(0.9)
    expect_hi = np.clip(est.mean_tpr + z * np.sqrt(est.var_tpr_classifier), 0, 1)
    np.testing.assert_array_equal(band.tpr_hi, expect_hi)
    assert band.z == z


def test_log_axis_examples():
    v = VoteMatrix(np.array([0, 3, 1, 4]), 4, np.array([0, 0, 1, 1]))
    band = build_bands(_estimate(v))
    logs = to_log_axis(band, floor=1e-6)
    assert logs.log10_fpr[-1] == -6.0
    # direct log10 values
    assert math.log10(0.01) == -2.0
    lo, hi = math.log10(0.0009), math.log10(0.0011)
    assert lo == pytest.approx(-3.0458, abs=1e-3) and hi == pytest.approx(-2.9586, abs=1e-3)
    with pytest.raises(ValueError):
        to_log_axis(band, floor=0.0)


def test_log_axis_values(random_votes):
    band = build_bands(_estimate(random_votes))
    logs = to_log_axis(band)
    floor = default_log_floor(100)
    assert logs.floor == floor
    np.testing.assert_allclose(logs.log10_fpr, np.log10(np.maximum(band.mean_fpr, floor)))
    assert np.all(logs.log10_fpr_lo <= logs.log10_fpr_hi)
    lines = logs.polylines()
    assert set(lines) == {"mean", "upper", "lower"}


def test_bonferroni_z_for_100_thresholds():
    rng = np.random.default_rng(5)
    labels = np.repeat([0, 1], 50)
    k = rng.integers(1, 100, size=100)  # strictly inside (0, m): every interior threshold is live
    est = _estimate(VoteMatrix(k, 100, labels))
    live = (est.var_fpr_classifier > 0) | (est.var_tpr_classifier > 0)
    assert live.sum() == 100
    band = simultaneous_bands(est, 0.95, "classifier")
    assert band.z == pytest.approx(3.4808, abs=1e-3)
    assert band.z == pytest.approx(z_by_bisection(0.9995), abs=1e-8)


def test_bonferroni_single_threshold_matches_pointwise():
    v = VoteMatrix(np.array([0, 1]), 1, np.array([0, 1]))
    est = _estimate(v, 1)
    # with m_eval=1 only t=1 can carry classifier variance, and here it has none
    s = simultaneous_bands(est, 0.95, "classifier")
    p = build_bands(est, 0.95, "classifier")
    assert s.z == p.z
    np.testing.assert_array_equal(s.fpr_lo, p.fpr_lo)


def test_bonferroni_zero_variance():
    v = VoteMatrix(np.array([0, 0, 3, 3]), 3, np.array([0, 1, 0, 1]))
    s = simultaneous_bands(_estimate(v), 0.95, "classifier")
    np.testing.assert_array_equal(s.tpr_lo, s.mean_tpr)


@st.composite
def votes_strategy(draw):
    m = draw(st.integers(1, 30))
    n = draw(st.integers(2, 30))
    counts = draw(st.lists(st.integers(0, m), min_size=n, max_size=n))
    labels = [0, 1] + draw(st.lists(st.integers(0, 1), min_size=n - 2, max_size=n - 2))
    return VoteMatrix(np.array(counts), m, np.array(labels))


@settings(max_examples=100, deadline=None)
@given(votes_strategy())
def test_band_orderings(votes):
    est = _estimate(votes)
    b95 = build_bands(est, 0.95, "full")
    b99 = build_bands(est, 0.99, "full")
    c95 = build_bands(est, 0.95, "classifier")
    sim = simultaneous_bands(est, 0.95, "full")
    for b in (b95, b99, c95, sim):
        assert np.all(b.fpr_lo <= b.mean_fpr) and np.all(b.mean_fpr <= b.fpr_hi)
        assert np.all(b.tpr_lo <= b.mean_tpr) and np.all(b.mean_tpr <= b.tpr_hi)
        assert np.all((b.fpr_lo >= 0) & (b.fpr_hi <= 1))
    assert np.all(b99.fpr_lo <= b95.fpr_lo) and np.all(b99.tpr_hi >= b95.tpr_hi)
    assert np.all(b95.fpr_lo <= c95.fpr_lo) and np.all(b95.fpr_hi >= c95.fpr_hi)
    assert np.all(sim.tpr_lo <= b95.tpr_lo)


def test_band_csv(tmp_path, random_votes):
    band = build_bands(_estimate(random_votes))
    path = tmp_path / "b.csv"
    write_bands_csv(band, path)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(BAND_COLUMNS)
    back = read_bands_csv(path)
    np.testing.assert_array_equal(back["mean_tpr"], band.mean_tpr)
    np.testing.assert_array_equal(back["t"], band.t)
    write_bands_csv(band, tmp_path / "b2.csv")
    assert (tmp_path / "b2.csv").read_bytes() == path.read_bytes()
