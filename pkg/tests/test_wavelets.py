"""Tests for wavelet pairs, tables and path coefficients."""

import math

import numpy as np
import pytest

from sessionwave.errors import SessionWaveError
from sessionwave.laws import pareto_law
from sessionwave.simulate import (PathSample, sample_grid, simulate,
                                  window_averages)
from sessionwave.wavelets import (CONTINUOUS, DISCRETE, computable_range,
                                  continuous_coefficients, daubechies_filter,
                                  direct_discrete_coefficient,
                                  discrete_coefficients, make_daubechies,
                                  make_haar, make_wavelet, max_scale,
                                  read_coefficients, session_coefficient,
                                  write_coefficients, write_wavelet_table)

SQRT2 = math.sqrt(2.0)


# ----------------------------------------------------------------------
# construction
# ----------------------------------------------------------------------

def test_haar_primitive_is_exact_triangle():
    w = make_haar()
    assert w.M == 1
    assert float(w.primitive(0.5)) == 0.5
    assert float(w.primitive(1.0)) == 0.0
    assert float(w.primitive(0.25)) == 0.25


def test_db2_filter_closed_form():
    h = daubechies_filter(2)
    s3 = math.sqrt(3.0)
    ref = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / (4 * SQRT2)
    np.testing.assert_allclose(h, ref, atol=1e-12)


@pytest.mark.parametrize("N", [2, 3, 4, 6, 10])
def test_daubechies_filter_invariants(N):
    h = daubechies_filter(N)
    assert len(h) == 2 * N
    assert h.sum() == pytest.approx(SQRT2, abs=1e-12)
    for m in range(1, N):
        assert np.dot(h[: len(h) - 2 * m], h[2 * m:]) == pytest.approx(0.0, abs=1e-10)
    assert np.dot(h, h) == pytest.approx(1.0, abs=1e-10)


def test_daubechies_order_range():
    with pytest.raises(SessionWaveError):
        make_daubechies(1)
    with pytest.raises(SessionWaveError):
        make_daubechies(11)
    with pytest.raises(SessionWaveError):
        make_wavelet("sym4")


@pytest.mark.parametrize("name", ["haar", "db2", "db3", "db5"])
def test_zero_mean_of_mother(name):
    # primitive at the right edge of the support is the mother's integral
    w = make_wavelet(name)
    assert abs(float(w.primitive_table[-1])) < 1e-10


@pytest.mark.parametrize("name", ["haar", "db2", "db4"])
def test_partition_of_unity(name):
    w = make_wavelet(name)
    for t in np.linspace(0.05, 0.95, 7):
        total = sum(float(w.phi(t - k)) for k in range(-2 * w.M, 2 * w.M + 2))
        assert total == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name", ["db2", "db3", "db6"])
def test_two_vanishing_moment_identities(name):
    # int s psi(s) ds = 0 and sum_k k phi(t-k) affine in t
    w = make_wavelet(name)
    step = 2.0 ** -w.resolution
    first_moment = np.trapezoid(w.grid * w.psi_table, dx=step)
    assert abs(first_moment) < 1e-6
    ts = np.linspace(0.1, 0.9, 9)
    sums = np.array([sum(k * float(w.phi(t - k))
                         for k in range(-2 * w.M, 2 * w.M + 2)) for t in ts])
    ab = np.polyfit(ts, sums, 1)
    residual = sums - np.polyval(ab, ts)
    assert np.abs(residual).max() < 1e-7


def test_haar_first_moment_not_zero():
    w = make_haar()
    step = 2.0 ** -w.resolution
    assert abs(np.trapezoid(w.grid * w.psi_table, dx=step)) > 0.1


# ----------------------------------------------------------------------
# index bookkeeping
# ----------------------------------------------------------------------

def test_computable_range_examples():
    assert computable_range(2, 16, 1, CONTINUOUS) == 4
    assert computable_range(5, 16, 1, CONTINUOUS) == 0
    assert computable_range(2, 16, 1, DISCRETE) == 4
    assert computable_range(3, 100, 3, DISCRETE) == math.floor(98 / 8) - 2
    with pytest.raises(SessionWaveError):
        computable_range(1, 16, 1, "sideways")


def test_max_scale():
    assert max_scale(16, 1, CONTINUOUS) == 4
    assert max_scale(100, 1, CONTINUOUS) == 6


# ----------------------------------------------------------------------
# continuous coefficients
# ----------------------------------------------------------------------

def test_session_coefficient_anchor():
    w = make_haar()
    assert session_coefficient(w, 0, 0, 0.0, 0.5, 2.0) == pytest.approx(1.0, abs=1e-14)
    # a session covering the whole support integrates the mother to zero
    assert session_coefficient(w, 0, 0, 0.0, 1.0, 7.0) == pytest.approx(0.0, abs=1e-14)
    assert session_coefficient(w, 1, 0, 0.0, 1.0, 2.0) == pytest.approx(SQRT2, abs=1e-12)


def test_constant_shift_leaves_coefficients_unchanged():
    from tests.test_simulate import manual_set
    w = make_haar()
    base = manual_set([(0.3, 2.0, 1.0), (5.0, 1.5, -2.0)], T=32.0)
    with_cover = manual_set([(0.3, 2.0, 1.0), (5.0, 1.5, -2.0),
                             (0.0, 64.0, 11.0)], T=32.0)
    a = continuous_coefficients(base, w, 4)
    b = continuous_coefficients(with_cover, w, 4)
    for j in a.levels:
        np.testing.assert_allclose(a.levels[j], b.levels[j], atol=1e-11)


def test_continuous_counts_and_jmax_guard():
    sset = simulate(pareto_law(1.5), 64.0, "fresh", seed=0)
    w = make_haar()
    coeffs = continuous_coefficients(sset, w, 6)
    for j in range(1, 7):
        assert coeffs.count(j) == computable_range(j, 64, 1, CONTINUOUS)
    with pytest.raises(SessionWaveError):
        continuous_coefficients(sset, w, 7)


def test_continuous_matches_per_session_sum():
    # vectorised accumulation equals the session-by-session reference
    sset = simulate(pareto_law(1.5), 32.0, "stationary", seed=8)
    for name in ("haar", "db2"):
        w = make_wavelet(name)
        coeffs = continuous_coefficients(sset, w, 3)
        for j in (1, 3):
            for k in (0, coeffs.count(j) - 1):
                ref = sum(session_coefficient(w, j, k, a, d, r)
                          for a, d, r in zip(sset.arrivals, sset.durations,
                                             sset.rates))
                ref += sum(session_coefficient(w, j, k, 0.0, res, r)
                           for res, r in zip(sset.init_residuals,
                                             sset.init_rates))
                assert coeffs.levels[j][k] == pytest.approx(ref, abs=1e-9)


def test_continuous_handles_huge_durations():
    from tests.test_simulate import manual_set
    sset = manual_set([(1.0, 1e60, 2.0), (2.25, 0.5, 1.0)], T=16.0)
    w = make_haar()
    coeffs = continuous_coefficients(sset, w, 3)
    for j in coeffs.levels:
        assert np.all(np.isfinite(coeffs.levels[j]))
    # the huge session acts as a start-only edge at t=1
    assert coeffs.levels[1][0] == pytest.approx(
        session_coefficient(w, 1, 0, 1.0, 1e60, 2.0)
        + session_coefficient(w, 1, 0, 2.25, 0.5, 1.0), abs=1e-12)


# ----------------------------------------------------------------------
# discrete coefficients (pyramid)
# ----------------------------------------------------------------------

def test_pyramid_haar_anchor():
    sample = PathSample("grid", np.array([3.0, 1.0]))
    coeffs = discrete_coefficients(sample, make_haar(), 1)
    assert coeffs.levels[1][0] == pytest.approx((3.0 - 1.0) / SQRT2, abs=1e-14)


def test_pyramid_constant_sequence_is_zero():
    sample = PathSample("grid", np.ones(4))
    coeffs = discrete_coefficients(sample, make_haar(), 2)
    assert np.allclose(coeffs.levels[1], 0.0)
    assert np.allclose(coeffs.levels[2], 0.0)
    w = make_daubechies(3)
    sample = PathSample("grid", np.full(64, 5.5))
    coeffs = discrete_coefficients(sample, w, 2)
    for j in coeffs.levels:
        np.testing.assert_allclose(coeffs.levels[j], 0.0, atol=1e-12)


def test_pyramid_counts_match_formula():
    for name, T in (("haar", 64), ("db2", 200)):
        w = make_wavelet(name)
        sample = PathSample("grid", np.random.default_rng(0).normal(size=T))
        coeffs = discrete_coefficients(sample, w, 3)
        for j in coeffs.levels:
            assert coeffs.count(j) == computable_range(j, T, w.M, DISCRETE)


def test_pyramid_insufficient_samples():
    with pytest.raises(SessionWaveError):
        discrete_coefficients(PathSample("grid", np.ones(3)), make_daubechies(2), 1)


def test_pyramid_vs_direct_reference():
    rng = np.random.default_rng(42)
    sample = PathSample("grid", rng.normal(size=64))
    w = make_haar()
    coeffs = discrete_coefficients(sample, w, 3)
    for j, k in ((1, 0), (1, 7), (2, 3), (3, 1)):
        ref = direct_discrete_coefficient(sample, w, j, k)
        assert coeffs.levels[j][k] == pytest.approx(ref, abs=1e-12)

    w2 = make_daubechies(2)
    sample2 = PathSample("grid", rng.normal(size=96))
    coeffs2 = discrete_coefficients(sample2, w2, 2)
    for j, k in ((1, 0), (1, 5), (2, 2)):
        ref = direct_discrete_coefficient(sample2, w2, j, k)
        assert coeffs2.levels[j][k] == pytest.approx(ref, abs=1e-6)

    zero = PathSample("grid", np.zeros(32))
    assert direct_discrete_coefficient(zero, w, 2, 1) == 0.0


def test_haar_averaged_equals_continuous():
    w = make_haar()
    for seed in (0, 5):
        sset = simulate(pareto_law(1.5), 512.0, "stationary", seed=seed)
        cont = continuous_coefficients(sset, w, 6)
        avg = discrete_coefficients(window_averages(sset, 512), w, 6)
        for j in avg.levels:
            n = len(avg.levels[j])
            np.testing.assert_allclose(avg.levels[j], cont.levels[j][:n],
                                       atol=1e-12)


# ----------------------------------------------------------------------
# statistical properties
# ----------------------------------------------------------------------

def pooled_second_moments(alpha, T, reps, wavelet, j_max, scheme=CONTINUOUS,
                          seed0=0):
    law = pareto_law(alpha)
    sums = {j: 0.0 for j in range(1, j_max + 1)}
    counts = {j: 0 for j in range(1, j_max + 1)}
    for r in range(reps):
        sset = simulate(law, float(T), "stationary", seed=seed0 + r)
        if scheme == CONTINUOUS:
            coeffs = continuous_coefficients(sset, wavelet, j_max)
        else:
            coeffs = discrete_coefficients(sample_grid(sset, T), wavelet, j_max)
        for j in coeffs.levels:
            d = coeffs.levels[j]
            sums[j] += float(np.dot(d, d))
            counts[j] += len(d)
    return {j: sums[j] / counts[j] for j in sums if counts[j]}


def test_variance_scaling_smoke():
    # slope of log2 m_j across mid scales approaches 2 - alpha
    w = make_haar()
    m = pooled_second_moments(1.5, 2 ** 16, 6, w, 12)
    js = np.arange(5, 12)
    slope = np.polyfit(js, [math.log2(m[j]) for j in js], 1)[0]
    assert slope == pytest.approx(0.5, abs=0.15)


def test_discrete_continuous_moment_gap_stays_bounded():
    # the second-moment gap between schemes must not grow with scale
    w = make_haar()
    T = 2 ** 15
    mc = pooled_second_moments(1.5, T, 5, w, 11, CONTINUOUS)
    md = pooled_second_moments(1.5, T, 5, w, 11, DISCRETE)
    rel_low = abs(mc[3] - md[3]) / mc[3]
    rel_high = abs(mc[10] - md[10]) / mc[10]
    assert rel_high < rel_low


def test_within_scale_correlation_decays():
    w = make_haar()
    law = pareto_law(1.5)
    j = 3
    d0, d1, d16 = [], [], []
    for r in range(300):
        sset = simulate(law, 256.0, "stationary", seed=900 + r)
        d = continuous_coefficients(sset, w, j).levels[j]
        d0.append(d[0])
        d1.append(d[1])
        d16.append(d[16])
    c1 = abs(np.corrcoef(d0, d1)[0, 1])
    c16 = abs(np.corrcoef(d0, d16)[0, 1])
    assert c16 < c1


# ----------------------------------------------------------------------
# files
# ----------------------------------------------------------------------

def test_coefficient_csv_round_trip(tmp_path):
    sset = simulate(pareto_law(1.5), 64.0, "fresh", seed=4)
    coeffs = continuous_coefficients(sset, make_haar(), 4)
    path = tmp_path / "coeffs.csv"
    write_coefficients(coeffs, path)
    back = read_coefficients(path, "haar")
    assert back.scheme == CONTINUOUS
    for j in coeffs.levels:
        np.testing.assert_array_equal(back.levels[j], coeffs.levels[j])


def test_wavelet_table_dump(tmp_path):
    path = tmp_path / "table.csv"
    write_wavelet_table(make_daubechies(2), path)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "x,phi,psi,Psi"
    assert len(rows) > 1000
