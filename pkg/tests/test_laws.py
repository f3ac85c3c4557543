"""Tests for the duration/rate laws: samplers, tail functions, moments."""

import math

import numpy as np
import pytest

from sessionwave.errors import (InfiniteMeanError, LawValidationError,
                                UnsupportedMomentError)
from sessionwave.laws import (custom_law, lognormal_rate, pareto_law,
                              point_rate, stable_law, table_rate,
                              two_regime_law)


def rng(seed=0):
    return np.random.default_rng(np.random.SeedSequence(seed))


# ----------------------------------------------------------------------
# construction and validation
# ----------------------------------------------------------------------

def test_alpha_range_validated():
    with pytest.raises(LawValidationError):
        pareto_law(0.0)
    with pytest.raises(LawValidationError):
        pareto_law(2.0)
    with pytest.raises(LawValidationError):
        pareto_law(1.5, p_star=1)


def test_two_regime_needs_positive_rates():
    with pytest.raises(LawValidationError):
        two_regime_law(1.5, rate_law=point_rate(-1.0))
    with pytest.raises(LawValidationError):
        two_regime_law(1.5, rate_law=table_rate([1.0, -2.0], [0.5, 0.5]))


def test_table_rate_law_validation():
    with pytest.raises(LawValidationError):
        table_rate([1.0, 2.0], [0.6, 0.6])


# ----------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------

def test_pareto_inverse_cdf_anchor():
    law = pareto_law(1.5)
    assert law.duration_from_uniform(0.25) == pytest.approx(0.75 ** (-2.0 / 3.0),
                                                            abs=1e-12)
    assert float(law.duration_from_uniform(0.25)) == pytest.approx(1.2114, abs=1e-4)


@pytest.mark.parametrize("law", [
    pareto_law(1.5),
    pareto_law(0.8, rate_law=lognormal_rate(0.0, 0.5)),
    stable_law(1.5, sigma=2.0),
    two_regime_law(1.4),
])
def test_sampling_deterministic_given_seed(law):
    a = law.sample_marks(rng(123), 64)
    b = law.sample_marks(rng(123), 64)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    d, u = law.sample_mark(rng(7))
    d2, u2 = law.sample_mark(rng(7))
    assert (d, u) == (d2, u2)


def test_two_regime_light_rate_uses_exponential_volume():
    # all rates below the threshold: duration = Exp(1) / rate
    law = two_regime_law(1.5, u0=10.0, rate_law=point_rate(2.0))
    durations, rates = law.sample_marks(rng(5), 200_000)
    assert np.all(rates == 2.0)
    volumes = durations * 2.0
    assert volumes.mean() == pytest.approx(1.0, abs=4 * volumes.std() / math.sqrt(len(volumes)))
    assert np.mean(volumes > 1.0) == pytest.approx(math.exp(-1.0), abs=0.005)


# ----------------------------------------------------------------------
# tail moments
# ----------------------------------------------------------------------

def test_tail_moment_closed_forms():
    law = pareto_law(1.5)
    assert law.tail_moment(2, 4.0) == pytest.approx(0.125, abs=1e-15)
    assert law.tail_moment(0, 0.0) == 1.0
    law2 = pareto_law(1.5, rate_law=point_rate(2.0))
    assert law2.tail_moment(2, 4.0) == pytest.approx(0.5, abs=1e-15)


def test_tail_moment_rejects_high_order():
    law = pareto_law(1.5, p_star=4)
    with pytest.raises(UnsupportedMomentError):
        law.tail_moment(5, 1.0)


def test_pareto_prefactor_constant_in_t():
    law = pareto_law(1.3, rate_law=lognormal_rate(0.0, 1.0))
    ref = law.tail_prefactor(2, 1.0)
    for t in (1.0, 2.0, 8.0, 32.0, 1024.0):
        assert law.tail_prefactor(2, t) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("law", [
    pareto_law(1.5),
    pareto_law(1.2, rate_law=table_rate([0.5, 2.0], [0.3, 0.7])),
    stable_law(1.5, sigma=1.0),
    two_regime_law(1.5, rate_law=table_rate([0.5, 2.0], [0.3, 0.7])),
])
def test_tail_moment_matches_monte_carlo(law):
    # bounded rates keep |U|^p * indicator light-tailed, so the plug-in
    # standard error is trustworthy at every p
    n = 1_000_000
    durations, rates = law.sample_marks(rng(2024), n)
    for p in (0, 2, 4):
        vals = np.abs(rates) ** p
        for t in (0.5, 1.0, 2.0, 8.0, 32.0):
            sample = vals * (durations > t)
            est = sample.mean()
            se = sample.std() / math.sqrt(n)
            target = law.tail_moment(p, t)
            assert abs(est - target) <= 4.0 * se + 1e-12, (
                f"p={p}, t={t}: est {est} vs {target} (se {se})")


def test_two_regime_lognormal_survival_matches_monte_carlo():
    # with an unbounded rate law only the indicator (p=0) has clean errors
    law = two_regime_law(1.5, rate_law=lognormal_rate(0.0, 1.0))
    durations, _ = law.sample_marks(rng(11), 1_000_000)
    for t in (0.5, 2.0, 8.0):
        target = law.tail_moment(0, t)
        est = float(np.mean(durations > t))
        se = math.sqrt(target * (1.0 - target) / len(durations))
        assert abs(est - target) <= 4.0 * se


def test_two_regime_tail_limit():
    # t^alpha H_p(t) converges to the heavy-regime partial moment
    law = two_regime_law(1.5, u0=1.0, rate_law=lognormal_rate(0.0, 1.0))
    p = 2
    target = law.rate_law.partial_moment(p - law.alpha, law.u0, above=True)
    vals = [law.tail_prefactor(p, float(2 ** k)) for k in range(4, 13)]
    errs = [abs(v - target) for v in vals]
    assert errs[-1] < 1e-6
    assert errs[-1] < errs[0]


def test_custom_law_tail_and_sampļing():
    # exponential durations, tail index irrelevant but must be in (0, 2)
    law = custom_law(1.5,
                     duration_sampler=lambda r, n: r.exponential(2.0, n),
                     duration_survival=lambda t: np.exp(-np.asarray(t) / 2.0),
                     rate_law=point_rate(3.0))
    assert law.tail_moment(2, 1.0) == pytest.approx(9.0 * math.exp(-0.5), rel=1e-12)
    d, u = law.sample_marks(rng(1), 50_000)
    assert u.mean() == 3.0
    assert d.mean() == pytest.approx(2.0, abs=0.05)


# ----------------------------------------------------------------------
# means and cross moments
# ----------------------------------------------------------------------

def test_mean_duration_closed_forms():
    assert pareto_law(1.5).mean_duration() == pytest.approx(3.0, abs=1e-14)
    cross, mean = pareto_law(1.5).rate_duration_moment(1)
    assert (cross, mean) == (pytest.approx(3.0), pytest.approx(3.0))
    zero = pareto_law(1.5, rate_law=point_rate(0.0))
    assert zero.rate_duration_moment(1)[0] == 0.0


def test_infinite_mean_raises():
    with pytest.raises(InfiniteMeanError):
        pareto_law(0.8).mean_duration()
    with pytest.raises(InfiniteMeanError):
        pareto_law(0.8).rate_duration_moment(1)
    with pytest.raises(InfiniteMeanError, match="[Ii]nfinite"):
        stable_law(0.9).mean_duration()


def test_stable_mean_duration_closed_form_vs_truncated_mc():
    law = stable_law(1.5, sigma=2.0)
    expected = 2.0 ** (1 / 1.5) * (2.0 / math.pi) * math.gamma(1.0 - 1.0 / 1.5)
    assert law.mean_duration() == pytest.approx(expected, rel=1e-12)
    # truncated mean has finite variance, so Monte Carlo comparison is sound
    cap = 100.0
    d, _ = law.sample_marks(rng(77), 400_000)
    trunc = np.minimum(d, cap)
    se = trunc.std() / math.sqrt(len(trunc))
    assert trunc.mean() == pytest.approx(law.truncated_mean_duration(cap),
                                         abs=4 * se)


def test_two_regime_mean_duration_vs_mc():
    law = two_regime_law(1.7, rate_law=lognormal_rate(0.2, 0.8))
    cap = 200.0
    d, _ = law.sample_marks(rng(99), 400_000)
    trunc = np.minimum(d, cap)
    se = trunc.std() / math.sqrt(len(trunc))
    assert trunc.mean() == pytest.approx(law.truncated_mean_duration(cap),
                                         abs=4 * se)
    # full mean: compare against the closed partial-moment expression
    cross, mean = law.rate_duration_moment(1)
    a = law.alpha
    rl = law.rate_law
    manual = (a / (a - 1.0)) * rl.partial_moment(0.0, 1.0, above=True) \
        + rl.partial_moment(0.0, 1.0, above=False)
    assert cross == pytest.approx(manual, rel=1e-10)


def test_lognormal_partial_moments_against_quadrature():
    from scipy import integrate
    rl = lognormal_rate(0.3, 0.9)
    from sessionwave.laws import _lognorm_pdf
    pdf = _lognorm_pdf(0.3, 0.9)
    for q, cut in ((2.0, 1.5), (-1.0, 0.7), (0.5, 2.5)):
        ref, _ = integrate.quad(lambda u: u ** q * pdf(u), cut, np.inf, limit=200)
        assert rl.partial_moment(q, cut, above=True) == pytest.approx(ref, rel=1e-8)


# ----------------------------------------------------------------------
# size-biased sampler (stationary initial conditions)
# ----------------------------------------------------------------------

def test_size_biased_pareto_survival():
    law = pareto_law(1.5)
    totals, _ = law.sample_size_biased(rng(31), 400_000)
    assert totals.min() >= 1.0
    # size-biased survival is v^-(alpha-1)
    for v in (2.0, 4.0, 8.0):
        target = v ** (-0.5)
        est = np.mean(totals > v)
        se = math.sqrt(target * (1 - target) / len(totals))
        assert abs(est - target) <= 4 * se


def test_size_biased_unavailable():
    assert not stable_law(1.5).supports_stationary_init
    with pytest.raises(LawValidationError, match="burn-in"):
        stable_law(1.5).sample_size_biased(rng(0), 4)
    with pytest.raises(InfiniteMeanError):
        pareto_law(0.9).sample_size_biased(rng(0), 4)


def test_tail_functions_object():
    law = pareto_law(1.5)
    tf = law.tail_functions(2)
    assert tf.H(4.0) == pytest.approx(0.125)
    assert tf.L(4.0) == pytest.approx(1.0)
    with pytest.raises(UnsupportedMomentError):
        law.tail_functions(9)
