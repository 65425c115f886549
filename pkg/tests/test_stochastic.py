import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgdispatch.errors import InfeasibleMomentsError, InvalidInputError, InvalidParameterError
from mgdispatch.stochastic import (
    BetaDist,
    NormalDist,
    PvParams,
    WeibullDist,
    WtParams,
    beta_params_from_moments,
    fit_wt_quadratic,
    pv_power,
    sample_irradiance_fraction,
    sample_load,
    sample_wind_speed,
    weibull_inverse_cdf,
    wt_power,
)


def lagrange_quadratic(v_ci, v_r):
    """Exact (a, b, c) through (v_ci, 0), (v_m, (v_m/v_r)^3), (v_r, 1)."""
    v_ci, v_r = Fraction(v_ci), Fraction(v_r)
    v_m = (v_ci + v_r) / 2
    xs, ys = (v_ci, v_m, v_r), (Fraction(0), (v_m / v_r) ** 3, Fraction(1))
    a = b = c = Fraction(0)
    for i in range(3):
        o = [xs[j] for j in range(3) if j != i]
        d = (xs[i] - o[0]) * (xs[i] - o[1])
        a += ys[i] / d
        b -= ys[i] * (o[0] + o[1]) / d
        c += ys[i] * o[0] * o[1] / d
    return a, b, c


# frozen from the rational oracle above
QUAD_2_14 = (Fraction(215, 24696), Fraction(-691, 12348), Fraction(34, 441))


def test_quadratic_matches_rational_oracle():
    assert lagrange_quadratic(2, 14) == QUAD_2_14
    got = fit_wt_quadratic(2, 14)
    for g, want in zip(got, QUAD_2_14):
        assert g == pytest.approx(float(want), rel=1e-12)


@pytest.mark.parametrize("v_ci,v_r", [(2, 14), (1, 2), (3, 12), (0.5, 30)])
def test_quadratic_endpoints(v_ci, v_r):
    a, b, c = fit_wt_quadratic(v_ci, v_r)
    assert abs(a * v_ci**2 + b * v_ci + c) < 1e-9
    assert abs(a * v_r**2 + b * v_r + c - 1) < 1e-9


@pytest.mark.parametrize("args", [(14, 2), (2, 2), (-1, 5), (math.nan, 5), (2, math.inf)])
def test_quadratic_rejects_bad_speeds(args):
    with pytest.raises(InvalidParameterError):
        fit_wt_quadratic(*args)


def test_wt_params_validation():
    with pytest.raises(InvalidParameterError):
        WtParams(v_ci=5, v_r=4)
    with pytest.raises(InvalidParameterError):
        WtParams(p_rate=0)
    with pytest.raises(InvalidParameterError):
        WtParams(quad_a=1.0, quad_b=0.0, quad_c=0.0)


def test_wt_power_curve_points():
    p = WtParams()
    assert wt_power(1.0, p) == 0
    assert wt_power(20.0, p) == 250
    assert wt_power(30.0, p) == 0
    a, b, c = QUAD_2_14
    assert wt_power(8.0, p) == pytest.approx(float((a * 64 + b * 8 + c) * 250), rel=1e-12)
    assert wt_power(8.0, p) == pytest.approx(46.647230320699705, rel=1e-12)


def test_wt_power_vectorised_and_negative():
    p = WtParams()
    v = np.array([0.0, 2.0, 14.0, 25.0, 26.0])
    np.testing.assert_array_equal(wt_power(v, p), [0, 0, 250, 250, 0])
    with pytest.raises(InvalidInputError):
        wt_power(-0.1, p)


def test_wt_power_continuity():
    p = WtParams()
    eps = 1e-12
    assert abs(wt_power(p.v_ci + eps, p) - wt_power(p.v_ci - eps, p)) < 1e-9 * p.p_rate
    assert abs(wt_power(p.v_r - eps, p) - wt_power(p.v_r, p)) < 1e-9 * p.p_rate
    assert wt_power(p.v_co, p) == p.p_rate
    assert wt_power(np.nextafter(p.v_co, 100), p) == 0


@given(st.floats(0, 60, allow_nan=False))
def test_wt_power_bounded(v):
    assert 0 <= wt_power(v, WtParams()) <= 250


@given(st.floats(2, 14), st.floats(2, 14))
def test_wt_power_monotone_partial_load(v1, v2):
    p = WtParams()
    lo, hi = sorted((v1, v2))
    assert wt_power(lo, p) <= wt_power(hi, p) + 1e-12


def test_weibull_inverse_cdf_examples():
    assert weibull_inverse_cdf(0.0, WeibullDist(3, 12)) == 0.0
    assert weibull_inverse_cdf(1 - 1 / math.e, WeibullDist(1, 1)) == pytest.approx(1.0, rel=1e-12)


def test_weibull_sample_mean(rng):
    d = WeibullDist(3, 12)
    x = sample_wind_speed(d, rng, 100_000)
    assert np.all(x >= 0)
    assert abs(x.mean() - 10.716) < 0.05
    assert d.mean() == pytest.approx(12 * math.gamma(4 / 3), rel=1e-12)


def test_weibull_rejects_bad_parameters():
    with pytest.raises(InvalidParameterError):
        WeibullDist(0, 1)
    with pytest.raises(InvalidParameterError):
        WeibullDist(1, -1)


def test_beta_from_moments_printed():
    d = beta_params_from_moments(0.5, 0.1)
    assert (d.alpha, d.beta) == (37.0, 37.0)
    d = beta_params_from_moments(0.6, 0.1)
    assert (d.alpha, d.beta) == (57.0, 38.0)


def test_beta_from_moments_infeasible():
    with pytest.raises(InfeasibleMomentsError):
        beta_params_from_moments(0.5, 1.0)


@pytest.mark.parametrize("args", [(0, 0.1), (1, 0.1), (0.5, 0), (0.5, -1)])
def test_beta_from_moments_domain(args):
    with pytest.raises(InvalidParameterError):
        beta_params_from_moments(*args)


def test_beta_unknown_variant():
    with pytest.raises(InvalidParameterError):
        beta_params_from_moments(0.5, 0.1, variant="other")


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.15))
def test_beta_mean_recovered_by_both_variants(m, s):
    for variant in ("printed", "standard"):
        try:
            d = beta_params_from_moments(m, s, variant)
        except InfeasibleMomentsError:
            continue
        assert d.mean() == pytest.approx(m, rel=1e-9)


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.15))
def test_beta_standard_variant_recovers_std(m, s):
    try:
        d = beta_params_from_moments(m, s, "standard")
    except InfeasibleMomentsError:
        return
    assert d.std() == pytest.approx(s, rel=1e-9)


def test_beta_printed_variant_std_differs():
    # the printed form is not moment-exact: for (0.5, 0.1) the Beta std is 0.0577
    d = beta_params_from_moments(0.5, 0.1)
    assert d.std() == pytest.approx(math.sqrt(37 * 37 / (74**2 * 75)), rel=1e-12)
    assert abs(d.std() - 0.1) > 0.04


@pytest.mark.parametrize("a,b,mean,std", [(1, 1, 0.5, None), (3, 12, 0.2, None),
                                          (37, 37, None, 0.0577)])
def test_beta_sampling_moments(rng, a, b, mean, std):
    x = sample_irradiance_fraction(BetaDist(a, b), rng, 100_000)
    assert np.all((x >= 0) & (x <= 1))
    if mean is not None:
        assert abs(x.mean() - mean) < 0.005
    if std is not None:
        assert abs(x.std() - std) < 0.003


def test_pv_power_examples():
    p = PvParams()
    assert abs(pv_power(1000.0, p, 25.0) - 250.0) <= 1e-9
    assert pv_power(0.0, p) == 0.0
    assert pv_power(500.0, p, 35.0) == pytest.approx(126.25, abs=1e-12)
    with pytest.raises(InvalidInputError):
        pv_power(-1.0, p)


def test_pv_power_clamped():
    p = PvParams(k=0.05)
    assert pv_power(800.0, p, -10.0) == 0.0


@given(st.floats(0, 600), st.floats(-10, 60))
def test_pv_power_linear_in_irradiance(g, t):
    p = PvParams()
    assert pv_power(2 * g, p, t) == pytest.approx(2 * pv_power(g, p, t), rel=1e-12, abs=1e-12)


def test_load_sampling(rng):
    assert np.all(sample_load(NormalDist(100, 0), rng, 10) == 100)
    x = sample_load(NormalDist(100, 10), rng, 100_000)
    assert abs(x.mean() - 100) < 0.1
    assert np.all(sample_load(NormalDist(1, 100), rng, 10_000) >= 0)
    with pytest.raises(InvalidParameterError):
        NormalDist(1, -1)


def test_sampling_is_seed_deterministic():
    d = WeibullDist(3, 12)
    a = sample_wind_speed(d, np.random.default_rng(5), 50)
    b = sample_wind_speed(d, np.random.default_rng(5), 50)
    assert a.tobytes() == b.tobytes()
