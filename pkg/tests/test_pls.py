import math

import numpy as np
import pytest

from vstatns import Curve, Innovation, PlsModel, SegmentFilter, SeriesPath, custom, dependence_measure, tvar1, tvma
from vstatns import rng as vrng
from vstatns.curves import ConfigError
from vstatns.pls import DegenerateVarianceError, SimulationError, UnsupportedModelError


def test_identity_filter_returns_innovations(white):
    path = white.simulate(5, seed=1)
    eps = vrng.make_rng(1, vrng.INNOVATIONS).standard_normal(5)
    assert np.array_equal(path.values, eps)
    _, main = white.innovations(5, 1)
    assert np.array_equal(path.values, main)


def test_zero_ma_coefficient_matches_ma0():
    a = PlsModel.single(tvma(1.0, 0.0)).simulate(50, 9).values
    b = PlsModel.single(tvma(1.0)).simulate(50, 9).values
    assert np.array_equal(a, b)


def test_ar_lag_one_autocorrelation():
    x = PlsModel.single(tvar1(0.5)).simulate(10_000, 3).values
    x = x - x.mean()
    r1 = np.dot(x[1:], x[:-1]) / np.dot(x, x)
    assert 0.47 <= r1 <= 0.53


def test_simulation_is_deterministic(ar07):
    assert np.array_equal(ar07.simulate(300, 11).values, ar07.simulate(300, 11).values)
    assert not np.array_equal(ar07.simulate(300, 11).values, ar07.simulate(300, 12).values)


def test_breaks_and_segment_lookup():
    m = PlsModel((0.0, 0.5, 1.0), (tvma(1.0), tvma(2.0)))
    assert m.segment_index(0.0) == 0
    assert m.segment_index(0.5) == 0   # a break belongs to the left piece
    assert m.segment_index(0.5000001) == 1
    assert m.segment_index(1.0) == 1
    x = m.simulate(10, 4).values
    eps = vrng.make_rng(4, vrng.INNOVATIONS).standard_normal(10)
    assert np.array_equal(x[:5], eps[:5])
    assert np.array_equal(x[5:], 2 * eps[5:])


def test_invalid_models():
    with pytest.raises((ValueError, ConfigError)):
        PlsModel((0.0, 0.6, 0.4, 1.0), (tvma(1.0),) * 3)
    with pytest.raises((ValueError, ConfigError)):
        PlsModel.single(tvar1(1.0))
    with pytest.raises((ValueError, ConfigError)):
        PlsModel((0.0, 0.5, 1.0), (tvma(1.0),))


def test_nonfinite_output_names_index():
    m = PlsModel.single(custom(lambda t, w: np.where(t > 0.5, np.inf, w[..., 0]), lags=2))
    with pytest.raises(SimulationError) as ei:
        m.simulate(10, 0)
    assert ei.value.k == 6


def test_custom_filter_sees_current_innovation():
    m = PlsModel.single(custom(lambda t, w: w[..., 0] + 0.5 * w[..., 1], lags=2))
    ref = PlsModel.single(tvma(1.0, 0.5))
    assert np.allclose(m.simulate(100, 5).values, ref.simulate(100, 5).values, rtol=0, atol=1e-15)


def test_series_path_invariants():
    with pytest.raises(ValueError):
        SeriesPath(np.array([1.0]))
    with pytest.raises(ValueError):
        SeriesPath(np.array([1.0, np.nan]))
    p = SeriesPath(np.array([1.0, 2.0, 3.0, 4.0]))
    assert np.allclose(p.times, [0.25, 0.5, 0.75, 1.0])


def test_uniform_innovations_have_unit_variance():
    m = PlsModel.single(tvma(1.0), innovation="uniform")
    x = m.simulate(200_000, 2).values
    assert abs(x.var() - 1) < 0.01
    assert np.max(np.abs(x)) <= math.sqrt(3)


# -- analytic moments --------------------------------------------------------

def test_white_noise_spectral_density():
    s = Curve("linear", {"intercept": 1.0, "slope": 1.0}, "sqrt")
    m = PlsModel.single(tvma(s))
    for t in (0.1, 0.5, 0.9):
        for lam in (0.0, 1.0, math.pi):
            assert m.local_spectral_density(t, lam) == pytest.approx((1 + t) / (2 * math.pi), rel=1e-12)


def test_ma1_spectral_density():
    th = 0.6
    m = PlsModel.single(tvma(1.0, th))
    for lam in np.linspace(0, 2 * math.pi, 9):
        want = (1 + th * th + 2 * th * math.cos(lam)) / (2 * math.pi)
        assert m.local_spectral_density(0.3, lam) == pytest.approx(want, rel=1e-12, abs=1e-15)


def test_ar1_spectral_density_vs_brute_force():
    a = 0.8
    m = PlsModel.single(tvar1(a))
    k = np.arange(1, 400)
    for lam in (0.0, 0.7, 2.0, math.pi):
        brute = (1 / (1 - a * a) + 2 * np.sum(a ** k / (1 - a * a) * np.cos(k * lam))) / (2 * math.pi)
        assert m.local_spectral_density(0.4, lam) == pytest.approx(brute, rel=1e-9)


def test_ar1_autocovariance():
    m = PlsModel.single(tvar1(0.5))
    for k in range(6):
        assert m.local_acov(0.5, k) == pytest.approx(0.5 ** k / 0.75, rel=1e-12)
        assert m.local_acov(0.5, -k) == m.local_acov(0.5, k)
    coef = m.ma_coefficients(0.5, 80)
    brute = [np.dot(coef[: 80 - k], coef[k:]) for k in range(4)]
    assert np.allclose(brute, [m.local_acov(0.5, k) for k in range(4)], rtol=1e-12)


def test_ma0_autocovariance_vanishes_off_zero():
    m = PlsModel.single(tvma(2.0))
    assert m.local_acov(0.5, 0) == pytest.approx(4.0)
    assert all(m.local_acov(0.5, k) == 0 for k in (1, 2, 5))


def test_long_run_sd():
    assert PlsModel.single(tvma(1.0)).local_long_run_sd(0.5) == pytest.approx(1.0)
    m = PlsModel.single(tvma(1.0, 1.0))
    assert m.local_long_run_sd(0.5) == pytest.approx(2.0)
    for t in (0.2, 0.7):
        assert m.local_long_run_sd(t) ** 2 == pytest.approx(2 * math.pi * m.local_spectral_density(t, 0), rel=1e-12)
    with pytest.raises(DegenerateVarianceError):
        PlsModel.single(tvma(1.0, -1.0)).local_long_run_sd(0.5)


def test_spectral_symmetry_and_sign(ar07):
    for lam in np.linspace(0, math.pi, 7):
        f = ar07.local_spectral_density(0.5, lam)
        assert f >= 0
        assert f == pytest.approx(ar07.local_spectral_density(0.5, 2 * math.pi - lam), rel=1e-12)


def test_custom_model_has_no_closed_form_spectrum():
    m = PlsModel.single(custom(lambda t, w: w[..., 0] ** 2 - 1, lags=1))
    with pytest.raises(UnsupportedModelError):
        m.local_spectral_density(0.5, 0.0)


def test_exact_covariance_matches_monte_carlo():
    m = PlsModel((0.0, 0.5, 1.0), (tvar1(Curve("linear", {"intercept": 0.2, "slope": 0.5})), tvma(1.0, 0.4)))
    n = 12
    cov = m.moments(n).cov
    X = np.array([m.simulate(n, s).values for s in range(20_000)])
    emp = np.cov(X.T)
    assert np.max(np.abs(emp - cov)) < 0.06


def test_model_json_roundtrip():
    m = PlsModel((0.0, 0.3, 1.0), (tvma(Curve("cosine", {"mean": 1.0, "amplitude": 0.5}, "sqrt"), 0.2),
                                   tvar1(Curve("constant", {"value": 0.4}))), truncation_lag=50)
    d = m.to_dict()
    m2 = PlsModel.from_dict(d)
    assert m2.to_dict() == d
    assert np.array_equal(m.simulate(40, 1).values, m2.simulate(40, 1).values)


def test_malformed_model_names_field():
    with pytest.raises(ConfigError) as ei:
        PlsModel.from_dict({"segments": [{"kind": "tvma", "coefs": [1.0]}, {"kind": "nope"}],
                            "breaks": [0, 0.5, 1]})
    assert ei.value.field == "segments[1]"


# -- dependence measure ------------------------------------------------------

def test_dependence_measure_identity_filter(white):
    assert dependence_measure(white, 1, reps=200).value == 0.0
    d0 = dependence_measure(white, 0, p=2, reps=20_000, seed=3).value
    assert d0 == pytest.approx(math.sqrt(2), abs=0.03)


def test_dependence_measure_ar(ar07):
    d = dependence_measure(ar07, 5, p=2, reps=20_000, seed=1)
    assert d.value == pytest.approx(0.7 ** 5 * math.sqrt(2), rel=0.05)
    assert d.reps == 20_000 and d.grid_per_segment == 64


def test_dependence_measure_validation(white):
    with pytest.raises(ValueError):
        dependence_measure(white, -1)
    with pytest.raises(ValueError):
        dependence_measure(white, 1, p=0.5)
    with pytest.raises(ValueError):
        dependence_measure(white, 1, reps=10)


def test_spectral_curve_matches_pointwise():
    m = PlsModel((0.0, 0.3, 0.7, 1.0), (tvma(Curve("linear", {"intercept": 1.0, "slope": 1.0}), 0.3, -0.2),
                                        tvar1(Curve("cosine", {"mean": 0.2, "amplitude": 0.3})),
                                        tvma(lambda t: 1.0)))
    t = np.linspace(0, 1, 101)
    for lam in (0.0, 1.1, math.pi):
        fast = m.spectral_curve(t, lam)
        slow = np.array([m.local_spectral_density(s, lam) for s in t])
        assert np.allclose(fast, slow, rtol=1e-13, atol=0)
