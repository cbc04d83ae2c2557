import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vstatns import Curve, PlsModel, tvar1, tvma
from vstatns.vstat import (BUILTIN_KERNELS, KernelError, UnsupportedOracleError, check_wiener_class,
                           constant_kernel, degeneracy_check, evaluate_Q, evaluate_V, hoeffding_decompose,
                           kernel_by_name, kernel_from_callable, mc_oracle, mean_kernel, naive_V, product_kernel,
                           sum_kernel, variance_kernel)
from vstatns.weights import WeightMatrix, WeightSpec, build_weight_matrix


def half(n):
    return np.full((n, n), 0.5)


def test_small_hand_examples():
    assert evaluate_V([1.0, 2.0], half(2), product_kernel()) == 4.5
    assert evaluate_V([1.0, 3.0], half(2), variance_kernel()) == 2.0
    assert evaluate_Q([1.0, -1.0], np.eye(2)) == 2.0
    assert evaluate_Q([1.0, 2.0, 3.0], np.full((3, 3), 1 / 3)) == pytest.approx(12.0, rel=1e-15)


def test_zero_diagonal_flag():
    x = np.array([1.0, 2.0, 4.0])
    W = np.ones((3, 3))
    full = evaluate_V(x, W, product_kernel())
    off = evaluate_V(x, W, product_kernel(), zero_diagonal=True)
    assert full - off == pytest.approx(np.sum(x * x))


def _random_instance(rng, n):
    x = rng.normal(size=n) * rng.uniform(0.5, 3)
    a = rng.normal(size=(n, n))
    return x, a + a.T


def test_matches_naive_loop(rng):
    for _ in range(50):
        n = int(rng.integers(2, 65))
        x, W = _random_instance(rng, n)
        for name in ("product", "variance", "mean", "mean_square", "sum"):
            k = kernel_by_name(name)
            v, ref = evaluate_V(x, W, k), naive_V(x, W, k)
            assert abs(v - ref) <= 1e-12 * max(1.0, abs(ref))


def test_callable_kernel_path(rng):
    k = kernel_from_callable(lambda x, y: np.cos(x - y))
    x, W = _random_instance(rng, 30)
    assert evaluate_V(x, W, k) == pytest.approx(naive_V(x, W, k), rel=1e-12)


def test_nonfinite_kernel_reports_index():
    k = kernel_from_callable(lambda x, y: np.log(x * y))
    with pytest.raises(KernelError, match=r"\(k, j\) = \(1, 2\)"), np.errstate(invalid="ignore"):
        evaluate_V([1.0, -1.0, 2.0], np.ones((3, 3)), k)


def test_q_equals_product_kernel_exactly(rng):
    for _ in range(100):
        n = int(rng.integers(2, 40))
        x, W = _random_instance(rng, n)
        assert evaluate_Q(x, W) == evaluate_V(x, W, product_kernel())


@pytest.mark.parametrize("c", [2.0, 0.5, 4.0, 0.125])
def test_scaling_covariance_is_exact(rng, c):
    # multiplication by a power of two commutes with every rounding step
    w = build_weight_matrix(WeightSpec("banded_toeplitz", m_n=5), 200)
    x = rng.normal(size=200)
    for k in (product_kernel(), variance_kernel()):
        assert evaluate_V(x, w.scaled(c), k) == c * evaluate_V(x, w, k)


def test_scaling_covariance_general_constant(rng):
    w = build_weight_matrix(WeightSpec("banded_toeplitz", m_n=5), 200)
    x = rng.normal(size=200)
    assert evaluate_V(x, w.scaled(0.3), variance_kernel()) == pytest.approx(0.3 * evaluate_V(x, w, variance_kernel()),
                                                                           rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(name=st.sampled_from(sorted(BUILTIN_KERNELS)), seed=st.integers(0, 2 ** 32 - 1))
def test_kernel_symmetry(name, seed):
    g = np.random.default_rng(seed)
    x, y = g.normal(size=10_000) * 5, g.normal(size=10_000) * 5
    k = kernel_by_name(name)
    assert np.array_equal(k(x, y), k(y, x))


# -- decomposition ----------------------------------------------------------

def test_decomposition_identity_variance_kernel():
    m = PlsModel.single(tvma(1.0))
    n = 50
    x = m.simulate(n, 7).values
    w = build_weight_matrix(WeightSpec("banded_toeplitz", m_n=4), n)
    k = variance_kernel().with_moments(m.moments(n))
    M = k.oracle.marginal(np.array([0.0, 2.0]))
    assert np.allclose(M, [[0.5], [2.5]])           # (x^2 + 1)/2
    assert np.allclose(k.oracle.pair_mean, 1.0)
    d = hoeffding_decompose(x, w, k)
    assert abs(d.residual) <= 1e-10 * (abs(d.V) + 1)


def test_decomposition_identity_dependent_model(rng):
    m = PlsModel((0.0, 0.4, 1.0), (tvar1(Curve("linear", {"intercept": 0.3, "slope": 0.4})), tvma(1.0, -0.5)))
    n = 60
    x = m.simulate(n, 3).values
    W = rng.normal(size=(n, n))
    W = (W + W.T) / n
    for name in ("variance", "product", "mean_square", "sum"):
        k = kernel_by_name(name).with_moments(m.moments(n))
        d = hoeffding_decompose(x, W, k)
        assert abs(d.residual) <= 1e-9 * (abs(d.V) + 1)


def test_product_kernel_zero_mean_has_no_linear_part(white):
    x = white.simulate(30, 1).values
    k = product_kernel().with_moments(white.moments(30))
    d = hoeffding_decompose(x, np.ones((30, 30)) / 30, k)
    assert d.N == 0.0


def test_constant_kernel_decomposition(white):
    n = 20
    W = build_weight_matrix(WeightSpec("global", f={"name": "bilinear", "a": 1.0, "c": 1.0}), n)
    k = constant_kernel(3.0).with_moments(white.moments(n))
    d = hoeffding_decompose(white.simulate(n, 2).values, W, k)
    assert d.N == 0.0
    assert d.D_centered == pytest.approx(0.0, abs=1e-13)
    assert d.V == pytest.approx(3.0 * W.entries.sum(), rel=1e-14)


def test_missing_oracle_is_explicit(white):
    with pytest.raises(UnsupportedOracleError):
        hoeffding_decompose(white.simulate(10, 0).values, np.eye(10), variance_kernel())
    with pytest.raises(UnsupportedOracleError):
        kernel_from_callable(lambda x, y: x * y).with_moments(white.moments(10))


def test_decomposition_keeps_pairs(white):
    n = 12
    k = variance_kernel().with_moments(white.moments(n))
    x = white.simulate(n, 0).values
    d = hoeffding_decompose(x, np.ones((n, n)), k, keep_pairs=True)
    assert d.pair_matrix.shape == (n, n)
    assert d.pair_matrix.sum() == pytest.approx(d.D)
    assert set(d.to_dict()) >= {"V", "N", "D_centered", "EV", "residual"}


def test_mc_oracle_close_to_analytic(white):
    n = 10
    k = variance_kernel()
    mc = mc_oracle(k, white, n, reps=4000, seed=1)
    exact = k.with_moments(white.moments(n))
    x = np.array([-1.0, 0.0, 1.5])
    assert np.allclose(mc.oracle.marginal(x), exact.oracle.marginal(x), atol=0.1)
    assert mc.oracle.provenance["reps"] == 4000


# -- degeneracy ------------------------------------------------------------

def test_degeneracy_check(white):
    assert degeneracy_check(product_kernel(), white, n=50, reps=2000).degenerate
    r = degeneracy_check(variance_kernel(), white, n=50, reps=2000)
    assert not r.degenerate
    expect = (r.grid[:, None] ** 2 + 1) / 2
    assert np.max(np.abs(r.table - expect)) < 0.15
    # E H_j(X) = 0 but H_j(x) = x is not identically zero
    assert not degeneracy_check(sum_kernel(), white, n=50, reps=2000).degenerate


# -- Wiener class ----------------------------------------------------------

def test_wiener_gaussian():
    r = check_wiener_class(hstar=lambda x, y: np.exp(-x * x - y * y), grid_points=512)
    assert r.tail_mass < 1e-6
    assert math.isfinite(r.integral_abs) and r.integral_abs == pytest.approx(1.0, rel=1e-3)
    assert not r.heavy_tail


def test_wiener_variance_kernel_finite():
    k = variance_kernel()
    r = check_wiener_class(kernel=k, L=lambda x: (1 + x * x) ** 2, grid_points=512, delta=0.5)
    assert math.isfinite(r.integral_abs) and math.isfinite(r.integral_weighted)


def test_wiener_discontinuous_flagged():
    r = check_wiener_class(hstar=lambda x, y: np.sign(x) * np.sign(y), grid_points=512)
    assert r.heavy_tail


def test_wiener_memory_cap():
    from vstatns.vstat import GridMemoryError
    with pytest.raises(GridMemoryError):
        check_wiener_class(hstar=lambda x, y: x * 0 + y * 0, grid_points=8192, memory_cap=2 ** 20)
