import math

import numpy as np
import pytest
from scipy import integrate

from vstatns.curves import (SMOOTHING_KERNELS, BivariateShape, ConfigError, Curve, SmoothingKernel, ToeplitzShape,
                            as_curve)


@pytest.mark.parametrize("name", sorted(SMOOTHING_KERNELS))
def test_kernels_are_densities(name):
    K = SmoothingKernel(name)
    assert integrate.quad(K, -1, 1, points=[0])[0] == pytest.approx(1.0, abs=1e-10)
    assert K.moment(0) == pytest.approx(1.0, abs=1e-12)
    assert K.moment(2) == pytest.approx(integrate.quad(lambda x: x * x * K(x), -1, 1, points=[0])[0], rel=1e-9)
    assert K.squared_integral() == pytest.approx(integrate.quad(lambda x: K(x) ** 2, -1, 1, points=[0])[0],
                                                 rel=1e-9)
    x = np.linspace(-1.5, 1.5, 31)
    assert np.allclose(K(x), K(-x))
    assert np.all(K(np.array([-1.2, 1.2])) == 0)


def test_epanechnikov_constants():
    K = SmoothingKernel("epanechnikov")
    assert K.moment(2) == pytest.approx(0.2, rel=1e-13)
    assert K.squared_integral() == pytest.approx(0.6, rel=1e-13)


def test_curve_families():
    t = np.array([0.0, 0.25, 0.5, 1.0])
    assert np.allclose(Curve("linear", {"intercept": 1.0, "slope": 2.0})(t), 1 + 2 * t)
    assert np.allclose(Curve("polynomial", {"coefs": [1.0, 0.0, 3.0]})(t), 1 + 3 * t * t)
    assert np.allclose(Curve("cosine", {"mean": 1.0, "amplitude": 0.5})(t), 1 + 0.5 * np.cos(2 * np.pi * t))
    pc = Curve("piecewise_constant", {"knots": [0.5], "values": [1.0, 2.0]})
    assert list(pc(t)) == [1.0, 1.0, 1.0, 2.0]
    assert Curve("cosine", {"mean": 1.0, "amplitude": 1.0}, "sqrt")(0.5) == 0.0
    assert Curve("constant", {"value": 4.0}, "sqrt")(0.3) == 2.0


def test_curve_errors():
    with pytest.raises(ConfigError):
        Curve("spline")
    with pytest.raises(ConfigError):
        Curve("linear", {"intercept": 1.0})
    with pytest.raises(ConfigError):
        Curve("constant", {"value": 1.0, "extra": 2})
    with pytest.raises(ConfigError):
        Curve("piecewise_constant", {"knots": [0.5], "values": [1.0]})


def test_curve_json():
    c = Curve("cosine", {"mean": 1.0, "amplitude": 0.3, "phase": 0.1}, "sqrt")
    assert Curve.from_dict(c.to_dict()) == c
    assert Curve.from_dict(2.5)(0.7) == 2.5
    assert as_curve(3.0)(0.2) == 3.0


def test_shapes():
    assert ToeplitzShape("exp")(np.array([0.0, 1.0]))[1] == pytest.approx(math.exp(-1))
    assert BivariateShape("bilinear", {"a": 1.0, "c": 1.0})(0.5, 0.5) == pytest.approx(1.25)
    with pytest.raises(ConfigError):
        ToeplitzShape("nope")
