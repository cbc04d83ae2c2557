import numpy as np
import pytest

from vstatns import Curve, PlsModel, tvar1, tvma


@pytest.fixture
def white():
    return PlsModel.single(tvma(1.0))


@pytest.fixture
def ar07():
    return PlsModel.single(tvar1(0.7))


def white_sigma2(curve):
    """Gaussian white noise whose variance curve is ``curve``."""
    return PlsModel.single(tvma(Curve(curve.family, curve.params, "sqrt")))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
