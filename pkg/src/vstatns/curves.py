"""Named parametric functions used in model and weight configs.

Three small registries live here:

* coefficient curves ``c(t)`` on [0, 1] (filter coefficients, scales),
* smoothing kernels ``K`` supported on [-1, 1],
* weight shape functions (``h`` for banded Toeplitz weights, bivariate ``f``).

All objects are immutable, vectorised over numpy arrays and round-trip through
plain dicts so they can live in JSON configs.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

_CURVE_PARAMS = {
    "constant": ("value",),
    "linear": ("intercept", "slope"),
    "polynomial": ("coefs",),
    "cosine": ("mean", "amplitude", "frequency", "phase"),
    "piecewise_constant": ("knots", "values"),
}
_CURVE_DEFAULTS = {"cosine": {"frequency": 1.0, "phase": 0.0}}
_TRANSFORMS = (None, "sqrt")


class ConfigError(ValueError):
    """Malformed configuration document; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Curve:
    """A scalar function of rescaled time, optionally passed through ``sqrt``.

    ``Curve("cosine", {"mean": 1, "amplitude": 0.5}, transform="sqrt")`` is
    ``t -> sqrt(1 + 0.5 cos(2 pi t))``.
    """

    family: str
    params: Mapping = field(default_factory=dict)
    transform: str = None

    def __post_init__(self):
        if self.family not in _CURVE_PARAMS:
            raise ConfigError(f"unknown curve family {self.family!r}", "family")
        if self.transform not in _TRANSFORMS:
            raise ConfigError(f"unknown transform {self.transform!r}", "transform")
        merged = dict(_CURVE_DEFAULTS.get(self.family, {}))
        merged.update(self.params)
        missing = [p for p in _CURVE_PARAMS[self.family] if p not in merged]
        if missing:
            raise ConfigError(f"curve {self.family!r} is missing {missing}", "params")
        extra = [p for p in merged if p not in _CURVE_PARAMS[self.family]]
        if extra:
            raise ConfigError(f"curve {self.family!r} got unknown parameters {extra}", "params")
        if self.family == "piecewise_constant":
            knots = np.asarray(merged["knots"], dtype=float)
            if len(merged["values"]) != len(knots) + 1:
                raise ConfigError("piecewise_constant needs len(values) == len(knots) + 1", "values")
            if np.any(np.diff(knots) <= 0):
                raise ConfigError("piecewise_constant knots must increase", "knots")
        object.__setattr__(self, "params", merged)

    def _raw(self, t):
        p = self.params
        if self.family == "constant":
            return np.full_like(t, float(p["value"]))
        if self.family == "linear":
            return p["intercept"] + p["slope"] * t
        if self.family == "polynomial":
            return np.polynomial.polynomial.polyval(t, np.asarray(p["coefs"], dtype=float))
        if self.family == "cosine":
            return p["mean"] + p["amplitude"] * np.cos(2 * np.pi * p["frequency"] * t + p["phase"])
        # piecewise constant, left-open/right-closed pieces like the segments
        idx = np.searchsorted(np.asarray(p["knots"], dtype=float), t, side="left")
        return np.asarray(p["values"], dtype=float)[idx]

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = self._raw(t_arr.reshape(-1) if t_arr.ndim == 0 else t_arr)
        if self.transform == "sqrt":
            # rounding can leave -1e-17 where the curve touches zero
            out = np.sqrt(np.where((out < 0) & (out > -1e-12), 0.0, out))
        out = np.asarray(out, dtype=float)
        return float(out.reshape(-1)[0]) if t_arr.ndim == 0 else out

    def to_dict(self):
        d = {"family": self.family, **{k: v for k, v in self.params.items()}}
        if self.transform:
            d["transform"] = self.transform
        return d

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls("constant", {"value": float(d)})
        if not isinstance(d, Mapping) or "family" not in d:
            raise ConfigError("curve must be a number or an object with a 'family' key", "curve")
        params = {k: v for k, v in d.items() if k not in ("family", "transform")}
        return cls(d["family"], params, d.get("transform"))


@dataclass(frozen=True)
class FunctionCurve:
    """Wraps an arbitrary callable; usable everywhere a Curve is, but not serialisable."""

    func: Callable

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.func(t_arr), dtype=float)
        if out.shape != t_arr.shape:
            out = np.broadcast_to(out, t_arr.shape).copy()
        return float(out) if t_arr.ndim == 0 else out

    def to_dict(self):
        raise ConfigError("callable curves cannot be serialised", "curve")


def as_curve(c):
    if isinstance(c, (Curve, FunctionCurve)):
        return c
    if callable(c):
        return FunctionCurve(c)
    return Curve.from_dict(c)


def constant(value):
    return Curve("constant", {"value": float(value)})


# --------------------------------------------------------------------------
# smoothing kernels on [-1, 1]

def _epanechnikov(x):
    return np.where(np.abs(x) <= 1, 0.75 * (1 - x * x), 0.0)


def _biweight(x):
    return np.where(np.abs(x) <= 1, 15 / 16 * (1 - x * x) ** 2, 0.0)


def _triweight(x):
    return np.where(np.abs(x) <= 1, 35 / 32 * (1 - x * x) ** 3, 0.0)


def _tricube(x):
    return np.where(np.abs(x) <= 1, 70 / 81 * (1 - np.abs(x) ** 3) ** 3, 0.0)


def _cosine(x):
    return np.where(np.abs(x) <= 1, np.pi / 4 * np.cos(np.pi * x / 2), 0.0)


def _uniform(x):
    return np.where(np.abs(x) <= 1, 0.5, 0.0)


SMOOTHING_KERNELS = {
    "epanechnikov": _epanechnikov,
    "biweight": _biweight,
    "triweight": _triweight,
    "tricube": _tricube,
    "cosine": _cosine,
    "uniform": _uniform,
}


@dataclass(frozen=True)
class SmoothingKernel:
    """Symmetric density supported on [-1, 1]."""

    name: str

    def __post_init__(self):
        if self.name not in SMOOTHING_KERNELS:
            raise ConfigError(f"unknown smoothing kernel {self.name!r}; choose from {sorted(SMOOTHING_KERNELS)}", "K")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = SMOOTHING_KERNELS[self.name](x)
        return float(out) if x.ndim == 0 else out

    def moment(self, power):
        """int_{-1}^{1} x^power K(x) dx."""
        return _kernel_integral(self.name, "moment", int(power))

    def squared_integral(self):
        """int_{-1}^{1} K(x)^2 dx."""
        return _kernel_integral(self.name, "square", 2)


@lru_cache(maxsize=None)
def _kernel_integral(name, what, power):
    # kernels are polynomial or smooth on [0, 1]; integrate each half separately
    # so the kink at 0 (tricube) does not cost accuracy
    nodes, wts = np.polynomial.legendre.leggauss(64)
    total = 0.0
    for a, b in ((-1.0, 0.0), (0.0, 1.0)):
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        k = SMOOTHING_KERNELS[name](x)
        vals = x ** power * k if what == "moment" else k * k
        total += 0.5 * (b - a) * np.dot(wts, vals)
    return float(total)


def as_kernel(k):
    if isinstance(k, SmoothingKernel):
        return k
    if isinstance(k, Mapping):
        k = k.get("name")
    return SmoothingKernel(str(k))


# --------------------------------------------------------------------------
# weight shape functions

def _h_exp(x, rate=1.0):
    return np.exp(-rate * x)


def _h_gaussian(x, scale=1.0):
    return np.exp(-(x / scale) ** 2)


def _h_bartlett(x, width=1.0):
    return np.clip(1.0 - x / width, 0.0, None)


TOEPLITZ_SHAPES = {"exp": _h_exp, "gaussian": _h_gaussian, "bartlett": _h_bartlett}


@dataclass(frozen=True)
class ToeplitzShape:
    """Function h on [0, inf) for banded Toeplitz weights."""

    name: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in TOEPLITZ_SHAPES:
            raise ConfigError(f"unknown Toeplitz shape {self.name!r}; choose from {sorted(TOEPLITZ_SHAPES)}", "h")

    def __call__(self, x):
        return TOEPLITZ_SHAPES[self.name](np.asarray(x, dtype=float), **self.params)

    def to_dict(self):
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        return cls(d.pop("name"), d)


def _f_constant(t, s, value=1.0):
    return np.full(np.broadcast(t, s).shape, float(value))


def _f_bilinear(t, s, a=1.0, b=0.0, c=0.0):
    return a + b * (t + s) + c * t * s


def _f_gaussian(t, s, scale=0.25):
    return np.exp(-0.5 * ((t - s) / scale) ** 2)


BIVARIATE_SHAPES = {"constant": _f_constant, "bilinear": _f_bilinear, "gaussian": _f_gaussian}


@dataclass(frozen=True)
class BivariateShape:
    """Symmetric function f(t, s); ``bilinear`` is a + b (t + s) + c t s."""

    name: str
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in BIVARIATE_SHAPES:
            raise ConfigError(f"unknown bivariate function {self.name!r}; choose from {sorted(BIVARIATE_SHAPES)}", "f")

    def __call__(self, t, s):
        return BIVARIATE_SHAPES[self.name](np.asarray(t, dtype=float), np.asarray(s, dtype=float), **self.params)

    def to_dict(self):
        return {"name": self.name, **self.params}

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, str):
            return cls(d)
        d = dict(d)
        return cls(d.pop("name"), d)
