"""Piecewise locally stationary processes.

A model is a list of break points ``0 = b_0 < ... < b_{r+1} = 1`` and one
filter per interval ``(b_j, b_{j+1}]``.  Observation ``k`` is the output of the
filter of the segment containing ``t_k = k / n`` applied at time ``t_k`` to the
innovations up to ``k``.

Filters come in three kinds:

``tvma``   X_k = sum_i c_i(t_k) eps_{k-i}
``tvar1``  X_k = a(t_k) X_{k-1} + s(t_k) eps_k   (exact recursion, warm-started)
``custom`` X_k = g(t_k, (eps_k, eps_{k-1}, ..., eps_{k-B+1}))

Custom filters must accept a batch of windows (last axis = lags) and return
one value per window.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as _rng
from ._kernels import ar1_recursion
from .curves import ConfigError, Curve, as_curve

SCHEMA_VERSION = 1
_TRUNC_TOL = 1e-14
_DEFAULT_CUSTOM_LAG = 128
_AR_GRID = 2049


class SimulationError(RuntimeError):
    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class UnsupportedModelError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    pass


@dataclass(frozen=True)
class Innovation:
    """I.i.d. innovation law.  Built-ins have mean 0 and variance 1."""

    kind: str = "normal"
    sampler: Optional[Callable] = None
    variance: float = 1.0

    def __post_init__(self):
        if self.kind not in ("normal", "uniform", "custom"):
            raise ConfigError(f"unknown innovation kind {self.kind!r}", "innovation")
        if self.kind == "custom" and self.sampler is None:
            raise ConfigError("custom innovations need a sampler(rng, size)", "innovation")

    @property
    def gaussian(self):
        return self.kind == "normal"

    def draw(self, generator, size):
        if self.kind == "normal":
            return generator.standard_normal(size)
        if self.kind == "uniform":
            return generator.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        return np.asarray(self.sampler(generator, size), dtype=float)

    def to_dict(self):
        if self.kind == "custom":
            raise ConfigError("custom innovations cannot be serialised", "innovation")
        return self.kind


@dataclass(frozen=True)
class SegmentFilter:
    kind: str
    coefs: tuple = ()
    a: object = None
    scale: object = None
    func: Optional[Callable] = None
    lags: Optional[int] = None

    def __post_init__(self):
        if self.kind == "tvma":
            if len(self.coefs) == 0:
                raise ConfigError("tvma needs at least one coefficient curve", "coefs")
            object.__setattr__(self, "coefs", tuple(as_curve(c) for c in self.coefs))
        elif self.kind == "tvar1":
            if self.a is None:
                raise ConfigError("tvar1 needs a coefficient curve 'a'", "a")
            object.__setattr__(self, "a", as_curve(self.a))
            object.__setattr__(self, "scale", as_curve(1.0 if self.scale is None else self.scale))
        elif self.kind == "custom":
            if self.func is None:
                raise ConfigError("custom filter needs func(t, window)", "func")
        else:
            raise ConfigError(f"unknown segment kind {self.kind!r}", "kind")

    @property
    def analytic(self):
        return self.kind in ("tvma", "tvar1")

    @property
    def order(self):
        return len(self.coefs) - 1 if self.kind == "tvma" else None

    def to_dict(self):
        if self.kind == "tvma":
            return {"kind": "tvma", "coefs": [c.to_dict() for c in self.coefs]}
        if self.kind == "tvar1":
            return {"kind": "tvar1", "a": self.a.to_dict(), "scale": self.scale.to_dict()}
        raise ConfigError("custom filters cannot be serialised", "kind")

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "tvma":
            if "coefs" not in d:
                raise ConfigError("tvma segment needs 'coefs'", "coefs")
            return cls("tvma", coefs=tuple(Curve.from_dict(c) for c in d["coefs"]))
        if kind == "tvar1":
            if "a" not in d:
                raise ConfigError("tvar1 segment needs 'a'", "a")
            return cls("tvar1", a=Curve.from_dict(d["a"]), scale=Curve.from_dict(d.get("scale", 1.0)))
        raise ConfigError(f"unknown or non-serialisable segment kind {kind!r}", "kind")


def tvma(*coefs):
    return SegmentFilter("tvma", coefs=tuple(coefs))


def tvar1(a, scale=1.0):
    return SegmentFilter("tvar1", a=a, scale=scale)


def custom(func, lags=_DEFAULT_CUSTOM_LAG):
    return SegmentFilter("custom", func=func, lags=lags)


@dataclass(frozen=True)
class SeriesPath:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError("a series needs at least two observations")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def times(self):
        return np.arange(1, self.n + 1) / self.n

    def __len__(self):
        return self.n


def as_values(series):
    if isinstance(series, SeriesPath):
        return series.values
    return SeriesPath(series).values


@dataclass(frozen=True)
class PlsModel:
    breaks: tuple
    segments: tuple
    innovation: Innovation = field(default_factory=Innovation)
    truncation_lag: Optional[int] = None

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ConfigError("breaks must start at 0 and end at 1", "breaks")
        if any(y <= x for x, y in zip(b, b[1:])):
            raise ConfigError("breaks must be strictly increasing", "breaks")
        segs = tuple(self.segments)
        if len(segs) != len(b) - 1:
            raise ConfigError(f"{len(b) - 1} segments expected, got {len(segs)}", "segments")
        innov = self.innovation if isinstance(self.innovation, Innovation) else Innovation(str(self.innovation))
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "innovation", innov)
        rho = []
        for j, seg in enumerate(segs):
            if seg.kind == "tvar1":
                grid = np.linspace(b[j], b[j + 1], _AR_GRID)
                r = float(np.max(np.abs(seg.a(grid))))
                if not r < 1.0:
                    raise ConfigError(f"segment {j}: sup|a(t)| = {r:.6g} must be < 1", "a")
                rho.append(r)
            else:
                rho.append(None)
        object.__setattr__(self, "_rho_max", tuple(rho))
        if self.truncation_lag is not None and int(self.truncation_lag) < 1:
            raise ConfigError("truncation_lag must be positive", "truncation_lag")

    # -- structure --------------------------------------------------------

    @classmethod
    def single(cls, segment, innovation="normal", truncation_lag=None):
        return cls((0.0, 1.0), (segment,), Innovation(innovation) if isinstance(innovation, str) else innovation,
                   truncation_lag)

    @property
    def r(self):
        return len(self.breaks) - 2

    def segment_index(self, t):
        """zeta(t): k with b_k < t <= b_{k+1}; zeta(0) = 0."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks[1:-1]), t_arr, side="left")
        return int(idx) if t_arr.ndim == 0 else idx

    def segment_lag(self, j):
        seg = self.segments[j]
        if seg.kind == "tvma":
            return len(seg.coefs)
        if seg.kind == "tvar1":
            if self.truncation_lag is not None:
                return int(self.truncation_lag)
            r = self._rho_max[j]
            return 1 if r == 0.0 else max(1, math.ceil(math.log(_TRUNC_TOL) / math.log(r)))
        return int(self.truncation_lag or seg.lags or _DEFAULT_CUSTOM_LAG)

    @property
    def lag(self):
        """Number of innovations before eps_1 that any filter may touch."""
        return max(self.segment_lag(j) for j in range(len(self.segments)))

    @property
    def analytic(self):
        return all(s.analytic for s in self.segments)

    # -- simulation ---------------------------------------------------------

    def innovations(self, n, seed):
        """(prefix, main): ``main[k-1]`` is eps_k, ``prefix[i]`` is eps_{-i}."""
        main = self.innovation.draw(_rng.make_rng(seed, _rng.INNOVATIONS), n)
        prefix = self.innovation.draw(_rng.make_rng(seed, _rng.WARMUP), self.lag)
        return prefix, main

    def simulate(self, n, seed):
        if n < 2:
            raise ValueError("n must be at least 2")
        prefix, main = self.innovations(n, seed)
        P = prefix.shape[0]
        ext = np.concatenate([prefix[::-1], main])  # ext[P + k - 1] = eps_k
        t = np.arange(1, n + 1) / n
        seg_idx = self.segment_index(t)
        x = np.empty(n)
        for j, seg in enumerate(self.segments):
            idx = np.nonzero(seg_idx == j)[0]
            if idx.size == 0:
                continue
            tj = t[idx]
            if seg.kind == "tvma":
                acc = np.zeros(idx.size)
                for i, c in enumerate(seg.coefs):
                    acc = acc + c(tj) * ext[P + idx - i]
                x[idx] = acc
            elif seg.kind == "tvar1":
                B = self.segment_lag(j)
                k0 = idx[0]
                a0 = float(seg.a(tj[0]))
                s0 = float(seg.scale(tj[0]))
                warm = ext[P + k0 - B:P + k0]
                state = ar1_recursion(np.full(B, a0), np.full(B, s0), np.ascontiguousarray(warm), 0.0)[-1]
                x[idx] = ar1_recursion(np.ascontiguousarray(seg.a(tj), dtype=float),
                                       np.ascontiguousarray(seg.scale(tj), dtype=float),
                                       np.ascontiguousarray(ext[P + idx]), state)
            else:
                B = self.segment_lag(j)
                win = ext[P + idx[:, None] - np.arange(B)[None, :]]
                x[idx] = _custom_eval(seg, tj, win)
        bad = np.nonzero(~np.isfinite(x))[0]
        if bad.size:
            raise SimulationError(f"non-finite filter output at k={bad[0] + 1}", k=int(bad[0] + 1))
        return SeriesPath(x)

    def frozen_path(self, t, length, generator):
        """A stationary path of the filter frozen at time t."""
        j = self.segment_index(t)
        seg = self.segments[j]
        B = self.segment_lag(j)
        eps = self.innovation.draw(generator, length + B)
        if seg.kind == "tvar1":
            out = ar1_recursion(np.full(length + B, float(seg.a(t))), np.full(length + B, float(seg.scale(t))),
                                eps, 0.0)
            return out[B:]
        idx = np.arange(B, length + B)
        win = eps[idx[:, None] - np.arange(B)[None, :]]
        if seg.kind == "tvma":
            return win @ self.ma_coefficients(t, B)
        return _custom_eval(seg, np.full(length, float(t)), win)

    # -- frozen-time analytics ----------------------------------------------

    def ma_coefficients(self, t, length):
        """psi_0..psi_{length-1} of the frozen filter's MA(infinity) form."""
        seg = self.segments[self.segment_index(t)]
        psi = np.zeros(length)
        if seg.kind == "tvma":
            c = np.array([float(cf(t)) for cf in seg.coefs])
            m = min(length, c.size)
            psi[:m] = c[:m]
        elif seg.kind == "tvar1":
            psi[:] = float(seg.scale(t)) * float(seg.a(t)) ** np.arange(length)
        else:
            raise UnsupportedModelError("custom filters have no closed-form coefficients")
        return psi

    def _frozen(self, t):
        seg = self.segments[self.segment_index(t)]
        if not seg.analytic:
            raise UnsupportedModelError("custom filter: no closed-form second-order structure; "
                                        "estimate autocovariances by Monte Carlo instead")
        return seg

    def local_acov(self, t, k):
        """gamma(t, k) of the frozen-time stationary filter."""
        seg = self._frozen(t)
        k = abs(int(k))
        var = self.innovation.variance
        if seg.kind == "tvar1":
            a = float(seg.a(t))
            s = float(seg.scale(t))
            return var * s * s * a ** k / (1.0 - a * a)
        c = np.array([float(cf(t)) for cf in seg.coefs])
        if k >= c.size:
            return 0.0
        return var * float(np.dot(c[:c.size - k], c[k:]))

    def local_spectral_density(self, t, lam):
        """f(t, lambda) = (1/2pi) sum_k gamma(t, k) cos(k lambda)."""
        seg = self._frozen(t)
        lam_arr = np.asarray(lam, dtype=float)
        var = self.innovation.variance
        if seg.kind == "tvar1":
            a = float(seg.a(t))
            s = float(seg.scale(t))
            out = var * s * s / (2 * np.pi * (1.0 - 2.0 * a * np.cos(lam_arr) + a * a))
        else:
            q = len(seg.coefs)
            gam = np.array([self.local_acov(t, k) for k in range(q)])
            out = gam[0] + 2.0 * sum(gam[k] * np.cos(k * lam_arr) for k in range(1, q))
            out = np.maximum(out / (2 * np.pi), 0.0)
        return float(out) if lam_arr.ndim == 0 else out

    def local_long_run_sd(self, t):
        f0 = self.local_spectral_density(t, 0.0)
        if not f0 > 0.0:
            raise DegenerateVarianceError(f"long-run variance at t={t} is {2 * np.pi * f0:.3g}")
        return math.sqrt(2 * np.pi * f0)

    def spectral_curve(self, times, lam):
        """f(t_i, lambda) for an array of times at one frequency (vectorised per segment)."""
        t = np.asarray(times, dtype=float).reshape(-1)
        lam = float(lam)
        out = np.empty(t.shape[0])
        idx = np.atleast_1d(self.segment_index(t))
        var = self.innovation.variance
        for j, seg in enumerate(self.segments):
            sel = idx == j
            if not np.any(sel):
                continue
            if not seg.analytic:
                raise UnsupportedModelError("custom filter: no closed-form second-order structure")
            ts = t[sel]
            ev = lambda c: np.broadcast_to(np.asarray(c(ts), dtype=float), ts.shape)
            if seg.kind == "tvar1":
                a, sc = ev(seg.a), ev(seg.scale)
                out[sel] = var * sc * sc / (2 * np.pi * (1.0 - 2.0 * a * np.cos(lam) + a * a))
            else:
                C = np.array([ev(c) for c in seg.coefs])
                q = C.shape[0]
                f = var * np.sum(C * C, axis=0)
                for k in range(1, q):
                    f = f + 2.0 * var * np.sum(C[:q - k] * C[k:], axis=0) * np.cos(k * lam)
                out[sel] = np.maximum(f / (2 * np.pi), 0.0)
        return out

    def long_run_sd_curve(self, n):
        t = np.arange(1, n + 1) / n
        f0 = self.spectral_curve(t, 0.0)
        bad = np.nonzero(~(f0 > 0.0))[0]
        if bad.size:
            raise DegenerateVarianceError(f"long-run variance at t={t[bad[0]]} is {2 * np.pi * f0[bad[0]]:.3g}")
        return np.sqrt(2 * np.pi * f0)

    def variance_curve(self, times):
        return np.array([self.local_acov(float(t), 0) for t in np.asarray(times, dtype=float)])

    # -- exact moments of the simulated vector --------------------------------

    def linear_map(self, n):
        """Matrix L with X = L @ ext, ext = (eps_{1-P}, ..., eps_0, eps_1, ..., eps_n)."""
        if not self.analytic:
            raise UnsupportedModelError("exact moments need tvma/tvar1 segments")
        P = self.lag
        t = np.arange(1, n + 1) / n
        seg_idx = self.segment_index(t)
        L = np.zeros((n, P + n))
        for j, seg in enumerate(self.segments):
            idx = np.nonzero(seg_idx == j)[0]
            if idx.size == 0:
                continue
            if seg.kind == "tvma":
                for i, c in enumerate(seg.coefs):
                    L[idx, P + idx - i] += c(t[idx])
            else:
                B = self.segment_lag(j)
                k0 = idx[0]
                a0, s0 = float(seg.a(t[k0])), float(seg.scale(t[k0]))
                row = np.zeros(P + n)
                for i in range(P + k0 - B, P + k0):
                    row = a0 * row
                    row[i] += s0
                for k in idx:
                    row = float(seg.a(t[k])) * row
                    row[P + k] += float(seg.scale(t[k]))
                    L[k] = row
        return L

    def moments(self, n):
        """Exact mean vector and covariance matrix of the simulated X_1..X_n."""
        L = self.linear_map(n)
        return Moments(np.zeros(n), self.innovation.variance * (L @ L.T))

    # -- serialisation ----------------------------------------------------

    def to_dict(self):
        d = {"schema_version": SCHEMA_VERSION, "breaks": list(self.breaks),
             "segments": [s.to_dict() for s in self.segments], "innovation": self.innovation.to_dict()}
        if self.truncation_lag is not None:
            d["truncation_lag"] = int(self.truncation_lag)
        return d

    @classmethod
    def from_dict(cls, d):
        if "model" in d:
            d = d["model"]
        if not isinstance(d, dict):
            raise ConfigError("model must be a JSON object", "model")
        if "segments" not in d:
            raise ConfigError("missing 'segments'", "segments")
        breaks = d.get("breaks", [0.0, 1.0])
        segs = []
        for i, s in enumerate(d["segments"]):
            try:
                segs.append(SegmentFilter.from_dict(s))
            except ConfigError as e:
                raise ConfigError(str(e), f"segments[{i}]") from None
        return cls(tuple(breaks), tuple(segs), Innovation(d.get("innovation", "normal")), d.get("truncation_lag"))


@dataclass(frozen=True)
class Moments:
    """First two moments of (X_1, ..., X_n)."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self):
        return np.diag(self.cov)

    @property
    def second(self):
        return self.var + self.mean ** 2


def _custom_eval(seg, t, windows):
    try:
        out = np.asarray(seg.func(t, windows), dtype=float)
    except Exception as exc:  # user code
        raise SimulationError(f"custom filter raised: {exc}") from exc
    return np.broadcast_to(out, (windows.shape[0],)).copy()


@dataclass(frozen=True)
class DependenceMeasure:
    value: float
    lag: int
    p: float
    reps: int
    grid_per_segment: int
    argmax_t: float

    def __float__(self):
        return float(self.value)


def dependence_measure(model, j, p=2.0, reps=10_000, seed=0, grid_per_segment=64, chunk=8192):
    """Monte Carlo estimate of delta(j, p).

    For every t on the grid the frozen filter is applied to a window of
    innovations and to the same window with ``eps_{k-j}`` replaced by an
    independent copy; the p-norm of the difference is maximised over the grid.
    """
    if j < 0 or p < 1:
        raise ValueError("need j >= 0 and p >= 1")
    if reps < 100:
        raise ValueError("reps must be at least 100")
    j = int(j)
    grids = []
    for a, b in zip(model.breaks, model.breaks[1:]):
        grids.append(a + (b - a) * np.arange(1, grid_per_segment + 1) / grid_per_segment)
    grid = np.concatenate(grids)
    seg_of = model.segment_index(grid)
    lens = [max(model.segment_lag(s), j + 1) for s in range(len(model.segments))]
    width = max(lens)
    psi = [model.ma_coefficients(float(t), width) if model.segments[s].analytic else None
           for t, s in zip(grid, seg_of)]
    acc = np.zeros(grid.size)
    gen = _rng.make_rng(seed, _rng.COUPLING, j)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        win = model.innovation.draw(gen, (m, width))
        alt = win.copy()
        alt[:, j] = model.innovation.draw(gen, m)
        for g, (t, s) in enumerate(zip(grid, seg_of)):
            if psi[g] is not None:
                diff = win @ psi[g] - alt @ psi[g]
            else:
                seg = model.segments[s]
                B = model.segment_lag(s)
                tt = np.full(m, t)
                diff = _custom_eval(seg, tt, win[:, :B]) - _custom_eval(seg, tt, alt[:, :B])
            acc[g] += np.sum(np.abs(diff) ** p)
        done += m
    norms = (acc / reps) ** (1.0 / p)
    if not np.all(np.isfinite(norms)):
        raise SimulationError(f"p-th moment is not finite (p={p})")
    g = int(np.argmax(norms))
    return DependenceMeasure(float(norms[g]), j, float(p), int(reps), int(grid_per_segment), float(grid[g]))
