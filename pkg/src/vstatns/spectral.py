"""Fourier sums, periodogram and smoothed periodogram.

Index convention: S(lambda) = sum_{j=1}^n X_j exp(i j lambda), so
S* = sum X_j cos(j lambda) and S° = sum X_j sin(j lambda).
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as _rng
from .curves import as_kernel
from .pls import UnsupportedModelError, as_values

_QUAD_NODES = 32


def fourier_sums_direct(x, lam):
    """Direct O(n m) evaluation; ``x`` may be (n,) or (reps, n)."""
    x = np.asarray(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    j = np.arange(1, x.shape[-1] + 1)
    phase = np.outer(lam, j)
    return x @ np.cos(phase).T, x @ np.sin(phase).T


def fourier_sums_fft(x):
    """S*, S° on the full grid lambda_k = 2 pi k / n, k = 0..n-1."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    # ifft gives sum_{m=0}^{n-1} x_{m+1} e^{+2 pi i k m / n} / n; shift j = m + 1
    z = np.fft.ifft(x, axis=-1) * n * np.exp(2j * np.pi * np.arange(n) / n)
    return z.real, z.imag


def fourier_sums(series, lam):
    """(S*, S°) at a scalar frequency or an array of frequencies in [0, 2 pi)."""
    x = as_values(series)
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(lam_arr >= 2 * np.pi):
        raise ValueError("frequencies must lie in [0, 2 pi)")
    if lam_arr.ndim == 0:
        c, s = fourier_sums_direct(x, lam_arr)
        return float(c[0]), float(s[0])
    n = x.shape[0]
    k = lam_arr * n / (2 * np.pi)
    if lam_arr.size > 64 and np.allclose(k, np.round(k), atol=1e-9, rtol=0):
        c, s = fourier_sums_fft(x)
        ki = np.round(k).astype(int) % n
        return c[ki], s[ki]
    return fourier_sums_direct(x, lam_arr)


def fourier_grid(n):
    """Fourier frequencies 2 pi k / n in [0, pi]."""
    return 2 * np.pi * np.arange(n // 2 + 1) / n


@dataclass
class SpectralEstimate:
    lambda_grid: np.ndarray
    I_values: np.ndarray
    f_tilde: Optional[np.ndarray] = None
    m: Optional[int] = None
    K: Optional[str] = None


def _periodogram_values(x, lam):
    n = x.shape[-1]
    c, s = fourier_sums(x, lam) if x.ndim == 1 else fourier_sums_direct(x, lam)
    return (np.asarray(c) ** 2 + np.asarray(s) ** 2) / (2 * np.pi * n)


def periodogram(series, lam=None):
    """I_n(lambda) = |S(lambda)|^2 / (2 pi n); default grid = Fourier frequencies in [0, pi]."""
    x = as_values(series)
    grid = fourier_grid(x.shape[0]) if lam is None else np.atleast_1d(np.asarray(lam, dtype=float))
    if np.any(np.diff(grid) < 0):
        order = np.argsort(grid)
        grid = grid[order]
    vals = np.atleast_1d(_periodogram_values(x, np.mod(grid, 2 * np.pi)))
    return SpectralEstimate(grid, np.maximum(vals, 0.0))


def smoothing_weights(K, m):
    """(1/m) K(u/m) for u = -m..m, renormalised to sum to one."""
    u = np.arange(-m, m + 1)
    w = as_kernel(K)(u / m) / m
    tot = w.sum()
    if not tot > 0:
        raise ValueError("smoothing kernel puts no mass on the integer grid")
    return u, w / tot


def reflect(freqs):
    """Map frequencies into [0, pi] by even/2pi-periodic reflection."""
    f = np.mod(np.asarray(freqs, dtype=float), 2 * np.pi)
    return np.where(f > np.pi, 2 * np.pi - f, f)


def smoothed_periodogram(series, lam, K="epanechnikov", m=16):
    x = as_values(series)
    return float(_smoothed(x, lam, K, m))


def _smoothed(x, lam, K, m):
    n = x.shape[-1]
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0) or np.any(lam_arr > np.pi):
        raise ValueError("smoothing frequency must lie in [0, pi]")
    if m < 2 or m / n > 0.25:
        raise ValueError(f"window m={m} must satisfy 2 <= m <= n/4")
    u, w = smoothing_weights(K, m)
    freqs = reflect(float(lam) + 2 * np.pi * u / n)
    I = _periodogram_values(x, freqs)
    return I @ w


def smoothed_periodogram_batch(paths, lam, K="epanechnikov", m=16):
    """f~_n(lambda) for each row of a (reps, n) array."""
    return _smoothed(np.asarray(paths, dtype=float), lam, K, m)


def spectrum(series, grid=None, K="epanechnikov", m=None):
    est = periodogram(series, grid)
    if m is not None:
        x = as_values(series)
        lam = np.clip(est.lambda_grid, 0, np.pi)
        est.f_tilde = np.array([_smoothed(x, float(l), K, m) for l in lam])
        est.m = int(m)
        est.K = as_kernel(K).name
    return est


# --------------------------------------------------------------------------
# model-based quantities

def average_spectrum(model, lam, quad_points=_QUAD_NODES, power=1):
    """int_0^1 f(t, lambda)^power dt by Gauss-Legendre on each segment."""
    nodes, wts = np.polynomial.legendre.leggauss(int(quad_points))
    total = 0.0
    for a, b in zip(model.breaks, model.breaks[1:]):
        t = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        f = model.spectral_curve(t, lam)
        total += 0.5 * (b - a) * float(np.dot(wts, f ** power))
    return total


def gaussian_analog_sums(model, lam, n, seed=0):
    """Gaussian approximation of (S*, S°).

    Interior lambda: sum_k sqrt(pi) f(t_k, lambda)^{1/2} (G_k1, G_k2).
    lambda in {0, pi}: (sqrt(2 pi) sum_k f(t_k, lambda)^{1/2} G_k, 0).
    """
    if not model.analytic:
        raise UnsupportedModelError("Gaussian analogue needs closed-form local spectra")
    t = np.arange(1, n + 1) / n
    root = np.sqrt(model.spectral_curve(t, lam))
    gen = _rng.make_rng(seed, _rng.GAUSS_ANALOG)
    if lam == 0.0 or lam == np.pi:
        g = gen.standard_normal(n)
        return math.sqrt(2 * np.pi) * float(root @ g), 0.0
    g = gen.standard_normal((2, n))
    return math.sqrt(np.pi) * float(root @ g[0]), math.sqrt(np.pi) * float(root @ g[1])


def predicted_cross_covariance(model, k, n):
    """pi sum_j f(t_j, lambda_k) sin(4 pi k t_j), lambda_k = 2 pi k / n."""
    t = np.arange(1, n + 1) / n
    lam = 2 * np.pi * k / n
    return float(np.pi * np.dot(model.spectral_curve(t, lam), np.sin(4 * np.pi * k * t)))


@dataclass
class ImCorrReport:
    k: int
    n: int
    reps: int
    mc_covariance: float
    mc_std_error: float
    predicted: float

    @property
    def z(self):
        return (self.mc_covariance - self.predicted) / self.mc_std_error if self.mc_std_error > 0 else 0.0

    def to_dict(self):
        return {**self.__dict__, "z": self.z}


def im_corr_probe(model, k, n, reps=2000, seed=0, batch=512):
    """Monte Carlo cov(S*, S°) at lambda_k against the predicted sine sum."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    lam = 2 * np.pi * k / n
    sc = np.empty(reps)
    ss = np.empty(reps)
    for start in range(0, reps, batch):
        stop = min(reps, start + batch)
        paths = np.array([model.simulate(n, _rng.derive_seed(seed, _rng.MC_REPLICATION, i)).values
                          for i in range(start, stop)])
        c, s = fourier_sums_direct(paths, lam)
        sc[start:stop], ss[start:stop] = c[:, 0], s[:, 0]
    prod = (sc - sc.mean()) * (ss - ss.mean())
    cov = float(prod.sum() / (reps - 1))
    se = float(prod.std(ddof=1) / math.sqrt(reps))
    return ImCorrReport(int(k), int(n), int(reps), cov, se, predicted_cross_covariance(model, k, n))
