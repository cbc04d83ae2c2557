"""Weighted V-statistics, quadratic forms and the Hoeffding split.

    V_n = sum_{k,j} W_n(t_k, t_j) H(X_k, X_j)
    V_n - E V_n = 2 N_n + (D_n - E D_n)

with N_n = sum W (H_j(X_k) - E H_j(X_k)) and the degenerate part accumulated
pairwise as D_n = sum W [H(X_k, X_j) - H_j(X_k) - H_k(X_j) + c_kj], where
H_j(x) = E H(x, X_j) and c_kj = E H(X_k*, X_j*) over independent copies.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _kernels as hk
from . import rng as _rng
from .curves import ConfigError
from .pls import Moments, as_values
from .weights import WeightMatrix


class KernelError(ValueError):
    pass


class UnsupportedOracleError(KernelError):
    pass


@dataclass(frozen=True)
class KernelOracle:
    """Expectations of a kernel along one series length n.

    ``marginal(x)`` returns the matrix M[k, j] = H_j(x_k); ``pair_mean`` is
    c_kj; ``joint_mean`` is E H(X_k, X_j) for the actual (dependent) pair, or
    None when unknown.
    """

    n: int
    marginal: Callable
    pair_mean: np.ndarray
    joint_mean: Optional[np.ndarray]
    provenance: dict


@dataclass(frozen=True)
class KernelH:
    name: str
    func: Callable
    code: Optional[int] = None
    param: float = 0.0
    tail_weight: Callable = field(default=lambda x: np.ones_like(np.asarray(x, dtype=float)), repr=False)
    degenerate: Optional[bool] = None
    oracle: Optional[KernelOracle] = field(default=None, repr=False)

    def __call__(self, x, y):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def moment_based(self):
        return self.code is not None

    def expectation_from_moments(self, mu_a, m2_a, mu_b, m2_b, cross=None):
        """E H(A, B) from first/second moments; ``cross`` = E[AB] (independent if None)."""
        if self.code is None:
            raise UnsupportedOracleError(f"kernel {self.name!r} has no moment formula")
        ab = mu_a * mu_b if cross is None else cross
        c = self.code
        if c == hk.PRODUCT:
            return ab
        if c == hk.VARIANCE:
            return 0.5 * (m2_a + m2_b) - ab
        if c == hk.MEAN_IDENTITY:
            return 0.5 * (mu_a + mu_b)
        if c == hk.MEAN_SQUARE:
            return 0.5 * (m2_a + m2_b)
        if c == hk.CONSTANT:
            return np.full(np.broadcast(mu_a, mu_b).shape, self.param) if np.ndim(mu_a) or np.ndim(mu_b) else self.param
        return mu_a + mu_b

    def with_moments(self, moments):
        """Bind analytic oracles from the exact mean and covariance of X."""
        if self.code is None:
            raise UnsupportedOracleError(f"kernel {self.name!r} has no analytic oracle; use mc_oracle")
        mu = np.asarray(moments.mean, dtype=float)
        m2 = moments.second
        n = mu.shape[0]
        C = self.expectation_from_moments(mu[:, None], m2[:, None], mu[None, :], m2[None, :])
        C = np.broadcast_to(C, (n, n)).astype(float)
        cross = moments.cov + np.outer(mu, mu)
        J = np.broadcast_to(self.expectation_from_moments(mu[:, None], m2[:, None], mu[None, :], m2[None, :],
                                                          cross=cross), (n, n)).astype(float)
        # H_j(x) = E H(x, X_j): a point mass at x has mean x and second moment x^2
        def marginal(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(self.expectation_from_moments(x[:, None], x[:, None] ** 2, mu[None, :],
                                                                 m2[None, :]), (x.shape[0], n)).astype(float)

        return replace(self, oracle=KernelOracle(n, marginal, C, J, {"kind": "analytic"}))


def _builtin(name, code, func, tail, degenerate=None, param=0.0):
    return KernelH(name, func, code, float(param), tail, degenerate)


def product_kernel():
    return _builtin("product", hk.PRODUCT, lambda x, y: x * y, lambda x: 1.0 + x * x)


def variance_kernel():
    return _builtin("variance", hk.VARIANCE, lambda x, y: 0.5 * (x - y) ** 2, lambda x: (1.0 + x * x) ** 2,
                    degenerate=False)


def mean_kernel(M="identity"):
    if M == "identity":
        return _builtin("mean", hk.MEAN_IDENTITY, lambda x, y: 0.5 * (x + y), lambda x: 1.0 + x * x, False)
    if M == "square":
        return _builtin("mean_square", hk.MEAN_SQUARE, lambda x, y: 0.5 * (x * x + y * y),
                        lambda x: (1.0 + x * x) ** 2, False)
    raise ConfigError(f"mean kernel supports M in ('identity', 'square'), got {M!r}", "kernel")


def constant_kernel(c=1.0):
    c = float(c)
    return _builtin("constant", hk.CONSTANT, lambda x, y: np.full(np.broadcast(x, y).shape, c),
                    lambda x: np.ones_like(x), param=c)


def sum_kernel():
    return _builtin("sum", hk.SUM, lambda x, y: x + y, lambda x: 1.0 + x * x, False)


BUILTIN_KERNELS = {
    "product": product_kernel,
    "variance": variance_kernel,
    "mean": mean_kernel,
    "mean_square": lambda: mean_kernel("square"),
    "constant": constant_kernel,
    "sum": sum_kernel,
}


def kernel_by_name(name, **kw):
    try:
        return BUILTIN_KERNELS[name](**kw)
    except KeyError:
        raise ConfigError(f"unknown kernel {name!r}; choose from {sorted(BUILTIN_KERNELS)}", "kernel") from None


def kernel_from_callable(func, name="custom", tail_weight=None):
    return KernelH(name, func, None, 0.0, tail_weight or (lambda x: np.ones_like(np.asarray(x, dtype=float))))


# --------------------------------------------------------------------------
# evaluation

def _dense(w):
    if isinstance(w, WeightMatrix):
        return w.entries
    a = np.asarray(w, dtype=float)
    return a


def _check_dims(x, W):
    if W.shape != (x.shape[0], x.shape[0]):
        raise ValueError(f"weights are {W.shape}, series has length {x.shape[0]}")


def _locate_nonfinite(x, kernel):
    hv = kernel(x[:, None], x[None, :])
    bad = np.argwhere(~np.isfinite(hv))
    k, j = bad[0] + 1
    raise KernelError(f"non-finite kernel value at (k, j) = ({k}, {j})")


def evaluate_V(series, w, kernel, zero_diagonal=False):
    """Full double sum including the diagonal unless ``zero_diagonal``."""
    x = np.ascontiguousarray(as_values(series), dtype=float)
    W = np.ascontiguousarray(_dense(w))
    _check_dims(x, W)
    if kernel.code is not None:
        v = float(hk.pair_sum(x, W, int(kernel.code), float(kernel.param), bool(zero_diagonal)))
    else:
        v = float(hk.pair_sum_numpy(x, W, -1, 0.0, bool(zero_diagonal), h=kernel.func))
    if not math.isfinite(v):
        _locate_nonfinite(x, kernel)
    return v


def evaluate_Q(series, w):
    """sum_{j,k} W_jk X_j X_k through the same code path as the product kernel."""
    return evaluate_V(series, w, product_kernel())


def naive_V(series, w, kernel):
    """Plain double loop; reference implementation for tests."""
    x = as_values(series)
    W = _dense(w)
    total = 0.0
    for k in range(x.shape[0]):
        for j in range(x.shape[0]):
            total += W[k, j] * float(kernel(x[k], x[j]))
    return total


@dataclass
class Decomposition:
    V: float
    N: float
    D: float
    D_centered: Optional[float]
    EV: Optional[float]
    ED: Optional[float]
    has_expectation: bool
    oracle: dict
    pair_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def residual(self):
        if not self.has_expectation:
            return None
        return self.V - self.EV - 2.0 * self.N - self.D_centered

    def to_dict(self):
        return {"V": self.V, "N": self.N, "D": self.D, "D_centered": self.D_centered, "EV": self.EV,
                "ED": self.ED, "has_expectation": self.has_expectation, "residual": self.residual,
                "oracle": self.oracle}


def hoeffding_decompose(series, w, kernel, keep_pairs=False):
    if kernel.oracle is None:
        raise UnsupportedOracleError(f"kernel {kernel.name!r} has no marginal/pair-mean oracle attached; "
                                     "bind one with with_moments() or mc_oracle()")
    x = as_values(series)
    W = _dense(w)
    _check_dims(x, W)
    orc = kernel.oracle
    if orc.n != x.shape[0]:
        raise UnsupportedOracleError(f"oracle was built for n={orc.n}, series has n={x.shape[0]}")
    M = orc.marginal(x)
    C = orc.pair_mean
    V = evaluate_V(x, W, kernel)
    Hm = np.asarray(kernel(x[:, None], x[None, :]), dtype=float)
    N = float(np.sum(W * (M - C)))
    pairs = Hm - M - M.T + C
    D = float(np.sum(W * pairs))
    if orc.joint_mean is not None:
        EV = float(np.sum(W * orc.joint_mean))
        ED = EV - float(np.sum(W * C))
        Dc = D - ED
    else:
        EV = ED = Dc = None
    return Decomposition(V, N, D, Dc, EV, ED, orc.joint_mean is not None, dict(orc.provenance),
                         pairs if keep_pairs else None)


def mc_oracle(kernel, model, n, reps=2000, seed=0, grid=None):
    """Monte Carlo oracle tables: H_j on an x-grid (linear interpolation), c_kj and E H(X_k, X_j)."""
    paths = np.array([model.simulate(n, _rng.derive_seed(seed, _rng.ORACLE, i)).values for i in range(reps)])
    if grid is None:
        lo, hi = np.quantile(paths, [0.001, 0.999])
        grid = np.linspace(lo, hi, 101)
    grid = np.asarray(grid, dtype=float)
    table = np.empty((grid.size, n))
    for g, xv in enumerate(grid):
        table[g] = np.mean(kernel(xv, paths), axis=0)
    shifted = np.roll(paths, 1, axis=0)  # independent copy: a different replication
    C = np.empty((n, n))
    J = np.empty((n, n))
    for k in range(n):
        C[k] = np.mean(kernel(paths[:, k:k + 1], shifted), axis=0)
        J[k] = np.mean(kernel(paths[:, k:k + 1], paths), axis=0)
    C = 0.5 * (C + C.T)
    J = 0.5 * (J + J.T)

    def marginal(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.interp(x, grid, table[:, j]) for j in range(n)], axis=1)

    prov = {"kind": "monte-carlo", "reps": int(reps), "grid_points": int(grid.size),
            "grid_range": [float(grid[0]), float(grid[-1])], "seed": int(seed) if not hasattr(seed, "entropy") else None}
    return replace(kernel, oracle=KernelOracle(n, marginal, C, J, prov))


# --------------------------------------------------------------------------
# degeneracy

@dataclass
class DegeneracyReport:
    degenerate: bool
    max_abs: float
    max_z: float
    z_critical: float
    grid: np.ndarray
    indices: np.ndarray
    table: np.ndarray
    std_error: np.ndarray
    reps: int

    def to_dict(self):
        return {"degenerate": self.degenerate, "max_abs": self.max_abs, "max_z": self.max_z,
                "z_critical": self.z_critical, "reps": self.reps, "grid": self.grid.tolist(),
                "indices": (self.indices + 1).tolist()}


def degeneracy_check(kernel, model, n=200, reps=2000, grid=None, seed=0, n_indices=16, family_alpha=0.0027):
    """Estimate E H(x, X_j) on a grid of x and a spread of indices j.

    The kernel is called degenerate when every |estimate| stays within a
    Bonferroni-corrected normal bound of its Monte Carlo standard error
    (family-wise level ``family_alpha``, the two-sided 3-sigma rate).
    """
    grid = np.linspace(-3, 3, 13) if grid is None else np.asarray(grid, dtype=float)
    idx = np.unique(np.linspace(0, n - 1, min(n_indices, n)).round().astype(int))
    paths = np.array([model.simulate(n, _rng.derive_seed(seed, _rng.DEGENERACY, i)).values[idx]
                      for i in range(reps)])
    vals = kernel(grid[:, None, None], paths[None, :, :])
    vals = np.broadcast_to(vals, (grid.size, reps, idx.size))
    est = vals.mean(axis=1)
    se = vals.std(axis=1, ddof=1) / math.sqrt(reps)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, np.abs(est) / se, np.where(np.abs(est) > 0, np.inf, 0.0))
    tests = max(1, int(np.count_nonzero(se > 0) or est.size))
    zc = float(stats.norm.isf(family_alpha / (2 * tests)))
    max_z = float(np.max(z))
    return DegeneracyReport(bool(max_z <= zc), float(np.max(np.abs(est))), max_z, zc, grid, idx, est, se, reps)


# --------------------------------------------------------------------------
# Wiener-class diagnostic

class GridMemoryError(MemoryError):
    pass


@dataclass
class WienerReport:
    integral_abs: float
    integral_weighted: float
    tail_mass: float
    tail_fraction: float
    heavy_tail: bool
    delta: float
    extent: float
    points: int

    def to_dict(self):
        return dict(self.__dict__)


def check_wiener_class(hstar=None, kernel=None, L=None, grid_extent=32.0, grid_points=1024, delta=0.5,
                       memory_cap=512 * 2 ** 20, heavy_threshold=1e-3):
    """Riemann approximations of int |g| and int |(t,s)|^delta |g| for H* = H / (L x L).

    g is the Fourier density with H*(x, y) = int g(t, s) exp(i(tx + sy)) dt ds,
    approximated by a 2-D FFT of H* sampled on [-extent, extent)^2.  The tail
    fraction is the share of int |g| carried by |(t, s)| >= 0.9 x Nyquist.
    Advisory only.
    """
    if hstar is None:
        if kernel is None:
            raise ValueError("give hstar or a kernel")
        Lf = L if L is not None else kernel.tail_weight
        hstar = lambda x, y: kernel(x, y) / (Lf(x) * Lf(y))
    N = int(grid_points)
    need = N * N * 16 * 3
    if need > memory_cap:
        raise GridMemoryError(f"grid needs ~{need / 2 ** 20:.0f} MiB (> cap {memory_cap / 2 ** 20:.0f} MiB); "
                              "use fewer grid points")
    h = 2.0 * grid_extent / N
    x = -grid_extent + h * np.arange(N)
    F = np.asarray(hstar(x[:, None], x[None, :]), dtype=float)
    if not np.all(np.isfinite(F)):
        raise KernelError("H* is not finite on the grid")
    G = np.abs(np.fft.fft2(F)) * h * h / (4 * np.pi ** 2)
    omega = 2 * np.pi * np.fft.fftfreq(N, d=h)
    dw = 2 * np.pi / (N * h)
    r = np.hypot(omega[:, None], omega[None, :])
    total = float(G.sum() * dw * dw)
    weighted = float((np.where(r > 0, r ** delta, 1.0 if delta == 0 else 0.0) * G).sum() * dw * dw)
    nyq = np.pi / h
    tail = float(G[r >= 0.9 * nyq].sum() * dw * dw)
    frac = tail / total if total > 0 else 0.0
    return WienerReport(total, weighted, tail, frac, bool(frac > heavy_threshold), float(delta), float(grid_extent), N)
