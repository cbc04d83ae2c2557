"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names (``ar1_recursion``, ``pair_sum``, ``local_linear_sums``) are
bound at import time to the numba versions unless ``VSTATNS_DISABLE_NUMBA`` is
set.  Both implementations stay importable under ``*_numba`` / ``*_numpy`` for
the benchmark and the cross-path tests.

Built-in kernels are addressed by integer code so that the jitted loops can
inline them:

====  ==================  =========
code  H(x, y)             param
====  ==================  =========
0     x y
1     (x - y)^2 / 2
2     (x + y) / 2
3     (x^2 + y^2) / 2
4     c                   c
5     x + y
====  ==================  =========
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

PRODUCT, VARIANCE, MEAN_IDENTITY, MEAN_SQUARE, CONSTANT, SUM = range(6)

_ROW_BLOCK = 256


def kernel_matrix_numpy(code, param, x, y):
    """Evaluate a coded kernel on broadcast arrays."""
    if code == PRODUCT:
        return x * y
    if code == VARIANCE:
        d = x - y
        return 0.5 * d * d
    if code == MEAN_IDENTITY:
        return 0.5 * (x + y)
    if code == MEAN_SQUARE:
        return 0.5 * (x * x + y * y)
    if code == CONSTANT:
        return np.full(np.broadcast(x, y).shape, param)
    if code == SUM:
        return x + y
    raise ValueError(f"unknown kernel code {code}")


@njit
def _h(code, param, x, y):
    if code == 0:
        return x * y
    elif code == 1:
        d = x - y
        return 0.5 * d * d
    elif code == 2:
        return 0.5 * (x + y)
    elif code == 3:
        return 0.5 * (x * x + y * y)
    elif code == 4:
        return param
    else:
        return x + y


# --------------------------------------------------------------------------
# time-varying AR(1) recursion

@njit
def ar1_recursion_numba(a, s, eps, state0):
    n = eps.shape[0]
    out = np.empty(n)
    prev = state0
    for k in range(n):
        prev = a[k] * prev + s[k] * eps[k]
        out[k] = prev
    return out


def ar1_recursion_numpy(a, s, eps, state0):
    out = np.empty(eps.shape[0])
    prev = float(state0)
    drive = s * eps
    for k in range(eps.shape[0]):
        prev = a[k] * prev + drive[k]
        out[k] = prev
    return out


# --------------------------------------------------------------------------
# weighted pair sum  sum_{k,j} W[k, j] H(x_k, x_j)  for symmetric W

@njit
def pair_sum_numba(x, w, code, param, zero_diag):
    """k-major: row k contributes W_kk H_kk + 2 sum_{j>k} W_kj H_kj.

    Rows and the total are accumulated with Neumaier compensation.
    """
    n = x.shape[0]
    total = 0.0
    comp = 0.0
    for k in range(n):
        xk = x[k]
        rs = 0.0
        rc = 0.0
        for j in range(k + 1, n):
            v = w[k, j] * _h(code, param, xk, x[j])
            t = rs + v
            if abs(rs) >= abs(v):
                rc += (rs - t) + v
            else:
                rc += (v - t) + rs
            rs = t
        row = 2.0 * (rs + rc)
        if not zero_diag:
            row += w[k, k] * _h(code, param, xk, xk)
        t = total + row
        if abs(total) >= abs(row):
            comp += (total - t) + row
        else:
            comp += (row - t) + total
        total = t
    return total + comp


def pair_sum_numpy(x, w, code, param, zero_diag, h=None):
    """Row-blocked numpy version; ``h`` overrides the coded kernel with a callable."""
    n = x.shape[0]
    rows = []
    for start in range(0, n, _ROW_BLOCK):
        stop = min(n, start + _ROW_BLOCK)
        xs = x[start:stop, None]
        cols = x[None, start:]
        hv = h(xs, cols) if h is not None else kernel_matrix_numpy(code, param, xs, cols)
        prod = w[start:stop, start:] * hv
        # upper triangle relative to the global index: column offset j - start > row offset
        r = np.arange(stop - start)[:, None]
        c = np.arange(n - start)[None, :]
        upper = np.where(c > r, prod, 0.0).sum(axis=1)
        diag = prod[np.arange(stop - start), np.arange(stop - start)]
        rows.append(2.0 * upper + (0.0 if zero_diag else diag))
    return math.fsum(np.concatenate(rows)) if rows else 0.0


# --------------------------------------------------------------------------
# separable local-linear sums  sum_{j,k} a_j a_k H(x_j, x_k) [1, u_j]

@njit
def local_linear_sums_numba(x, a, u, code, param):
    n = x.shape[0]
    r0 = 0.0
    r1 = 0.0
    for j in range(n):
        aj = a[j]
        if aj == 0.0:
            continue
        s0 = 0.0
        for k in range(n):
            ak = a[k]
            if ak == 0.0:
                continue
            s0 += ak * _h(code, param, x[j], x[k])
        r0 += aj * s0
        r1 += aj * u[j] * s0
    return r0, r1


def local_linear_sums_numpy(x, a, u, code, param, h=None):
    keep = a != 0.0
    xs, av, uv = x[keep], a[keep], u[keep]
    hv = h(xs[:, None], xs[None, :]) if h is not None else kernel_matrix_numpy(code, param, xs[:, None], xs[None, :])
    s0 = hv @ av
    return float(av @ s0), float((av * uv) @ s0)


if USE_NUMBA:
    ar1_recursion = ar1_recursion_numba
    pair_sum = pair_sum_numba
    local_linear_sums = local_linear_sums_numba
else:
    ar1_recursion = ar1_recursion_numpy
    pair_sum = pair_sum_numpy
    local_linear_sums = local_linear_sums_numpy
