"""Weight matrices W_n(t_j, t_k) and the functionals the limit theory needs.

Families
--------
``global``           f(t, s) / n
``local_kernel``     g((t - t*)/b_n, (s - t*)/b_n) / (n b_n), g = K x K by default
``banded_toeplitz``  sqrt(m_n) h(|t - s| m_n) / n
``explicit``         a user-supplied symmetric matrix

Toeplitz weights keep only their first column; rows are synthesised on demand,
so the diagnostics below never need the dense n x n array for that family.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .curves import BivariateShape, ConfigError, SmoothingKernel, ToeplitzShape, as_kernel

FAMILIES = ("global", "local_kernel", "banded_toeplitz", "explicit")
DENSE_LIMIT = 16384
FULL_EIG_LIMIT = 2048
A7_DELTA = 0.1
_BLOCK = 256


class WeightError(ValueError):
    pass


class DegenerateWeightsError(WeightError):
    pass


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightSpec:
    family: str
    f: Optional[object] = None
    K: Optional[object] = None
    g: Optional[Callable] = None
    h: Optional[object] = None
    b_n: Optional[float] = None
    m_n: Optional[float] = None
    t_star: float = 0.5
    matrix: Optional[np.ndarray] = None
    n: Optional[int] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown weight family {self.family!r}; choose from {FAMILIES}", "family")
        if self.family == "global":
            f = self.f if self.f is not None else BivariateShape("constant")
            if not callable(f):
                f = BivariateShape.from_dict(f)
            object.__setattr__(self, "f", f)
        elif self.family == "local_kernel":
            if self.b_n is None or not self.b_n > 0:
                raise ConfigError("local_kernel weights need b_n > 0", "b_n")
            if self.g is None:
                object.__setattr__(self, "K", as_kernel(self.K if self.K is not None else "epanechnikov"))
        elif self.family == "banded_toeplitz":
            if self.m_n is None or not self.m_n > 0:
                raise ConfigError("banded_toeplitz weights need m_n > 0", "m_n")
            h = self.h if self.h is not None else ToeplitzShape("exp")
            if not callable(h) or isinstance(h, dict):
                h = ToeplitzShape.from_dict(h)
            object.__setattr__(self, "h", h)
        else:
            if self.matrix is None:
                raise ConfigError("explicit weights need 'matrix'", "matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigError("explicit weight matrix must be square", "matrix")
            object.__setattr__(self, "matrix", m)

    def replace(self, **changes):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(changes)
        return WeightSpec(**d)

    def to_dict(self):
        d = {"family": self.family}
        if self.family == "global":
            d["f"] = self.f.to_dict()
        elif self.family == "local_kernel":
            if self.g is not None:
                raise ConfigError("callable g cannot be serialised", "g")
            d.update(K=self.K.name, b_n=self.b_n, t_star=self.t_star)
        elif self.family == "banded_toeplitz":
            d.update(h=self.h.to_dict(), m_n=self.m_n)
        else:
            d["matrix"] = self.matrix.tolist()
        if self.n is not None:
            d["n"] = int(self.n)
        return d

    @classmethod
    def from_dict(cls, d):
        if "weights" in d:
            d = d["weights"]
        if not isinstance(d, dict) or "family" not in d:
            raise ConfigError("weights must be an object with a 'family' key", "weights")
        known = {"family", "f", "K", "h", "b_n", "m_n", "t_star", "matrix", "n"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", "weights")
        kw = dict(d)
        if "K" in kw:
            kw["K"] = as_kernel(kw["K"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    n: int
    spec: Optional[WeightSpec] = None
    dense_entries: Optional[np.ndarray] = field(default=None, repr=False)
    toeplitz_column: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_array(cls, a, spec=None):
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise WeightError("weight matrix must be square")
        if not np.all(np.isfinite(a)):
            raise WeightError("weight matrix has non-finite entries")
        if not np.array_equal(a, a.T):
            raise WeightError("weight matrix must be exactly symmetric")
        a.setflags(write=False)
        return cls(a.shape[0], spec, dense_entries=a)

    @property
    def is_toeplitz(self):
        return self.toeplitz_column is not None

    @property
    def entries(self):
        """Dense symmetric array (synthesised and cached for Toeplitz weights)."""
        if self.dense_entries is None:
            if self.n > DENSE_LIMIT:
                raise WeightError(f"dense storage limited to n <= {DENSE_LIMIT}")
            a = scipy.linalg.toeplitz(self.toeplitz_column)
            a.setflags(write=False)
            object.__setattr__(self, "dense_entries", a)
        return self.dense_entries

    def rows(self, start, stop):
        start, stop = max(0, start), min(self.n, stop)
        if self.dense_entries is not None or not self.is_toeplitz:
            return self.entries[start:stop]
        i = np.arange(start, stop)[:, None]
        j = np.arange(self.n)[None, :]
        return self.toeplitz_column[np.abs(i - j)]

    def matvec(self, v):
        if self.is_toeplitz and self.dense_entries is None:
            return scipy.linalg.matmul_toeplitz(self.toeplitz_column, v)
        return self.entries @ v

    def scaled(self, c):
        if self.is_toeplitz and self.dense_entries is None:
            col = c * self.toeplitz_column
            col.setflags(write=False)
            return WeightMatrix(self.n, self.spec, toeplitz_column=col)
        return WeightMatrix.from_array(c * self.entries, self.spec)

    def to_csv(self, path):
        np.savetxt(path, self.entries, delimiter=",", fmt="%.17g")


def _grid(n):
    return np.arange(1, n + 1) / n


def _symmetric_from(values):
    upper = np.triu(values)
    return upper + np.triu(upper, 1).T


def _check_finite(a):
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        j, k = bad[0] + 1
        raise WeightError(f"non-finite weight at (j, k) = ({j}, {k})")


def build_weight_matrix(spec, n=None):
    """Evaluate the weight family on t_j = j/n (one evaluation per unordered pair)."""
    n = int(n if n is not None else (spec.n if spec.n is not None else 0))
    if spec.family == "explicit":
        if n and n != spec.matrix.shape[0]:
            raise WeightError(f"explicit matrix is {spec.matrix.shape[0]}x{spec.matrix.shape[0]}, n={n}")
        return WeightMatrix.from_array(_symmetric_from(spec.matrix), spec)
    if n < 2:
        raise WeightError("n must be at least 2")
    t = _grid(n)
    if spec.family == "banded_toeplitz":
        d = np.arange(n) / n
        col = math.sqrt(spec.m_n) * np.asarray(spec.h(d * spec.m_n), dtype=float) / n
        bad = np.nonzero(~np.isfinite(col))[0]
        if bad.size:
            raise WeightError(f"non-finite weight at (j, k) = (1, {bad[0] + 1})")
        col.setflags(write=False)
        return WeightMatrix(n, spec, toeplitz_column=col)
    iu = np.triu_indices(n)
    if spec.family == "global":
        vals = np.asarray(spec.f(t[iu[0]], t[iu[1]]), dtype=float) / n
    else:
        x = (t - spec.t_star) / spec.b_n
        if spec.g is None:
            k = spec.K(x)
            vals = k[iu[0]] * k[iu[1]] / (n * spec.b_n)
        else:
            vals = np.asarray(spec.g(x[iu[0]], x[iu[1]]), dtype=float) / (n * spec.b_n)
    full = np.zeros((n, n))
    full[iu] = vals
    _check_finite(full)
    full = full + np.triu(full, 1).T
    full.setflags(write=False)
    return WeightMatrix(n, spec, dense_entries=full)


# --------------------------------------------------------------------------
# diagnostics

@dataclass
class A3Report:
    l_n: int
    m_n: int
    A: np.ndarray
    a: np.ndarray
    small_block_ratio: float
    max_big_block_ratio: float

    def to_dict(self):
        return {"l_n": self.l_n, "m_n": self.m_n, "small_block_ratio": self.small_block_ratio,
                "max_big_block_ratio": self.max_big_block_ratio, "A": self.A.tolist(), "a": self.a.tolist()}


@dataclass
class WeightDiagnostics:
    n: int
    row_abs_sums: np.ndarray
    Wsup: float
    Wsub: float
    Delta: float
    V_script: float
    a7_local_sum: float
    a7_window: int
    a8_block_max: float
    a8_block_length: int
    theta1: Optional[float] = None
    theta1_scaled: Optional[float] = None
    a3_report: Optional[A3Report] = None
    delta_exponent: float = A7_DELTA
    lipschitz: str = "finite-difference"

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("n", "Wsup", "Wsub", "Delta", "V_script", "a7_local_sum", "a7_window",
                                           "a8_block_max", "a8_block_length", "theta1", "theta1_scaled",
                                           "delta_exponent", "lipschitz")}
        d["max_row_abs_sum"] = float(np.max(self.row_abs_sums))
        d["row_abs_sums"] = self.row_abs_sums.tolist()
        d["a3_report"] = None if self.a3_report is None else self.a3_report.to_dict()
        return d


def row_abs_sums(w):
    if w.is_toeplitz and w.dense_entries is None:
        c = np.abs(w.toeplitz_column)
        cs = np.cumsum(c)
        j = np.arange(w.n)
        return cs[j] + cs[w.n - 1 - j] - c[0]
    return np.abs(w.entries).sum(axis=1)


def frobenius_sq(w):
    if w.is_toeplitz and w.dense_entries is None:
        c = w.toeplitz_column
        mult = 2.0 * (w.n - np.arange(w.n))
        mult[0] = w.n
        return float(np.dot(mult, c * c))
    return float(np.sum(w.entries ** 2))


def block_partition(row_sums, l_n, m_n):
    """A_j, a_j: squared row sums over big (l_n) and small (m_n) blocks."""
    n = row_sums.shape[0]
    s = l_n + m_n
    nb = -(-n // s)
    sq = np.zeros(nb * s)
    sq[:n] = row_sums ** 2
    sq = sq.reshape(nb, s)
    return sq[:, :l_n].sum(axis=1), sq[:, l_n:].sum(axis=1)


def _default_lipschitz(cur):
    """Max |difference| to the left/right index neighbours; row neighbours are added by the caller."""
    f = np.zeros_like(cur)
    dc = np.abs(np.diff(cur, axis=1))
    f[:, 1:] = np.maximum(f[:, 1:], dc)
    f[:, :-1] = np.maximum(f[:, :-1], dc)
    return f


def diagnostics(w, l_n=None, m_n=None, lipschitz_f=None, with_eigen=True):
    n = w.n
    rs = row_abs_sums(w)
    Wsup = float(np.dot(rs, rs))
    Wsub = frobenius_sq(w)
    t = _grid(n)
    win = math.ceil(math.log(n) ** (1 + A7_DELTA))
    Delta = 0.0
    V = 0.0
    a7 = 0.0
    local_norm = np.empty(n)
    offsets = np.arange(-win, win + 1)
    for start in range(0, n, _BLOCK):
        stop = min(n, start + _BLOCK)
        m = stop - start
        padded = np.full((m + 2, n), np.nan)
        lo, hi = max(0, start - 1), min(n, stop + 1)
        padded[lo - start + 1:hi - start + 1] = w.rows(lo, hi)
        cur, prev, nxt = padded[1:-1], padded[:-2], padded[2:]
        if lipschitz_f is None:
            f = _default_lipschitz(cur)
            with np.errstate(invalid="ignore"):
                f = np.fmax(f, np.fmax(np.abs(cur - prev), np.abs(nxt - cur)))
        else:
            f = np.asarray(lipschitz_f(t[start:stop, None], t[None, :]), dtype=float)
        Delta += float(np.sum(np.abs(cur) * f))
        norms = np.sqrt(np.sum((nxt - cur) ** 2, axis=1))
        V += float(np.sum(norms[np.isfinite(norms)]))
        rows_j = np.arange(start, stop)
        cols = rows_j[:, None] + offsets[None, :]
        inside = (cols >= 0) & (cols < n)
        seg = np.where(inside, cur[np.arange(m)[:, None], np.clip(cols, 0, n - 1)], 0.0)
        diag_v = cur[np.arange(m), rows_j][:, None]
        a7 += float(np.sum(np.sqrt(np.sum(np.where(inside, (diag_v - seg) ** 2, 0.0), axis=1))))
        local_norm[start:stop] = np.sqrt(np.sum(seg ** 2, axis=1))
    V += math.sqrt(float(np.sum(w.rows(n - 1, n) ** 2)))
    L = max(1, math.ceil(math.log(n)))
    csum = np.concatenate([[0.0], np.cumsum(local_norm)])
    a8 = float(np.max(csum[L:] - csum[:-L])) if n >= L else float(csum[-1])
    diag = WeightDiagnostics(n, rs, Wsup, Wsub, Delta, V, a7, win, a8, L,
                             lipschitz="user" if lipschitz_f is not None else "finite-difference")
    if with_eigen:
        th = max_abs_eigenvalue(w).theta1
        diag.theta1 = th
        diag.theta1_scaled = th / math.sqrt(Wsub) if Wsub > 0 else float("nan")
    if l_n is not None or m_n is not None:
        l_n, m_n = int(l_n), int(m_n)
        if not (0 < m_n < l_n < n):
            raise WeightError("block sizes need 0 < m_n < l_n < n")
        A, a = block_partition(rs, l_n, m_n)
        with np.errstate(invalid="ignore", divide="ignore"):
            diag.a3_report = A3Report(l_n, m_n, A, a, float(np.sum(a) / Wsup), float(np.max(A) / Wsup))
    return diag


@dataclass
class A3Check:
    passed: bool
    small_block_ratio: float
    max_big_block_ratio: float
    threshold: float

    def to_dict(self):
        return dict(self.__dict__)


def check_A3(diag, threshold=0.05):
    if diag.a3_report is None:
        raise WeightError("diagnostics were computed without block sizes")
    if not diag.Wsup > 0:
        raise DegenerateWeightsError("W^(n) = 0: all row sums vanish")
    r = diag.a3_report
    ok = r.small_block_ratio <= threshold and r.max_big_block_ratio <= threshold
    return A3Check(bool(ok), r.small_block_ratio, r.max_big_block_ratio, float(threshold))


# --------------------------------------------------------------------------
# spectrum

@dataclass
class EigenResult:
    theta1: float
    spectrum: Optional[np.ndarray]
    method: str


def symmetric_eigenvalues(a):
    return scipy.linalg.eigvalsh(a)


def max_abs_eigenvalue(w, tol=1e-8, max_iter=None, full_limit=FULL_EIG_LIMIT):
    """Eigenvalue of largest modulus (sign kept).

    Full symmetric decomposition for n <= ``full_limit`` (spectrum returned),
    implicitly restarted Lanczos otherwise.
    """
    if not isinstance(w, WeightMatrix):
        w = WeightMatrix.from_array(w)
    n = w.n
    if n <= full_limit:
        spec = symmetric_eigenvalues(w.entries)
        theta = float(spec[np.argmax(np.abs(spec))])
        method = "full"
        spec = spec[np.argsort(-np.abs(spec), kind="stable")]
    else:
        op = scipy.sparse.linalg.LinearOperator((n, n), matvec=w.matvec, dtype=float)
        v0 = np.ones(n) / math.sqrt(n)
        try:
            vals = scipy.sparse.linalg.eigsh(op, k=1, which="LM", tol=tol, maxiter=max_iter or 20 * n, v0=v0,
                                             return_eigenvectors=False)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise EigenError(f"Lanczos iteration did not converge: {exc}") from exc
        theta = float(vals[0])
        spec = None
        method = "lanczos"
    bound = float(np.max(row_abs_sums(w)))
    if abs(theta) > bound * (1 + 1e-10) + 1e-300:
        raise EigenError(f"|theta_1| = {abs(theta):.6g} exceeds the Gershgorin bound {bound:.6g}")
    return EigenResult(theta, spec, method)
