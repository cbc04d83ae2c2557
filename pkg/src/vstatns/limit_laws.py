"""Limit laws of the form sum_j alpha_j (Z_j^2 - 1) and reference distributions."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng as _rng
from .weights import WeightMatrix, max_abs_eigenvalue, symmetric_eigenvalues

TRUNCATION = 1e-12
DEFAULT_DRAWS = 1_000_000
_CHUNK = 1 << 22


class LawError(ValueError):
    pass


@dataclass(frozen=True)
class MixtureLaw:
    alphas: np.ndarray
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).reshape(-1)
        a = a[np.argsort(-np.abs(a), kind="stable")]
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)

    @property
    def variance(self):
        return 2.0 * float(np.sum(self.alphas ** 2))

    @property
    def mean(self):
        return 0.0

    def to_dict(self):
        return {"alphas": self.alphas.tolist(), "variance": self.variance, "source": self.source}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["alphas"], dtype=float), d.get("source", {}))


def _as_dense(w):
    return w.entries if isinstance(w, WeightMatrix) else np.asarray(w, dtype=float)


def quadform_mixture(w, sigma_curve):
    """Law of Q°_n - E Q°_n with Q°_n = sum W_jk s_j Z_j s_k Z_k.

    The alphas are the eigenvalues of M = diag(s) W diag(s); those below
    1e-12 x max|alpha| are dropped (the count is kept in ``source``).
    """
    W = _as_dense(w)
    s = np.asarray(sigma_curve, dtype=float)
    if s.shape != (W.shape[0],):
        raise LawError(f"sigma curve has shape {s.shape}, expected ({W.shape[0]},)")
    if not np.all(s > 0):
        raise LawError("long-run standard deviations must be positive")
    M = s[:, None] * W * s[None, :]
    try:
        ev = symmetric_eigenvalues(M)
    except np.linalg.LinAlgError as exc:
        raise LawError(f"eigensolver failed: {exc}") from exc
    trace = float(np.trace(M))
    if not math.isclose(float(np.sum(ev)), trace, rel_tol=1e-8, abs_tol=1e-8 * max(1.0, np.abs(M).max() * M.shape[0])):
        raise LawError(f"trace identity failed: sum alpha = {np.sum(ev):.12g}, trace = {trace:.12g}")
    fro = float(np.sum(M * M))
    if not math.isclose(float(np.sum(ev * ev)), fro, rel_tol=1e-8, abs_tol=1e-300):
        raise LawError(f"sum-of-squares identity failed: {np.sum(ev * ev):.12g} vs {fro:.12g}")
    top = float(np.max(np.abs(ev))) if ev.size else 0.0
    keep = np.abs(ev) >= TRUNCATION * top if top > 0 else np.zeros(ev.size, bool)
    src = {"kind": "quadratic-form", "n": int(W.shape[0]), "truncated": int(np.count_nonzero(~keep)),
           "trace": trace, "frobenius_sq": fro}
    return MixtureLaw(ev[keep], src)


def sample_mixture(law, reps, seed=0):
    a = law.alphas
    out = np.zeros(int(reps))
    if a.size == 0:
        return out
    gen = _rng.make_rng(seed, _rng.MIXTURE)
    rows = max(1, _CHUNK // a.size)
    for start in range(0, reps, rows):
        stop = min(reps, start + rows)
        z = gen.standard_normal((stop - start, a.size))
        out[start:stop] = (z * z - 1.0) @ a
    return out


@dataclass
class CdfEstimate:
    value: float
    std_error: float
    draws: int


def mixture_cdf(law, x, draws=DEFAULT_DRAWS, seed=0):
    sample = sample_mixture(law, draws, seed)
    x_arr = np.asarray(x, dtype=float)
    srt = np.sort(sample)
    p = np.searchsorted(srt, x_arr, side="right") / draws
    se = np.sqrt(p * (1 - p) / draws)
    if x_arr.ndim == 0:
        return CdfEstimate(float(p), float(se), int(draws))
    return [CdfEstimate(float(pi), float(si), int(draws)) for pi, si in zip(p, se)]


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov

REFERENCE_KINDS = ("normal", "exp", "chi2_1", "point", "mixture")


@dataclass
class KsResult:
    statistic: float
    bar: float
    n: int
    reference: str

    def to_dict(self):
        return dict(self.__dict__)


def reference_cdf(ref):
    """(F, F_left) for an analytic reference; F_left is the left limit F(x-)."""
    kind = ref.get("kind")
    if kind == "normal":
        f = stats.norm(loc=ref.get("loc", 0.0), scale=ref.get("scale", 1.0)).cdf
    elif kind == "exp":
        f = stats.expon(scale=ref.get("scale", 1.0)).cdf
    elif kind == "chi2_1":
        f = stats.chi2(1, scale=ref.get("scale", 1.0)).cdf
    elif kind == "point":
        v = float(ref.get("value", 0.0))
        return (lambda x: (np.asarray(x) >= v).astype(float)), (lambda x: (np.asarray(x) > v).astype(float))
    else:
        raise LawError(f"no analytic CDF for reference {kind!r}")
    return f, f


def ks_one_sample(sample, cdf, cdf_left=None):
    """sup_x |F_n(x) - F(x)| from the sorted sample, exact for atoms in either law."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        return 0.0
    F = np.asarray(cdf(x), dtype=float)
    Fl = F if cdf_left is None else np.asarray(cdf_left(x), dtype=float)
    upper = np.searchsorted(x, x, side="right") / n
    lower = np.searchsorted(x, x, side="left") / n
    return float(max(np.max(np.abs(upper - F)), np.max(np.abs(lower - Fl))))


def ks_two_sample(a, b):
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    pts = np.concatenate([a, b])
    Fa = np.searchsorted(a, pts, side="right") / a.size
    Fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(Fa - Fb)))


def ks_distance(sample, reference, draws=None, seed=0):
    """KS statistic against a sample, a reference descriptor or a MixtureLaw.

    Returns the statistic with the 1.36/sqrt(n_eff) reference bar.
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise LawError("empty sample")
    if isinstance(reference, MixtureLaw) or (isinstance(reference, dict) and reference.get("kind") == "mixture"):
        law = reference if isinstance(reference, MixtureLaw) else MixtureLaw(reference["alphas"])
        draws = draws if draws is not None else (reference.get("draws") if isinstance(reference, dict) else None)
        if not draws:
            raise LawError("mixture reference needs a draw count")
        ref_sample = sample_mixture(law, int(draws), seed)
        d = ks_two_sample(sample, ref_sample)
        n_eff = sample.size * ref_sample.size / (sample.size + ref_sample.size)
        return KsResult(d, 1.36 / math.sqrt(n_eff), int(sample.size), "mixture")
    if isinstance(reference, dict):
        d = ks_one_sample(sample, *reference_cdf(reference))
        return KsResult(d, 1.36 / math.sqrt(sample.size), int(sample.size), reference["kind"])
    if callable(reference):
        d = ks_one_sample(sample, reference)
        return KsResult(d, 1.36 / math.sqrt(sample.size), int(sample.size), "callable")
    ref = np.asarray(reference, dtype=float)
    d = ks_two_sample(sample, ref)
    n_eff = sample.size * ref.size / (sample.size + ref.size)
    return KsResult(d, 1.36 / math.sqrt(n_eff), int(sample.size), "sample")


# --------------------------------------------------------------------------
# eigenvalue route to normality

@dataclass
class DeJongReport:
    theta1_weights: float
    theta1_scaled_weights: float
    theta1_mixture: float
    sum_alpha_sq: float
    ratio: float
    tol: float
    predicts_normal: bool

    def to_dict(self):
        return dict(self.__dict__)


def dejong_normality_check(w, sigma_curve, tol=0.3):
    """Compare max|alpha| with sqrt(sum alpha^2) for M = diag(s) W diag(s).

    sum alpha^2 is the squared Frobenius norm of M, so only the top
    eigenvalue has to be computed.
    """
    if not isinstance(w, WeightMatrix):
        w = WeightMatrix.from_array(w)
    s = np.asarray(sigma_curve, dtype=float)
    th_w = max_abs_eigenvalue(w).theta1
    W = w.entries
    M = s[:, None] * W * s[None, :]
    th_m = max_abs_eigenvalue(WeightMatrix.from_array(0.5 * (M + M.T))).theta1
    ssq = float(np.sum(M * M))
    fro_w = math.sqrt(float(np.sum(W * W)))
    ratio = abs(th_m) / math.sqrt(ssq) if ssq > 0 else float("inf")
    return DeJongReport(th_w, th_w / fro_w if fro_w > 0 else float("nan"), th_m, ssq, ratio, float(tol),
                        bool(ratio <= tol))
