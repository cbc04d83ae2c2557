"""Local linear estimation of theta(t) = E H(X, Y), X, Y iid ~ F(t, .).

The estimate at t* minimises

    sum_{j,k} (H(X_j, X_k) - e0 - e1 (t_j - t*) - e2 (t_k - t*))^2 W_jk,
    W_jk = K((t_j - t*)/b) K((t_k - t*)/b) / (n b).

Because W is a product of one-dimensional weights, every entry of the 3x3
normal matrix factorises into moments s_p = sum_j K_j u_j^p, and the right-hand
side needs only two kernel-weighted pair sums.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import stats

from . import _kernels as hk
from . import rng as _rng
from .curves import as_kernel
from .pls import as_values

DERIVATIVE_STEP = 1e-3
BREAK_MARGIN = 1e-2
MIN_EFFECTIVE = 8


class EstimationError(ValueError):
    pass


class BoundaryError(EstimationError):
    pass


class RankDeficiencyError(EstimationError):
    pass


@dataclass(frozen=True)
class ThetaEstimate:
    theta_hat: float
    slope_t: float
    slope_s: float
    t_star: float
    b_n: float
    n: int
    bias_hat: Optional[float] = None
    sd_hat: Optional[float] = None
    ci: Optional[tuple] = None
    level: Optional[float] = None
    derivative_step: float = DERIVATIVE_STEP

    def to_dict(self):
        d = dict(self.__dict__)
        d["ci"] = None if self.ci is None else list(self.ci)
        return d


def default_bandwidth(n):
    return n ** (-0.2)


def _setup(n, K, b_n, t_star):
    b = default_bandwidth(n) if b_n is None else float(b_n)
    if not 0 < b <= 0.5:
        raise EstimationError(f"bandwidth must lie in (0, 1/2], got {b}")
    if t_star < b - 1e-12 or t_star > 1 - b + 1e-12:
        raise BoundaryError(f"t*={t_star} is within one bandwidth of the boundary; boundary correction is "
                            "not supported")
    if n * b < MIN_EFFECTIVE:
        raise EstimationError(f"n * b_n = {n * b:.3g} < {MIN_EFFECTIVE}")
    t = np.arange(1, n + 1) / n
    u = t - t_star
    a = as_kernel(K)(u / b)
    return b, u, a


def _solve(s0, s1, s2, r0, r1, r2, scale):
    S = scale * np.array([[s0 * s0, s0 * s1, s0 * s1],
                          [s0 * s1, s0 * s2, s1 * s1],
                          [s0 * s1, s1 * s1, s0 * s2]])
    r = scale * np.array([r0, r1, r2])
    if not s0 > 0 or s0 * s2 - s1 * s1 <= 1e-14 * max(s0 * s2, 1e-300):
        raise RankDeficiencyError("normal equations are singular: the weights sit on a single time point")
    try:
        eta = np.linalg.solve(S, r)
        if not np.all(np.isfinite(eta)) or np.linalg.cond(S) > 1e12:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        eta = np.linalg.solve(S + 1e-12 * np.trace(S) * np.eye(3), r)
    return eta


def local_linear_from_responses(responses, K="epanechnikov", b_n=None, t_star=0.5):
    """Fit on an explicit n x n response matrix (need not come from a kernel)."""
    Hm = np.asarray(responses, dtype=float)
    n = Hm.shape[0]
    b, u, a = _setup(n, K, b_n, t_star)
    s0, s1, s2 = a.sum(), (a * u).sum(), (a * u * u).sum()
    r0 = a @ Hm @ a
    r1 = (a * u) @ Hm @ a
    r2 = a @ Hm @ (a * u)
    eta = _solve(s0, s1, s2, r0, r1, r2, 1.0 / (n * b))
    return ThetaEstimate(float(eta[0]), float(eta[1]), float(eta[2]), float(t_star), b, n)


def local_linear_theta(series, kernel, K="epanechnikov", b_n=None, t_star=0.5):
    x = np.ascontiguousarray(as_values(series), dtype=float)
    n = x.shape[0]
    b, u, a = _setup(n, K, b_n, t_star)
    s0, s1, s2 = a.sum(), (a * u).sum(), (a * u * u).sum()
    if kernel.code is not None:
        r0, r1 = hk.local_linear_sums(x, np.ascontiguousarray(a), np.ascontiguousarray(u), int(kernel.code),
                                      float(kernel.param))
    else:
        r0, r1 = hk.local_linear_sums_numpy(x, a, u, -1, 0.0, h=kernel.func)
    if not (math.isfinite(r0) and math.isfinite(r1)):
        raise EstimationError("non-finite kernel values inside the estimation window")
    eta = _solve(s0, s1, s2, r0, r1, r1, 1.0 / (n * b))
    return ThetaEstimate(float(eta[0]), float(eta[1]), float(eta[2]), float(t_star), b, n)


def local_linear_curve(series, kernel, K="epanechnikov", b_n=None, grid=None):
    n = as_values(series).shape[0]
    b = default_bandwidth(n) if b_n is None else b_n
    grid = np.linspace(b, 1 - b, 21) if grid is None else grid
    return [local_linear_theta(series, kernel, K, b, float(t)) for t in grid]


# --------------------------------------------------------------------------
# asymptotics

def _frozen_moments(model, t):
    return 0.0, model.local_acov(t, 0)


def theta_2d(model, kernel, t, s):
    """theta(t, s) = E H(X, Y), X ~ F(t), Y ~ F(s) independent."""
    mt, vt = _frozen_moments(model, t)
    ms, vs = _frozen_moments(model, s)
    return float(kernel.expectation_from_moments(mt, vt + mt * mt, ms, vs + ms * ms))


def _check_breaks(model, t_star, margin):
    for b in model.breaks[1:-1]:
        if abs(t_star - b) < margin:
            raise EstimationError(f"t*={t_star} is within {margin} of break point {b}; theta is not C^2 there")


def asymptotic_bias(model, t_star, b_n, K="epanechnikov", kernel=None, step=DERIVATIVE_STEP):
    """B_n(t*) = b_n^2 d^2 theta(t*, t*)/dt^2 int x^2 K(x) dx (partial derivative in the first argument)."""
    from .vstat import variance_kernel
    kernel = kernel or variance_kernel()
    _check_breaks(model, t_star, max(BREAK_MARGIN, step))
    th = lambda t: theta_2d(model, kernel, t, t_star)
    d2 = (th(t_star + step) - 2.0 * th(t_star) + th(t_star - step)) / (step * step)
    return float(b_n) ** 2 * d2 * as_kernel(K).moment(2)


def long_run_variance_variance_kernel(model, t):
    """sigma^2(t) for the variance kernel on a Gaussian linear model: 2 sum_h gamma(t, h)^2."""
    seg = model.segments[model.segment_index(t)]
    if seg.kind == "tvar1":
        a = float(seg.a(t))
        g0 = model.local_acov(t, 0)
        return 2.0 * g0 * g0 * (1 + a * a) / (1 - a * a)
    q = len(seg.coefs)
    g = np.array([model.local_acov(t, h) for h in range(q)])
    return 2.0 * (g[0] ** 2 + 2.0 * np.sum(g[1:] ** 2))


def long_run_variance_mc(model, t, kernel, reps=10_000, seed=0, length=None):
    """Monte Carlo sigma^2(t): Var(sum_k 2 H_t(G_k)) / L over independent frozen-time blocks."""
    j = model.segment_index(t)
    L = length or max(256, 8 * model.segment_lag(j))
    mt, vt = _frozen_moments(model, t)
    sums = np.empty(reps)
    for i in range(reps):
        g = model.frozen_path(t, L, _rng.make_rng(seed, _rng.ORACLE, i))
        y = 2.0 * np.asarray(kernel.expectation_from_moments(g, g * g, mt, vt + mt * mt), dtype=float)
        sums[i] = y.sum()
    return float(np.var(sums, ddof=1) / L)


def asymptotic_sd(model, t_star, b_n, n, K="epanechnikov", kernel=None, mc=False, reps=10_000, seed=0):
    """sqrt(sigma^2(t*) int K^2 / (n b_n))."""
    from .vstat import variance_kernel
    kernel = kernel or variance_kernel()
    if mc:
        if kernel.code is None:
            raise EstimationError("the Monte Carlo plug-in needs a moment-based kernel")
        s2 = long_run_variance_mc(model, t_star, kernel, reps, seed)
    else:
        if kernel.code != hk.VARIANCE or not model.innovation.gaussian or not model.analytic:
            raise EstimationError("closed-form sigma^2 is available for the variance kernel on Gaussian "
                                  "tvma/tvar1 models only; pass mc=True")
        s2 = long_run_variance_variance_kernel(model, t_star)
    return math.sqrt(s2 * as_kernel(K).squared_integral() / (n * float(b_n)))


def confidence_interval(est, level=0.95):
    if est.sd_hat is None:
        raise EstimationError("estimate carries no standard deviation")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    z = float(stats.norm.ppf(0.5 + level / 2))
    center = est.theta_hat - (est.bias_hat or 0.0)
    return (center - z * est.sd_hat, center + z * est.sd_hat)


def estimate_with_inference(series, model, kernel=None, K="epanechnikov", b_n=None, t_star=0.5, level=0.95,
                            mc=False):
    from .vstat import variance_kernel
    kernel = kernel or variance_kernel()
    est = local_linear_theta(series, kernel, K, b_n, t_star)
    bias = asymptotic_bias(model, t_star, est.b_n, K, kernel)
    sd = asymptotic_sd(model, t_star, est.b_n, est.n, K, kernel, mc=mc)
    est = replace(est, bias_hat=bias, sd_hat=sd, level=level)
    return replace(est, ci=confidence_interval(est, level))
