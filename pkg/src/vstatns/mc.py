"""Deterministic Monte Carlo replication engine."""
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import rng as _rng
from .curves import ConfigError
from .estimators import local_linear_theta
from .limit_laws import MixtureLaw, ks_distance, quadform_mixture
from .pls import PlsModel
from .spectral import average_spectrum, fourier_sums, periodogram, smoothed_periodogram
from .vstat import evaluate_Q, evaluate_V, hoeffding_decompose, kernel_by_name
from .weights import WeightSpec, build_weight_matrix

SCHEMA_VERSION = 1
MIN_REPS = 100
STATISTICS = ("V", "N", "D_centered", "Q", "theta_hat", "I_n", "f_tilde", "S_pair")
STANDARDIZATIONS = ("none", "empirical", "center", "theoretical")
QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
_NEEDS_WEIGHTS = {"V", "N", "D_centered", "Q"}
_SPECTRAL = {"I_n", "f_tilde", "S_pair"}


class McError(RuntimeError):
    pass


class ReplicationError(McError):
    def __init__(self, index, root_seed, cause):
        super().__init__(f"replication {index} (root_seed={root_seed}, stream={_rng.MC_REPLICATION}) failed: "
                         f"{type(cause).__name__}: {cause}")
        self.index = index
        self.root_seed = root_seed


def default_threads():
    env = os.environ.get("VSTATNS_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class McConfig:
    model: dict
    statistic: str
    n: int
    reps: int
    root_seed: int = 0
    weights: Optional[dict] = None
    kernel: Optional[str] = None
    standardization: dict = field(default_factory=lambda: {"kind": "none"})
    reference: Optional[dict] = None
    threshold: Optional[float] = None
    estimator: dict = field(default_factory=dict)
    spectral: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise ConfigError(f"unknown statistic {self.statistic!r}; choose from {STATISTICS}", "statistic")
        if int(self.reps) < MIN_REPS:
            raise ConfigError(f"reps must be at least {MIN_REPS}", "reps")
        if int(self.n) < 2:
            raise ConfigError("n must be at least 2", "n")
        if self.statistic in _NEEDS_WEIGHTS and self.weights is None:
            raise ConfigError(f"statistic {self.statistic} needs a weight spec", "weights")
        if self.statistic in _SPECTRAL and "lam" not in self.spectral:
            raise ConfigError(f"statistic {self.statistic} needs spectral.lam", "spectral.lam")
        if self.statistic == "S_pair" and self.spectral.get("component", "cos") not in ("cos", "sin"):
            raise ConfigError("spectral.component must be 'cos' or 'sin'", "spectral.component")
        std = dict(self.standardization)
        if std.get("kind", "none") not in STANDARDIZATIONS:
            raise ConfigError(f"standardization kind must be one of {STANDARDIZATIONS}", "standardization.kind")
        if std.get("kind") == "theoretical" and "scale" not in std:
            raise ConfigError("theoretical standardization needs 'scale'", "standardization.scale")
        ref = self.reference
        if ref is not None:
            kind = ref.get("kind")
            if kind not in ("normal", "exp", "chi2_1", "point", "mixture", "quadform_mixture"):
                raise ConfigError(f"unknown reference {kind!r}", "reference.kind")
            if kind == "quadform_mixture" and self.weights is None:
                raise ConfigError("quadform_mixture reference needs weights", "reference")
            if kind in ("mixture", "quadform_mixture") and not ref.get("draws"):
                raise ConfigError("mixture reference needs 'draws'", "reference.draws")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "reps", int(self.reps))
        object.__setattr__(self, "root_seed", int(self.root_seed))
        object.__setattr__(self, "standardization", std)

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "model": self.model, "statistic": self.statistic, "n": self.n,
                "reps": self.reps, "root_seed": self.root_seed, "weights": self.weights, "kernel": self.kernel,
                "standardization": self.standardization, "reference": self.reference,
                "threshold": self.threshold, "estimator": self.estimator, "spectral": self.spectral}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        ver = d.pop("schema_version", SCHEMA_VERSION)
        if ver != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {ver}", "schema_version")
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", sorted(extra)[0])
        for req in ("model", "statistic", "n", "reps"):
            if req not in d:
                raise ConfigError(f"missing '{req}'", req)
        return cls(**d)

    def hash(self):
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


# --------------------------------------------------------------------------
# per-replication statistic

class _Plan:
    """Immutable objects shared by every worker."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.model = PlsModel.from_dict(cfg.model)
        n = cfg.n
        self.W = None
        if cfg.weights is not None:
            self.W = build_weight_matrix(WeightSpec.from_dict(cfg.weights), n)
        kname = cfg.kernel or ("product" if cfg.statistic in ("Q", "V", "N", "D_centered") else "variance")
        self.kernel = kernel_by_name(kname)
        if cfg.statistic in ("N", "D_centered"):
            self.kernel = self.kernel.with_moments(self.model.moments(n))
        if self.W is not None and cfg.statistic in _NEEDS_WEIGHTS:
            self.dense = np.ascontiguousarray(self.W.entries)
        sp = cfg.spectral
        self.lam = float(sp.get("lam", 0.0))
        self.m = int(sp.get("m", 16))
        self.K = sp.get("K", "epanechnikov")
        self.component = sp.get("component", "cos")
        est = cfg.estimator
        self.est_K = est.get("K", "epanechnikov")
        self.b_n = est.get("b_n")
        if isinstance(self.b_n, str):
            # "n^-0.2" style
            self.b_n = n ** float(self.b_n.split("^", 1)[1])
        self.t_star = float(est.get("t_star", 0.5))

    def expected_value(self):
        """E V_n (or E Q_n) from the exact second moments of the model."""
        if self.cfg.statistic not in ("V", "Q"):
            raise McError(f"no exact expectation for statistic {self.cfg.statistic}")
        k = self.kernel if self.kernel.oracle is not None else self.kernel.with_moments(self.model.moments(self.cfg.n))
        return float(np.sum(self.dense * k.oracle.joint_mean))

    def replicate(self, i):
        cfg = self.cfg
        x = self.model.simulate(cfg.n, _rng.derive_seed(cfg.root_seed, _rng.MC_REPLICATION, i)).values
        s = cfg.statistic
        if s == "V":
            return evaluate_V(x, self.dense, self.kernel)
        if s == "Q":
            return evaluate_Q(x, self.dense)
        if s in ("N", "D_centered"):
            dec = hoeffding_decompose(x, self.dense, self.kernel)
            return dec.N if s == "N" else dec.D_centered
        if s == "theta_hat":
            return local_linear_theta(x, self.kernel, self.est_K, self.b_n, self.t_star).theta_hat
        if s == "I_n":
            return float(periodogram(x, self.lam).I_values[0])
        if s == "f_tilde":
            return smoothed_periodogram(x, self.lam, self.K, self.m)
        c, si = fourier_sums(x, self.lam)
        return float(c if self.component == "cos" else si)


def _run_block(plan, indices):
    out = np.empty(len(indices))
    for pos, i in enumerate(indices):
        try:
            out[pos] = plan.replicate(int(i))
        except Exception as exc:
            raise ReplicationError(int(i), plan.cfg.root_seed, exc) from exc
    return out


def simulate_statistics(cfg, threads=None, order=None):
    """Raw replication values keyed by replication index.

    ``order`` permutes the execution order only; the result is always indexed
    by replication number.
    """
    plan = _Plan(cfg)
    threads = default_threads() if threads is None else max(1, int(threads))
    idx = np.arange(cfg.reps) if order is None else np.asarray(order)
    blocks = np.array_split(idx, min(len(idx), max(threads * 4, 1)))
    out = np.empty(cfg.reps)
    if threads == 1:
        for b in blocks:
            out[b] = _run_block(plan, b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for b, vals in zip(blocks, pool.map(lambda blk: _run_block(plan, blk), blocks)):
                out[b] = vals
    return out, plan


# --------------------------------------------------------------------------
# aggregation

def summarize(sample):
    """Order-independent summary: every field is a function of the sorted sample."""
    srt = np.sort(np.asarray(sample, dtype=float))
    n = srt.size
    mean = math.fsum(srt) / n
    dev = srt - mean
    var = math.fsum(dev * dev) / (n - 1) if n > 1 else 0.0
    q = np.quantile(srt, QUANTILES)
    return {"count": int(n), "mean": mean, "sd": math.sqrt(var), "min": float(srt[0]), "max": float(srt[-1]),
            "quantiles": {str(p): float(v) for p, v in zip(QUANTILES, q)}}


def _standardize(raw, plan):
    std = plan.cfg.standardization
    kind = std.get("kind", "none")
    mult = float(std.get("multiplier", 1.0))
    summ = summarize(raw)
    if kind == "none":
        center, scale = 0.0, 1.0
    elif kind == "empirical":
        center, scale = summ["mean"], summ["sd"]
    elif kind == "center":
        center, scale = summ["mean"], 1.0
    else:
        center = std.get("center", 0.0)
        if center == "empirical":
            center = summ["mean"]
        elif center == "expected":
            center = plan.expected_value()
        else:
            center = float(center)
        scale = std["scale"]
        if scale == "avg_spectrum":
            scale = average_spectrum(plan.model, plan.lam)
        scale = float(scale)
    if not scale > 0:
        if np.all(raw == center):
            return np.zeros_like(raw), {"kind": kind, "center": center, "scale": scale, "multiplier": mult}
        raise McError(f"standardization scale is {scale}; the statistic has no spread")
    z = mult * (raw - center) / scale
    return z, {"kind": kind, "center": center, "scale": scale, "multiplier": mult}


def _resolve_reference(plan, sample):
    ref = plan.cfg.reference
    if ref is None:
        return None, None
    ref = dict(ref)
    kind = ref["kind"]
    seed = _rng.derive_seed(plan.cfg.root_seed, _rng.MIXTURE)
    if kind == "quadform_mixture":
        sig = ref.get("sigma", "model")
        n = plan.cfg.n
        s = plan.model.long_run_sd_curve(n) if sig == "model" else np.full(n, float(sig))
        law = quadform_mixture(plan.W, s)
        return ks_distance(sample, law, draws=int(ref["draws"]), seed=seed), {
            "kind": kind, "draws": int(ref["draws"]), "sigma": sig, "alphas_kept": int(law.alphas.size),
            "law_variance": law.variance}
    if kind == "mixture":
        return ks_distance(sample, MixtureLaw(ref["alphas"]), draws=int(ref["draws"]), seed=seed), ref
    if kind == "normal" and ref.get("scale") == "sample":
        # matching normal: centred at 0 with the sample variance
        sd = summarize(sample)["sd"]
        ref = {"kind": "normal", "loc": float(ref.get("loc", 0.0)), "scale": sd}
        return ks_distance(sample, ref), ref
    return ks_distance(sample, ref), ref


@dataclass
class McReport:
    config: dict
    config_hash: str
    summary: dict
    standardized_summary: dict
    standardization: dict
    ks: Optional[dict]
    threshold: Optional[float]
    passed: Optional[bool]
    provenance: dict
    sample: np.ndarray = field(repr=False, default=None)
    raw: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        return {"config": self.config, "config_hash": self.config_hash, "summary": self.summary,
                "standardized_summary": self.standardized_summary, "standardization": self.standardization,
                "ks": self.ks, "threshold": self.threshold, "pass": self.passed, "provenance": self.provenance}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=True) + "\n"

    def sample_csv(self):
        lines = ["replication,raw,standardized"]
        lines += [f"{i},{r:.17g},{z:.17g}" for i, (r, z) in enumerate(zip(self.raw, self.sample))]
        return "\n".join(lines) + "\n"


def run(config, threads=None, order=None):
    """Run every replication and compare with the reference law.

    Wall-clock time is deliberately absent from the report so reruns are
    byte-identical; the CLI records it in the run manifest instead.
    """
    cfg = config if isinstance(config, McConfig) else McConfig.from_dict(config)
    raw, plan = simulate_statistics(cfg, threads, order)
    z, std = _standardize(raw, plan)
    ks, ref = _resolve_reference(plan, z)
    ks_d = None
    passed = None
    if ks is not None:
        ks_d = {"statistic": ks.statistic, "bar": ks.bar, "n": ks.n, "reference": ref}
        if cfg.threshold is not None:
            passed = bool(ks.statistic <= cfg.threshold)
    prov = {"root_seed": cfg.root_seed, "replication_stream": _rng.MC_REPLICATION,
            "seed_scheme": "SeedSequence(entropy=root_seed, spawn_key=(stream, replication))",
            "mixture_stream": _rng.MIXTURE}
    return McReport(cfg.to_dict(), cfg.hash(), summarize(raw), summarize(z), std, ks_d, cfg.threshold, passed,
                    prov, z, raw)


LADDER_PARAMETERS = ("n", "m_n", "b_n")


def ladder(config, parameter, values, threads=None):
    cfg = config if isinstance(config, McConfig) else McConfig.from_dict(config)
    if parameter not in LADDER_PARAMETERS:
        raise ConfigError(f"ladder parameter must be one of {LADDER_PARAMETERS}", "parameter")
    values = list(values)
    if not values:
        raise McError("ladder needs at least one value")
    out = []
    for v in values:
        if parameter == "n":
            c = replace(cfg, n=int(v))
        elif parameter == "m_n":
            if cfg.statistic == "f_tilde":
                c = replace(cfg, spectral={**cfg.spectral, "m": int(v)})
            elif cfg.weights is not None:
                c = replace(cfg, weights={**cfg.weights, "m_n": v})
            else:
                raise ConfigError("m_n ladder needs weights or a smoothed periodogram", "parameter")
        else:
            if cfg.statistic == "theta_hat":
                c = replace(cfg, estimator={**cfg.estimator, "b_n": float(v)})
            elif cfg.weights is not None:
                c = replace(cfg, weights={**cfg.weights, "b_n": float(v)})
            else:
                raise ConfigError("b_n ladder needs weights or the local linear estimator", "parameter")
        out.append(run(c, threads))
    return out
