import json
import math

import numpy as np
import pytest

from vstatns.curves import ConfigError
from vstatns.mc import McConfig, McError, ReplicationError, ladder, run, simulate_statistics, summarize

WHITE = {"segments": [{"kind": "tvma", "coefs": [1.0]}]}


def cfg(**kw):
    base = dict(model=WHITE, statistic="Q", n=64, reps=200, root_seed=1,
                weights={"family": "banded_toeplitz", "m_n": 4})
    base.update(kw)
    return McConfig(**base)


def test_zero_weights_give_point_mass():
    c = cfg(weights={"family": "explicit", "matrix": np.zeros((64, 64)).tolist()},
            reference={"kind": "point", "value": 0.0}, threshold=0.0)
    r = run(c, threads=1)
    assert r.summary["sd"] == 0.0 and r.summary["mean"] == 0.0
    assert r.ks["statistic"] == 0.0 and r.passed


def test_periodogram_exponential_law():
    c = McConfig(model=WHITE, statistic="I_n", n=2048, reps=2000, root_seed=3, spectral={"lam": math.pi / 2},
                 standardization={"kind": "theoretical", "scale": "avg_spectrum"},
                 reference={"kind": "exp"}, threshold=0.08)
    r = run(c, threads=1)
    assert r.passed and r.ks["statistic"] < 0.08
    assert r.standardization["scale"] == pytest.approx(1 / (2 * math.pi))


def test_byte_identical_reruns_and_thread_counts():
    c = cfg(standardization={"kind": "empirical"}, reference={"kind": "normal"}, threshold=0.2)
    ref = run(c, threads=1).to_json()
    assert run(c, threads=1).to_json() == ref
    for t in (4, 16):
        assert run(c, threads=t).to_json() == ref


def test_execution_order_does_not_matter():
    c = cfg()
    a, _ = simulate_statistics(c, threads=1)
    perm = np.random.default_rng(0).permutation(c.reps)
    b, _ = simulate_statistics(c, threads=3, order=perm)
    assert np.array_equal(a, b)
    assert summarize(a[perm]) == summarize(a)


def test_replication_i_uses_its_own_seed():
    from vstatns import PlsModel, rng as vrng
    from vstatns.vstat import evaluate_Q
    from vstatns.weights import WeightSpec, build_weight_matrix
    c = cfg()
    vals, _ = simulate_statistics(c, threads=1)
    m = PlsModel.from_dict(WHITE)
    w = build_weight_matrix(WeightSpec("banded_toeplitz", m_n=4), 64)
    x = m.simulate(64, vrng.derive_seed(1, vrng.MC_REPLICATION, 17)).values
    assert vals[17] == evaluate_Q(x, w)


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(reps=50)
    with pytest.raises(ConfigError):
        cfg(statistic="bogus")
    with pytest.raises(ConfigError):
        cfg(weights=None)
    with pytest.raises(ConfigError):
        McConfig(model=WHITE, statistic="I_n", n=64, reps=100)
    with pytest.raises(ConfigError):
        cfg(reference={"kind": "mixture", "alphas": [1.0]})
    with pytest.raises(ConfigError):
        McConfig.from_dict({**cfg().to_dict(), "extra": 1})


def test_config_json_roundtrip_and_hash():
    c = cfg(reference={"kind": "normal"})
    d = json.loads(json.dumps(c.to_dict()))
    c2 = McConfig.from_dict(d)
    assert c2 == c and c2.hash() == c.hash()
    assert cfg(root_seed=2).hash() != c.hash()


def test_failure_records_seed():
    bad = {"segments": [{"kind": "tvma", "coefs": [1.0]}]}
    c = McConfig(model=bad, statistic="theta_hat", n=64, reps=100, estimator={"b_n": 0.01})
    with pytest.raises(ReplicationError) as ei:
        run(c, threads=1)
    assert ei.value.index == 0 and ei.value.root_seed == 0


def test_all_statistics_run():
    base = dict(model=WHITE, n=128, reps=100, root_seed=4)
    w = {"family": "global", "f": {"name": "bilinear", "a": 1.0, "c": 1.0}}
    for stat, extra in [("V", {"weights": w, "kernel": "variance"}), ("N", {"weights": w, "kernel": "variance"}),
                        ("D_centered", {"weights": w, "kernel": "variance"}), ("Q", {"weights": w}),
                        ("theta_hat", {"estimator": {"b_n": "n^-0.2"}}), ("I_n", {"spectral": {"lam": 1.0}}),
                        ("f_tilde", {"spectral": {"lam": 1.0, "m": 8}}),
                        ("S_pair", {"spectral": {"lam": 1.0, "component": "sin"}})]:
        r = run(McConfig(statistic=stat, **base, **extra), threads=1)
        assert np.all(np.isfinite(r.raw)), stat


def test_decomposition_statistics_consistent():
    w = {"family": "global", "f": {"name": "bilinear", "a": 1.0, "c": 1.0}}
    base = dict(model=WHITE, n=64, reps=100, root_seed=4, weights=w, kernel="variance")
    V = run(McConfig(statistic="V", **base), threads=1).raw
    N = run(McConfig(statistic="N", **base), threads=1).raw
    D = run(McConfig(statistic="D_centered", **base), threads=1).raw
    t = np.arange(1, 65) / 64
    W = (1 + np.outer(t, t)) / 64
    EV = np.sum(W) - np.trace(W)   # E (X_j - X_k)^2 / 2 = 1 off the diagonal
    assert np.allclose(V - EV, 2 * N + D, atol=1e-10)


def test_quadform_mixture_reference():
    c = McConfig(model=WHITE, statistic="Q", n=200, reps=400, root_seed=2,
                 weights={"family": "global", "f": {"name": "bilinear", "a": 1.0, "c": 1.0}},
                 standardization={"kind": "theoretical", "center": "expected", "scale": 1.0},
                 reference={"kind": "quadform_mixture", "draws": 20000},
                 threshold=0.1)
    r = run(c, threads=1)
    assert r.ks["reference"]["alphas_kept"] <= 3
    assert r.passed


def test_csv_sample():
    r = run(cfg(), threads=1)
    lines = r.sample_csv().strip().split("\n")
    assert lines[0] == "replication,raw,standardized" and len(lines) == 201
    assert float(lines[5].split(",")[1]) == r.raw[4]


def test_ladder():
    c = cfg(standardization={"kind": "empirical"}, reference={"kind": "normal"})
    with pytest.raises(McError):
        ladder(c, "n", [])
    one = ladder(c, "n", [64])
    assert one[0].to_json() == run(c).to_json()
    res = ladder(c, "m_n", [2, 8])
    assert [r.config["weights"]["m_n"] for r in res] == [2, 8]
    with pytest.raises(ConfigError):
        ladder(c, "q", [1])


@pytest.mark.slow
def test_ladder_nondegenerate_clt_trend():
    cosine = {"segments": [{"kind": "tvma", "coefs": [{"family": "cosine", "mean": 1.0, "amplitude": 0.5,
                                                        "transform": "sqrt"}]}]}
    c = McConfig(model=cosine, statistic="theta_hat", kernel="variance", n=500, reps=1000, root_seed=2,
                 estimator={"b_n": "n^-0.2", "t_star": 0.5}, standardization={"kind": "empirical"},
                 reference={"kind": "normal"})
    ks = [r.ks["statistic"] for r in ladder(c, "n", [500, 2000, 8000], threads=1)]
    assert all(b <= a + 0.01 for a, b in zip(ks, ks[1:]))
