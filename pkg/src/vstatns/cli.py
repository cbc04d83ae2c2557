"""Command-line entry point ``vstatns``."""
import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from . import io as vio
from . import mc as _mc
from .curves import ConfigError
from .estimators import local_linear_theta
from .limit_laws import quadform_mixture, sample_mixture
from .pls import PlsModel
from .spectral import fourier_grid, spectrum
from .vstat import evaluate_Q, evaluate_V, hoeffding_decompose, kernel_by_name
from .weights import WeightSpec, build_weight_matrix, check_A3, diagnostics

EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


def _weights(path, n):
    spec = WeightSpec.from_dict(vio.load_json(path))
    if spec.n is not None and spec.n != n:
        raise ConfigError(f"weights were configured for n={spec.n}, series has n={n}", "n")
    return spec, build_weight_matrix(spec, n)


def _model(path):
    return PlsModel.from_dict(vio.load_json(path))


def _parse_grid(text, n):
    if text in (None, "fourier"):
        return fourier_grid(n)
    if ":" in text:
        lo, hi, k = text.split(":")
        return np.linspace(float(lo), float(hi), int(k))
    return np.array([float(v) for v in text.split(",")])


def _emit(args, payload_text, inputs, config, started, extra_outputs=()):
    """Write the primary output (or print it) plus a manifest next to every file."""
    outputs = []
    if args.out:
        vio.atomic_write(args.out, payload_text)
        outputs.append(args.out)
    else:
        sys.stdout.write(payload_text)
    outputs += [p for p in extra_outputs if p]
    if outputs:
        vio.write_manifest(outputs[0], args.command, config, args.seed, __version__, time.time() - started,
                           inputs=[p for p in inputs if p], outputs=outputs)


def cmd_simulate(args, started):
    model = _model(args.model)
    path = model.simulate(args.n, args.seed)
    if not args.out:
        raise UsageError("simulate needs --out")
    _emit(args, vio.series_csv(path.values), [args.model], {"model": model.to_dict(), "n": args.n}, started)


def cmd_vstat(args, started):
    x = vio.read_series_csv(args.series)
    spec, w = _weights(args.weights, x.size)
    kernel = kernel_by_name(args.kernel)
    out = {"kernel": kernel.name, "n": int(x.size), "V": evaluate_V(x, w, kernel)}
    if args.decompose:
        if args.model is None:
            raise UsageError(f"--decompose needs an oracle for kernel {kernel.name!r}: pass --model so the "
                             "marginal and pair means can be computed")
        kernel = kernel.with_moments(_model(args.model).moments(x.size))
        out["decomposition"] = hoeffding_decompose(x, w, kernel).to_dict()
    cfg = {"weights": spec.to_dict(), "kernel": args.kernel, "decompose": args.decompose}
    _emit(args, vio.dump_json(out), [args.series, args.weights, args.model], cfg, started)


def cmd_quad(args, started):
    x = vio.read_series_csv(args.series)
    spec, w = _weights(args.weights, x.size)
    out = {"kernel": "product", "n": int(x.size), "V": evaluate_Q(x, w)}
    _emit(args, vio.dump_json(out), [args.series, args.weights], {"weights": spec.to_dict()}, started)


def cmd_estimate(args, started):
    x = vio.read_series_csv(args.series)
    kernel = kernel_by_name(args.kernel)
    grid = _parse_grid(args.t_grid, x.size) if args.t_grid else [args.t_star]
    rows = []
    for t in grid:
        e = local_linear_theta(x, kernel, args.K, args.b_n, float(t))
        rows.append((e.t_star, e.theta_hat, e.slope_t, e.slope_s, e.b_n, e.n))
    text = vio.table_csv(["t_star", "theta_hat", "slope_t", "slope_s", "b_n", "n"], rows)
    cfg = {"kernel": args.kernel, "K": args.K, "b_n": args.b_n, "t_grid": [float(t) for t in grid]}
    _emit(args, text, [args.series], cfg, started)


def cmd_spectrum(args, started):
    x = vio.read_series_csv(args.series)
    grid = _parse_grid(args.grid, x.size)
    est = spectrum(x, grid, args.K, args.smooth)
    if est.f_tilde is None:
        text = vio.table_csv(["lambda", "I_n"], zip(est.lambda_grid, est.I_values))
    else:
        text = vio.table_csv(["lambda", "I_n", "f_tilde"], zip(est.lambda_grid, est.I_values, est.f_tilde))
    cfg = {"grid": args.grid or "fourier", "smooth": args.smooth, "K": args.K}
    _emit(args, text, [args.series], cfg, started)


def cmd_diagnose_weights(args, started):
    d = vio.load_json(args.weights)
    spec = WeightSpec.from_dict(d)
    n = args.n or spec.n
    if n is None:
        raise UsageError("diagnose-weights needs --n or an 'n' entry in the weights config")
    w = build_weight_matrix(spec, n)
    diag = diagnostics(w, args.l_n, args.m_n, with_eigen=not args.no_eigen)
    out = diag.to_dict()
    if not args.rows:
        out.pop("row_abs_sums")
    if diag.a3_report is not None:
        out["A3"] = check_A3(diag, args.threshold).to_dict()
    cfg = {"weights": spec.to_dict(), "n": n, "l_n": args.l_n, "m_n": args.m_n}
    _emit(args, vio.dump_json(out), [args.weights], cfg, started)


def cmd_mixture(args, started):
    spec = WeightSpec.from_dict(vio.load_json(args.weights))
    n = args.n or spec.n
    if n is None:
        raise UsageError("mixture needs --n or an 'n' entry in the weights config")
    if (args.sigma_model is None) == (args.sigma_constant is None):
        raise UsageError("give exactly one of --sigma-model or --sigma-constant")
    w = build_weight_matrix(spec, n)
    if args.sigma_model:
        sigma = _model(args.sigma_model).long_run_sd_curve(n)
    else:
        sigma = np.full(n, args.sigma_constant)
    law = quadform_mixture(w, sigma)
    out = law.to_dict()
    if args.sample:
        if not args.sample_out:
            raise UsageError("--sample needs --sample-out")
        s = sample_mixture(law, args.sample, args.seed)
        vio.atomic_write(args.sample_out, vio.table_csv(["draw", "value"], enumerate(s)))
        out["sample"] = {"reps": args.sample, "path": args.sample_out}
    cfg = {"weights": spec.to_dict(), "n": n, "sigma_model": args.sigma_model, "sigma_constant": args.sigma_constant}
    _emit(args, vio.dump_json(out), [args.weights, args.sigma_model], cfg, started, [args.sample_out])


def cmd_mc(args, started):
    d = vio.load_json(args.config)
    if args.seed_given:
        d["root_seed"] = args.seed
    cfg = _mc.McConfig.from_dict(d)
    args.seed = cfg.root_seed
    report = _mc.run(cfg, threads=args.threads)
    if args.sample_out:
        vio.atomic_write(args.sample_out, report.sample_csv())
    _emit(args, report.to_json(), [args.config], cfg.to_dict(), started, [args.sample_out])


COMMANDS = {
    "simulate": cmd_simulate, "vstat": cmd_vstat, "quad": cmd_quad, "estimate": cmd_estimate,
    "spectrum": cmd_spectrum, "diagnose-weights": cmd_diagnose_weights, "mixture": cmd_mixture, "mc": cmd_mc,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: $VSTATNS_THREADS or all cores)")
    common.add_argument("--out", default=None, help="output file; a .manifest.json is written next to it")

    p = argparse.ArgumentParser(prog="vstatns", allow_abbrev=False,
                                description="Weighted V-statistics for piecewise locally stationary series.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_, allow_abbrev=False)

    s = add("simulate", "simulate a series to CSV (k, t_k, x)")
    s.add_argument("--model", required=True, help="model config JSON")
    s.add_argument("--n", type=int, required=True)

    s = add("vstat", "evaluate V_n for a series")
    s.add_argument("--series", required=True, help="series CSV")
    s.add_argument("--weights", required=True, help="weights config JSON")
    s.add_argument("--kernel", default="product", help="product | variance | mean | mean_square | constant | sum")
    s.add_argument("--decompose", action="store_true", help="also report the N / D decomposition")
    s.add_argument("--model", default=None, help="model config supplying the analytic oracle for --decompose")

    s = add("quad", "evaluate the quadratic form sum W_jk X_j X_k")
    s.add_argument("--series", required=True)
    s.add_argument("--weights", required=True)

    s = add("estimate", "local linear estimate of theta(t*, t*)")
    s.add_argument("--series", required=True)
    s.add_argument("--kernel", default="variance")
    s.add_argument("--K", default="epanechnikov", help="smoothing kernel")
    s.add_argument("--b-n", type=float, default=None, help="bandwidth (default n^-0.2)")
    s.add_argument("--t-star", type=float, default=0.5)
    s.add_argument("--t-grid", default=None, help="lo:hi:count or comma list; overrides --t-star")

    s = add("spectrum", "periodogram and optional smoothed periodogram")
    s.add_argument("--series", required=True)
    s.add_argument("--grid", default=None, help="'fourier' (default), lo:hi:count or comma list")
    s.add_argument("--smooth", type=int, default=None, metavar="M", help="smoothing half-width m")
    s.add_argument("--K", default="epanechnikov")

    s = add("diagnose-weights", "weight functionals and block checks")
    s.add_argument("--weights", required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--l-n", type=int, default=None, help="big block length")
    s.add_argument("--m-n", type=int, default=None, help="small block length")
    s.add_argument("--threshold", type=float, default=0.05, help="block-ratio threshold")
    s.add_argument("--no-eigen", action="store_true", help="skip the largest-eigenvalue computation")
    s.add_argument("--rows", action="store_true", help="include per-row absolute sums")

    s = add("mixture", "chi-square mixture law of a Gaussian quadratic form")
    s.add_argument("--weights", required=True)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--sigma-model", default=None, help="model config giving long-run SDs")
    s.add_argument("--sigma-constant", type=float, default=None)
    s.add_argument("--sample", type=int, default=None, metavar="REPS", help="draw REPS values from the law")
    s.add_argument("--sample-out", default=None, help="CSV for the drawn sample")

    s = add("mc", "Monte Carlo experiment from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--sample-out", default=None, help="CSV of the replication sample")
    return p


def _fail(code, exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    field = getattr(exc, "field", None)
    if field is not None:
        err["field"] = field
    idx = getattr(exc, "index", None)
    if idx is not None:
        err["replication"] = idx
        err["root_seed"] = exc.root_seed
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    if args.threads is not None and args.threads < 1:
        return _fail(EXIT_USAGE, UsageError("--threads must be at least 1"))
    started = time.time()
    try:
        COMMANDS[args.command](args, started)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        return _fail(EXIT_USAGE, exc)
    except (ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError, MemoryError) as exc:
        return _fail(EXIT_NUMERIC, exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
