"""File formats: series CSV, JSON configs, manifests. All writes are atomic."""
import csv
import hashlib
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .curves import ConfigError

SCHEMA_VERSION = 1


def atomic_write(path, data):
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt(v):
    return f"{float(v):.17g}"


def table_csv(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def series_csv(values):
    x = np.asarray(values, dtype=float)
    n = x.shape[0]
    return table_csv(["k", "t_k", "x"], ((k, (k) / n, float(x[k - 1])) for k in range(1, n + 1)))


def write_series_csv(path, values):
    atomic_write(path, series_csv(values))


def read_series_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["k", "t_k", "x"]:
        raise ConfigError(f"{path}: expected header 'k,t_k,x'", "header")
    vals = []
    for lineno, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        try:
            vals.append(float(r[2]))
        except (IndexError, ValueError):
            raise ConfigError(f"{path}: line {lineno}: cannot parse x", f"line {lineno}") from None
    return np.array(vals)


def load_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}", "path") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: column {exc.colno}: {exc.msg}", f"line {exc.lineno}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be a JSON object", "root")
    ver = d.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {ver}", "schema_version")
    return d


def dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def manifest_path(out):
    return Path(str(out) + ".manifest.json")


def write_manifest(out, subcommand, config, seed, version, wall_clock, inputs=(), outputs=()):
    m = {"schema_version": SCHEMA_VERSION, "subcommand": subcommand, "config": config, "root_seed": seed,
         "version": version, "wall_clock_seconds": wall_clock,
         "inputs": {str(p): sha256_file(p) for p in inputs},
         "outputs": {str(p): sha256_file(p) for p in outputs}}
    atomic_write(manifest_path(out), dump_json(m))
    return m


def verify_manifest(path):
    m = json.loads(Path(path).read_text())
    return all(sha256_file(p) == d for p, d in {**m["inputs"], **m["outputs"]}.items())
