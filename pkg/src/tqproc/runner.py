"""Configuration, CLI, orchestration, and persistence.

This is the only module with side effects.  A run is a pure function of
(config, master_seed): result files use canonical JSON (sorted keys) and
shortest-round-trip float formatting, so identical configurations produce
byte-identical ``result.json`` and ``summary.csv`` at any worker count.
The run manifest additionally records wall-clock timestamps and is the one
output excluded from the byte-identity contract.

Exit codes: 0 success, 1 error, 2 check-mode failure (some pass flag false).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analytic, experiments
from .empirical import RemainderField, TieStats
from .errors import ConfigError, DataError, DomainError, NumericError
from .experiments import NLadder, StudyResult
from .fbm import Ensemble, GridSpec, make_ensemble

__all__ = ["RunConfig", "parse_config", "serialize_config", "run_study",
           "export_remainder_field", "export_tie_stats", "export_ensemble",
           "main"]

STUDIES = ("bk_rate", "weighted_bk_rate", "kernel_validation", "swanson",
           "lil_trace", "classical_bk", "fbm_gen", "kernel_eval", "tail_fit")

ENV_OUT_DIR = "TQPROC_OUT"

_LADDER_DEFAULTS = {
    "bk_rate": ([2**k for k in range(8, 14)], 50),
    "weighted_bk_rate": ([2**k for k in range(8, 14)], 50),
    "lil_trace": ([2**k for k in range(8, 13)], 4),
    "classical_bk": ([2**k for k in range(12, 17)], 20),
}

_N_DEFAULTS = {"swanson": 1001, "kernel_validation": 500,
               "tail_fit": 100_000, "fbm_gen": 100}
_R_DEFAULTS = {"swanson": 5000, "kernel_validation": 4000}

_DEFAULT_SWANSON_TIMES = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
_DEFAULT_X_NODES = [[t, x * t**0.5] for t in (0.5, 1.0, 2.0, 4.0)
                    for x in (-1.0, 0.0, 1.0)]
_DEFAULT_ALPHA_NODES = [[1.0, 0.5], [4.0, 0.5], [1.0, 0.25], [4.0, 0.75]]
_DEFAULT_TAIL_LEVELS = [1.5, 2.0, 2.5, 3.0]


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved, validated run configuration."""
    study: str
    H: float
    T: float
    rho: float
    eta: float
    gamma0: float
    kappa: float
    delta: float
    C: float
    c1: float
    ladder: NLadder | None
    n: int | None
    R: int | None
    M_t: int
    M_alpha: int
    sampler_id: str
    master_seed: int
    threads: int
    out_dir: str
    times: tuple[float, ...] | None
    x_nodes: tuple[tuple[float, float], ...] | None
    alpha_nodes: tuple[tuple[float, float], ...] | None
    levels_y: tuple[float, ...] | None
    kind: str | None
    kernel_nodes: tuple[tuple, ...] | None


_KNOWN_KEYS = {
    "study", "H", "T", "rho", "eta", "gamma0", "kappa", "delta", "C", "c1",
    "ladder", "n", "R", "M_t", "M_alpha", "sampler_id", "master_seed",
    "threads", "out_dir", "times", "x_nodes", "alpha_nodes", "levels_y",
    "kind", "kernel_nodes",
}


def _want(cfg: dict, key: str, typ, default, check=None, msg: str = ""):
    val = cfg.get(key, default)
    if val is None:
        return None
    if typ is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ConfigError(f"{key} must be an integer; got {val!r}")
    if not isinstance(val, typ):
        raise ConfigError(f"{key} must be of type {typ.__name__}; got {val!r}")
    if check is not None and not check(val):
        raise ConfigError(f"{key} {msg}; got {val!r}")
    return val


def _pair_list(cfg: dict, key: str, default):
    raw = cfg.get(key, default)
    if raw is None:
        return None
    try:
        pairs = tuple((float(a), float(b)) for a, b in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a list of [t, value] pairs") from exc
    return pairs


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration, applying study defaults.

    Unknown keys are rejected; every module precondition on the numeric
    parameters is re-validated here with a message naming the field.
    """
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not well-formed JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {sorted(unknown)}")

    study = cfg.get("study")
    if study not in STUDIES:
        raise ConfigError(f"study must be one of {list(STUDIES)}; got {study!r}")

    H = _want(cfg, "H", float, 0.5, lambda v: 0.0 < v < 1.0,
              "must satisfy 0 < H < 1")
    if study == "swanson":
        if "H" in cfg and cfg["H"] != 0.5:
            raise ConfigError("swanson fixes H = 0.5 (Brownian ensembles); "
                              f"got H={cfg['H']}")
        H = 0.5
    T_default = 1.0 if study == "tail_fit" else 2.0
    T = _want(cfg, "T", float, T_default, lambda v: v > 0.0, "must be positive")
    if study in ("bk_rate", "weighted_bk_rate") and not T > 1.0:
        raise ConfigError(f"T must exceed 1 for the remainder-rate studies; got {T}")
    rho = _want(cfg, "rho", float, 0.1, lambda v: 0.0 < v < 0.5,
                "must lie in (0, 1/2)")
    eta = _want(cfg, "eta", float, 0.0,
                lambda v: 0.0 <= v < 1.0 / (2.0 * H),
                f"must satisfy 0 <= eta < 1/(2H) = {1.0 / (2.0 * H):.6g}")
    gamma0 = _want(cfg, "gamma0", float, 0.25, lambda v: 0.0 < v <= 1.0,
                   "must lie in (0, 1]")
    kappa = _want(cfg, "kappa", float, 0.5, lambda v: v > 0.0, "must be positive")
    delta = _want(cfg, "delta", float, H / 4.0, lambda v: 0.0 < v <= H,
                  f"must satisfy 0 < delta <= H = {H}")
    C = _want(cfg, "C", float, 1.0, lambda v: v > 0.0, "must be positive")
    c1 = _want(cfg, "c1", float, 1.0, lambda v: v > 0.0, "must be positive")

    ladder = None
    if study in _LADDER_DEFAULTS:
        raw = cfg.get("ladder")
        if raw is None:
            ns, reps = _LADDER_DEFAULTS[study]
        else:
            if not isinstance(raw, dict):
                raise ConfigError('ladder must be an object {"ns": [...], '
                                  '"replications": int}')
            extra = set(raw) - {"ns", "replications"}
            if extra:
                raise ConfigError(f"unknown ladder key(s): {sorted(extra)}")
            ns = raw.get("ns", _LADDER_DEFAULTS[study][0])
            reps = raw.get("replications", _LADDER_DEFAULTS[study][1])
        try:
            ladder = NLadder(ns=tuple(int(v) for v in ns), replications=int(reps))
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"ladder: {exc}") from exc
    elif "ladder" in cfg:
        raise ConfigError(f"study {study!r} does not take a ladder "
                          "(use n/R instead)")

    n = _want(cfg, "n", int, _N_DEFAULTS.get(study),
              lambda v: v >= 1, "must be >= 1")
    R = _want(cfg, "R", int, _R_DEFAULTS.get(study),
              lambda v: v >= 1, "must be >= 1")
    M_t = _want(cfg, "M_t", int, 64, lambda v: 2 <= v <= 4096,
                "must lie in [2, 4096]")
    M_alpha = _want(cfg, "M_alpha", int, 21, lambda v: v >= 1, "must be >= 1")
    sampler_id = _want(cfg, "sampler_id", str, "circulant",
                       lambda v: v in ("circulant", "cholesky"),
                       "must be 'circulant' or 'cholesky'")
    master_seed = _want(cfg, "master_seed", int, 0,
                        lambda v: 0 <= v < 2**64,
                        "must be a 64-bit unsigned integer")
    threads = _want(cfg, "threads", int, os.cpu_count() or 1,
                    lambda v: v >= 1, "must be >= 1")
    out_dir = _want(cfg, "out_dir", str, "tqproc_out")

    times = cfg.get("times", _DEFAULT_SWANSON_TIMES if study == "swanson" else None)
    if times is not None:
        try:
            times = tuple(float(t) for t in times)
        except (TypeError, ValueError) as exc:
            raise ConfigError("times must be a list of numbers") from exc
        if any(t <= 0.0 for t in times) or list(times) != sorted(set(times)):
            raise ConfigError("times must be positive, strictly increasing")

    x_nodes = _pair_list(cfg, "x_nodes",
                         _DEFAULT_X_NODES if study == "kernel_validation" else None)
    alpha_nodes = _pair_list(
        cfg, "alpha_nodes",
        _DEFAULT_ALPHA_NODES if study == "kernel_validation" else None)

    levels_y = cfg.get("levels_y",
                       _DEFAULT_TAIL_LEVELS if study == "tail_fit" else None)
    if levels_y is not None:
        try:
            levels_y = tuple(float(y) for y in levels_y)
        except (TypeError, ValueError) as exc:
            raise ConfigError("levels_y must be a list of numbers") from exc
        if len(levels_y) < 3:
            raise ConfigError("levels_y needs at least 3 levels")

    kind = _want(cfg, "kind", str,
                 "swanson" if study == "kernel_eval" else None,
                 lambda v: v in analytic.KERNEL_KINDS,
                 f"must be one of {list(analytic.KERNEL_KINDS)}")
    kernel_nodes = cfg.get("kernel_nodes")
    if kernel_nodes is not None:
        kernel_nodes = tuple(tuple(float(x) for x in row) for row in kernel_nodes)

    return RunConfig(study=study, H=H, T=T, rho=rho, eta=eta, gamma0=gamma0,
                     kappa=kappa, delta=delta, C=C, c1=c1, ladder=ladder,
                     n=n, R=R, M_t=M_t, M_alpha=M_alpha, sampler_id=sampler_id,
                     master_seed=master_seed, threads=threads, out_dir=out_dir,
                     times=times, x_nodes=x_nodes, alpha_nodes=alpha_nodes,
                     levels_y=levels_y, kind=kind, kernel_nodes=kernel_nodes)


def _config_dict(cfg: RunConfig) -> dict:
    d = {"study": cfg.study, "H": cfg.H, "T": cfg.T, "rho": cfg.rho,
         "eta": cfg.eta, "gamma0": cfg.gamma0, "kappa": cfg.kappa,
         "delta": cfg.delta, "C": cfg.C, "c1": cfg.c1,
         "M_t": cfg.M_t, "M_alpha": cfg.M_alpha, "sampler_id": cfg.sampler_id,
         "master_seed": cfg.master_seed, "threads": cfg.threads,
         "out_dir": cfg.out_dir}
    if cfg.ladder is not None:
        d["ladder"] = {"ns": list(cfg.ladder.ns),
                       "replications": cfg.ladder.replications}
    for key in ("n", "R", "kind"):
        if getattr(cfg, key) is not None:
            d[key] = getattr(cfg, key)
    for key in ("times", "levels_y"):
        if getattr(cfg, key) is not None:
            d[key] = list(getattr(cfg, key))
    for key in ("x_nodes", "alpha_nodes", "kernel_nodes"):
        if getattr(cfg, key) is not None:
            d[key] = [list(p) for p in getattr(cfg, key)]
    return d


def _numeric_config(cfg: RunConfig) -> dict:
    """The configuration keys that determine the numbers.

    Excludes execution-environment keys (threads, out_dir) so that the
    result files and the config hash are identical across machines and
    worker counts.
    """
    d = _config_dict(cfg)
    d.pop("threads", None)
    d.pop("out_dir", None)
    return d


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON of the resolved configuration (round-trips through parse)."""
    return canonical_json(_config_dict(cfg))


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------

def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def canonical_json(obj) -> str:
    """Sorted-key JSON with shortest-round-trip float formatting."""
    return json.dumps(_jsonify(obj), sort_keys=True, indent=2,
                      separators=(",", ": ")) + "\n"


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt_cell(v) for v in row) for row in rows]
    _write_atomic(path, "\n".join(lines) + "\n")


def _config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_json(_numeric_config(cfg))
                          .encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Study dispatch
# ---------------------------------------------------------------------------

def _dispatch(cfg: RunConfig) -> StudyResult:
    w = cfg.threads
    s = cfg.master_seed
    if cfg.study == "bk_rate":
        return experiments.bk_rate_study(cfg.ladder, H=cfg.H, T=cfg.T,
                                         rho=cfg.rho, eta=cfg.eta,
                                         gamma0=cfg.gamma0, M_t=cfg.M_t,
                                         M_alpha=cfg.M_alpha,
                                         sampler_id=cfg.sampler_id,
                                         seed=s, workers=w)
    if cfg.study == "weighted_bk_rate":
        return experiments.weighted_bk_rate_study(cfg.ladder, H=cfg.H, T=cfg.T,
                                                  rho=cfg.rho, M_t=cfg.M_t,
                                                  M_alpha=cfg.M_alpha,
                                                  sampler_id=cfg.sampler_id,
                                                  seed=s, workers=w)
    if cfg.study == "kernel_validation":
        return experiments.kernel_validation_study(cfg.x_nodes, cfg.alpha_nodes,
                                                   H=cfg.H, n=cfg.n, R=cfg.R,
                                                   sampler_id=cfg.sampler_id,
                                                   seed=s, workers=w)
    if cfg.study == "swanson":
        return experiments.swanson_median_study(times=cfg.times, n=cfg.n,
                                                R=cfg.R,
                                                sampler_id=cfg.sampler_id,
                                                seed=s, workers=w)
    if cfg.study == "lil_trace":
        return experiments.lil_trace_study(cfg.ladder, H=cfg.H, kappa=cfg.kappa,
                                           T=cfg.T, M_t=cfg.M_t,
                                           sampler_id=cfg.sampler_id,
                                           seed=s, workers=w)
    if cfg.study == "classical_bk":
        return experiments.classical_bk_study(cfg.ladder, seed=s, workers=w)
    if cfg.study == "tail_fit":
        return experiments.tail_fit_study(levels_y=cfg.levels_y, H=cfg.H,
                                          T=cfg.T, n=cfg.n, M_t=cfg.M_t,
                                          sampler_id=cfg.sampler_id,
                                          seed=s, workers=w)
    raise ConfigError(f"study {cfg.study!r} has no Monte Carlo dispatch")


def _default_kernel_nodes(kind: str) -> list[tuple]:
    ts = [0.4 * k for k in range(1, 11)]
    if kind == "swanson":
        return [(t1, None, t2, None) for t1 in ts for t2 in ts if t1 <= t2]
    if kind in ("K", "weightedK"):
        return [(t1, 0.5, t2, 0.5) for t1 in ts for t2 in ts if t1 <= t2]
    return [(t1, 0.0, t2, 0.0) for t1 in ts for t2 in ts if t1 <= t2]


def _kernel_rows(cfg: RunConfig) -> list[list]:
    if cfg.kernel_nodes is not None:
        nodes = []
        for row in cfg.kernel_nodes:
            if cfg.kind == "swanson":
                if len(row) != 2:
                    raise ConfigError("swanson kernel nodes are [t1, t2] pairs")
                nodes.append((row[0], None, row[1], None))
            else:
                if len(row) != 4:
                    raise ConfigError(f"{cfg.kind} kernel nodes are "
                                      "[t1, a1, t2, a2] quadruples")
                nodes.append(tuple(row))
    else:
        nodes = _default_kernel_nodes(cfg.kind)
    rows = []
    for t1, a1, t2, a2 in nodes:
        ev = analytic.kernel_eval(cfg.kind, t1, a1, t2, a2, H=cfg.H)
        rows.append([ev.kind, ev.t1, ev.a1, ev.t2, ev.a2, ev.value])
    return rows


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _ensemble_rows(ens: Ensemble) -> list[list]:
    ts = ens.grid.array
    return [[i, float(t), float(v)]
            for i in range(ens.n)
            for t, v in zip(ts, ens.values[i])]


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".manifest.json")


def export_remainder_field(field: RemainderField, path) -> list[str]:
    """Write a remainder field as CSV ``t,alpha,R_n`` with a JSON manifest."""
    path = Path(path)
    rows = [[float(t), float(a), float(field.values[k, j])]
            for j, t in enumerate(field.times)
            for k, a in enumerate(field.levels.levels)]
    _write_csv(path, ["t", "alpha", "R_n"], rows)
    manifest = {"version": __version__, "weighted": field.weighted,
                "t_min": field.t_min, "t_max": field.t_max,
                "rho": field.levels.rho, "levels": list(field.levels.levels),
                "times": list(field.times), "sup_norm": field.sup_norm}
    _write_atomic(_sidecar(path), canonical_json(manifest))
    return [str(path), str(_sidecar(path))]


def export_tie_stats(ties: TieStats, path) -> list[str]:
    """Write tie statistics as CSV ``t,alpha,delta_n`` with a JSON manifest."""
    path = Path(path)
    rows = [[float(t), float(a), float(ties.delta_n[k, j])]
            for j, t in enumerate(ties.times)
            for k, a in enumerate(ties.levels.levels)]
    _write_csv(path, ["t", "alpha", "delta_n"], rows)
    manifest = {"version": __version__, "m_bound": ties.m_bound,
                "max_violation": ties.max_violation,
                "rho": ties.levels.rho, "levels": list(ties.levels.levels),
                "times": list(ties.times)}
    _write_atomic(_sidecar(path), canonical_json(manifest))
    return [str(path), str(_sidecar(path))]


def export_ensemble(ens: Ensemble, path) -> list[str]:
    """Write an ensemble as CSV ``path_id,t,value`` with a JSON manifest."""
    path = Path(path)
    _write_csv(path, ["path_id", "t", "value"], _ensemble_rows(ens))
    manifest = {"version": __version__, "H": ens.H,
                "grid_times": list(ens.grid.times), "T": ens.grid.T,
                "uniform": ens.grid.uniform, "sampler_id": ens.sampler_id,
                "master_seed": ens.master_seed, "n": ens.n,
                "warnings": list(ens.warnings)}
    _write_atomic(_sidecar(path), canonical_json(manifest))
    return [str(path), str(_sidecar(path))]


def _planned_outputs(cfg: RunConfig) -> list[str]:
    if cfg.study == "fbm_gen":
        return ["ensemble.csv", "ensemble.manifest.json", "manifest.json"]
    if cfg.study == "kernel_eval":
        return ["kernels.csv", "manifest.json"]
    return ["result.json", "summary.csv", "manifest.json"]


def run_study(cfg: RunConfig, force: bool = False,
              check: bool = False) -> tuple[int, list[str]]:
    """Execute a configured study and persist its outputs.

    Returns (exit_code, written file paths).  In check mode the exit code is
    2 when any pass flag is false.  Existing output files abort the run
    unless ``force`` is given.
    """
    out_dir = Path(os.environ.get(ENV_OUT_DIR) or cfg.out_dir)
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    out_dir.mkdir(parents=True, exist_ok=True)
    planned = [out_dir / name for name in _planned_outputs(cfg)]
    if not force:
        existing = [str(p) for p in planned if p.exists()]
        if existing:
            raise ConfigError(
                f"output file(s) already exist: {existing}; pass --force to overwrite")

    warnings: list[str] = []
    written: list[Path] = []
    exit_code = 0

    if cfg.study == "fbm_gen":
        grid = GridSpec.uniform_grid(cfg.T, cfg.M_t, include_zero=True)
        ens = make_ensemble(cfg.n, grid, cfg.H, sampler_id=cfg.sampler_id,
                            master_seed=cfg.master_seed)
        warnings += list(ens.warnings)
        for f in export_ensemble(ens, out_dir / "ensemble.csv"):
            written.append(Path(f))
    elif cfg.study == "kernel_eval":
        _write_csv(out_dir / "kernels.csv",
                   ["kind", "t1", "a1", "t2", "a2", "value"], _kernel_rows(cfg))
        written.append(out_dir / "kernels.csv")
    else:
        result = _dispatch(cfg)
        warnings += list(result.warnings)
        payload = result.to_dict()
        payload["config_echo"] = _numeric_config(cfg)
        _write_atomic(out_dir / "result.json", canonical_json(payload))
        written.append(out_dir / "result.json")
        _write_csv(out_dir / "summary.csv",
                   ["n", "mean", "median", "se", "statistic"],
                   [[r["n"], r["mean"], r["median"], r["se"], r["statistic"]]
                    for r in result.per_n])
        written.append(out_dir / "summary.csv")
        if check and not all(result.pass_flags.values()):
            failed = sorted(k for k, v in result.pass_flags.items() if not v)
            print(f"check failed: {failed}", file=sys.stderr)
            exit_code = 2

    manifest = {
        "config_hash": _config_hash(cfg),
        "version": __version__,
        "started_utc": started,
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "master_seed": cfg.master_seed,
        "warnings": warnings,
        "outputs": [p.name for p in written],
        "config": _config_dict(cfg),
    }
    _write_atomic(out_dir / "manifest.json", canonical_json(manifest))
    written.append(out_dir / "manifest.json")
    return exit_code, [str(p) for p in written]


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _load_config(path: str, overrides: dict) -> RunConfig:
    text = Path(path).read_text()
    if overrides:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not well-formed JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        raw.update(overrides)
        text = json.dumps(raw)
    return parse_config(text)


def _cmd_run(args, check: bool) -> int:
    overrides = {}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    cfg = _load_config(args.config, overrides)
    code, files = run_study(cfg, force=args.force, check=check)
    for f in files:
        print(f)
    return code


def _cmd_kernel(args) -> int:
    vals = [float(v) for v in args.args]
    kind = args.kind
    if kind == "swanson":
        if len(vals) != 2:
            raise ConfigError("kernel swanson takes: t1 t2")
        t1, t2 = vals
        a1 = a2 = None
        H = args.hurst
    else:
        if len(vals) == 4:
            t1, a1, t2, a2 = vals
            H = args.hurst
        elif len(vals) == 5:
            t1, a1, t2, a2, H = vals
        else:
            raise ConfigError(f"kernel {kind} takes: t1 a1 t2 a2 [H]")
    if kind == "K" and args.weighted:
        kind = "weightedK"
    ev = analytic.kernel_eval(kind, t1, a1, t2, a2, H=H, kappa=args.kappa)
    print(",".join(_fmt_cell(v)
                   for v in [ev.kind, ev.t1, ev.a1, ev.t2, ev.a2, ev.value]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="tqproc",
        description="Monte Carlo laboratory for time-dependent empirical and "
                    "quantile processes of fractional Brownian motion ensembles")
    sub = p.add_subparsers(dest="command", required=True)

    for name, hlp in (("run", "run a study and write its result files"),
                      ("check", "run a study and fail (exit 2) if any pass "
                                "flag is false")):
        q = sub.add_parser(name, help=hlp)
        q.add_argument("--config", required=True, help="path to JSON config")
        q.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        q.add_argument("--threads", type=int, default=None,
                       help="worker pool size override")
        q.add_argument("--out-dir", default=None, help="output directory override")

    g = sub.add_parser("gen", help="sample an ensemble and export it as CSV")
    g.add_argument("--config", required=True)
    g.add_argument("--force", action="store_true")

    k = sub.add_parser("kernel", help="evaluate a limit kernel at one node pair")
    k.add_argument("kind", choices=["G", "K", "weightedK", "swanson"])
    k.add_argument("args", nargs="+", help="swanson: t1 t2 | others: t1 a1 t2 a2 [H]")
    k.add_argument("--weighted", action="store_true",
                   help="use the time-weighted quantile kernel (kind K)")
    k.add_argument("--hurst", type=float, default=0.5)
    k.add_argument("--kappa", type=float, default=None,
                   help="extra (t1*t2)^kappa weight for kind G")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("run", "check"):
            return _cmd_run(args, check=(args.command == "check"))
        if args.command == "gen":
            cfg = _load_config(args.config, {"study": "fbm_gen"})
            code, files = run_study(cfg, force=args.force)
            for f in files:
                print(f)
            return code
        if args.command == "kernel":
            return _cmd_kernel(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DomainError, DataError, NumericError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
