"""Batch experiment runner.

Each subcommand writes deterministic CSV/JSON artifacts plus a
``manifest.json`` (config hash, version, wall time per stage) into
``--out``.  ``report`` folds one run directory, or a directory of run
directories, into a single ``summary.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .diophantine import IrrationalAlpha, parse_alpha, parse_number
from .discrepancy import ALL_DYADIC, EXHAUSTIVE, dichotomy_report, discrepancy_series
from .ergodic import (
    TrigPolynomial,
    bmo_coboundary_experiment,
    random_trig_polynomial,
    variance_curve,
    variance_quadrature,
)
from .errors import (
    ConfigError,
    ConvergenceFailure,
    MeasureMismatch,
    MissingCertificate,
    NotAnIndicator,
    NotMeanZero,
    OutOfWindow,
    PrecisionExhausted,
    ReconstructionFailure,
)
from .frames import (
    _centered_subset,
    check_interlacing,
    duality_trend,
    gram_section,
    pavlov_bmo_diagnostic,
    riesz_trend,
)
from .quasicrystal import centered_slice, lambda_slice
from .torus_sets import MultibandSet, parse_interval, parse_set

log = logging.getLogger("quasiriesz")

SCHEMA_VERSION = 1
KINDS = ("dichotomy", "gram", "duality", "variance", "coboundary", "pavlov")
DEFAULTS = {
    "alpha": "golden",
    "mode": "exact",
    "tol": 1e-9,
    "seed": 0,
    "family": ALL_DYADIC,
    "n": {"dichotomy": [2**12, 2**16, 10**6], "variance": [10, 100, 1000],
          "coboundary": [2**12, 2**16], "pavlov": [2**16]},
    "sizes": [32, 64, 128, 256],
    "degree": 20,
    "x0": "0",
}

CONFIG_ERRORS = (ConfigError, ValueError, NotAnIndicator, MeasureMismatch, NotMeanZero,
                 MissingCertificate, OutOfWindow, KeyError)
NUMERICAL_ERRORS = (ConvergenceFailure, ReconstructionFailure, PrecisionExhausted, OverflowError,
                    FloatingPointError)


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    kind: str
    alpha: str = DEFAULTS["alpha"]
    mode: str = DEFAULTS["mode"]
    interval: str = ""
    set: str = ""
    n: list = field(default_factory=list)
    sizes: list = field(default_factory=lambda: list(DEFAULTS["sizes"]))
    seed: int = DEFAULTS["seed"]
    tol: float = DEFAULTS["tol"]
    family: str = DEFAULTS["family"]
    degree: int = DEFAULTS["degree"]
    poly: str = ""
    x0: str = DEFAULTS["x0"]
    a: str = ""
    dump_matrices: bool = False
    out: str = ""

    def canonical(self) -> dict:
        """Everything that determines the outputs (the output path excluded)."""
        d = {k: v for k, v in self.__dict__.items() if k != "out"}
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if part:
            # accept 2**k and 1e6 style entries
            if "**" in part:
                b, e = part.split("**")
                out.append(int(b) ** int(e))
            else:
                out.append(int(float(part)))
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    kind = args.command
    if base.get("kind", kind) != kind:
        raise ConfigError(f"config kind {base['kind']!r} does not match subcommand {kind!r}")
    cfg = ExperimentConfig(kind=kind)
    unknown = set(base) - set(cfg.__dict__)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for k, v in base.items():
        setattr(cfg, k, v)
    # flags override the file
    for k in ("alpha", "interval", "set", "seed", "tol", "family", "degree", "poly", "x0", "a", "out"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(cfg, k, v)
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    if getattr(args, "n", None) is not None:
        cfg.n = args.n
    if getattr(args, "sizes", None) is not None:
        cfg.sizes = args.sizes
    if getattr(args, "dump_matrices", False):
        cfg.dump_matrices = True
    if not cfg.out:
        cfg.out = os.path.join("runs", kind)
    cfg.n = _int_list(cfg.n) if cfg.n else list(DEFAULTS["n"].get(kind, []))
    cfg.sizes = _int_list(cfg.sizes)
    cfg.seed = int(cfg.seed)
    cfg.tol = float(cfg.tol)
    cfg.degree = int(cfg.degree)
    if cfg.mode not in ("exact", "float"):
        raise ConfigError("mode must be 'exact' or 'float'")
    if cfg.family not in (ALL_DYADIC, EXHAUSTIVE):
        raise ConfigError(f"family must be {ALL_DYADIC!r} or {EXHAUSTIVE!r}")
    return cfg


@dataclass
class Resolved:
    alpha: IrrationalAlpha
    I: object = None
    S: object = None


def resolve(cfg: ExperimentConfig) -> Resolved:
    """Parse and validate every referenced object before anything runs."""
    alpha = parse_alpha(cfg.alpha)
    if cfg.mode == "float":
        alpha = alpha.to_float_mode()
    r = Resolved(alpha)
    if cfg.interval:
        r.I = parse_interval(cfg.interval, alpha)
    if cfg.set:
        r.S = parse_set(cfg.set, alpha)
    needs_interval = cfg.kind in ("dichotomy", "gram", "duality")
    if needs_interval and r.I is None and r.S is None:
        raise ConfigError(f"{cfg.kind} needs --interval or --set")
    if cfg.kind in ("gram", "duality"):
        if r.I is None:
            raise ConfigError(f"{cfg.kind} needs --interval")
        if r.S is None:
            r.S = MultibandSet.disjoint([r.I], r.I.closure)
        if abs(r.S.measure() - float(r.I.length)) > 1e-12:
            raise MeasureMismatch(f"mes S = {r.S.measure():.15g} differs from |I| = {float(r.I.length):.15g}")
        if not cfg.sizes or any(b <= a for a, b in zip(cfg.sizes, cfg.sizes[1:])):
            raise ConfigError("sizes must be a nonempty increasing list")
    if cfg.kind in ("coboundary", "pavlov") and r.S is None:
        if r.I is None:
            raise ConfigError(f"{cfg.kind} needs --set or --interval")
        r.S = MultibandSet.disjoint([r.I], r.I.closure)
    if cfg.kind in ("dichotomy", "variance", "coboundary", "pavlov"):
        if not cfg.n or any(b <= a for a, b in zip(cfg.n, cfg.n[1:])) or cfg.n[0] < 1:
            raise ConfigError("--n must be a nonempty increasing list of positive integers")
    return r


# ---------------------------------------------------------------- writers

def _num(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(str(v) for v in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_json_safe(obj), sort_keys=True, indent=2, ensure_ascii=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(text + "\n")


class Stages:
    def __init__(self):
        self.times = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = time.perf_counter() - t0


# ---------------------------------------------------------------- experiments

def _run_dichotomy(cfg, r, out, st):
    target = r.S if r.S is not None else r.I
    with st.stage("discrepancy"):
        rep = dichotomy_report(r.alpha, target, cfg.n, cfg.family, tol=cfg.tol)
    S = target if isinstance(target, MultibandSet) else MultibandSet.disjoint([target], target.closure)
    with st.stage("series"):
        series = discrepancy_series(r.alpha, S, cfg.n[-1])
    with st.stage("write"):
        ns = np.arange(1, series.N + 1)
        write_csv(out / "discrepancy.csv", ["n", "D"],
                  zip(ns.tolist(), (_num(v) for v in series.values.tolist())))
        body = rep.to_json()
        write_json(out / "results.json", body)
    N = cfg.n[-1]
    return rep.verdict, {
        "sup_abs_D": rep.sup_abs_D[N],
        "certificate": body["certificate"],
        "bmo_l2": rep.bmo[N].l2_norm,
        "measure": rep.measure,
        "N": N,
    }


def _trend_rows(rows):
    return [(t.N, _num(t.lambda_min), _num(t.lambda_max), _num(t.residual)) for t in rows]


def _trend_scalars(rows) -> dict:
    lmin = [t.lambda_min for t in rows]
    return {
        "lambda_min_first": lmin[0],
        "lambda_min_last": lmin[-1],
        "lambda_min_ratio": lmin[-1] / lmin[0] if lmin[0] else math.inf,
        "lambda_max_last": rows[-1].lambda_max,
        "interlacing": check_interlacing(rows),
        "lambda_min_strictly_decreasing": all(b < a for a, b in zip(lmin, lmin[1:])),
    }


TREND_HEADER = ["N", "lambda_min", "lambda_max", "residual"]
# a section's lambda_min can only overestimate the lower Riesz constant and its
# lambda_max only underestimate the upper one
COLUMN_LABELS = {"lambda_min": "finite-section lower bound", "lambda_max": "finite-section upper bound"}


def _run_gram(cfg, r, out, st):
    with st.stage("eigen"):
        rows = riesz_trend(r.alpha, r.I, r.S, cfg.sizes)
    with st.stage("write"):
        write_csv(out / "trend.csv", TREND_HEADER, _trend_rows(rows))
        if cfg.dump_matrices:
            big = centered_slice(r.alpha, MultibandSet.disjoint([r.I], r.I.closure), cfg.sizes[-1]).elements
            for N in cfg.sizes:
                with open(out / f"gram_{N}.bin", "wb") as fp:
                    gram_section(_centered_subset(big, N), r.S).dump(fp)
        scalars = _trend_scalars(rows)
        write_json(out / "results.json", {"rows": [t.__dict__ for t in rows], "columns": COLUMN_LABELS, **scalars})
    verdict = "PositiveFloor" if scalars["lambda_min_ratio"] > 0.5 else "Decaying"
    return verdict, scalars


def _run_duality(cfg, r, out, st):
    with st.stage("eigen"):
        primal, dual = duality_trend(r.alpha, r.I, r.S, cfg.sizes)
    with st.stage("write"):
        write_csv(out / "trend_primal.csv", TREND_HEADER, _trend_rows(primal))
        write_csv(out / "trend_dual.csv", TREND_HEADER, _trend_rows(dual))
        sp, sd = _trend_scalars(primal), _trend_scalars(dual)
        body = {"primal": sp, "dual": sd, "columns": COLUMN_LABELS}
        write_json(out / "results.json", body)
    floor = min(sp["lambda_min_last"], sd["lambda_min_last"])
    verdict = "PositiveFloor" if sp["lambda_min_ratio"] > 0.5 and sd["lambda_min_ratio"] > 0.5 else "Decaying"
    return verdict, {"primal_lambda_min_last": sp["lambda_min_last"],
                     "dual_lambda_min_last": sd["lambda_min_last"], "lambda_min_floor": floor,
                     "interlacing": sp["interlacing"] and sd["interlacing"]}


def _run_variance(cfg, r, out, st):
    if cfg.poly:
        try:
            f = TrigPolynomial.from_json(Path(cfg.poly).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError, AttributeError, IndexError, TypeError) as exc:
            raise ConfigError(f"cannot read polynomial {cfg.poly}: {exc}") from None
    else:
        f = random_trig_polynomial(np.random.default_rng(cfg.seed), cfg.degree)
    with st.stage("variance"):
        curve = variance_curve(f, r.alpha, cfg.n)
    with st.stage("oracle"):
        # grid oracle at the smallest N only; it streams N inverse FFTs
        oracle = variance_quadrature(f, r.alpha, cfg.n[0])
    with st.stage("write"):
        with open(out / "variance.csv", "w", encoding="utf-8", newline="\n") as fp:
            curve.write_csv(fp)
        write_json(out / "polynomial.json", f.to_json())
        gap = float(np.max(np.abs(curve.v_direct - curve.v_kernel)))
        scalars = {
            "max_direct_kernel_gap": gap,
            "v_limit": curve.v_limit,
            "kernel_below_limit": bool(np.all(curve.v_kernel <= curve.v_limit)),
            "oracle_gap": abs(oracle - curve.v_direct[0]),
        }
        write_json(out / "results.json", scalars)
    verdict = "IdentityHolds" if gap <= 1e-10 else "IdentityViolated"
    return verdict, scalars


def _run_coboundary(cfg, r, out, st):
    x0 = parse_number(cfg.x0, r.alpha)
    with st.stage("experiment"):
        rep = bmo_coboundary_experiment(r.S, r.alpha, x0, cfg.n, cfg.family, tol=cfg.tol)
    with st.stage("write"):
        body = rep.to_json()
        write_json(out / "results.json", body)
    N = cfg.n[-1]
    verdict = "CoboundaryFound" if rep.g is not None else "NoCertificate"
    return verdict, {"certificate": body["certificate"], "sup_abs_sums": rep.sup_abs_sums[N],
                     "bmo_l2": rep.bmo[N].l2_norm, "cocycle_residual": rep.cocycle_residual}


def _run_pavlov(cfg, r, out, st):
    a = float(parse_number(cfg.a, r.alpha)) if cfg.a else r.S.measure()
    with st.stage("slice"):
        sl = lambda_slice(r.alpha, r.S, 0, cfg.n[-1] + 1)
    with st.stage("bmo"):
        reports = {}
        for N in cfg.n:
            sub = lambda_slice(r.alpha, r.S, 0, N + 1) if N != cfg.n[-1] else sl
            reports[N] = pavlov_bmo_diagnostic(sub, a, cfg.family)
    with st.stage("write"):
        write_csv(out / "pavlov.csv", ["N", "l1", "l2", "window_start", "window_end"],
                  [(N, _num(b.l1_norm), _num(b.l2_norm), *b.worst_window) for N, b in reports.items()])
        write_json(out / "results.json", {"a": a, "bmo": {str(N): b.to_json() for N, b in reports.items()}})
    N = cfg.n[-1]
    return "Reported", {"a": a, "bmo_l2": reports[N].l2_norm}


RUNNERS = {
    "dichotomy": _run_dichotomy,
    "gram": _run_gram,
    "duality": _run_duality,
    "variance": _run_variance,
    "coboundary": _run_coboundary,
    "pavlov": _run_pavlov,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one experiment into ``cfg.out``; returns the process exit code."""
    try:
        r = resolve(cfg)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create {out}: {exc}", file=sys.stderr)
        return 2
    st = Stages()
    try:
        # single-threaded BLAS keeps results bitwise identical across machines' thread settings
        with threadpool_limits(limits=1):
            verdict, scalars = RUNNERS[cfg.kind](cfg, r, out, st)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.kind,
        "config": cfg.canonical(),
        "config_hash": cfg.config_hash(),
        "version": __version__,
        "wall_time_s": st.times,
        "verdict": verdict,
        "scalars": scalars,
    })
    print(f"{cfg.kind}: {verdict} -> {out}")
    return 0


# ---------------------------------------------------------------- report

def _load_manifest(path: Path) -> dict:
    try:
        m = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"corrupt manifest {path}: {exc}") from None
    for key in ("experiment", "config_hash", "verdict", "scalars"):
        if key not in m:
            raise ConfigError(f"manifest {path} lacks {key!r}")
    return m


def _entry(m: dict) -> dict:
    # wall times are excluded so that summaries are reproducible byte for byte
    return {"experiment": m["experiment"], "config_hash": m["config_hash"],
            "verdict": m["verdict"], **m["scalars"]}


def emit_report(artifact_dir) -> dict:
    """Summary of a run directory or of a directory of run directories."""
    root = Path(artifact_dir)
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    if (root / "manifest.json").exists():
        summary = _entry(_load_manifest(root / "manifest.json"))
    else:
        runs = {}
        for sub in sorted(p for p in root.iterdir() if p.is_dir()):
            if (sub / "manifest.json").exists():
                runs[sub.name] = _entry(_load_manifest(sub / "manifest.json"))
        if not runs:
            raise ConfigError(f"no manifest found under {root}")
        summary = {"runs": runs}
    summary["schema_version"] = SCHEMA_VERSION
    return summary


# ---------------------------------------------------------------- argparse

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasiriesz", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--alpha", help="quad:p,q,d,r | golden | silver | decimal (default golden)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
    mode.add_argument("--float", dest="mode", action="store_const", const="float")
    common.add_argument("--interval", help="left,length[,closure]")
    common.add_argument("--set", help="I:left,length[,closure] or C:(c)left,length+...")
    common.add_argument("--n", help="comma list of lengths")
    common.add_argument("--sizes", help="comma list of section sizes")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="float-mode membership tolerance")
    common.add_argument("--family", choices=[ALL_DYADIC, EXHAUSTIVE])
    common.add_argument("--out", help="output directory")

    for kind in KINDS:
        sp = sub.add_parser(kind, parents=[common])
        if kind == "variance":
            sp.add_argument("--degree", type=int)
            sp.add_argument("--poly", help="polynomial JSON {k: [re, im]}")
        if kind == "coboundary":
            sp.add_argument("--x0", help="base point")
        if kind == "pavlov":
            sp.add_argument("--a", help="density a in (0, 1] (default mes S)")
        if kind == "gram":
            sp.add_argument("--dump-matrices", action="store_true")
    rp = sub.add_parser("report")
    rp.add_argument("artifact_dir")
    rp.add_argument("--out", help="summary path (default <artifact_dir>/summary.json)")
    return p


def main(argv=None) -> int:
    p = _parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "report":
        try:
            summary = emit_report(args.artifact_dir)
        except ConfigError as exc:
            print(f"report error: {exc}", file=sys.stderr)
            return 2
        target = Path(args.out) if args.out else Path(args.artifact_dir) / "summary.json"
        write_json(target, summary)
        print(json.dumps(_json_safe(summary), sort_keys=True))
        return 0
    try:
        cfg = build_config(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
