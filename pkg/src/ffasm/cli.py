"""Command-line interface: ``ffasm simulate | fit | factors``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .competitors import fit_group_mcp, fit_mcp_scores
from .exceptions import (
    FfasmError,
    GridMismatch,
    InsufficientData,
    InvalidArgument,
    InvalidResponse,
    ShapeMismatch,
)
from .experiment import ExperimentSpec, resolve_threads, run_experiment
from .factors import (
    FactorSelectionConfig,
    information_criteria,
    ratio_statistics,
    select_num_factors_ratio,
)
from .metrics import write_long_csv
from .model import FfasmConfig, fit_ffasm, functional_scores

_VALIDATION = (InvalidArgument, InsufficientData, ShapeMismatch, GridMismatch, InvalidResponse)


class _Usage(Exception):
    pass


def _load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise _Usage(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise _Usage(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise _Usage(f"{path}: expected a JSON object")
    return doc


def cmd_simulate(args) -> int:
    doc = _load_json(args.spec)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        spec = ExperimentSpec.from_dict(doc)
    except (InvalidArgument, TypeError) as e:
        raise _Usage(f"{args.spec}: {e}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_experiment(spec, resolve_threads(args.threads))
    write_long_csv(out / "metrics.csv", result.records)
    io.write_json(out / "summary.json", {
        "spec": doc,
        "cells": result.cells(),
        "errors": result.errors,
    })
    for e in result.errors:
        print(f"replication failed: {e}", file=sys.stderr)
    print(f"wrote {len(result.records)} records to {out / 'metrics.csv'}")
    return 1 if result.errors else 0


def _fit_config(doc: dict) -> tuple[FfasmConfig, dict, str | None]:
    doc = dict(doc)
    smoothing = doc.pop("smoothing", None)
    method = doc.pop("method", None)
    doc.pop("schema", None)
    try:
        return FfasmConfig.from_dict(doc), smoothing, method
    except TypeError as e:
        raise InvalidArgument(str(e)) from None


def cmd_fit(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    cfg, smoothing, method = _fit_config(doc)
    method = args.method or method or "ffasm"
    sample, subjects = io.read_curves(args.x, smoothing)
    y = io.read_response_csv(args.y, subjects)
    if method == "ffasm":
        fit = fit_ffasm(sample, y, cfg)
    else:
        fs = functional_scores(sample, cfg.n_components, cfg.fve_threshold)
        fit = fit_mcp_scores(fs, y, cfg) if method == "mcp" else fit_group_mcp(fs, y, cfg)
    out = io.fit_to_dict(fit)
    out["selected_labels"] = [f"g{g + 1}" for g in sorted(fit.selected)]
    io.write_json(args.out, out)
    labels = ",".join(out["selected_labels"]) or "(none)"
    print(f"method={method} selected={labels} lambda={fit.lam:.6g} K={fit.K}")
    return 0


def cmd_factors(args) -> int:
    doc = _load_json(args.config) if args.config else {}
    cfg, smoothing, _ = _fit_config(doc)
    sample, _ = io.read_curves(args.x, smoothing)
    fs = functional_scores(sample, cfg.n_components, cfg.fve_threshold)
    A = fs.scores
    sel = FactorSelectionConfig("ratio", k_max=args.kmax, c_n=args.cn)
    k_max = sel.resolve_k_max(A.n, A.p)
    ratios = ratio_statistics(A, sel)
    eig = np.linalg.svd(A.data, compute_uv=False) ** 2 / A.n
    ic = information_criteria(A, FactorSelectionConfig("ic", k_max=args.kmax))
    report = {
        "n": A.n,
        "p": A.p,
        "truncations": [es.truncation for es in fs.eigensystems],
        "k_max": k_max,
        "c_n": args.cn,
        "eigenvalues": eig.tolist(),
        "ratios": ratios.tolist(),
        "k_ratio": select_num_factors_ratio(A, sel),
        "k_ic": int(np.argmin(ic["ic"]) + 1),
        "k_pc": int(np.argmin(ic["pc"]) + 1),
        "ic": ic["ic"].tolist(),
        "pc": ic["pc"].tolist(),
    }
    if args.out:
        io.write_json(args.out, report)
    else:
        print(json.dumps({"schema": io.SCHEMA, **report}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ffasm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo sweep")
    s.add_argument("--spec", required=True, help="experiment JSON")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.add_argument("--threads", type=int, help="worker processes (default: $FFASM_THREADS or 1)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a model to CSV data")
    f.add_argument("--x", required=True, help="dense or longitudinal curve CSV")
    f.add_argument("--y", required=True, help="response CSV (subject,y)")
    f.add_argument("--config", help="fit configuration JSON")
    f.add_argument("--out", required=True, help="fit JSON to write")
    f.add_argument("--method", choices=("ffasm", "mcp", "grmcp"))
    f.set_defaults(func=cmd_fit)

    k = sub.add_parser("factors", help="scree and factor-count report")
    k.add_argument("--x", required=True)
    k.add_argument("--kmax", type=int)
    k.add_argument("--cn", type=float, default=0.0)
    k.add_argument("--config", help="truncation / smoothing JSON")
    k.add_argument("--out", help="write the report here instead of stdout")
    k.set_defaults(func=cmd_factors)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Usage as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except _VALIDATION as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FfasmError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2 if isinstance(e, FileNotFoundError) else 1


if __name__ == "__main__":
    sys.exit(main())
