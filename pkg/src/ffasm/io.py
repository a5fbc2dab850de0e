"""CSV ingestion and JSON serialization.

Two curve layouts are accepted:

dense
    ``subject,g1_t0,g1_t0.02,...,gG_t1``: one row per subject, one column per
    (covariate, grid time).  Covariate indices in the header are 1-based.
longitudinal
    ``subject,covariate,time,value``: one row per observation; curves are
    recovered with the local linear smoother.

Responses are read from ``subject,y`` files.  Every JSON document carries
``"schema": "ffasm/v1"``.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgument
from .fda import EigenSystem, FunctionalSample, Grid, SmootherConfig, smooth_longitudinal
from .model import FfasmFit
from .penalized import GlmFamily

SCHEMA = "ffasm/v1"
_DENSE_COL = re.compile(r"^g(\d+)_t(.+)$")


class CsvFormatError(InvalidArgument):
    """Malformed input file; the message names the offending row or column."""


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], rows[1:]


def _float(cell: str, path, row: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise CsvFormatError(f"{path}: row {row}, column {col!r}: not a number: {cell!r}") from None


def detect_layout(path) -> str:
    header, _ = _read_rows(path)
    if [h.lower() for h in header[:4]] == ["subject", "covariate", "time", "value"]:
        return "longitudinal"
    if header and header[0].lower() == "subject" and len(header) > 1 and all(
            _DENSE_COL.match(h) for h in header[1:]):
        return "dense"
    raise CsvFormatError(f"{path}: unrecognised header {header[:5]}")


def read_dense_csv(path) -> tuple[FunctionalSample, list[str]]:
    """Returns the sample and the subject labels in row order."""
    header, rows = _read_rows(path)
    if not header or header[0].lower() != "subject":
        raise CsvFormatError(f"{path}: first column must be 'subject'")
    cols = []
    for c, name in enumerate(header[1:], start=2):
        m = _DENSE_COL.match(name)
        if not m:
            raise CsvFormatError(f"{path}: column {c} header {name!r} is not of the form g<idx>_t<time>")
        cols.append((int(m.group(1)), _float(m.group(2), path, 1, name)))
    covs = sorted({g for g, _ in cols})
    if covs != list(range(1, len(covs) + 1)):
        raise CsvFormatError(f"{path}: covariate indices must run 1..G, found {covs}")
    times = sorted({t for g, t in cols if g == 1})
    for g in covs:
        tg = [t for gg, t in cols if gg == g]
        if sorted(tg) != times or len(tg) != len(set(tg)):
            raise CsvFormatError(f"{path}: covariate g{g} does not share the g1 time grid")
    grid = Grid.from_points(times)
    index = {key: i for i, key in enumerate(cols)}
    order = [index[(g, t)] for g in covs for t in times]
    values = np.empty((len(rows), len(covs) * len(times)))
    subjects = []
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        subjects.append(row[0].strip())
        raw = [_float(cell, path, r, header[c + 1]) for c, cell in enumerate(row[1:])]
        values[r - 2] = np.asarray(raw)[order]
    if len(set(subjects)) != len(subjects):
        raise CsvFormatError(f"{path}: duplicate subject labels")
    return FunctionalSample(grid, values.reshape(len(rows), len(covs), len(times))), subjects


def write_dense_csv(path, sample: FunctionalSample, subjects=None) -> None:
    subjects = [str(i + 1) for i in range(sample.n)] if subjects is None else subjects
    header = ["subject"] + [f"g{g + 1}_t{t!r}" for g in range(sample.G)
                            for t in sample.grid.points.tolist()]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        flat = sample.values.reshape(sample.n, -1)
        for s, row in zip(subjects, flat.tolist()):
            w.writerow([s] + [repr(v) for v in row])


def read_longitudinal_csv(path, smoothing: dict | None = None) -> tuple[FunctionalSample, list[str]]:
    """Smooth long-format observations onto a uniform grid.

    ``smoothing`` may set ``grid_points`` (51), ``lo``/``hi`` (observed time
    range), ``bandwidth`` ("rule" or a number), ``kernel`` and
    ``rule_constant``.
    """
    header, rows = _read_rows(path)
    if [h.lower() for h in header[:4]] != ["subject", "covariate", "time", "value"]:
        raise CsvFormatError(f"{path}: header must be subject,covariate,time,value")
    subj, cov, time, val = [], [], [], []
    for r, row in enumerate(rows, start=2):
        if len(row) < 4:
            raise CsvFormatError(f"{path}: row {r} has {len(row)} fields, expected 4")
        subj.append(row[0].strip())
        cov.append(row[1].strip())
        time.append(_float(row[2], path, r, "time"))
        val.append(_float(row[3], path, r, "value"))
    opts = dict(smoothing or {})
    lo = float(opts.pop("lo", min(time)))
    hi = float(opts.pop("hi", max(time)))
    grid = Grid.uniform(lo, hi, int(opts.pop("grid_points", 51)))
    cfg = SmootherConfig(grid, **opts)
    subjects = sorted(set(subj), key=_natural_key)
    covariates = sorted(set(cov), key=_natural_key)
    sample, subjects, _ = smooth_longitudinal(subj, cov, time, val, cfg, subjects, covariates)
    return sample, subjects


def _natural_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def read_curves(path, smoothing: dict | None = None) -> tuple[FunctionalSample, list[str]]:
    if detect_layout(path) == "dense":
        return read_dense_csv(path)
    return read_longitudinal_csv(path, smoothing)


def read_response_csv(path, subjects: list[str] | None = None) -> np.ndarray:
    """Responses from ``subject,y`` (or a single ``y`` column), aligned to ``subjects``."""
    header, rows = _read_rows(path)
    lower = [h.lower() for h in header]
    if lower == ["y"]:
        y = np.array([_float(r[0], path, i, "y") for i, r in enumerate(rows, start=2)])
        if subjects is not None and len(y) != len(subjects):
            raise CsvFormatError(f"{path}: {len(y)} responses for {len(subjects)} subjects")
        return y
    if lower[:2] != ["subject", "y"]:
        raise CsvFormatError(f"{path}: header must be subject,y")
    table = {}
    for i, r in enumerate(rows, start=2):
        if len(r) < 2:
            raise CsvFormatError(f"{path}: row {i} has {len(r)} fields, expected 2")
        table[r[0].strip()] = _float(r[1], path, i, "y")
    if subjects is None:
        return np.array(list(table.values()))
    missing = [s for s in subjects if s not in table]
    if missing:
        raise CsvFormatError(f"{path}: no response for subject {missing[0]!r}")
    return np.array([table[s] for s in subjects])


def write_response_csv(path, y, subjects=None) -> None:
    subjects = [str(i + 1) for i in range(len(y))] if subjects is None else subjects
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", "y"])
        for s, v in zip(subjects, np.asarray(y, dtype=float).tolist()):
            w.writerow([s, repr(v)])


# ------------------------------------------------------------------ fit JSON

def fit_to_dict(fit: FfasmFit) -> dict:
    return {
        "schema": SCHEMA,
        "method": fit.method,
        "config": fit.config,
        "family": fit.family.kind,
        "path": fit.path,
        "K": fit.K,
        "truncations": list(fit.truncations),
        "lambda": fit.lam,
        "beta0": fit.beta0,
        "y_mean": fit.y_mean,
        "eta_blocks": [b.tolist() for b in fit.eta_blocks()],
        "gamma": None if fit.gamma is None else np.asarray(fit.gamma).tolist(),
        "selected": sorted(int(g) for g in fit.selected),
        "grid": fit.grid.points.tolist(),
        "beta_curves": fit.beta_curves.tolist(),
        "mean_curves": fit.mean_curves.tolist(),
        "score_means": fit.score_means.tolist(),
        "eigensystems": [{"eigenvalues": es.eigenvalues.tolist(),
                          "eigenfunctions": es.eigenfunctions.tolist(),
                          "fve": es.fve.tolist()} for es in fit.eigensystems],
        "loadings": None if fit.loadings is None else fit.loadings.tolist(),
        "warnings": list(fit.warnings),
    }


def fit_from_dict(d: dict) -> FfasmFit:
    if d.get("schema") != SCHEMA:
        raise InvalidArgument(f"unsupported schema {d.get('schema')!r}")
    grid = Grid.from_points(d["grid"])
    systems = tuple(
        EigenSystem(g, grid, np.asarray(e["eigenvalues"]), np.asarray(e["eigenfunctions"]),
                    np.asarray(e["fve"]), m)
        for g, (e, m) in enumerate(zip(d["eigensystems"], d["truncations"])))
    H = np.concatenate([np.asarray(b, dtype=float) for b in d["eta_blocks"]]) \
        if d["eta_blocks"] else np.zeros(0)
    return FfasmFit(
        method=d["method"],
        beta0=float(d["beta0"]),
        H=H,
        gamma=None if d["gamma"] is None else np.asarray(d["gamma"], dtype=float),
        beta_curves=np.asarray(d["beta_curves"], dtype=float),
        selected=frozenset(d["selected"]),
        eigensystems=systems,
        grid=grid,
        mean_curves=np.asarray(d["mean_curves"], dtype=float),
        score_means=np.asarray(d["score_means"], dtype=float),
        y_mean=float(d["y_mean"]),
        lam=float(d["lambda"]),
        K=int(d["K"]),
        truncations=tuple(d["truncations"]),
        family=GlmFamily(d["family"]),
        path=d["path"],
        loadings=None if d["loadings"] is None else np.asarray(d["loadings"], dtype=float),
        config=d["config"],
        warnings=list(d["warnings"]),
    )


def write_json(path, doc: dict) -> None:
    doc = doc if "schema" in doc else {"schema": SCHEMA, **doc}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def save_fit(path, fit: FfasmFit) -> None:
    write_json(path, fit_to_dict(fit))


def load_fit(path) -> FfasmFit:
    return fit_from_dict(json.loads(Path(path).read_text()))
