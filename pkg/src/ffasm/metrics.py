"""Estimation and selection metrics for coefficient curves."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .exceptions import GridMismatch, InvalidArgument, Undefined
from .fda import Grid
from .simulate import TRUE_SUPPORT, TYPE1, TYPE2

Rule = Literal["type1_atleast3", "type2_atleast1", "all_type1", "all_type2"]
RULES: tuple[str, ...] = ("type1_atleast3", "type2_atleast1", "all_type1", "all_type2")
CSV_COLUMNS = ("scenario", "method", "param", "G", "rep", "metric", "value")


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one method on one replication."""

    method: str
    rep: int
    scenario: dict
    imse: float
    tpr: float
    selected: frozenset
    runtime_ms: float = 0.0
    k_hat: int | None = None
    type1: frozenset = TYPE1
    type2: frozenset = TYPE2

    def __post_init__(self):
        if not 0.0 <= self.tpr <= 1.0:
            raise InvalidArgument("tpr must lie in [0, 1]")

    @property
    def model_size(self) -> int:
        return len(self.selected)

    def satisfies(self, rule: str) -> bool:
        t1 = len(self.selected & self.type1)
        t2 = len(self.selected & self.type2)
        if rule == "type1_atleast3":
            return t1 >= 3
        if rule == "type2_atleast1":
            return t2 >= 1
        if rule == "all_type1":
            return t1 == len(self.type1)
        if rule == "all_type2":
            return t2 == len(self.type2)
        raise InvalidArgument(f"unknown selection rule {rule!r}")


def imse(est_curves, true_curves, grid: Grid) -> float:
    """Sum over covariates of the integrated squared curve error."""
    est = np.atleast_2d(np.asarray(est_curves, dtype=float))
    true = np.atleast_2d(np.asarray(true_curves, dtype=float))
    if est.shape != true.shape or est.shape[-1] != len(grid):
        raise GridMismatch(f"curve shapes {est.shape} and {true.shape} do not match the grid")
    return float(np.sum(grid.integrate((est - true) ** 2)))


def tpr(selected: Iterable[int], true_support: Iterable[int] = TRUE_SUPPORT) -> float:
    truth = frozenset(true_support)
    if not truth:
        raise InvalidArgument("true support is empty")
    return len(frozenset(selected) & truth) / len(truth)


def selection_frequency(records: Sequence[RunRecord], rule: Rule) -> float:
    if rule not in RULES:
        raise InvalidArgument(f"unknown selection rule {rule!r}")
    if not records:
        return float("nan")
    return float(np.mean([r.satisfies(rule) for r in records]))


def out_of_sample_r2(y_test, y_pred, y_train_mean: float) -> float:
    """``1 - SSE / SST`` with SST taken around the training mean."""
    y_test = np.asarray(y_test, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    sst = float(np.sum((y_test - y_train_mean) ** 2))
    if sst == 0.0:
        raise Undefined("test responses equal the training mean; R^2 is undefined")
    return 1.0 - float(np.sum((y_test - y_pred) ** 2)) / sst


def record_rows(rec: RunRecord) -> list[tuple]:
    """Long-format rows for one record (runtime is excluded to keep output reproducible)."""
    sc = rec.scenario
    param = sc.get("K") if sc.get("scenario") == "factor" else sc.get("rho")
    head = (sc.get("scenario"), rec.method, param, sc.get("G"), rec.rep)
    values = [("imse", rec.imse), ("tpr", rec.tpr), ("model_size", rec.model_size)]
    if rec.k_hat is not None:
        values.append(("k_hat", rec.k_hat))
    values += [(rule, int(rec.satisfies(rule))) for rule in RULES]
    return [head + (name, val) for name, val in values]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def write_long_csv(path, records: Iterable[RunRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            for row in record_rows(rec):
                w.writerow([_fmt(v) for v in row])


def summarize(records: Sequence[RunRecord]) -> dict:
    """Mean and sd (ddof=1, 0 for a single record) of each metric plus rule frequencies."""
    out = {}
    for name, vals in (("imse", [r.imse for r in records]),
                       ("tpr", [r.tpr for r in records]),
                       ("model_size", [r.model_size for r in records])):
        arr = np.asarray(vals, dtype=float)
        out[name] = {"mean": float(arr.mean()),
                     "sd": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}
    for rule in RULES:
        out[rule] = selection_frequency(records, rule)
    out["n_records"] = len(records)
    return out
