import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffasm.exceptions import GridMismatch, InvalidArgument, Undefined
from ffasm.fda import Grid
from ffasm.metrics import (
    CSV_COLUMNS,
    RULES,
    RunRecord,
    imse,
    out_of_sample_r2,
    selection_frequency,
    summarize,
    tpr,
    write_long_csv,
)
from ffasm.simulate import ScenarioConfig, TRUE_SUPPORT, true_betas

GRID = Grid.uniform(0, 1, 51)
# 51-point trapezoid integral of the six true curves, from an independent
# evaluation with the closed-form Fourier functions
ZERO_ESTIMATE_IMSE = 4.453146333975027


def _rec(selected, rep=0, **kw):
    return RunRecord("ffasm", rep, {"scenario": "factor", "G": 20, "K": 2, "rho": None},
                     imse=kw.get("imse", 1.0), tpr=tpr(selected), selected=frozenset(selected))


# ------------------------------------------------------------------ imse

def test_imse_identity_is_zero():
    b = true_betas(ScenarioConfig("factor", K=1, G=8))
    assert imse(b, b, GRID) == 0


def test_imse_zero_estimate():
    b = true_betas(ScenarioConfig("factor", K=1, G=8))
    val = imse(np.zeros_like(b), b, GRID)
    assert abs(val - ZERO_ESTIMATE_IMSE) < 1e-9
    assert abs(val - 4.454) < 1e-2


def test_imse_quadratic_scaling():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 3, 51))
    assert np.isclose(imse(b + 2 * (a - b), b, GRID), 4 * imse(a, b, GRID), rtol=1e-12)


def test_imse_grid_mismatch():
    with pytest.raises(GridMismatch):
        imse(np.zeros((2, 51)), np.zeros((2, 50)), GRID)
    with pytest.raises(GridMismatch):
        imse(np.zeros((2, 21)), np.zeros((2, 21)), GRID)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_imse_nonnegative(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 4, 51))
    assert imse(a, b, GRID) > 0
    assert imse(a, a.copy(), GRID) == 0


# ------------------------------------------------------------------ tpr

def test_tpr_examples():
    assert tpr(set(range(10)), TRUE_SUPPORT) == 1
    assert tpr({0, 1, 2}, TRUE_SUPPORT) == 0.5
    assert tpr(set(), TRUE_SUPPORT) == 0
    with pytest.raises(InvalidArgument):
        tpr({1}, set())


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(0, 12)), st.sets(st.integers(0, 12)))
def test_tpr_monotone_in_inclusion(a, extra):
    assert tpr(a) <= tpr(a | extra)
    assert 0 <= tpr(a) <= 1


# ------------------------------------------------------------------ rules

def test_full_support_satisfies_every_rule():
    recs = [_rec(range(6), r) for r in range(3)]
    for rule in RULES:
        assert selection_frequency(recs, rule) == 1


def test_partial_type1_selection():
    r = _rec({0, 1, 2})
    assert r.satisfies("type1_atleast3")
    assert not r.satisfies("all_type1")
    assert not r.satisfies("type2_atleast1")


def test_frequency_is_fraction():
    recs = [_rec(range(6), i) for i in range(7)] + [_rec({0}, i) for i in range(7, 10)]
    assert selection_frequency(recs, "all_type1") == pytest.approx(0.7)


def test_unknown_rule():
    with pytest.raises(InvalidArgument):
        selection_frequency([_rec({0})], "type3")


def test_record_validates_tpr():
    with pytest.raises(InvalidArgument):
        RunRecord("ffasm", 0, {}, 0.0, 1.5, frozenset())


# ------------------------------------------------------------------ R^2

def test_r2_examples():
    y = np.array([1.0, 2.0, 3.0])
    assert out_of_sample_r2(y, y, 2.0) == 1
    assert out_of_sample_r2(y, np.full(3, 2.0), 2.0) == 0
    assert out_of_sample_r2(y, np.array([1.0, 1.0, 3.0]), 2.0) == pytest.approx(0.5)


def test_r2_undefined():
    with pytest.raises(Undefined):
        out_of_sample_r2(np.ones(4), np.zeros(4), 1.0)


# ------------------------------------------------------------------ output

def test_summary_statistics():
    recs = [_rec({0, 1}, i, imse=v) for i, v in enumerate([1.0, 2.0, 3.0])]
    s = summarize(recs)
    assert s["imse"]["mean"] == 2.0 and s["imse"]["sd"] == 1.0
    assert s["model_size"]["mean"] == 2 and s["n_records"] == 3
    assert s["all_type1"] == 0


def test_long_csv_layout(tmp_path):
    path = tmp_path / "m.csv"
    write_long_csv(path, [_rec({0, 1}, 0, imse=0.1), _rec({0}, 1, imse=0.2)])
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_COLUMNS
    metrics = [r[5] for r in rows[1:] if r[4] == "0"]
    assert metrics == ["imse", "tpr", "model_size", *RULES]
    imse_rows = [r for r in rows[1:] if r[5] == "imse"]
    assert [r[6] for r in imse_rows] == ["0.1", "0.2"]
    assert imse_rows[0][:5] == ["factor", "ffasm", "2", "20", "0"]
