import json

import numpy as np
import pytest

from ffasm.exceptions import InsufficientData, InvalidArgument
from ffasm.fda import FunctionalSample, Grid
from ffasm.io import (
    SCHEMA,
    CsvFormatError,
    detect_layout,
    load_fit,
    read_curves,
    read_dense_csv,
    read_longitudinal_csv,
    read_response_csv,
    save_fit,
    write_dense_csv,
    write_response_csv,
)
from ffasm.model import FfasmConfig, fit_ffasm, predict
from ffasm.simulate import ScenarioConfig, generate


def _write(path, text):
    path.write_text(text)
    return path


def test_dense_roundtrip_is_exact(tmp_path):
    s, y, _ = generate(ScenarioConfig("factor", K=1, G=3, n=5, seed=1))
    write_dense_csv(tmp_path / "x.csv", s, ["a", "b", "c", "d", "e"])
    back, subjects = read_dense_csv(tmp_path / "x.csv")
    assert subjects == ["a", "b", "c", "d", "e"]
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.grid.points, s.grid.points)
    write_response_csv(tmp_path / "y.csv", y, subjects)
    assert np.array_equal(read_response_csv(tmp_path / "y.csv", subjects[::-1]), y[::-1])


def test_dense_column_order_is_irrelevant(tmp_path):
    p = _write(tmp_path / "x.csv", "subject,g2_t0,g1_t1,g1_t0,g2_t1\ns1,3,2,1,4\n")
    s, _ = read_dense_csv(p)
    assert np.array_equal(s.values[0], [[1, 2], [3, 4]])


def test_dense_errors_name_location(tmp_path):
    p = _write(tmp_path / "x.csv", "subject,g1_t0,g1_t1\ns1,1,oops\n")
    with pytest.raises(CsvFormatError, match=r"row 2.*g1_t1"):
        read_dense_csv(p)
    p = _write(tmp_path / "x.csv", "subject,g1_t0,g1_t1\ns1,1\n")
    with pytest.raises(CsvFormatError, match="row 2"):
        read_dense_csv(p)
    p = _write(tmp_path / "x.csv", "subject,g1_t0,g2_t0.5\ns1,1,2\n")
    with pytest.raises(CsvFormatError, match="g2"):
        read_dense_csv(p)
    p = _write(tmp_path / "x.csv", "subject,g1_t0,g3_t0\ns1,1,2\n")
    with pytest.raises(CsvFormatError, match="1..G"):
        read_dense_csv(p)


def test_layout_detection(tmp_path):
    assert detect_layout(_write(tmp_path / "a.csv", "subject,g1_t0\n1,2\n")) == "dense"
    assert detect_layout(_write(tmp_path / "b.csv", "subject,covariate,time,value\n1,1,0,2\n")) \
        == "longitudinal"
    with pytest.raises(CsvFormatError):
        detect_layout(_write(tmp_path / "c.csv", "id,x\n1,2\n"))
    with pytest.raises(CsvFormatError):
        detect_layout(_write(tmp_path / "d.csv", ""))


def _longitudinal(tmp_path, drop=None):
    rng = np.random.default_rng(0)
    lines = ["subject,covariate,time,value"]
    for s in range(1, 6):
        for g in (1, 2):
            if (s, g) == drop:
                continue
            for t in np.sort(rng.uniform(0, 1, 60)).tolist():
                lines.append(f"{s},{g},{t!r},{float(np.sin(2 * np.pi * t) * s + g)!r}")
    return _write(tmp_path / "long.csv", "\n".join(lines) + "\n")


def test_longitudinal_smoothing(tmp_path):
    opts = {"grid_points": 21, "lo": 0, "hi": 1, "bandwidth": 0.08}
    s, subjects = read_curves(_longitudinal(tmp_path), opts)
    assert subjects == ["1", "2", "3", "4", "5"]
    assert s.values.shape == (5, 2, 21)
    truth = 3 * np.sin(2 * np.pi * s.grid.points) + 2
    assert np.max(np.abs(s.values[2, 1, 3:-3] - truth[3:-3])) < 0.15


def test_longitudinal_missing_covariate_names_subject(tmp_path):
    with pytest.raises(InsufficientData, match="'2'"):
        read_longitudinal_csv(_longitudinal(tmp_path, drop=(2, 2)))


def test_response_alignment_errors(tmp_path):
    p = _write(tmp_path / "y.csv", "subject,y\na,1\nb,2\n")
    with pytest.raises(CsvFormatError, match="'c'"):
        read_response_csv(p, ["a", "c"])
    p = _write(tmp_path / "y.csv", "y\n1\n2\n")
    assert np.array_equal(read_response_csv(p, ["a", "b"]), [1, 2])
    with pytest.raises(CsvFormatError):
        read_response_csv(p, ["a"])


def test_fit_file_roundtrip(tmp_path):
    s, y, _ = generate(ScenarioConfig("factor", K=2, G=4, n=40, seed=3))
    fit = fit_ffasm(s, y, FfasmConfig(n_components=4, lam=0.05, path="glm_augmented"))
    save_fit(tmp_path / "fit.json", fit)
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["schema"] == SCHEMA
    back = load_fit(tmp_path / "fit.json")
    assert np.max(np.abs(predict(back, s) - predict(fit, s))) <= 1e-12
    assert np.max(np.abs(back.beta_curves - fit.beta_curves)) <= 1e-12
    assert back.selected == fit.selected and back.lam == fit.lam


def test_fit_file_rejects_other_schema(tmp_path):
    (tmp_path / "f.json").write_text('{"schema": "other/v9"}')
    with pytest.raises(InvalidArgument):
        load_fit(tmp_path / "f.json")
