import csv
import io
import json
import logging

import numpy as np
import pytest

from shapattr import Dataset, Linear
from shapattr.case_study import (
    RunConfig,
    attribute_cohort,
    bundled_path,
    emit_report,
    load_dataset,
    load_model,
    parse_method,
    report_csv,
    report_svg,
    resolve_baseline,
    select_explicands,
)
from shapattr.errors import ParseError


@pytest.fixture(scope="module")
def diabetes():
    return load_dataset(bundled_path("diabetes.csv")), load_model(bundled_path("diabetes_linear.json"))


def small_cohort(methods=("bshap", "ces")):
    data = Dataset(("a", "b", "c"), np.asarray([[0, 1, 2], [1, 1, 0], [2, 0, 1], [1, 0, 0]], dtype=float))
    f = Linear(1.0, {"a": 2.0, "b": 0.0, "c": -1.0})
    return attribute_cohort(RunConfig(f, data, methods, explicands=[0, 2]))


def test_bundled_data(diabetes):
    data, model = diabetes
    assert len(data) == 442 and len(data.features) == 10
    assert model.coefficients["bmi"] == 399.0


def test_csv_has_one_row_per_explicand_and_feature():
    rep = small_cohort()
    rows = list(csv.DictReader(io.StringIO(report_csv(rep, "bshap"))))
    assert len(rows) == 2 * 3
    assert {r["method"] for r in rows} == {"bshap"}
    assert sum(len(list(csv.DictReader(io.StringIO(report_csv(rep, m))))) for m in rep.methods) == 12


def test_parse_method():
    assert parse_method("ces_0.1") == ("ces", 0.1)
    assert parse_method("ces") == ("ces", 0.0)
    assert parse_method("pms") == ("pms", 0.0)
    with pytest.raises(ValueError):
        parse_method("kernelshap")


def test_baseline_specs():
    data = Dataset(("a", "b"), np.asarray([[0.0, 2.0], [2.0, 4.0]]))
    assert resolve_baseline("mean", data) == {"a": 1.0, "b": 3.0}
    assert resolve_baseline("zeros", data) == {"a": 0.0, "b": 0.0}
    assert resolve_baseline("1,2", data) == {"a": 1.0, "b": 2.0}
    with pytest.raises(ValueError):
        resolve_baseline("1", data)


def test_explicand_selection_is_seeded():
    data = Dataset(("a",), np.arange(50, dtype=float).reshape(-1, 1))
    assert select_explicands(data, 5, 1) == select_explicands(data, 5, 1)
    assert select_explicands(data, 5, 1) != select_explicands(data, 5, 2)
    with pytest.raises(ValueError):
        select_explicands(data, 51, 0)


def test_svg_has_one_box_per_feature(diabetes):
    data, model = diabetes
    rep = attribute_cohort(RunConfig(model, data, ("bshap",), count=5))
    svg = report_svg(rep, "bshap")
    assert svg.count('class="box"') == 10
    assert "<!-- seed 2020 -->" in svg


def test_reports_are_byte_identical(tmp_path, diabetes):
    data, model = diabetes
    cfg = dict(methods=("bshap", "ces_0.1"), count=4)
    paths_a = emit_report(attribute_cohort(RunConfig(model, data, **cfg)), tmp_path / "a")
    paths_b = emit_report(attribute_cohort(RunConfig(model, data, **cfg)), tmp_path / "b")
    assert [p.name for p in paths_a] == [p.name for p in paths_b]
    assert len(paths_a) == 6
    for pa, pb in zip(paths_a, paths_b):
        assert pa.read_bytes() == pb.read_bytes()


def test_empty_method_list_warns(tmp_path, caplog):
    rep = small_cohort(methods=())
    with caplog.at_level(logging.WARNING):
        assert emit_report(rep, tmp_path / "out") == []
    assert "no methods" in caplog.text


def test_failed_cells_are_recorded():
    from shapattr.pms import AllowedRows

    data = Dataset(("a", "b"), np.asarray([[0.0, 1.0], [1.0, 0.0]]))
    f = Linear(0.0, {"a": 1.0, "b": 1.0})
    rep = attribute_cohort(RunConfig(f, data, ("pms",), explicands=[0, 1], baseline="zeros", possible=AllowedRows([{"a": 0.0, "b": 1.0}])))
    assert rep.errors and rep.scores["pms"]["a"].count(None) == 2
    summary = json.loads(json.dumps(rep.summary()))
    assert summary["pms"]["a"] is None


def test_bad_format_and_files(tmp_path):
    with pytest.raises(ValueError):
        emit_report(small_cohort(), tmp_path, formats=("pdf",))
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_dataset(empty)
    bad = tmp_path / "model.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_model(bad)
