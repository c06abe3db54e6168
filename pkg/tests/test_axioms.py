import math

import numpy as np
import pytest

from shapattr import Dataset, Expression, Linear, explicit
from shapattr.axioms import AxiomCheck, check_axiom, verify_derivative_dominance
from shapattr.errors import InstanceError
from shapattr import scenarios

XY = {"x": 5.0, "y": 5.0}


def run(axiom, method, **inst):
    return check_axiom(AxiomCheck(axiom, method, inst))


def test_dummy_fails_for_ces_and_holds_for_bshap():
    dist = scenarios.dummy_table(1e-6)
    f = Expression("y^2", ("x", "y"))
    ces = run("dummy", "ces", explicand=XY, reference=dist, model=f, feature="x")
    assert not ces.passed and ces.deviation == pytest.approx(11.25, abs=1e-3)
    assert run("dummy", "bshap", explicand=XY, reference={"x": 1.0, "y": 0.0}, model=f, feature="x").passed


def test_dummy_antecedent_is_verified():
    with pytest.raises(InstanceError):
        run("dummy", "bshap", explicand=XY, reference={"x": 0.0, "y": 0.0}, model=Expression("x*y"), feature="x")


def test_demand_monotonicity_failure_witness():
    data = scenarios.monotone_rows()
    rep = run(
        "demand_monotonicity",
        "ces_empirical",
        explicand={"x": 1.0, "y": 0.0},
        reference=data,
        model=Linear(0.0, {"x": 100.0, "y": 1.0}),
        feature="y",
        raised={"x": 1.0, "y": 1.0},
    )
    assert not rep.passed
    assert rep.witness["low"] == pytest.approx(16.0833333, abs=1e-6)
    assert rep.witness["high"] == pytest.approx(-7.9166667, abs=1e-6)


def test_symmetry_failure():
    rep = run("symmetry", "ces", explicand={"x": 2.0, "y": 2.0}, reference=scenarios.two_valued_independent(0.3, 0.6), model=Expression("x + y"), features=("x", "y"))
    assert not rep.passed and rep.deviation == pytest.approx(0.3, abs=1e-12)


def test_strong_monotonicity_failure():
    rep = run(
        "strong_monotonicity",
        "ces",
        explicand={"x": 2.0, "y": 2.0},
        reference=scenarios.uniform_grid_3x2(),
        models=(Expression("sqrt(x) + y"), Expression("x + y")),
        feature="x",
        box=({"x": 1.0, "y": 1.0}, {"x": 3.0, "y": 2.0}),
    )
    assert not rep.passed
    assert rep.deviation == pytest.approx((2 * math.sqrt(2) - 1 - math.sqrt(3)) / 3, abs=1e-9)


def test_derivative_dominance_detects_violation():
    box = ({"x": 1.0}, {"x": 3.0})
    assert verify_derivative_dominance(Expression("sqrt(x)"), Expression("x"), "x", box)
    assert not verify_derivative_dominance(Expression("x^2"), Expression("x"), "x", box)


def test_linearity_with_scopes_fails_for_ces():
    dist = scenarios.dummy_table(1e-6)
    rep = run(
        "linearity",
        "ces",
        explicand=XY,
        reference=dist,
        models=(Expression("y^2"), Expression("x")),
        coefficients=(1.0, 1.0),
        scopes={"f1": ["y"], "f2": ["x"]},
    )
    assert not rep.passed
    assert rep.witness["combined"]["y"] == pytest.approx(13.25, abs=1e-3)


def test_asi_efficiency_and_proportionality():
    f = Expression("x^2*y - y")
    base = {"explicand": {"x": 2.0, "y": 1.0}, "reference": {"x": 0.5, "y": -1.0}}
    assert run("asi", "bshap", model=f, feature="x", scale=-2.0, shift=3.0, **base).passed
    assert run("efficiency", "bshap", model=f, **base).passed
    assert run("efficiency", "ig", model=f, **base).passed
    g = Expression("(x + y)^3")
    rep = run("proportionality", "ig", explicand={"x": 2.0, "y": 1.0}, reference={"x": 0.0, "y": 0.0}, model=g, asserted=True)
    assert rep.passed
    with pytest.raises(InstanceError):
        run("proportionality", "ig", explicand={"x": 2.0, "y": 1.0}, reference={"x": 0.0, "y": 0.0}, model=g)


def test_rbshap_efficiency_against_mean():
    dist = explicit([({"a": 0.0, "b": 1.0}, 0.25), ({"a": 2.0, "b": 0.0}, 0.75)])
    rep = run("efficiency", "rbshap", explicand={"a": 1.0, "b": 1.0}, reference=dist, model=Expression("a*b + b^2"))
    assert rep.passed


def test_reference_kind_and_unknown_names():
    with pytest.raises(InstanceError):
        run("efficiency", "ces", explicand={"a": 1.0}, reference={"a": 0.0}, model=Expression("a"))
    with pytest.raises(ValueError):
        AxiomCheck("anonymity", "bshap", {})
    with pytest.raises(ValueError):
        AxiomCheck("dummy", "lime", {})
    with pytest.raises(InstanceError):
        run("dummy", "bshap", explicand={"a": 1.0})


def test_report_json_and_rerun():
    rep = run("efficiency", "ces_empirical", explicand={"a": 1.0}, reference=Dataset(("a",), np.asarray([[1.0], [3.0]])), model=Expression("a^2"))
    obj = rep.to_json()
    assert obj["verdict"] == "pass" and obj["axiom"] == "efficiency"
    assert rep.rerun().deviation == rep.deviation
