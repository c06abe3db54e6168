"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import instances as gen  # noqa: E402
from shapattr import (  # noqa: E402
    Expression,
    bshap,
    ces,
    ces_empirical,
    compositional_bshap,
    empirical,
    ig,
    micro_shapley,
    pms,
    product_of_marginals,
    rbshap,
    reduce_to_cost_sharing,
    shapley_exact,
    two_point_epsilon,
)
from shapattr import oracle, scenarios  # noqa: E402
from shapattr.axioms import AxiomCheck, check_axiom  # noqa: E402
from shapattr.case_study import (  # noqa: E402
    RunConfig,
    attribute_cohort,
    bundled_path,
    load_dataset,
    load_model,
    select_explicands,
)
from shapattr.methods import conditional_game, nondecreasing_on_grid  # noqa: E402
from shapattr.pms import AllowedRows, Always  # noqa: E402
from shapattr.shapley_engine import fixed_permutation_marginals  # noqa: E402

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def close(got, want, tol) -> bool:
    return all(abs(g - w) <= tol for g, w in zip(got, want))


def vec(attr, feats) -> list:
    return [attr[k] for k in feats]


X2 = ("x1", "x2")


def c01_cube():
    f = Expression(scenarios.CUBE)
    x, b = scenarios.CUBE_EXPLICAND, scenarios.ORIGIN2
    a_ig, a_bs = vec(ig(f, x, b, 300), X2), vec(bshap(f, x, b), X2)
    ok = close(a_ig, (180, 36), 1e-3) and close(a_bs, (170, 46), 1e-9)
    return record(1, "cube", ok, f"IG={a_ig} BShap={a_bs}")


def c02_min():
    f = Expression("min(x1, x2)")
    x, b = {"x1": 5.0, "x2": 1.0}, scenarios.ORIGIN2
    a_ig, a_bs = vec(ig(f, x, b), X2), vec(bshap(f, x, b), X2)
    brute = oracle.perm_shapley(X2, lambda s: f(oracle.mixed(x, b, s)))
    restricted = vec(shapley_exact(scenarios.restricted_min_game(x)), X2)
    emitted = scenarios.run_scenario("min-remark")
    labels = {f"{m}.{k}" for m in ("ig", "bshap", "restricted_game") for k in X2}
    ok = (
        close(a_ig, (0, 1), 1e-9)
        and close(a_bs, (0.5, 0.5), 1e-12)
        and close(a_bs, vec(brute, X2), 1e-12)
        and close(restricted, (2.5, -1.5), 1e-12)
        and labels <= set(emitted.values)
        and emitted.passed
    )
    return record(2, "min", ok, f"IG={a_ig} BShap={a_bs} restricted={restricted}")


def c03_dummy():
    dist = scenarios.dummy_table(1e-6)
    f = Expression("y^2", ("x", "y"))
    x = {"x": 5.0, "y": 5.0}
    a = ces(f, x, dist)
    grid = [{"x": vx, "y": vy} for vx in dist.marginal("x")[0] for vy in dist.marginal("y")[0]]
    dummy = all(f(g) == f({"x": 0.0, "y": g["y"]}) for g in grid)
    got = vec(a, ("x", "y"))
    return record(3, "dummy failure", dummy and close(got, (11.25, 11.25), 1e-3), f"CES={got} x dummy={dummy}")


def c04_symmetry():
    a = ces(Expression("x + y"), {"x": 2.0, "y": 2.0}, scenarios.two_valued_independent(0.3, 0.6))
    got = vec(a, ("x", "y"))
    return record(4, "symmetry failure", close(got, (0.7, 0.4), 1e-12), f"CES={got}")


def c05_strong_monotonicity():
    dist = scenarios.uniform_grid_3x2()
    x = {"x": 2.0, "y": 2.0}
    s1 = ces(Expression("sqrt(x) + y"), x, dist)["x"]
    s2 = ces(Expression("x + y"), x, dist)["x"]
    want = (2 * math.sqrt(2) - 1 - math.sqrt(3)) / 3
    ok = abs(s1 - want) <= 1e-9 and abs(s2) <= 1e-12
    return record(5, "strong monotonicity failure", ok, f"f1 x-score={s1:.12g} (want {want:.12g}) f2 x-score={s2:.3g}")


def _ces_brute(f, x, data):
    rows = [(r, 1.0) for r in data.rows()]
    feats = data.features
    return oracle.perm_shapley(feats, lambda s: oracle.conditional_mean(rows, f, x, s))


def c06_demand_monotonicity():
    from shapattr import Linear

    data = scenarios.monotone_rows()
    f = Linear(0.0, {"x": 100.0, "y": 1.0})
    lo_x, hi_x = {"x": 1.0, "y": 0.0}, {"x": 1.0, "y": 1.0}
    lo, hi = ces_empirical(f, lo_x, data)["y"], ces_empirical(f, hi_x, data)["y"]
    blo, bhi = _ces_brute(f, lo_x, data)["y"], _ces_brute(f, hi_x, data)["y"]
    ok = abs(lo - blo) <= 1e-9 and abs(hi - bhi) <= 1e-9 and lo > 0 > hi
    ok = ok and abs(lo - 16.0833333333) < 1e-6 and abs(hi + 7.9166666667) < 1e-6
    return record(6, "demand monotonicity failure", ok, f"y-score at (1,0)={lo:.10g} at (1,1)={hi:.10g}")


def c07_marginal_sum():
    from shapattr import explicit

    f = Expression("x1 * x2")
    x = {"x1": 1.0, "x2": 1.0}
    d = explicit([({"x1": 0.0, "x2": 0.0}, 0.5), ({"x1": 1.0, "x2": 1.0}, 0.5)])
    s_d, s_p = rbshap(f, x, d).total(), rbshap(f, x, product_of_marginals(d)).total()
    ok = abs(s_d - 0.5) <= 1e-12 and abs(s_p - 0.75) <= 1e-12
    return record(7, "marginal remark", ok, f"sum under D={s_d} under product={s_p}")


def c08_rbshap_equals_ces(count=100):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(count):
        f, x, dist, _ = gen.independent_instance(rng)
        a, b = rbshap(f, x, dist), ces(f, x, dist)
        worst = max(worst, float(np.max(np.abs(a.as_array(dist.features) - b.as_array(dist.features)))))
    return record(8, "rbshap = ces under independence", worst <= 1e-9, f"max |diff| over {count} instances = {worst:.3g}")


def c09_epsilon(count=50):
    rng = np.random.default_rng(9)
    eps = (1e-2, 1e-3, 1e-4)
    worst_rel, monotone = 0.0, True
    for _ in range(count):
        feats = gen.names(int(rng.integers(2, 4)))
        f = gen.polynomial(rng, feats)
        x = gen.point(rng, feats)
        b = {p: x[p] + float(rng.choice([-1.5, -1.0, -0.5, 0.5, 1.0, 1.5])) for p in feats}
        ref = bshap(f, x, b).as_array(feats)
        scale = float(np.max(np.abs(ref)))
        devs = [float(np.max(np.abs(ces(f, x, two_point_epsilon(x, b, e)).as_array(feats) - ref))) for e in eps]
        if scale == 0:
            monotone &= max(devs) == 0
            continue
        worst_rel = max(worst_rel, devs[-1] / scale)
        monotone &= devs[0] > devs[1] > devs[2]
    ok = worst_rel <= 1e-2 and monotone
    return record(9, "two-point CES approaches BShap", ok, f"max relative deviation at 1e-4 = {worst_rel:.3g}, shrinking={monotone}")


def c10_reduction(count=50):
    rng = np.random.default_rng(10)
    worst, monotone = 0.0, True
    for _ in range(count):
        feats = gen.names(int(rng.integers(2, 4)))
        f = gen.polynomial(rng, feats, terms=3)
        x, b = gen.point(rng, feats), gen.point(rng, feats)
        red = reduce_to_cost_sharing(f, x, b, resolution=17)
        lo, hi = red.box()
        monotone &= nondecreasing_on_grid(red.f1, lo, hi, 17) and nondecreasing_on_grid(red.f2, lo, hi, 17)
        direct = bshap(f, x, b).as_array(feats)
        split = bshap(red.f1, red.x_n, red.zero).as_array(feats) - bshap(red.f2, red.x_n, red.zero).as_array(feats)
        worst = max(worst, float(np.max(np.abs(direct - split))))
    ok = worst <= 1e-9 and monotone
    return record(10, "cost-sharing round trip", ok, f"max gap over {count} instances = {worst:.3g}, parts nondecreasing={monotone}")


def c11_micro():
    f = Expression(scenarios.CUBE)
    x, b = scenarios.CUBE_EXPLICAND, scenarios.ORIGIN2
    ref = ig(f, x, b, 2000).as_array(X2)
    errs = [float(np.max(np.abs(micro_shapley(f, x, b, m).as_array(X2) - ref))) for m in (1, 4, 16, 64)]
    walk = oracle.micro_walk(X2, f, x, b, 16)
    agrees = close(vec(micro_shapley(f, x, b, 16), X2), vec(walk, X2), 1e-9)
    ok = all(a > c for a, c in zip(errs, errs[1:])) and errs[-1] < 0.01 * np.max(np.abs(ref)) and agrees
    return record(11, "micro-feature convergence", ok, f"errors m=1,4,16,64: {[round(e, 5) for e in errs]}")


def c12_counterexamples():
    x, zero = scenarios.ones(3), scenarios.zeros(3)
    f = Expression("x1 * x2 * x3")
    v = conditional_game(f, x, two_point_epsilon(x, zero, 1e-3))
    order = ("x1", "x2", "x3")
    fixed = vec(fixed_permutation_marginals(v, order), order)
    exact = vec(shapley_exact(v), order)
    left = vec(compositional_bshap(scenarios.product_layers("left"), x, zero), order)
    right = vec(compositional_bshap(scenarios.product_layers("right"), x, zero), order)
    end = vec(bshap(f, x, zero), order)
    ok = (
        close(fixed, (0, 0, 1), 5e-3)
        and close(exact, (1 / 3,) * 3, 1e-9)
        and left == [0.25, 0.25, 0.5]
        and right == [0.5, 0.25, 0.25]
        and close(end, (1 / 3,) * 3, 1e-12)
    )
    return record(12, "fixed-order and layer-wise counterexamples", ok, f"fixed={fixed} left={left} right={right}")


def c13_pms(count=100):
    worst_equal = 0.0
    for n in (2, 3, 4):
        f, x, b = scenarios.staircase_model(n), scenarios.ones(n), scenarios.zeros(n)
        a = pms(f, x, b, AllowedRows([x, b]))
        share = (f(x) - f(b)) / n
        worst_equal = max(worst_equal, max(abs(a[k] - share) for k in x))
    rng = np.random.default_rng(13)
    worst_always, worst_eff = 0.0, 0.0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        feats = gen.names(n)
        f = gen.polynomial(rng, feats)
        x, b = gen.point(rng, feats), gen.point(rng, feats)
        always = pms(f, x, b, Always()).as_array(feats)
        worst_always = max(worst_always, float(np.max(np.abs(always - bshap(f, x, b).as_array(feats)))))
        poss = gen.predicate_for(gen.random_possible_sets(rng, n), feats)
        one, zero = {p: 1.0 for p in feats}, {p: 0.0 for p in feats}
        a = pms(f, one, zero, poss)
        target = f(one) - f(zero)
        worst_eff = max(worst_eff, abs(a.total() - target) / max(1.0, abs(target)))
    ok = worst_equal <= 1e-12 and worst_always <= 1e-12 and worst_eff <= 1e-12
    detail = f"equal-share dev={worst_equal:.3g} always-possible dev={worst_always:.3g} efficiency dev={worst_eff:.3g}"
    return record(13, "possible-marginals Shapley", ok, detail)


def _symmetrised(rng, feats):
    text = gen.polynomial_text(rng, feats, terms=3)
    swapped = text.replace("x1", "#").replace("x2", "x1").replace("#", "x2")
    return Expression(f"{text} + {swapped}", tuple(feats))


def _monotone_in_x1(rng, feats):
    rest = gen.polynomial_text(rng, feats[1:], terms=2) if len(feats) > 1 else "0"
    a, c = int(rng.integers(1, 4)), int(rng.integers(0, 3))
    return Expression(f"{a}*x1^3 + {c}*x1 + {a}*x1*{feats[-1]}^2 + {rest}", tuple(feats))


def c14_axioms(count=100, prop_count=50):
    rng = np.random.default_rng(14)
    worst = {k: 0.0 for k in ("dummy", "linearity", "symmetry", "asi", "demand_monotonicity")}
    for _ in range(count):
        feats = gen.names(int(rng.integers(2, 5)))
        x, b = gen.point(rng, feats), gen.point(rng, feats)
        base = {"explicand": x, "reference": b}
        others = [p for p in feats if p != feats[0]]
        checks = {
            "dummy": dict(base, model=Expression(gen.polynomial_text(rng, others), tuple(feats)), feature=feats[0]),
            "linearity": dict(
                base,
                models=(gen.polynomial(rng, feats), gen.polynomial(rng, feats)),
                coefficients=(float(rng.normal()), float(rng.normal())),
            ),
            "asi": dict(
                base,
                model=gen.polynomial(rng, feats),
                feature=str(rng.choice(feats)),
                scale=float(rng.choice([-2.0, -0.5, 0.5, 3.0])),
                shift=float(rng.integers(-3, 4)),
            ),
        }
        xs, bs = dict(x, x2=x["x1"]), dict(b, x2=b["x1"])
        checks["symmetry"] = {"explicand": xs, "reference": bs, "model": _symmetrised(rng, feats), "features": ("x1", "x2")}
        raised = dict(x, x1=x["x1"] + float(rng.integers(1, 5)) / 4)
        checks["demand_monotonicity"] = dict(base, model=_monotone_in_x1(rng, feats), feature="x1", raised=raised)
        for axiom, inst in checks.items():
            rep = check_axiom(AxiomCheck(axiom, "bshap", inst, tolerance=1e-9))
            worst[axiom] = max(worst[axiom], rep.deviation if rep.passed else math.inf)
    worst_prop = 0.0
    for _ in range(prop_count):
        feats = gen.names(int(rng.integers(2, 5)))
        s = "(" + " + ".join(feats) + ")"
        g = f"{int(rng.integers(1, 4))}*{s}^3 - {int(rng.integers(0, 4))}*{s}^2 + {int(rng.integers(-3, 4))}*{s}"
        x = {p: float(rng.integers(1, 9)) / 4 for p in feats}
        inst = {"explicand": x, "reference": {p: 0.0 for p in feats}, "model": Expression(g, feats), "asserted": True}
        rep = check_axiom(AxiomCheck("proportionality", "ig", inst, tolerance=1e-6))
        worst_prop = max(worst_prop, rep.deviation if rep.passed else math.inf)
    ok = all(v <= 1e-9 for v in worst.values()) and worst_prop <= 1e-6
    detail = ", ".join(f"{k}={v:.2g}" for k, v in worst.items()) + f", ig proportionality={worst_prop:.2g}"
    return record(14, "BShap axioms and IG proportionality", ok, detail)


ZERO_COEFFICIENT = ("age", "sex", "s1", "s2", "s3", "s4", "s6")


def c15_case_study():
    data = load_dataset(bundled_path("diabetes.csv"))
    model = load_model(bundled_path("diabetes_linear.json"))
    idx = select_explicands(data, 20, 2020)
    rep = attribute_cohort(RunConfig(model, data, ("bshap", "ces", "ces_0.1", "ces_0.2"), explicands=idx))
    bs_zero = all(v == 0.0 for k in ZERO_COEFFICIENT for v in rep.scores["bshap"][k])
    ces_nonzero = any(abs(v) > 1e-9 for k in ZERO_COEFFICIENT for v in rep.scores["ces"][k])
    x = {k: v + 1e-6 * (j + 1) for j, (k, v) in enumerate(data.row(idx[0]).items())}
    unique = ces_empirical(model, x, data).as_array(data.features)
    equal = float(np.ptp(unique)) <= 1e-9
    taus = [np.asarray([rep.scores[m][k] for k in data.features]) for m in ("ces", "ces_0.1", "ces_0.2")]
    changed = float(max(np.max(np.abs(taus[0] - taus[1])), np.max(np.abs(taus[1] - taus[2]))))
    ok = bs_zero and ces_nonzero and equal and changed > 1e-6
    detail = f"bshap zeros={bs_zero} ces nonzero on a zero-coefficient feature={ces_nonzero} unique-explicand spread={np.ptp(unique):.2g} max change across tau={changed:.3g}"
    return record(15, "diabetes case study", ok, detail)


def c16_algorithm_consistency(count=50):
    rng = np.random.default_rng(16)
    worst = 0.0
    for _ in range(count):
        feats = gen.names(int(rng.integers(2, 5)))
        data, x = gen.dataset_with(rng, feats, int(rng.integers(4, 13)))
        f = gen.polynomial(rng, feats)
        a = ces_empirical(f, x, data, 0.0).as_array(feats)
        b = ces(f, x, empirical(data)).as_array(feats)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return record(16, "empirical CES = CES over empirical distribution", worst <= 1e-9, f"max |diff| over {count} datasets = {worst:.3g}")


CRITERIA = [
    c01_cube,
    c02_min,
    c03_dummy,
    c04_symmetry,
    c05_strong_monotonicity,
    c06_demand_monotonicity,
    c07_marginal_sum,
    c08_rbshap_equals_ces,
    c09_epsilon,
    c10_reduction,
    c11_micro,
    c12_counterexamples,
    c13_pms,
    c14_axioms,
    c15_case_study,
    c16_algorithm_consistency,
]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[c.__name__ for c in CRITERIA])
def test_criterion(criterion):
    assert criterion()


if __name__ == "__main__":
    passed = sum(bool(c()) for c in CRITERIA)
    print(f"{passed}/{len(CRITERIA)} criteria pass")
    sys.exit(0 if passed == len(CRITERIA) else 1)
