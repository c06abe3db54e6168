"""Registry of named worked examples with expected outputs.

Every scenario computes a flat ``{label: value}`` mapping with the engine.
Expected values, their origin (``published``, ``derived`` or ``trivial``)
and tolerances live in ``data/golden.json``; :func:`run_scenario` lines the
two up.  Values are floats, booleans or strings; non-float values must match
exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .axioms import verify_derivative_dominance, verify_dummy, verify_nondecreasing, verify_symmetric
from .core import Dataset, Expression, Layered, Linear, Model
from .distributions import (
    DiscreteDistribution,
    explicit,
    independent,
    product_of_marginals,
    two_point_epsilon,
)
from .errors import UnknownScenarioError
from .methods import (
    baseline_game,
    bshap,
    ces,
    ces_empirical,
    compositional_bshap,
    conditional_game,
    ig,
    micro_shapley,
    nondecreasing_on_grid,
    rbshap,
    reduce_to_cost_sharing,
)
from .pms import AllowedRows, ExpressionPredicate, compare_with_completion, estimate_marginal, pms, possible_baseline_game
from .shapley_engine import SetFunction, fixed_permutation_marginals, shapley_exact

GOLDEN_VERSION = 1
SOURCES = ("published", "derived", "trivial")

TABLE1_EPS = 1e-6
YOUNG_EPS = 1e-3
KAHNEMAN_EPS = 0.01


# ---------------------------------------------------------------------------
# instances shared with tests and the oracle
# ---------------------------------------------------------------------------


def dummy_table(eps: float = TABLE1_EPS) -> DiscreteDistribution:
    """Correlated two-feature distribution where the explicand (5, 5) is rare."""
    return explicit(
        [
            ({"x": 5.0, "y": 5.0}, eps),
            ({"x": 1.0, "y": 1.0}, (1 - eps) / 2),
            ({"x": 1.0, "y": 2.0}, (1 - eps) / 2),
        ]
    )


def monotone_rows() -> Dataset:
    return Dataset.from_rows([{"x": 1, "y": 1}, {"x": 1, "y": 0}, {"x": 0, "y": 1}])


def two_valued_independent(p: float = 0.3, q: float = 0.6) -> DiscreteDistribution:
    """``x`` is 2 w.p. ``p`` else 1; ``y`` is 2 w.p. ``q`` else 1."""
    return independent({"x": [(2.0, p), (1.0, 1 - p)], "y": [(2.0, q), (1.0, 1 - q)]})


def uniform_grid_3x2() -> DiscreteDistribution:
    return independent({"x": [(1.0, 1 / 3), (2.0, 1 / 3), (3.0, 1 / 3)], "y": [(1.0, 0.5), (2.0, 0.5)]})


KAHNEMAN_FEATURES = ("Turnip", "Ulcer", "Medicine")
KAHNEMAN_EXPLICAND = {"Turnip": 1.0, "Ulcer": 1.0, "Medicine": 0.0}
PAIN_UNTREATED_ULCER = "Ulcer * (1 - Medicine)"
PAIN_TURNIP_ULCER = "Turnip * Ulcer"


def kahneman_distributions(e1: float = KAHNEMAN_EPS, e2: float = KAHNEMAN_EPS) -> dict:
    """Belief distributions over (Turnip, Ulcer, Medicine) as 0/1 features."""

    def rows(spec):
        return explicit(
            [(dict(zip(KAHNEMAN_FEATURES, map(float, v))), p) for v, p in spec if p > 0], KAHNEMAN_FEATURES
        )

    doctor = rows(
        [
            ((1, 1, 0), e1 * e2),
            ((1, 0, 0), e1 * (1 - e2)),
            ((0, 0, 0), (1 - e1) * (1 - e2)),
            ((0, 1, 0), (1 - e1) * e2),
        ]
    )
    patient = rows(
        [
            ((1, 1, 0), e1 * e2),
            ((1, 1, 1), e1 * (1 - e2)),
            ((0, 1, 1), (1 - e1) * (1 - e2)),
            ((0, 1, 0), (1 - e1) * e2),
        ]
    )
    return {"doctor": doctor, "patient": patient, "spouse": patient}


def kahneman_models() -> dict:
    untreated = Expression(PAIN_UNTREATED_ULCER, KAHNEMAN_FEATURES)
    return {"doctor": untreated, "patient": untreated, "spouse": Expression(PAIN_TURNIP_ULCER, KAHNEMAN_FEATURES)}


def staircase_model(n: int) -> Expression:
    """``sum_j j * x_j^j``: deliberately asymmetric in its features."""
    return Expression(" + ".join(f"{j} * x{j}^{j}" for j in range(1, n + 1)))


def ones(n: int) -> dict:
    return {f"x{j}": 1.0 for j in range(1, n + 1)}


def zeros(n: int) -> dict:
    return {f"x{j}": 0.0 for j in range(1, n + 1)}


SPARSE_ROWS = [
    {"a": 1.0, "b": 2.0, "c": 0.0},
    {"a": 2.0, "b": 2.0, "c": 1.0},
    {"a": 1.0, "b": 3.0, "c": 1.0},
    {"a": 3.0, "b": 1.0, "c": 0.0},
    {"a": 2.0, "b": 3.0, "c": 2.0},
]
SPARSE_EXPLICAND = {"a": 10.5, "b": -3.25, "c": 7.75}
SPARSE_MODEL = "2*a - b + 0.5*c^2"

EPSILON_MODEL = "x1*x2 + x3^2 - x1*x3"
EPSILON_EXPLICAND = {"x1": 1.0, "x2": 2.0, "x3": 3.0}
EPSILON_BASELINE = {"x1": 0.0, "x2": 1.0, "x3": -1.0}
EPSILON_SWEEP = (1e-2, 1e-3, 1e-4)

INDEPENDENT_MODEL = "x1*x2 + max(x2, x3) - x1^2"
INDEPENDENT_MARGINALS = {
    "x1": [(0.0, 0.2), (1.0, 0.5), (3.0, 0.3)],
    "x2": [(-1.0, 0.4), (2.0, 0.6)],
    "x3": [(0.5, 0.25), (1.5, 0.25), (4.0, 0.5)],
}
INDEPENDENT_EXPLICAND = {"x1": 3.0, "x2": 2.0, "x3": 1.5}

CUBE = "(x1 + x2)^3"
CUBE_EXPLICAND = {"x1": 5.0, "x2": 1.0}
ORIGIN2 = {"x1": 0.0, "x2": 0.0}
MICRO_SIZES = (1, 4, 16, 64)

ROUNDTRIP_MODEL = "x1^2 * x2 - 3*min(x1, x2) + x2^3"
ROUNDTRIP_EXPLICAND = {"x1": -1.0, "x2": 2.0}
ROUNDTRIP_BASELINE = {"x1": 1.5, "x2": -0.5}


def _put(out: dict, prefix: str, scores: Mapping[str, float]) -> None:
    for k, v in scores.items():
        out[f"{prefix}.{k}"] = float(v)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def _dummy_failure():
    dist = dummy_table(TABLE1_EPS)
    f1 = Expression("y^2", ("x", "y"))
    x = {"x": 5.0, "y": 5.0}
    pools = {k: sorted(set(map(float, dist.marginal(k)[0]))) for k in dist.features}
    out = {"x_is_dummy": verify_dummy(f1, "x", pools)}
    _put(out, "ces", ces(f1, x, dist).scores)
    out["expectation.eps=0.01"] = dummy_table(0.01).expectation(f1)
    return out, {"eps": TABLE1_EPS}


def _linearity_failure():
    dist = dummy_table(TABLE1_EPS)
    x = {"x": 5.0, "y": 5.0}
    f1, f2 = Expression("y^2"), Expression("x")
    out = {}
    out["f1_alone.y"] = ces(f1, {"y": 5.0}, _marginal(dist, "y")).scores["y"]
    out["f2_alone.y"] = 0.0  # y is not an input of f2
    _put(out, "f1_plus_f2", ces(Expression("y^2 + x"), x, dist).scores)
    out["expectation.f1_plus_f2"] = dist.expectation(Expression("y^2 + x"))
    out["linear_sum.y"] = out["f1_alone.y"] + out["f2_alone.y"]
    return out, {"eps": TABLE1_EPS, "f1": f1.text, "f2": f2.text}


def _marginal(dist: DiscreteDistribution, feature: str) -> DiscreteDistribution:
    values, probs = dist.marginal(feature)
    return independent({feature: list(zip(values, probs))})


def _demand_monotonicity_failure():
    data = monotone_rows()
    f = Linear(0.0, {"x": 100.0, "y": 1.0})
    low = ces_empirical(f, {"x": 1.0, "y": 0.0}, data)
    high = ces_empirical(f, {"x": 1.0, "y": 1.0}, data)
    pools = {"x": [0.0, 1.0], "y": [0.0, 1.0]}
    out = {
        "y_score.at(1,0)": low["y"],
        "y_score.at(1,1)": high["y"],
        "score_drops": high["y"] < low["y"],
        "model_nondecreasing_in_y": verify_nondecreasing(f, "y", pools),
    }
    return out, {}


def _symmetry_failure():
    p, q = 0.3, 0.6
    dist = two_valued_independent(p, q)
    f = Expression("x + y")
    x = {"x": 2.0, "y": 2.0}
    out = {"model_symmetric": verify_symmetric(f, "x", "y", {"x": [1.0, 2.0], "y": [1.0, 2.0]})}
    _put(out, "ces", ces(f, x, dist).scores)
    return out, {"p": p, "q": q}


def _strong_monotonicity_failure():
    dist = uniform_grid_3x2()
    f1, f2 = Expression("sqrt(x) + y"), Expression("x + y")
    x = {"x": 2.0, "y": 2.0}
    box = ({"x": 1.0, "y": 1.0}, {"x": 3.0, "y": 2.0})
    out = {
        "derivative_dominance": verify_derivative_dominance(f1, f2, "x", box),
        "f1.x": ces(f1, x, dist)["x"],
        "f2.x": ces(f2, x, dist)["x"],
    }
    return out, {"box": [box[0], box[1]]}


def _marginal_sum_remark():
    f = Expression("x1 * x2")
    x = {"x1": 1.0, "x2": 1.0}
    d = explicit([({"x1": 0.0, "x2": 0.0}, 0.5), ({"x1": 1.0, "x2": 1.0}, 0.5)])
    dp = product_of_marginals(d)
    a, b = rbshap(f, x, d), rbshap(f, x, dp)
    out = {"sum.D": a.total(), "sum.product_of_marginals": b.total(), "product_prob(1,1)": float(dp.probs[np.all(dp.atoms == 1.0, axis=1)].sum())}
    _put(out, "D", a.scores)
    _put(out, "product_of_marginals", b.scores)
    return out, {}


def restricted_min_game(x: Mapping[str, float]) -> SetFunction:
    """``v(S) = min over S of x``, with ``v(empty) = 0``."""
    return SetFunction(tuple(x), lambda s: min((x[k] for k in s), default=0.0), label="restricted-min")


def _min_remark():
    f = Expression("min(x1, x2)")
    x = {"x1": 5.0, "x2": 1.0}
    out = {}
    _put(out, "ig", ig(f, x, ORIGIN2).scores)
    _put(out, "bshap", bshap(f, x, ORIGIN2).scores)
    _put(out, "restricted_game", shapley_exact(restricted_min_game(x)).scores)
    notes = {
        "bshap": "Shapley of v(S) = f(x_S; baseline elsewhere)",
        "restricted_game": "Shapley of v(S) = min over the features in S, v(empty) = 0",
    }
    return out, notes


def _cube_remark():
    f = Expression(CUBE)
    out = {}
    _put(out, "ig", ig(f, CUBE_EXPLICAND, ORIGIN2, 300).scores)
    _put(out, "bshap", bshap(f, CUBE_EXPLICAND, ORIGIN2).scores)
    return out, {"steps": 300}


def _young_counterexample():
    eps = YOUNG_EPS
    f = Expression("x1 * x2 * x3")
    x = ones(3)
    dist = two_point_epsilon(x, zeros(3), eps)
    v = conditional_game(f, x, dist)
    out = {}
    _put(out, "fixed_order", fixed_permutation_marginals(v, ["x1", "x2", "x3"]).scores)
    _put(out, "reversed_order", fixed_permutation_marginals(v, ["x3", "x2", "x1"]).scores)
    _put(out, "shapley", shapley_exact(v).scores)
    return out, {"eps": eps}


def product_layers(grouping: str) -> Layered:
    if grouping == "left":
        return Layered(Expression("h * x3"), {"h": Expression("x1 * x2"), "x3": Expression("x3")})
    return Layered(Expression("x1 * h"), {"x1": Expression("x1"), "h": Expression("x2 * x3")})


def _deepshap_order():
    x, b = ones(3), zeros(3)
    out = {}
    _put(out, "left_grouping", compositional_bshap(product_layers("left"), x, b).scores)
    _put(out, "right_grouping", compositional_bshap(product_layers("right"), x, b).scores)
    _put(out, "end_to_end", bshap(Expression("x1 * x2 * x3"), x, b).scores)
    return out, {}


def _kahneman():
    dists = kahneman_distributions()
    models = kahneman_models()
    out = {}
    for who in ("patient", "spouse", "doctor"):
        a = ces(models[who], KAHNEMAN_EXPLICAND, dists[who])
        _put(out, who, a.scores)
        out[f"{who}.argmax"] = max(KAHNEMAN_FEATURES, key=lambda k: abs(a[k]))
    return out, {"eps1": KAHNEMAN_EPS, "eps2": KAHNEMAN_EPS}


def _pms_impossible_everywhere():
    out = {}
    for n in (2, 3, 4):
        f, x, b = staircase_model(n), ones(n), zeros(n)
        poss = AllowedRows([x, b])
        a = pms(f, x, b, poss)
        _put(out, f"n={n}", a.scores)
        out[f"n={n}.completion_agrees"] = compare_with_completion(possible_baseline_game(f, x, b, poss)).agree
    f, x, b = staircase_model(2), ones(2), zeros(2)
    v = possible_baseline_game(f, x, b, AllowedRows([x, b]))
    out["estimate_marginal.n=2"] = estimate_marginal([], ["x1"], v)
    return out, {"model": "sum_j j * x_j^j", "explicand": "all ones", "baseline": "all zeros"}


def _pms_boolean_3():
    f = Expression("x3", ("x1", "x2", "x3"))
    x, b = ones(3), zeros(3)
    poss = ExpressionPredicate("not (x1 == 0 and x2 == 1)")
    out = {}
    _put(out, "pms", pms(f, x, b, poss).scores)
    cmp = compare_with_completion(possible_baseline_game(f, x, b, poss))
    _put(out, "completed_shapley", cmp.completed_shapley)
    out["completion_agrees"] = cmp.agree
    return out, {"predicate": poss.text, "impossible_sets": cmp.impossible}


def _pms_boolean_n():
    n = 4
    f = Expression("x3", tuple(ones(n)))
    x, b = ones(n), zeros(n)
    poss = ExpressionPredicate("x1 == x2")
    out = {}
    _put(out, "pms", pms(f, x, b, poss).scores)
    cmp = compare_with_completion(possible_baseline_game(f, x, b, poss))
    _put(out, "completed_shapley", cmp.completed_shapley)
    out["completion_agrees"] = cmp.agree
    return out, {"n": n, "predicate": poss.text}


def _sparsity_equal_split():
    data = Dataset.from_rows(SPARSE_ROWS)
    f = Expression(SPARSE_MODEL)
    a = ces_empirical(f, SPARSE_EXPLICAND, data)
    out = {}
    _put(out, "ces", a.scores)
    out["spread"] = float(np.ptp(a.as_array()))
    _put(out, "bshap_against_mean", bshap(f, SPARSE_EXPLICAND, data.mean()).scores)
    return out, {"rows": len(data), "explicand_appended": a.provenance["explicand_appended"]}


def _bshap_as_ces_epsilon():
    f = Expression(EPSILON_MODEL)
    ref = bshap(f, EPSILON_EXPLICAND, EPSILON_BASELINE)
    out = {}
    _put(out, "bshap", ref.scores)
    norm = float(np.max(np.abs(ref.as_array())))
    devs = []
    for eps in EPSILON_SWEEP:
        a = ces(f, EPSILON_EXPLICAND, two_point_epsilon(EPSILON_EXPLICAND, EPSILON_BASELINE, eps))
        devs.append(float(np.max(np.abs(a.as_array(ref.features) - ref.as_array()))) / norm)
        out[f"relative_deviation.eps={eps:g}"] = devs[-1]
    out["deviation_shrinks"] = all(b < a for a, b in zip(devs, devs[1:]))
    out["smallest_eps_within_1e-2"] = devs[-1] <= 1e-2
    return out, {"sweep": list(EPSILON_SWEEP)}


def _rbshap_equals_ces_independent():
    f = Expression(INDEPENDENT_MODEL)
    dist = independent(INDEPENDENT_MARGINALS)
    a, b = rbshap(f, INDEPENDENT_EXPLICAND, dist), ces(f, INDEPENDENT_EXPLICAND, dist)
    out = {}
    _put(out, "rbshap", a.scores)
    _put(out, "ces", b.scores)
    out["max_difference"] = float(np.max(np.abs(a.as_array() - b.as_array(a.features))))
    return out, {"support": dist.support_size}


def _micro_convergence():
    f = Expression(CUBE)
    ref = ig(f, CUBE_EXPLICAND, ORIGIN2, 300)
    out = {}
    errors = []
    for m in MICRO_SIZES:
        a = micro_shapley(f, CUBE_EXPLICAND, ORIGIN2, m)
        _put(out, f"m={m}", a.scores)
        errors.append(float(np.max(np.abs(a.as_array(ref.features) - ref.as_array()))))
        out[f"error.m={m}"] = errors[-1]
    out["error_strictly_decreasing"] = all(b < a for a, b in zip(errors, errors[1:]))
    out["relative_error.m=64"] = errors[-1] / float(np.max(np.abs(ref.as_array())))
    return out, {"reference": "integrated gradients, 300 midpoint steps"}


def _reduction_roundtrip():
    out = {}
    lin = reduce_to_cost_sharing(Expression("-x1 + x2"), {"x1": 1.0, "x2": 1.0}, ORIGIN2)
    out["linear.infimum"] = lin.infimum
    for pt in ({"x1": 0.25, "x2": 0.75}, {"x1": 1.0, "x2": 1.0}):
        tag = f"({pt['x1']:g},{pt['x2']:g})"
        out[f"linear.f1{tag}"] = lin.f1(pt)
        out[f"linear.f2{tag}"] = lin.f2(pt)
    table = reduce_to_cost_sharing(Linear(0.0, {"x": 100.0, "y": 1.0}), {"x": 1.0, "y": 1.0}, {"x": 0.0, "y": 0.0})
    out["monotone.infimum"] = table.infimum
    out["monotone.f2_is_zero"] = all(c == 0 for c in table.f2.coefficients.values())

    f = Expression(ROUNDTRIP_MODEL)
    red = reduce_to_cost_sharing(f, ROUNDTRIP_EXPLICAND, ROUNDTRIP_BASELINE)
    lo, hi = red.box()
    out["nonlinear.f1_nondecreasing"] = nondecreasing_on_grid(red.f1, lo, hi)
    out["nonlinear.f2_nondecreasing"] = nondecreasing_on_grid(red.f2, lo, hi)
    for name, method in (("bshap", lambda g, a, b: bshap(g, a, b)), ("ig", lambda g, a, b: ig(g, a, b, 300))):
        direct = method(f, ROUNDTRIP_EXPLICAND, ROUNDTRIP_BASELINE)
        split = {k: method(red.f1, red.x_n, red.zero)[k] - method(red.f2, red.x_n, red.zero)[k] for k in direct}
        out[f"nonlinear.{name}_roundtrip_gap"] = max(abs(direct[k] - split[k]) for k in direct)
    _put(out, "nonlinear.bshap", bshap(f, ROUNDTRIP_EXPLICAND, ROUNDTRIP_BASELINE).scores)
    return out, {"scales": red.scales, "shifts": red.shifts, "infimum": red.infimum, "bound": red.bound}


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    compute: Callable[[], tuple[dict, dict]]


REGISTRY: dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("dummy-failure", "CES on a correlated table credits a feature the model ignores", _dummy_failure),
        Scenario("linearity-failure", "CES of a sum differs from the sum of CES", _linearity_failure),
        Scenario("demand-monotonicity-failure", "CES score of y falls when y rises under a monotone model", _demand_monotonicity_failure),
        Scenario("symmetry-failure", "CES splits a symmetric model unequally under an independent distribution", _symmetry_failure),
        Scenario("strong-monotonicity-failure", "larger partial derivative, smaller CES score", _strong_monotonicity_failure),
        Scenario("marginal-sum-remark", "RBShap totals under a distribution and its product of marginals", _marginal_sum_remark),
        Scenario("min-remark", "IG, BShap and the restricted min game on min(x1, x2)", _min_remark),
        Scenario("cube-remark", "IG and BShap on (x1 + x2)^3", _cube_remark),
        Scenario("young-counterexample", "fixed-order marginals versus Shapley on a rare product game", _young_counterexample),
        Scenario("deepshap-order", "layer-wise BShap depends on how a product is grouped", _deepshap_order),
        Scenario("kahneman", "three standpoints on stomach pain", _kahneman),
        Scenario("pms-impossible-everywhere", "PMS when only the two endpoints are possible", _pms_impossible_everywhere),
        Scenario("pms-boolean-3", "PMS with x1 = 0, x2 = 1 impossible and f = x3", _pms_boolean_3),
        Scenario("pms-boolean-n", "PMS with x1 != x2 impossible and f = x3", _pms_boolean_n),
        Scenario("sparsity-equal-split", "CES on data where every explicand value is unique", _sparsity_equal_split),
        Scenario("bshap-as-ces-epsilon", "CES over a two-point distribution approaches BShap", _bshap_as_ces_epsilon),
        Scenario("rbshap-equals-ces-independent", "RBShap and CES agree under independence", _rbshap_equals_ces_independent),
        Scenario("micro-convergence", "micro-feature Shapley approaches IG", _micro_convergence),
        Scenario("reduction-roundtrip", "attribution problems as differences of cost-sharing problems", _reduction_roundtrip),
    )
}


# ---------------------------------------------------------------------------
# golden values and results
# ---------------------------------------------------------------------------


def golden_path() -> Path:
    return Path(str(resources.files("shapattr").joinpath("data/golden.json")))


def load_golden(path: str | Path | None = None) -> dict:
    with open(path or golden_path()) as fh:
        golden = json.load(fh)
    if golden.get("version") != GOLDEN_VERSION:
        raise ValueError(f"golden file version {golden.get('version')!r}, expected {GOLDEN_VERSION}")
    return golden


@dataclass
class Expectation:
    label: str
    computed: object
    expected: object = None
    source: str | None = None
    tol: float | None = None
    relative: bool = False
    gating: bool = True
    deviation: float | None = None
    passed: bool | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def compare(label: str, computed, entry: Mapping | None) -> Expectation:
    if entry is None:
        return Expectation(label, computed, gating=False)
    exp = Expectation(
        label,
        computed,
        entry["value"],
        entry["source"],
        entry.get("tol", 0.0),
        bool(entry.get("relative", False)),
        bool(entry.get("gating", True)),
    )
    if isinstance(exp.expected, (bool, str)) or isinstance(computed, (bool, str)):
        exp.passed = computed == exp.expected
        exp.deviation = 0.0 if exp.passed else math.inf
        return exp
    exp.deviation = abs(float(computed) - float(exp.expected))
    scale = abs(float(exp.expected)) if exp.relative else 1.0
    exp.passed = exp.deviation <= exp.tol * scale
    return exp


@dataclass
class ScenarioResult:
    name: str
    summary: str
    expectations: list
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.expectations if e.gating and e.passed is not None)

    @property
    def values(self) -> dict:
        return {e.label: e.computed for e in self.expectations}

    @property
    def failures(self) -> list:
        return [e for e in self.expectations if e.gating and e.passed is False]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "summary": self.summary,
            "passed": self.passed,
            "expectations": [e.to_json() for e in self.expectations],
            "notes": self.notes,
        }


def compute(name: str) -> tuple[dict, dict]:
    """Engine values and notes for scenario ``name``."""
    if name not in REGISTRY:
        raise UnknownScenarioError(f"unknown scenario {name!r}; registered: {', '.join(REGISTRY)}")
    return REGISTRY[name].compute()


def run_scenario(name: str, golden: Mapping | None = None) -> ScenarioResult:
    """Compute scenario ``name`` and compare against the golden file."""
    values, notes = compute(name)
    golden = load_golden() if golden is None else golden
    entries = golden.get("scenarios", {}).get(name, {})
    exps = [compare(label, val, entries.get(label)) for label, val in values.items()]
    for label in entries:
        if label not in values:
            exps.append(Expectation(label, None, entries[label]["value"], entries[label]["source"], passed=False))
    return ScenarioResult(name, REGISTRY[name].summary, exps, _plain(notes))


def run_all(golden: Mapping | None = None) -> list[ScenarioResult]:
    golden = load_golden() if golden is None else golden
    return [run_scenario(name, golden) for name in REGISTRY]


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def render_text(results: list[ScenarioResult]) -> str:
    """Plain-text table of every expectation."""
    lines = [f"{'scenario':32} {'label':40} {'computed':>22} {'expected':>22} {'source':10} status"]
    for r in results:
        for e in r.expectations:
            status = "info" if e.passed is None else ("ok" if e.passed else ("FAIL" if e.gating else "finding"))
            lines.append(f"{r.name:32} {e.label:40} {_fmt(e.computed):>22} {_fmt(e.expected):>22} {e.source or '-':10} {status}")
    return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)
