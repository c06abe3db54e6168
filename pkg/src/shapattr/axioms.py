"""Method-agnostic axiom checks with brute-force antecedent verification.

An :class:`AxiomCheck` bundles an axiom name, a method name and an instance
dictionary.  Instance keys, by axiom:

* every axiom: ``explicand`` and ``reference`` (a baseline dict, a
  :class:`DiscreteDistribution` or a :class:`Dataset`, matching the method),
  optional ``options`` passed to the method and ``asserted`` to skip
  antecedent verification;
* dummy: ``model``, ``feature``;
* efficiency: ``model``;
* linearity: ``models`` (two), ``coefficients`` (two), optional ``scopes``
  restricting each model to its own features;
* symmetry: ``model``, ``features`` (two);
* asi: ``model``, ``feature``, ``scale``, ``shift``;
* demand_monotonicity: ``model``, ``feature``, ``raised`` (the explicand with a
  larger value of ``feature``);
* proportionality: ``model`` with ``asserted`` set (the check cannot detect
  that a model is a function of the feature sum);
* strong_monotonicity: ``models`` (``f1``, ``f2``), ``feature``, optional ``box``
  as ``(lower, upper)`` dicts.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .core import AffineReparam, Dataset, Model, Sum, agreement_mask, smoothing_tolerance
from .distributions import DiscreteDistribution, affine_transform, marginalize
from .errors import InstanceError
from .methods import bshap, ces, ces_empirical, ig, micro_shapley, rbshap
from .pms import Always, pms
from .shapley_engine import Attribution

AXIOMS = (
    "dummy",
    "efficiency",
    "linearity",
    "symmetry",
    "asi",
    "demand_monotonicity",
    "proportionality",
    "strong_monotonicity",
)
DEFAULT_TOLERANCE = 1e-9
IG_TOLERANCE = 1e-3
ANTECEDENT_GRID_CAP = 200_000
DERIVATIVE_GRID = 33


@dataclass(frozen=True)
class MethodSpec:
    name: str
    reference: str  # baseline | distribution | data
    run: Callable[[Model, dict, Any, dict], Attribution]
    tolerance: float = DEFAULT_TOLERANCE


METHODS = {
    "bshap": MethodSpec("bshap", "baseline", lambda f, x, r, o: bshap(f, x, r)),
    "ig": MethodSpec("ig", "baseline", lambda f, x, r, o: ig(f, x, r, o.get("steps", 300)), IG_TOLERANCE),
    "micro_shapley": MethodSpec("micro_shapley", "baseline", lambda f, x, r, o: micro_shapley(f, x, r, o.get("m", 4))),
    "pms": MethodSpec("pms", "baseline", lambda f, x, r, o: pms(f, x, r, o.get("possible", Always()))),
    "ces": MethodSpec("ces", "distribution", lambda f, x, r, o: ces(f, x, r)),
    "rbshap": MethodSpec("rbshap", "distribution", lambda f, x, r, o: rbshap(f, x, r)),
    "ces_empirical": MethodSpec("ces_empirical", "data", lambda f, x, r, o: ces_empirical(f, x, r, o.get("tau", 0.0))),
}


@dataclass
class AxiomCheck:
    axiom: str
    method: str
    instance: dict
    tolerance: float | None = None

    def __post_init__(self):
        if self.axiom not in AXIOMS:
            raise ValueError(f"unknown axiom {self.axiom!r}; choose from {AXIOMS}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {tuple(METHODS)}")

    @property
    def tol(self) -> float:
        return METHODS[self.method].tolerance if self.tolerance is None else self.tolerance


@dataclass
class AxiomReport:
    axiom: str
    method: str
    verdict: str
    deviation: float
    tolerance: float
    witness: dict = field(default_factory=dict)
    check: AxiomCheck | None = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def rerun(self) -> "AxiomReport":
        return check_axiom(self.check)

    def to_json(self) -> dict:
        return {
            "axiom": self.axiom,
            "method": self.method,
            "verdict": self.verdict,
            "deviation": self.deviation,
            "tolerance": self.tolerance,
            "witness": _jsonable(self.witness),
        }


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Attribution):
        return obj.scores
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (Model, DiscreteDistribution, Dataset)):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# references
# ---------------------------------------------------------------------------


def _check_reference(spec: MethodSpec, reference) -> None:
    expected = {"baseline": Mapping, "distribution": DiscreteDistribution, "data": Dataset}[spec.reference]
    if not isinstance(reference, expected):
        raise InstanceError(f"{spec.name} needs a {spec.reference} reference, got {type(reference).__name__}")


def reference_value(spec: MethodSpec, f: Model, x: Mapping, reference, options: Mapping) -> float:
    """What the scores of ``spec`` should add up to ``f(x)`` minus."""
    if spec.reference == "baseline":
        return f(reference)
    if spec.reference == "distribution":
        return reference.expectation(f)
    tol = smoothing_tolerance(reference, options.get("tau", 0.0))
    data = reference
    if not agreement_mask(data, x, data.features, tol).any():
        data = data.with_row(x)
    w = data.row_weights
    return float(w @ f.evaluate(data.columns()) / w.sum())


def _restrict(reference, spec: MethodSpec, features):
    if spec.reference == "baseline":
        return {k: reference[k] for k in features}
    if spec.reference == "distribution":
        return marginalize(reference, features)
    idx = [reference.features.index(k) for k in features]
    return Dataset(tuple(features), reference.values[:, idx], reference.weights)


def _transform(reference, spec: MethodSpec, feature, scale, shift):
    if spec.reference == "baseline":
        out = dict(reference)
        out[feature] = scale * out[feature] + shift
        return out
    if spec.reference == "distribution":
        return affine_transform(reference, feature, scale, shift)
    values = reference.values.copy()
    j = reference.features.index(feature)
    values[:, j] = scale * values[:, j] + shift
    return Dataset(reference.features, values, reference.weights)


def _pools(features, vectors, reference, spec: MethodSpec) -> dict:
    pools = {k: set() for k in features}
    for vec in vectors:
        for k in features:
            pools[k].add(float(vec[k]))
    for k in features:
        if spec.reference == "baseline":
            pools[k].add(float(reference[k]))
        elif spec.reference == "distribution":
            pools[k].update(map(float, reference.marginal(k)[0]))
        else:
            pools[k].update(map(float, np.unique(reference.column(k))))
    return {k: sorted(v) for k, v in pools.items()}


def _grid(pools: Mapping[str, list], what: str) -> tuple[dict, tuple]:
    shape = tuple(len(v) for v in pools.values())
    size = math.prod(shape)
    if size > ANTECEDENT_GRID_CAP:
        raise InstanceError(
            f"cannot verify the {what} antecedent on {size} grid points; set asserted=True to vouch for it"
        )
    grids = np.meshgrid(*[np.asarray(v) for v in pools.values()], indexing="ij")
    return {k: g.ravel() for k, g in zip(pools, grids)}, shape


def _close(a, b, scale=1.0) -> bool:
    return bool(np.all(np.abs(np.asarray(a) - np.asarray(b)) <= 1e-12 * np.maximum(1.0, scale)))


def verify_dummy(f: Model, feature: str, pools: Mapping[str, list]) -> bool:
    """``f`` never changes when only ``feature`` changes, over the pooled grid."""
    cols, shape = _grid(pools, "dummy")
    vals = f.evaluate(cols).reshape(shape)
    axis = list(pools).index(feature)
    spread = vals.max(axis=axis) - vals.min(axis=axis)
    return bool(np.all(spread <= 1e-12 * np.maximum(1.0, np.abs(vals).max())))


def verify_symmetric(f: Model, i: str, j: str, pools: Mapping[str, list]) -> bool:
    """``f`` is unchanged by swapping features ``i`` and ``j``, over the pooled grid."""
    merged = sorted(set(pools[i]) | set(pools[j]))
    pools = dict(pools, **{i: merged, j: merged})
    cols, _ = _grid(pools, "symmetry")
    swapped = dict(cols, **{i: cols[j], j: cols[i]})
    a, b = f.evaluate(cols), f.evaluate(swapped)
    return _close(a, b, np.abs(a).max())


def verify_nondecreasing(f: Model, feature: str, pools: Mapping[str, list]) -> bool:
    """``f`` never decreases as ``feature`` increases, over the pooled grid."""
    cols, shape = _grid(pools, "monotonicity")
    vals = f.evaluate(cols).reshape(shape)
    axis = list(pools).index(feature)
    return bool(np.all(np.diff(vals, axis=axis) >= -1e-12 * np.maximum(1.0, np.abs(vals).max())))


def verify_derivative_dominance(f1: Model, f2: Model, feature: str, box, resolution: int = DERIVATIVE_GRID) -> bool:
    """``d f2/d feature >= d f1/d feature >= 0`` on a grid over ``box``."""
    lower, upper = box
    names = list(lower)
    size = resolution ** len(names)
    if size > ANTECEDENT_GRID_CAP * 10:
        raise InstanceError(f"derivative grid of {size} points is too large; set asserted=True")
    axes = [np.linspace(lower[k], upper[k], resolution) for k in names]
    grids = np.meshgrid(*axes, indexing="ij")
    cols = {k: g.ravel() for k, g in zip(names, grids)}
    g1, g2 = f1.gradient(cols, feature), f2.gradient(cols, feature)
    return bool(np.all(g1 >= -1e-12) and np.all(g2 >= g1 - 1e-12))


# ---------------------------------------------------------------------------
# the checker
# ---------------------------------------------------------------------------


def _need(instance: Mapping, *keys):
    missing = [k for k in keys if k not in instance]
    if missing:
        raise InstanceError(f"instance is missing {missing}")
    return [instance[k] for k in keys]


def _verdict(check: AxiomCheck, deviation: float, witness: dict) -> AxiomReport:
    deviation = float(deviation)
    verdict = "pass" if deviation <= check.tol else "fail"
    return AxiomReport(check.axiom, check.method, verdict, deviation, check.tol, witness, check)


def check_axiom(check: AxiomCheck) -> AxiomReport:
    """Run ``check`` and report the verdict with the measured deviation."""
    spec = METHODS[check.method]
    inst = check.instance
    x, reference = _need(inst, "explicand", "reference")
    _check_reference(spec, reference)
    opts = inst.get("options", {})
    asserted = bool(inst.get("asserted", False))
    features = list(x)

    def attribute(f, xx=x, ref=reference):
        return spec.run(f, dict(xx), ref, opts)

    if check.axiom == "dummy":
        f, i = _need(inst, "model", "feature")
        if not asserted:
            pools = _pools(features, [x], reference, spec)
            if not verify_dummy(f, i, pools):
                raise InstanceError(f"{i!r} is not a dummy feature of the model")
        a = attribute(f)
        return _verdict(check, abs(a[i]), {"feature": i, "scores": a.scores})

    if check.axiom == "efficiency":
        (f,) = _need(inst, "model")
        a = attribute(f)
        target = f(x) - reference_value(spec, f, x, reference, opts)
        return _verdict(check, abs(a.total() - target), {"scores": a.scores, "sum": a.total(), "target": target})

    if check.axiom == "linearity":
        (f1, f2), (c1, c2) = _need(inst, "models", "coefficients")
        scopes = inst.get("scopes")

        def scoped(f, key):
            if not scopes or key not in scopes:
                return attribute(f).scores
            keep = list(scopes[key])
            sub = spec.run(f, {k: x[k] for k in keep}, _restrict(reference, spec, keep), opts)
            return {k: sub.scores.get(k, 0.0) for k in features}

        combined = attribute(Sum(((c1, f1), (c2, f2)))).scores
        s1, s2 = scoped(f1, "f1"), scoped(f2, "f2")
        separate = {k: c1 * s1[k] + c2 * s2[k] for k in features}
        dev = max(abs(combined[k] - separate[k]) for k in features)
        return _verdict(check, dev, {"combined": combined, "separate": separate, "f1": s1, "f2": s2})

    if check.axiom == "symmetry":
        f, (i, j) = _need(inst, "model", "features")
        if not asserted:
            if x[i] != x[j]:
                raise InstanceError("the explicand must agree on the two features")
            if spec.reference == "baseline" and reference[i] != reference[j]:
                raise InstanceError("the baseline must agree on the two features")
            if not verify_symmetric(f, i, j, _pools(features, [x], reference, spec)):
                raise InstanceError(f"the model is not symmetric in {i!r} and {j!r}")
        a = attribute(f)
        return _verdict(check, abs(a[i] - a[j]), {"features": [i, j], "scores": a.scores})

    if check.axiom == "asi":
        f, i, c, d = _need(inst, "model", "feature", "scale", "shift")
        if c == 0:
            raise InstanceError("scale must be nonzero")
        before = attribute(f)
        moved = dict(x)
        moved[i] = c * x[i] + d
        after = attribute(AffineReparam(f, i, c, d), moved, _transform(reference, spec, i, c, d))
        dev = max(abs(before[k] - after[k]) for k in features)
        return _verdict(check, dev, {"feature": i, "scale": c, "shift": d, "before": before.scores, "after": after.scores})

    if check.axiom == "demand_monotonicity":
        f, i, raised = _need(inst, "model", "feature", "raised")
        others = [k for k in features if k != i]
        if any(raised[k] != x[k] for k in others) or raised[i] < x[i]:
            raise InstanceError("raised must equal the explicand except for a larger value of the feature")
        if not asserted and not verify_nondecreasing(f, i, _pools(features, [x, raised], reference, spec)):
            raise InstanceError(f"the model is not nondecreasing in {i!r}")
        low, high = attribute(f), attribute(f, raised)
        return _verdict(
            check,
            max(0.0, low[i] - high[i]),
            {"feature": i, "low": low[i], "high": high[i], "scores_low": low.scores, "scores_high": high.scores},
        )

    if check.axiom == "proportionality":
        (f,) = _need(inst, "model")
        if not asserted:
            raise InstanceError("proportionality needs asserted=True: the model must be a function of the feature sum")
        if spec.reference == "baseline" and any(reference[k] != 0 for k in features):
            raise InstanceError("proportionality needs the zero baseline")
        a = attribute(f)
        sx = sum(x[k] for k in features)
        if sx == 0:
            raise InstanceError("explicand features sum to zero")
        ratio = a.total() / sx
        dev = max(abs(a[k] - ratio * x[k]) for k in features)
        return _verdict(check, dev, {"scores": a.scores, "ratio": ratio})

    # strong_monotonicity
    (f1, f2), i = _need(inst, "models", "feature")
    if not asserted:
        if not (f1.analytic and f2.analytic):
            raise InstanceError("derivative dominance can only be verified for analytic models; set asserted=True")
        box = inst.get("box")
        if box is None:
            pools = _pools(features, [x], reference, spec)
            box = ({k: v[0] for k, v in pools.items()}, {k: v[-1] for k, v in pools.items()})
        if not verify_derivative_dominance(f1, f2, i, box):
            raise InstanceError("the derivative dominance antecedent fails on the grid")
    a1, a2 = attribute(f1), attribute(f2)
    return _verdict(
        check,
        max(0.0, abs(a1[i]) - abs(a2[i])),
        {"feature": i, "f1": a1[i], "f2": a2[i], "scores_f1": a1.scores, "scores_f2": a2.scores},
    )
