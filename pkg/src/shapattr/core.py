"""Feature vectors, datasets and the model families used throughout the engine.

Models evaluate column-wise: ``model.evaluate(columns)`` takes a mapping from
feature name to a 1-D float array and returns one output per row.  Calling a
model on a single feature vector (a plain ``dict``) wraps that.
"""

from __future__ import annotations

import csv
import io
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import expression as ex
from .errors import (
    CapabilityError,
    ConstructionError,
    EvaluationError,
    LookupMissError,
    ParseError,
)

FeatureVector = dict  # ordered feature name -> float
Columns = Mapping[str, np.ndarray]


def feature_vector(values: Mapping[str, float] | Sequence[float], names: Sequence[str] | None = None) -> dict:
    """Build a validated, ordered feature vector.

    ``values`` is either a mapping (optionally reordered by ``names``) or a
    sequence aligned with ``names``.
    """
    if isinstance(values, Mapping):
        keys = list(names) if names is not None else list(values)
        try:
            out = {k: float(values[k]) for k in keys}
        except KeyError as exc:
            raise EvaluationError(f"missing feature {exc.args[0]!r}") from None
    else:
        if names is None or len(names) != len(values):
            raise ConstructionError("a value sequence needs a feature name list of the same length")
        out = {k: float(v) for k, v in zip(names, values)}
    if len(set(out)) != len(out):
        raise ConstructionError("duplicate feature names")
    bad = [k for k, v in out.items() if not math.isfinite(v)]
    if bad:
        raise ConstructionError(f"non-finite feature values for {bad}")
    return out


def mix(x: Mapping[str, float], baseline: Mapping[str, float], subset: Iterable[str]) -> dict:
    """The vector taking ``x`` on ``subset`` and ``baseline`` elsewhere."""
    chosen = set(subset)
    return {k: (x[k] if k in chosen else baseline[k]) for k in baseline}


def _columns_of(x: Mapping[str, float]) -> dict:
    return {k: np.asarray([v], dtype=float) for k, v in x.items()}


def _length(columns: Columns) -> int:
    for v in columns.values():
        return len(v)
    return 1


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


class Model(ABC):
    """A pure real-valued function of named real features."""

    @property
    @abstractmethod
    def features(self) -> tuple[str, ...]:
        """Feature names the model reads, in a stable order."""

    @abstractmethod
    def evaluate(self, columns: Columns) -> np.ndarray:
        """Evaluate row-wise on equal-length feature columns."""

    @property
    def analytic(self) -> bool:
        """Whether :meth:`gradient` returns exact partial derivatives."""
        return False

    @property
    def piecewise_constant(self) -> bool:
        return False

    def gradient(self, columns: Columns, wrt: str) -> np.ndarray:
        raise CapabilityError(
            f"{type(self).__name__} has no analytic derivative; "
            "use mode='central-difference'"
        )

    @abstractmethod
    def to_json(self) -> dict:
        ...

    def __call__(self, x: Mapping[str, float]) -> float:
        return float(self.evaluate(_columns_of(x))[0])

    def _check(self, columns: Columns) -> None:
        for name in self.features:
            if name not in columns:
                raise EvaluationError(f"missing feature {name!r}")


@dataclass(frozen=True)
class Linear(Model):
    intercept: float
    coefficients: Mapping[str, float]

    @property
    def features(self):
        return tuple(self.coefficients)

    @property
    def analytic(self):
        return True

    def evaluate(self, columns):
        self._check(columns)
        out = np.full(_length(columns), float(self.intercept))
        for name, c in self.coefficients.items():
            out = out + c * np.asarray(columns[name], dtype=float)
        return out

    def gradient(self, columns, wrt):
        return np.full(_length(columns), float(self.coefficients.get(wrt, 0.0)))

    def to_json(self):
        return {"type": "linear", "intercept": self.intercept, "coefficients": dict(self.coefficients)}


class Expression(Model):
    """A model authored as an infix expression, e.g. ``"(x1 + x2)^3"``."""

    def __init__(self, text: str, features: Sequence[str] | None = None):
        self.text = text
        self.tree = ex.parse(text)
        found = ex.variables(self.tree)
        if features is None:
            self._features = found
        else:
            missing = set(found) - set(features)
            if missing:
                raise ParseError(f"expression uses undeclared features {sorted(missing)}")
            self._features = tuple(features)

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and (self.tree, self._features) == (other.tree, other._features)

    def __hash__(self):
        return hash((self.tree, self._features))

    @property
    def features(self):
        return self._features

    @property
    def analytic(self):
        return True

    def evaluate(self, columns):
        self._check(columns)
        value = ex.evaluate(self.tree, columns)
        return np.broadcast_to(np.asarray(value, dtype=float), (_length(columns),)).copy()

    def gradient(self, columns, wrt):
        self._check(columns)
        d = ex.derivative(self.tree, columns, wrt)
        return np.broadcast_to(np.asarray(d, dtype=float), (_length(columns),)).copy()

    def to_json(self):
        return {"type": "expression", "expr": self.text, "features": list(self._features)}


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    """Rows with ``feature < threshold`` go left; ties go right."""

    feature: str
    threshold: float
    left: "Leaf | Split"
    right: "Leaf | Split"


def _tree_features(node, acc: dict) -> None:
    if isinstance(node, Split):
        acc.setdefault(node.feature, None)
        _tree_features(node.left, acc)
        _tree_features(node.right, acc)


def _tree_eval(node, columns, idx: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[idx] = node.value
        return
    goes_left = np.asarray(columns[node.feature], dtype=float)[idx] < node.threshold
    _tree_eval(node.left, columns, idx[goes_left], out)
    _tree_eval(node.right, columns, idx[~goes_left], out)


def _tree_json(node):
    if isinstance(node, Leaf):
        return {"value": node.value}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _tree_json(node.left),
        "right": _tree_json(node.right),
    }


def _tree_from_json(obj):
    if "value" in obj:
        return Leaf(float(obj["value"]))
    try:
        return Split(
            str(obj["feature"]),
            float(obj["threshold"]),
            _tree_from_json(obj["left"]),
            _tree_from_json(obj["right"]),
        )
    except KeyError as exc:
        raise ParseError(f"tree node missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class TreeEnsemble(Model):
    """Average of axis-aligned decision trees, uniform unless weights are given."""

    trees: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        if not self.trees:
            raise ConstructionError("a tree ensemble needs at least one tree")
        if self.weights is not None and len(self.weights) != len(self.trees):
            raise ConstructionError("one weight per tree is required")

    @property
    def features(self):
        acc: dict = {}
        for t in self.trees:
            _tree_features(t, acc)
        return tuple(acc)

    @property
    def piecewise_constant(self):
        return True

    def evaluate(self, columns):
        self._check(columns)
        n = _length(columns)
        w = np.full(len(self.trees), 1.0 / len(self.trees)) if self.weights is None else np.asarray(self.weights, float)
        total = np.zeros(n)
        for weight, tree in zip(w, self.trees):
            out = np.empty(n)
            _tree_eval(tree, columns, np.arange(n), out)
            total += weight * out
        return total

    def to_json(self):
        obj = {"type": "tree_ensemble", "trees": [_tree_json(t) for t in self.trees]}
        if self.weights is not None:
            obj["weights"] = list(self.weights)
        return obj


class LookupTable(Model):
    """Explicit function table keyed by exact feature values."""

    def __init__(self, features: Sequence[str], rows: Iterable[tuple[Mapping[str, float], float]], default: float | None = None):
        self._features = tuple(features)
        self.table = {}
        for values, y in rows:
            key = tuple(float(values[k]) for k in self._features)
            self.table[key] = float(y)
        self.default = default

    def __repr__(self):
        return f"LookupTable({self._features}, {len(self.table)} rows)"

    @property
    def features(self):
        return self._features

    @property
    def piecewise_constant(self):
        return True

    def evaluate(self, columns):
        self._check(columns)
        cols = [np.asarray(columns[k], dtype=float) for k in self._features]
        n = _length(columns)
        out = np.empty(n)
        for r in range(n):
            key = tuple(float(c[r]) for c in cols)
            y = self.table.get(key, self.default)
            if y is None:
                raise LookupMissError(f"no table row for {dict(zip(self._features, key))}")
            out[r] = y
        return out

    def to_json(self):
        obj = {
            "type": "table",
            "features": list(self._features),
            "rows": [{"values": dict(zip(self._features, k)), "value": v} for k, v in self.table.items()],
        }
        if self.default is not None:
            obj["default"] = self.default
        return obj


@dataclass(frozen=True)
class Sum(Model):
    """Weighted sum of child models: ``sum(w * f)``."""

    terms: tuple  # of (weight, Model)

    @property
    def features(self):
        acc: dict = {}
        for _, m in self.terms:
            for k in m.features:
                acc.setdefault(k, None)
        return tuple(acc)

    @property
    def analytic(self):
        return all(m.analytic for _, m in self.terms)

    @property
    def piecewise_constant(self):
        return any(m.piecewise_constant for _, m in self.terms)

    def evaluate(self, columns):
        out = np.zeros(_length(columns))
        for w, m in self.terms:
            out = out + w * m.evaluate(columns)
        return out

    def gradient(self, columns, wrt):
        if not self.analytic:
            return super().gradient(columns, wrt)
        out = np.zeros(_length(columns))
        for w, m in self.terms:
            out = out + w * m.gradient(columns, wrt)
        return out

    def to_json(self):
        return {"type": "sum", "terms": [{"weight": w, "model": m.to_json()} for w, m in self.terms]}


@dataclass(frozen=True)
class AffineReparam(Model):
    """``model`` evaluated with ``feature`` replaced by ``(x - shift) / scale``."""

    model: Model
    feature: str
    scale: float
    shift: float

    def __post_init__(self):
        if self.scale == 0:
            raise ConstructionError("affine reparametrisation needs a nonzero scale")

    @property
    def features(self):
        base = self.model.features
        return base if self.feature in base else base + (self.feature,)

    @property
    def analytic(self):
        return self.model.analytic

    @property
    def piecewise_constant(self):
        return self.model.piecewise_constant

    def _inner(self, columns):
        if self.feature not in columns:
            raise EvaluationError(f"missing feature {self.feature!r}")
        inner = dict(columns)
        inner[self.feature] = (np.asarray(columns[self.feature], dtype=float) - self.shift) / self.scale
        return inner

    def evaluate(self, columns):
        return self.model.evaluate(self._inner(columns))

    def gradient(self, columns, wrt):
        if not self.analytic:
            return super().gradient(columns, wrt)
        g = self.model.gradient(self._inner(columns), wrt)
        return g / self.scale if wrt == self.feature else g

    def to_json(self):
        return {
            "type": "affine_reparam",
            "model": self.model.to_json(),
            "feature": self.feature,
            "scale": self.scale,
            "shift": self.shift,
        }


@dataclass(frozen=True)
class Layered(Model):
    """An outer model over named intermediate nodes, each a model of base features."""

    outer: Model
    nodes: Mapping[str, Model]

    def __post_init__(self):
        missing = set(self.outer.features) - set(self.nodes)
        if missing:
            raise ConstructionError(f"outer model reads undefined nodes {sorted(missing)}")

    @property
    def features(self):
        acc: dict = {}
        for m in self.nodes.values():
            for k in m.features:
                acc.setdefault(k, None)
        return tuple(acc)

    @property
    def analytic(self):
        return self.outer.analytic and all(m.analytic for m in self.nodes.values())

    @property
    def piecewise_constant(self):
        return self.outer.piecewise_constant or any(m.piecewise_constant for m in self.nodes.values())

    def node_values(self, columns: Columns) -> dict:
        return {name: m.evaluate(columns) for name, m in self.nodes.items()}

    def evaluate(self, columns):
        return self.outer.evaluate(self.node_values(columns))

    def gradient(self, columns, wrt):
        if not self.analytic:
            return super().gradient(columns, wrt)
        hidden = self.node_values(columns)
        out = np.zeros(_length(columns))
        for name, m in self.nodes.items():
            out = out + self.outer.gradient(hidden, name) * m.gradient(columns, wrt)
        return out

    def to_json(self):
        return {
            "type": "layered",
            "outer": self.outer.to_json(),
            "nodes": {k: m.to_json() for k, m in self.nodes.items()},
        }


def model_from_json(obj: Mapping) -> Model:
    """Build a model from its JSON description."""
    try:
        kind = obj["type"]
        if kind == "linear":
            return Linear(float(obj.get("intercept", 0.0)), {k: float(v) for k, v in obj["coefficients"].items()})
        if kind == "expression":
            return Expression(obj["expr"], obj.get("features"))
        if kind == "tree_ensemble":
            w = obj.get("weights")
            return TreeEnsemble(tuple(_tree_from_json(t) for t in obj["trees"]), None if w is None else tuple(map(float, w)))
        if kind == "table":
            rows = [(r["values"], r["value"]) for r in obj["rows"]]
            return LookupTable(obj["features"], rows, obj.get("default"))
        if kind == "sum":
            return Sum(tuple((float(t.get("weight", 1.0)), model_from_json(t["model"])) for t in obj["terms"]))
        if kind == "affine_reparam":
            return AffineReparam(model_from_json(obj["model"]), obj["feature"], float(obj["scale"]), float(obj["shift"]))
        if kind == "layered":
            return Layered(model_from_json(obj["outer"]), {k: model_from_json(v) for k, v in obj["nodes"].items()})
    except KeyError as exc:
        raise ParseError(f"model JSON missing field {exc.args[0]!r}") from None
    raise ParseError(f"unknown model type {obj.get('type')!r}")


def eval_model(model: Model, x: Mapping[str, float]) -> float:
    return model(x)


def partial_derivative(
    model: Model,
    x: Mapping[str, float],
    feature: str,
    mode: str = "analytic",
    h: float = 1e-6,
) -> float:
    """``d model / d feature`` at ``x``.

    ``central-difference`` uses the step ``h * max(1, |x_i|)``.
    """
    if mode == "analytic":
        return float(model.gradient(_columns_of(x), feature)[0])
    if mode != "central-difference":
        raise ValueError(f"unknown derivative mode {mode!r}")
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    if feature not in x:
        raise EvaluationError(f"missing feature {feature!r}")
    step = h * max(1.0, abs(x[feature]))
    up, down = dict(x), dict(x)
    up[feature] += step
    down[feature] -= step
    return (model(up) - model(down)) / (2 * step)


def gradient_columns(model: Model, columns: Columns, feature: str, mode: str = "analytic", h: float = 1e-6) -> np.ndarray:
    """Column-wise version of :func:`partial_derivative`."""
    if mode == "analytic":
        return model.gradient(columns, feature)
    if mode != "central-difference":
        raise ValueError(f"unknown derivative mode {mode!r}")
    base = np.asarray(columns[feature], dtype=float)
    step = h * np.maximum(1.0, np.abs(base))
    up, down = dict(columns), dict(columns)
    up[feature] = base + step
    down[feature] = base - step
    return (model.evaluate(up) - model.evaluate(down)) / (2 * step)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    """Rows of feature values with optional nonnegative row weights."""

    features: tuple
    values: np.ndarray  # shape (rows, features)
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.features):
            raise ConstructionError("dataset values must be a rows x features matrix")
        if len(set(self.features)) != len(self.features):
            raise ConstructionError("duplicate feature names")
        if not np.all(np.isfinite(values)):
            raise ConstructionError("dataset contains non-finite values")
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (values.shape[0],) or np.any(w < 0) or (len(w) and w.sum() <= 0):
                raise ConstructionError("weights must be nonnegative, one per row, with positive sum")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, float]], features: Sequence[str] | None = None, weights=None) -> "Dataset":
        if features is None:
            if not rows:
                raise ConstructionError("cannot infer features from zero rows")
            features = list(rows[0])
        try:
            values = [[float(r[k]) for k in features] for r in rows]
        except KeyError as exc:
            raise ConstructionError(f"row is missing feature {exc.args[0]!r}") from None
        return cls(tuple(features), np.asarray(values, dtype=float).reshape(len(rows), len(features)), weights)

    def __len__(self):
        return self.values.shape[0]

    @property
    def row_weights(self) -> np.ndarray:
        return np.ones(len(self)) if self.weights is None else self.weights

    def row(self, i: int) -> dict:
        return dict(zip(self.features, map(float, self.values[i])))

    def rows(self) -> list[dict]:
        return [self.row(i) for i in range(len(self))]

    def columns(self) -> dict:
        return {k: self.values[:, j] for j, k in enumerate(self.features)}

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.features.index(name)]

    def std(self) -> dict:
        """Per-feature (weighted, population) standard deviation."""
        w = self.row_weights / self.row_weights.sum()
        mean = w @ self.values
        var = w @ (self.values - mean) ** 2
        return dict(zip(self.features, map(float, np.sqrt(var))))

    def mean(self) -> dict:
        w = self.row_weights / self.row_weights.sum()
        return dict(zip(self.features, map(float, w @ self.values)))

    def subset(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.features, self.values[mask], None if self.weights is None else self.weights[mask])

    def with_row(self, x: Mapping[str, float], weight: float = 1.0) -> "Dataset":
        row = np.asarray([[float(x[k]) for k in self.features]])
        weights = None if self.weights is None else np.append(self.weights, weight)
        if self.weights is None and weight != 1.0:
            weights = np.append(np.ones(len(self)), weight)
        return Dataset(self.features, np.vstack([self.values, row]), weights)


def smoothing_tolerance(dataset: Dataset, tau: float) -> dict | None:
    """Per-feature closeness ``tau * std``; ``None`` (exact agreement) when tau is 0."""
    if tau < 0:
        raise ValueError("smoothing fraction must be nonnegative")
    if tau == 0:
        return None
    return {k: tau * s for k, s in dataset.std().items()}


def agreement_mask(dataset: Dataset, x: Mapping[str, float], subset: Iterable[str], tol: Mapping[str, float] | None = None) -> np.ndarray:
    mask = np.ones(len(dataset), dtype=bool)
    for name in subset:
        col = dataset.column(name)
        if tol is None:
            mask &= col == x[name]
        else:
            mask &= np.abs(col - x[name]) <= tol[name]
    return mask


def restrict_agreement(dataset: Dataset, x: Mapping[str, float], subset: Iterable[str], tol: Mapping[str, float] | None = None) -> Dataset:
    """Rows of ``dataset`` agreeing with ``x`` on every feature of ``subset``.

    With ``tol=None`` agreement is bit-exact equality; otherwise row ``t``
    agrees on feature ``i`` when ``|t_i - x_i| <= tol[i]``.
    """
    return dataset.subset(agreement_mask(dataset, x, subset, tol))


def read_dataset_csv(source: str | Path | io.TextIOBase) -> Dataset:
    """Parse a CSV with a feature-name header and an optional leading ``weight`` column."""
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return read_dataset_csv(fh)
    reader = csv.reader(source)
    header = None
    rows, weights = [], []
    for lineno, record in enumerate(reader, start=1):
        if not record or all(not c.strip() for c in record):
            continue
        if header is None:
            header = [c.strip() for c in record]
            continue
        if len(record) != len(header):
            raise ParseError(f"line {lineno}: expected {len(header)} cells, got {len(record)}")
        try:
            nums = [float(c) for c in record]
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric cell in {record}") from None
        if header[0] == "weight":
            weights.append(nums[0])
            nums = nums[1:]
        rows.append(nums)
    if header is None:
        raise ParseError("empty CSV file")
    features = header[1:] if header[0] == "weight" else header
    if not rows:
        raise ParseError("CSV file has a header but no rows")
    return Dataset(tuple(features), np.asarray(rows), np.asarray(weights) if header[0] == "weight" else None)


def write_dataset_csv(dataset: Dataset, target: str | Path | io.TextIOBase) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            write_dataset_csv(dataset, fh)
            return
    writer = csv.writer(target, lineterminator="\n")
    weighted = dataset.weights is not None
    writer.writerow((["weight"] if weighted else []) + list(dataset.features))
    for i in range(len(dataset)):
        cells = [repr(float(v)) for v in dataset.values[i]]
        if weighted:
            cells.insert(0, repr(float(dataset.weights[i])))
        writer.writerow(cells)
