"""Finite feature distributions and exact conditional expectations."""

from __future__ import annotations

import itertools
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Dataset, Model
from .errors import ConditioningError, ConstructionError, ParseError, SizeError

DEFAULT_ATOM_CAP = 10**6
NORMALIZATION_TOL = 1e-12

KINDS = ("explicit", "empirical", "independent", "product-of-marginals", "two-point-epsilon")


class DiscreteDistribution:
    """A probability distribution with finite support over named features.

    Independent kinds keep per-feature marginals; their joint support is only
    materialised on first access to :attr:`atoms` and fails loudly past
    ``atom_cap`` atoms.
    """

    def __init__(
        self,
        features: Sequence[str],
        atoms: np.ndarray | None = None,
        probs: np.ndarray | None = None,
        kind: str = "explicit",
        marginals: Mapping[str, tuple[np.ndarray, np.ndarray]] | None = None,
        atom_cap: int = DEFAULT_ATOM_CAP,
    ):
        if kind not in KINDS:
            raise ConstructionError(f"unknown distribution kind {kind!r}")
        self.features = tuple(features)
        self.kind = kind
        self.atom_cap = atom_cap
        self.marginals = None
        if marginals is not None:
            self.marginals = {k: _normalised_marginal(k, *marginals[k]) for k in self.features}
        elif atoms is None or probs is None:
            raise ConstructionError("need either an explicit support or per-feature marginals")
        else:
            atoms = np.asarray(atoms, dtype=float).reshape(-1, len(self.features))
            probs = np.asarray(probs, dtype=float)
            _check_probs(probs)
            if atoms.shape[0] != probs.shape[0]:
                raise ConstructionError("one probability per support atom is required")
            if atoms.shape[0] > atom_cap:
                raise SizeError(f"{atoms.shape[0]} atoms exceed the cap of {atom_cap}")
            self.__dict__["atoms"] = atoms
            self.__dict__["probs"] = probs

    def __repr__(self):
        size = len(self.probs) if "probs" in self.__dict__ else self.support_size
        return f"DiscreteDistribution(kind={self.kind!r}, features={self.features}, atoms={size})"

    @property
    def independent(self) -> bool:
        return self.marginals is not None

    @property
    def support_size(self) -> int:
        if self.marginals is None:
            return len(self.probs)
        return int(np.prod([len(v) for v, _ in self.marginals.values()], dtype=object))

    @cached_property
    def _joint(self):
        size = self.support_size
        if size > self.atom_cap:
            raise SizeError(f"joint support of {size} atoms exceeds the cap of {self.atom_cap}")
        values = [self.marginals[k][0] for k in self.features]
        probs = [self.marginals[k][1] for k in self.features]
        grids = np.meshgrid(*values, indexing="ij")
        pgrids = np.meshgrid(*probs, indexing="ij")
        atoms = np.stack([g.ravel() for g in grids], axis=1) if values else np.zeros((1, 0))
        p = np.prod(np.stack([g.ravel() for g in pgrids]), axis=0) if probs else np.ones(1)
        return atoms, p

    @cached_property
    def atoms(self) -> np.ndarray:
        return self._joint[0]

    @cached_property
    def probs(self) -> np.ndarray:
        return self._joint[1]

    def columns(self) -> dict:
        return {k: self.atoms[:, j] for j, k in enumerate(self.features)}

    def support(self) -> list[tuple[dict, float]]:
        return [
            (dict(zip(self.features, map(float, a))), float(p))
            for a, p in zip(self.atoms, self.probs)
        ]

    def marginal(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Distinct values of ``name`` with their probabilities."""
        if self.marginals is not None:
            return self.marginals[name]
        col = self.atoms[:, self.features.index(name)]
        acc: dict[float, float] = {}
        for v, p in zip(col, self.probs):
            acc[float(v)] = acc.get(float(v), 0.0) + float(p)
        return np.asarray(list(acc)), np.asarray(list(acc.values()))

    def expectation(self, f: Model) -> float:
        return float(self.probs @ f.evaluate(self.columns()))

    def contains(self, x: Mapping[str, float]) -> bool:
        """Whether ``x`` has positive probability."""
        if self.marginals is not None:
            return all(np.any((v == x[k]) & (p > 0)) for k, (v, p) in self.marginals.items())
        row = np.asarray([x[k] for k in self.features])
        return bool(np.any(np.all(self.atoms == row, axis=1) & (self.probs > 0)))

    def to_json(self) -> dict:
        if self.marginals is not None:
            return {
                "type": "independent",
                "marginals": {
                    k: [{"value": float(v), "prob": float(p)} for v, p in zip(*self.marginals[k])]
                    for k in self.features
                },
            }
        return {
            "type": "explicit",
            "rows": [{"values": vals, "prob": p} for vals, p in self.support()],
        }


def _check_probs(probs: np.ndarray) -> None:
    if probs.ndim != 1 or len(probs) == 0:
        raise ConstructionError("a distribution needs a nonempty probability vector")
    if np.any(probs < 0) or not np.all(np.isfinite(probs)):
        raise ConstructionError("probabilities must be finite and nonnegative")
    if abs(probs.sum() - 1.0) > NORMALIZATION_TOL:
        raise ConstructionError(f"probabilities sum to {probs.sum()!r}, not 1")


def _normalised_marginal(name, values, probs):
    acc: dict[float, float] = {}
    for v, p in zip(np.asarray(values, dtype=float), np.asarray(probs, dtype=float)):
        acc[float(v)] = acc.get(float(v), 0.0) + float(p)
    p = np.asarray(list(acc.values()))
    try:
        _check_probs(p)
    except ConstructionError as exc:
        raise ConstructionError(f"marginal of {name!r}: {exc}") from None
    return np.asarray(list(acc)), p


def explicit(rows: Iterable[tuple[Mapping[str, float], float]], features: Sequence[str] | None = None) -> DiscreteDistribution:
    """Distribution from ``(feature values, probability)`` pairs; duplicates merge."""
    rows = list(rows)
    if not rows:
        raise ConstructionError("empty support")
    if features is None:
        features = list(rows[0][0])
    acc: dict[tuple, float] = {}
    for values, p in rows:
        key = tuple(float(values[k]) for k in features)
        acc[key] = acc.get(key, 0.0) + float(p)
    return DiscreteDistribution(features, np.asarray(list(acc)), np.asarray(list(acc.values())), kind="explicit")


def empirical(dataset: Dataset) -> DiscreteDistribution:
    """Distribution putting mass on each distinct row, proportional to its weighted count."""
    if len(dataset) == 0:
        raise ConstructionError("cannot build an empirical distribution from an empty dataset")
    w = dataset.row_weights
    acc: dict[tuple, float] = {}
    for row, wt in zip(map(tuple, dataset.values.tolist()), w):
        acc[row] = acc.get(row, 0.0) + float(wt)
    probs = np.asarray(list(acc.values()))
    probs = probs / probs.sum()
    return DiscreteDistribution(dataset.features, np.asarray(list(acc)), probs, kind="empirical")


def independent(marginals: Mapping[str, Iterable[tuple[float, float]]]) -> DiscreteDistribution:
    """Independent distribution from per-feature ``(value, probability)`` lists."""
    parsed = {}
    for name, pairs in marginals.items():
        pairs = list(pairs)
        parsed[name] = (np.asarray([v for v, _ in pairs], float), np.asarray([p for _, p in pairs], float))
    return DiscreteDistribution(list(marginals), kind="independent", marginals=parsed)


def product_of_marginals(dist: DiscreteDistribution) -> DiscreteDistribution:
    """The independent distribution with the same per-feature marginals as ``dist``."""
    marg = {k: dist.marginal(k) for k in dist.features}
    return DiscreteDistribution(dist.features, kind="product-of-marginals", marginals=marg, atom_cap=dist.atom_cap)


def two_point_epsilon(x: Mapping[str, float], baseline: Mapping[str, float], eps: float) -> DiscreteDistribution:
    """Independent features, each ``x_i`` with probability eps and ``baseline_i`` otherwise."""
    if not 0 < eps < 1:
        raise ConstructionError("eps must lie strictly between 0 and 1")
    marg = {k: (np.asarray([x[k], baseline[k]]), np.asarray([eps, 1 - eps])) for k in baseline}
    return DiscreteDistribution(list(baseline), kind="two-point-epsilon", marginals=marg)


def distribution_from_json(obj: Mapping) -> DiscreteDistribution:
    try:
        if obj["type"] == "explicit":
            return explicit([(r["values"], r["prob"]) for r in obj["rows"]], obj.get("features"))
        if obj["type"] == "independent":
            return independent({k: [(e["value"], e["prob"]) for e in v] for k, v in obj["marginals"].items()})
    except KeyError as exc:
        raise ParseError(f"distribution JSON missing field {exc.args[0]!r}") from None
    raise ParseError(f"unknown distribution type {obj.get('type')!r}")


class ConditionalExpectation:
    """``E_D[f(z) | z_S = x_S]`` with ``f`` evaluated once over the support."""

    def __init__(self, dist: DiscreteDistribution, f: Model):
        self.dist = dist
        self.f = f
        self.values = f.evaluate(dist.columns())

    def agreement(self, x: Mapping[str, float]) -> np.ndarray:
        """Boolean matrix: atom ``a`` agrees with ``x`` on feature ``j``."""
        row = np.asarray([x[k] for k in self.dist.features])
        return self.dist.atoms == row

    def __call__(self, x: Mapping[str, float], subset: Iterable[str]) -> float:
        subset = list(subset)
        idx = [self.dist.features.index(k) for k in subset]
        mask = np.all(self.agreement(x)[:, idx], axis=1)
        return self.masked(mask, subset)

    def masked(self, mask: np.ndarray, subset=()) -> float:
        p = self.dist.probs[mask]
        total = p.sum()
        if total <= 0:
            raise ConditioningError(f"conditioning event on {sorted(subset)} has zero probability")
        return float(p @ self.values[mask] / total)


def conditional_expectation(dist: DiscreteDistribution, f: Model, x: Mapping[str, float], subset: Iterable[str]) -> float:
    """Exact ``E_D[f | features in subset equal x's]``; the empty subset gives ``E_D[f]``."""
    return ConditionalExpectation(dist, f)(x, subset)


def marginalized_expectation(dist: DiscreteDistribution, f: Model, x: Mapping[str, float], subset: Iterable[str]) -> float:
    """``E[f(x_S; z)]`` with the free features ``z`` drawn from their marginals.

    For independent distributions this equals :func:`conditional_expectation`
    without ever conditioning on the joint support.
    """
    subset = set(subset)
    free = [k for k in dist.features if k not in subset]
    margs = [dist.marginal(k) for k in free]
    n = int(np.prod([len(v) for v, _ in margs], dtype=object)) if margs else 1
    if n > dist.atom_cap:
        raise SizeError(f"{n} free-feature combinations exceed the cap of {dist.atom_cap}")
    combos = list(itertools.product(*[range(len(v)) for v, _ in margs]))
    cols = {k: np.full(len(combos), float(x[k])) for k in dist.features if k in subset}
    weights = np.ones(len(combos))
    for j, (k, (vals, probs)) in enumerate(zip(free, margs)):
        idx = np.asarray([c[j] for c in combos], dtype=int)
        cols[k] = vals[idx]
        weights = weights * probs[idx]
    return float(weights @ f.evaluate(cols))


def marginalize(dist: DiscreteDistribution, features: Sequence[str]) -> DiscreteDistribution:
    """The joint distribution of ``features`` alone."""
    features = tuple(features)
    if dist.marginals is not None:
        return DiscreteDistribution(
            features, kind=dist.kind, marginals={k: dist.marginals[k] for k in features}, atom_cap=dist.atom_cap
        )
    idx = [dist.features.index(k) for k in features]
    acc: dict[tuple, float] = {}
    for atom, p in zip(dist.atoms[:, idx].tolist(), dist.probs):
        acc[tuple(atom)] = acc.get(tuple(atom), 0.0) + float(p)
    return DiscreteDistribution(features, np.asarray(list(acc)), np.asarray(list(acc.values())), kind=dist.kind)


def affine_transform(dist: DiscreteDistribution, feature: str, scale: float, shift: float) -> DiscreteDistribution:
    """Push ``dist`` through ``z_feature -> scale * z_feature + shift``."""
    if dist.marginals is not None:
        marg = dict(dist.marginals)
        values, probs = marg[feature]
        marg[feature] = (scale * values + shift, probs)
        return DiscreteDistribution(dist.features, kind=dist.kind, marginals=marg, atom_cap=dist.atom_cap)
    atoms = dist.atoms.copy()
    j = dist.features.index(feature)
    atoms[:, j] = scale * atoms[:, j] + shift
    return DiscreteDistribution(dist.features, atoms, dist.probs, kind=dist.kind, atom_cap=dist.atom_cap)
