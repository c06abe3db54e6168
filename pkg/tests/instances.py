"""Seeded generators of small random attribution instances."""

from __future__ import annotations

import itertools

import numpy as np

from shapattr import Dataset, Expression, independent
from shapattr.pms import AllowedRows

NAMES = ("x1", "x2", "x3", "x4")


def names(n: int) -> tuple:
    return NAMES[:n]


def polynomial_text(rng: np.random.Generator, features, terms: int = 4, max_degree: int = 3) -> str:
    """Random polynomial with small integer coefficients; every feature appears."""
    parts = []
    for k in range(terms):
        coef = int(rng.choice([-3, -2, -1, 1, 2, 3]))
        size = int(rng.integers(1, min(3, len(features)) + 1))
        chosen = rng.choice(len(features), size=size, replace=False)
        mono = "*".join(f"{features[j]}^{int(rng.integers(1, max_degree + 1))}" for j in sorted(chosen))
        parts.append(f"{coef}*{mono}")
    parts += [f"{int(rng.integers(1, 4))}*{p}" for p in features]
    return " + ".join(parts)


def polynomial(rng, features, **kw) -> Expression:
    return Expression(polynomial_text(rng, features, **kw), tuple(features))


def distinct_values(rng, count: int, low: int = -3, high: int = 3) -> list:
    return [float(v) for v in rng.choice(np.arange(low, high + 1), size=count, replace=False)]


def point(rng, features, low: float = -2.0, high: float = 2.0) -> dict:
    """Quarter-integer point, so arithmetic stays exact in binary floating point."""
    return {p: float(rng.integers(int(4 * low), int(4 * high) + 1)) / 4 for p in features}


def independent_instance(rng, max_players: int = 4, max_support: int = 3):
    """``(f, x, dist, marginals)`` with ``x`` drawn from the support of ``dist``."""
    feats = names(int(rng.integers(1, max_players + 1)))
    marginals = {}
    for p in feats:
        size = int(rng.integers(1, max_support + 1))
        probs = rng.dirichlet(np.ones(size))
        probs = probs / probs.sum()
        marginals[p] = list(zip(distinct_values(rng, size), map(float, probs)))
    x = {p: marginals[p][int(rng.integers(len(marginals[p])))][0] for p in feats}
    return polynomial(rng, feats), x, independent(marginals), marginals


def dataset_with(rng, features, rows: int, levels: int = 3, x: dict | None = None) -> tuple[Dataset, dict]:
    """Integer-valued dataset over few levels (so rows often agree) that contains ``x``."""
    values = rng.integers(0, levels, size=(rows, len(features))).astype(float)
    if x is None:
        x = dict(zip(features, map(float, values[int(rng.integers(rows))])))
    else:
        values[int(rng.integers(rows))] = [x[p] for p in features]
    return Dataset(tuple(features), values), x


def random_possible_sets(rng, n: int, density: float = 0.5) -> list:
    """Random family of coalitions that always contains the empty and the full set."""
    full = (1 << n) - 1
    return [m for m in range(1 << n) if m in (0, full) or rng.random() < density]


def predicate_for(masks, features) -> AllowedRows:
    """Possible iff the 0/1 vector is one of ``masks`` (explicand ones, baseline zeros)."""
    rows = [{p: float(m >> j & 1) for j, p in enumerate(features)} for m in masks]
    return AllowedRows(rows)


def binary_grid(features):
    return [dict(zip(features, map(float, bits))) for bits in itertools.product((0, 1), repeat=len(features))]
