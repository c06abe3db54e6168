"""Possible-Marginals Shapley: Shapley-style attribution that never takes a
marginal across an impossible mixed input.

Impossible coalitions are represented by ``None`` in the set function.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expression as ex
from .core import Model, mix
from .errors import ParseError, PreconditionError, SizeError
from .shapley_engine import Attribution, SetFunction, shapley_exact

EXACT_PERMUTATION_LIMIT = 8
ESTIMATE_CAP = 12


class PossibilityPredicate:
    """Decides whether a feature vector is possible."""

    def __call__(self, x: Mapping[str, float]) -> bool:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class ExpressionPredicate(PossibilityPredicate):
    """Possible iff a boolean expression such as ``not (x1 == 0 and x2 == 1)`` holds."""

    def __init__(self, text: str):
        self.text = text
        self.tree = ex.parse(text)

    def __repr__(self):
        return f"ExpressionPredicate({self.text!r})"

    def __call__(self, x):
        cols = {k: np.asarray([v], dtype=float) for k, v in x.items()}
        return bool(np.asarray(ex.evaluate(self.tree, cols)).ravel()[0])

    def to_json(self):
        return {"type": "expression", "expr": self.text}


class AllowedRows(PossibilityPredicate):
    """Possible iff the vector equals one of the listed rows on the listed features."""

    def __init__(self, rows: Iterable[Mapping[str, float]]):
        self.rows = [dict(r) for r in rows]
        self._keys = {tuple(sorted((k, float(v)) for k, v in r.items())) for r in self.rows}

    def __repr__(self):
        return f"AllowedRows({len(self.rows)} rows)"

    def __call__(self, x):
        return any(all(float(x[k]) == float(v) for k, v in r.items()) for r in self.rows)

    def to_json(self):
        return {"type": "allowed_rows", "rows": self.rows}


class Always(PossibilityPredicate):
    def __call__(self, x):
        return True

    def to_json(self):
        return {"type": "expression", "expr": "1 == 1"}


def predicate_from_json(obj: Mapping) -> PossibilityPredicate:
    kind = obj.get("type")
    if kind == "expression":
        return ExpressionPredicate(obj["expr"])
    if kind == "allowed_rows":
        return AllowedRows(obj["rows"])
    raise ParseError(f"unknown possibility predicate type {kind!r}")


def possible_baseline_game(
    f: Model, x: Mapping[str, float], baseline: Mapping[str, float], possible: PossibilityPredicate
) -> SetFunction:
    """``v(S) = f(x_S; baseline_rest)`` when that mixed input is possible, else ``None``."""
    if not possible(x):
        raise PreconditionError("the explicand is not possible")
    if not possible(baseline):
        raise PreconditionError("the baseline is not possible")

    def fn(subset):
        z = mix(x, baseline, subset)
        return f(z) if possible(z) else None

    return SetFunction(tuple(baseline), fn, label="possible-baseline")


def _tables(v: SetFunction):
    size = 1 << v.n
    return [v.value(m) for m in range(size)]


def _pms_scores(values: Sequence, n: int, perms: Iterable[Sequence[int]]) -> tuple[np.ndarray, int]:
    scores = np.zeros(n)
    count = 0
    for perm in perms:
        count += 1
        accepted, pending = 0, []
        for i in perm:
            pending.append(i)
            joined = accepted
            for z in pending:
                joined |= 1 << z
            if values[joined] is None:
                continue
            marginal = values[joined] - values[accepted]
            if len(pending) == 1:
                scores[i] += marginal
            else:
                scores[i] += marginal / 2
                scores[pending[0]] += marginal / 2
            accepted = joined
            pending = []
    return scores, count


def pms_set_function(
    v: SetFunction,
    *,
    engine: str = "auto",
    n_perms: int = 10_000,
    seed: int = 0,
) -> Attribution:
    """Possible-Marginals Shapley of a set function that may be ``None`` off the possible sets.

    Each ordering adds players one at a time; a player whose addition would
    reach an impossible coalition waits in a pending set until the coalition
    becomes possible again.  The marginal then goes wholly to the current
    player if nothing was pending, else half to it and half to the first
    pending player.
    """
    n = v.n
    values = _tables(v)
    if values[0] is None or values[-1] is None:
        raise PreconditionError("the empty and the full coalition must both be possible")
    if engine == "auto":
        engine = "exact" if n <= EXACT_PERMUTATION_LIMIT else "sampled"
    if engine == "exact":
        scores, count = _pms_scores(values, n, itertools.permutations(range(n)))
        prov = {"engine": "enumerated", "n_perms": count}
    elif engine == "sampled":
        rng = np.random.default_rng(seed)
        scores, count = _pms_scores(values, n, (rng.permutation(n) for _ in range(n_perms)))
        prov = {"engine": "sampled", "n_perms": n_perms, "seed": seed}
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return Attribution(dict(zip(v.players, map(float, scores / count))), "pms", prov)


def pms(
    f: Model,
    x: Mapping[str, float],
    baseline: Mapping[str, float],
    possible: PossibilityPredicate,
    *,
    engine: str = "auto",
    n_perms: int = 10_000,
    seed: int = 0,
) -> Attribution:
    """Possible-Marginals Shapley of ``f`` at ``x`` against ``baseline``."""
    v = possible_baseline_game(f, x, baseline, possible)
    attr = pms_set_function(v, engine=engine, n_perms=n_perms, seed=seed)
    attr.provenance["baseline"] = dict(baseline)
    return attr


def estimate_marginal(S: Iterable[str], Z: Iterable[str], v: SetFunction) -> float:
    """Recursive estimate of ``v(S | Z) - v(S)`` that only differences possible sets."""
    if v.n > ESTIMATE_CAP:
        raise SizeError(f"marginal estimation is limited to {ESTIMATE_CAP} players")
    s_mask, z_mask = v.mask(S), v.mask(Z)
    if s_mask & z_mask:
        raise ValueError("S and Z must be disjoint")
    if v.value(0) is None:
        raise PreconditionError("the empty coalition must be possible")
    full = (1 << v.n) - 1

    @lru_cache(maxsize=None)
    def est(s: int, z: int) -> float:
        low, high = v.value(s), v.value(s | z)
        if low is not None and high is not None:
            return high - low
        if low is None and high is None:
            return 0.0
        if low is None:
            members = [j for j in range(v.n) if s >> j & 1]
            return sum(est(s & ~(1 << j), z) / 2 for j in members) / len(members)
        rest = [j for j in range(v.n) if not (s | z) >> j & 1]
        assert rest, "expansion reached the full set, which must be possible"
        return sum(est(s, z | 1 << j) / 2 for j in rest) / len(rest)

    if v.value(full) is None:
        raise PreconditionError("the full coalition must be possible")
    return float(est(s_mask, z_mask))


def completed_set_function(v: SetFunction) -> SetFunction:
    """Fill impossible coalitions with the mean over their one-smaller subsets.

    Coalitions are processed from smallest to largest, so every value used is
    already defined.
    """
    if v.value(0) is None:
        raise PreconditionError("the empty coalition must be possible")
    n = v.n
    filled: dict[int, float] = {}
    for mask in sorted(range(1 << n), key=lambda m: (bin(m).count("1"), m)):
        val = v.value(mask)
        if val is None:
            members = [j for j in range(n) if mask >> j & 1]
            val = math.fsum(filled[mask & ~(1 << j)] for j in members) / len(members)
        filled[mask] = val
    return SetFunction(v.players, lambda s: filled[v.mask(s)], label="completed")


@dataclass
class CompletionComparison:
    """PMS next to the Shapley value of the completed set function."""

    agree: bool
    max_deviation: float
    pms: dict
    completed_shapley: dict
    impossible: list


def compare_with_completion(v: SetFunction, tol: float = 1e-9) -> CompletionComparison:
    """Diagnostic: does PMS equal Shapley of the completed set function on ``v``?"""
    a = pms_set_function(v, engine="exact")
    b = shapley_exact(completed_set_function(v))
    dev = float(np.max(np.abs(a.as_array(v.players) - b.as_array(v.players)))) if v.n else 0.0
    impossible = [sorted(v.subset(m)) for m in range(1 << v.n) if v.value(m) is None]
    return CompletionComparison(dev <= tol, dev, a.scores, b.scores, impossible)
