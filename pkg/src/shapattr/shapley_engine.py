"""Shapley values of finite set functions: exact, sampled, and fixed-order.

Subsets are handled internally as integer bitmasks where bit ``j`` stands for
``players[j]``; evaluators see ``frozenset`` objects of player names.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import InvalidSetFunctionError, SizeError

DEFAULT_EXACT_CAP = 20
MAX_PLAYERS = 62
PERMUTATION_BLOCK = 64


class SetFunction:
    """A map from subsets of ``players`` to a real value or ``None`` (invalid).

    ``fn`` receives a ``frozenset`` of player names. ``batch``, when given,
    receives an int64 array of bitmasks and returns the values as an array;
    it is used to fill the memo table in bulk and must agree with ``fn``.
    """

    def __init__(
        self,
        players: Sequence[str],
        fn: Callable[[frozenset], Optional[float]] | None = None,
        *,
        batch: Callable[[np.ndarray], np.ndarray] | None = None,
        label: str = "",
    ):
        self.players = tuple(players)
        if len(set(self.players)) != len(self.players):
            raise ValueError("duplicate players")
        if len(self.players) > MAX_PLAYERS:
            raise SizeError(f"at most {MAX_PLAYERS} players are supported")
        if fn is None and batch is None:
            raise ValueError("need fn or batch")
        self._fn = fn
        self._batch = batch
        self.label = label
        self._memo: dict[int, Optional[float]] = {}
        self._index = {p: j for j, p in enumerate(self.players)}

    def __repr__(self):
        return f"SetFunction({self.label or 'anonymous'}, players={self.players})"

    @property
    def n(self) -> int:
        return len(self.players)

    def mask(self, subset: Iterable[str]) -> int:
        m = 0
        for p in subset:
            m |= 1 << self._index[p]
        return m

    def subset(self, mask: int) -> frozenset:
        return frozenset(p for j, p in enumerate(self.players) if mask >> j & 1)

    def value(self, mask: int) -> Optional[float]:
        mask = int(mask)
        if mask not in self._memo:
            if self._fn is not None:
                result = self._fn(self.subset(mask))
            else:
                result = float(self._batch(np.asarray([mask], dtype=np.int64))[0])
            self._memo[mask] = None if result is None else float(result)
        return self._memo[mask]

    def __call__(self, subset: Iterable[str]) -> Optional[float]:
        return self.value(self.mask(subset))

    def values(self, masks: np.ndarray) -> np.ndarray:
        """Values at many masks; raises if any is invalid."""
        masks = np.asarray(masks, dtype=np.int64)
        uniq = np.unique(masks)
        missing = [int(m) for m in uniq if int(m) not in self._memo]
        if missing and self._batch is not None:
            got = np.asarray(self._batch(np.asarray(missing, dtype=np.int64)), dtype=float)
            for m, val in zip(missing, got):
                self._memo.setdefault(m, float(val))
        lookup = {}
        for m in uniq:
            val = self.value(int(m))
            if val is None:
                raise InvalidSetFunctionError(
                    f"set function is invalid at {sorted(self.subset(int(m)))}; use the pms module"
                )
            lookup[int(m)] = val
        return np.asarray([lookup[int(m)] for m in masks.ravel()]).reshape(masks.shape)

    def table(self) -> np.ndarray:
        """All ``2**n`` values indexed by bitmask."""
        return self.values(np.arange(1 << self.n, dtype=np.int64))

    def is_valid(self, mask: int) -> bool:
        return self.value(mask) is not None

    @staticmethod
    def combine(terms: Sequence[tuple[float, "SetFunction"]]) -> "SetFunction":
        """The set function ``sum(a * v)`` over ``terms`` sharing one player list."""
        players = terms[0][1].players
        if any(v.players != players for _, v in terms):
            raise ValueError("combined set functions must share their players")

        def batch(masks):
            return sum(a * v.values(masks) for a, v in terms)

        return SetFunction(players, batch=batch, label="combination")


@dataclass
class Attribution:
    """Per-feature scores with the method tag and provenance metadata."""

    scores: dict
    method: str
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, feature: str) -> float:
        return self.scores[feature]

    def __iter__(self):
        return iter(self.scores)

    @property
    def features(self) -> tuple:
        return tuple(self.scores)

    def as_array(self, order: Sequence[str] | None = None) -> np.ndarray:
        order = self.features if order is None else order
        return np.asarray([self.scores[k] for k in order], dtype=float)

    def total(self) -> float:
        return float(math.fsum(self.scores.values()))

    def to_json(self) -> dict:
        return {
            "scores": {k: float(v) for k, v in self.scores.items()},
            "metadata": {"method": self.method, **self.provenance},
        }


def popcount(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(masks, dtype=np.int64)).astype(np.int64)


def shapley_weights(n: int) -> np.ndarray:
    """``w[s] = s! (n-s-1)! / n!`` for coalition sizes ``s = 0..n-1``."""
    if n <= 18:
        return np.asarray(
            [math.factorial(s) * math.factorial(n - s - 1) / math.factorial(n) for s in range(n)]
        )
    s = np.arange(n)
    logw = np.asarray([math.lgamma(k + 1) + math.lgamma(n - k) - math.lgamma(n + 1) for k in s])
    return np.exp(logw)


def shapley_exact(v: SetFunction, cap: int = DEFAULT_EXACT_CAP, method: str = "shapley") -> Attribution:
    """Shapley values by the subset formula over a memoised ``2**n`` table."""
    n = v.n
    if n > cap:
        raise SizeError(f"{n} players exceed the exact cap of {cap}; use shapley_sampled")
    if n == 0:
        return Attribution({}, method, {"engine": "exact"})
    table = v.table()
    masks = np.arange(1 << n, dtype=np.int64)
    w = shapley_weights(n)[popcount(masks) % n]
    scores = {}
    for j, p in enumerate(v.players):
        without = masks[(masks >> j & 1) == 0]
        diffs = table[without | (1 << j)] - table[without]
        scores[p] = float(math.fsum(w[without] * diffs))
    return Attribution(scores, method, {"engine": "exact"})


def _permutation_blocks(n: int, n_perms: int, seed: int):
    """Yield ``(block_index, perms)``; block ``b`` draws from the stream ``(seed, b)``."""
    for b, start in enumerate(range(0, n_perms, PERMUTATION_BLOCK)):
        k = min(PERMUTATION_BLOCK, n_perms - start)
        rng = np.random.default_rng([seed, b])
        yield b, rng.permuted(np.tile(np.arange(n), (k, 1)), axis=1)


def _accumulate(v: SetFunction, perms: np.ndarray, sums: np.ndarray) -> None:
    bits = np.left_shift(np.int64(1), perms.astype(np.int64))
    prefix = np.cumsum(bits, axis=1)
    vals = v.values(prefix)
    empty = v.values(np.zeros(1, dtype=np.int64))[0]
    marg = np.diff(np.concatenate([np.full((len(perms), 1), empty), vals], axis=1), axis=1)
    np.add.at(sums, perms.ravel(), marg.ravel())


def shapley_sampled(
    v: SetFunction,
    n_perms: int,
    seed: int = 0,
    *,
    enumerate_all: bool = False,
    method: str = "shapley",
) -> Attribution:
    """Average marginal vectors over random permutations.

    ``enumerate_all`` visits each of the ``n!`` orderings exactly once instead
    (``n_perms`` is then ignored).  Output is a deterministic function of
    ``seed`` and ``n_perms``.
    """
    n = v.n
    sums = np.zeros(n)
    if enumerate_all:
        if n > 10:
            raise SizeError("complete permutation enumeration is limited to 10 players")
        it = itertools.permutations(range(n))
        count = 0
        while True:
            chunk = np.asarray(list(itertools.islice(it, 4096)), dtype=np.int64)
            if len(chunk) == 0:
                break
            _accumulate(v, chunk, sums)
            count += len(chunk)
        provenance = {"engine": "enumerated", "n_perms": count}
    else:
        if n_perms < 1:
            raise ValueError("n_perms must be at least 1")
        count = n_perms
        for _, perms in _permutation_blocks(n, n_perms, seed):
            _accumulate(v, perms, sums)
        provenance = {"engine": "sampled", "n_perms": n_perms, "seed": seed}
    return Attribution({p: float(s / count) for p, s in zip(v.players, sums)}, method, provenance)


def fixed_permutation_marginals(v: SetFunction, order: Sequence[str], method: str = "fixed-permutation") -> Attribution:
    """Marginal contributions along one ordering of the players."""
    if sorted(order) != sorted(v.players) or len(set(order)) != len(order):
        raise ValueError(f"{list(order)} is not a permutation of {list(v.players)}")
    scores = {}
    prefix = 0
    prev = v.values(np.asarray([0]))[0]
    for p in order:
        prefix |= 1 << v.players.index(p)
        cur = v.values(np.asarray([prefix]))[0]
        scores[p] = float(cur - prev)
        prev = cur
    return Attribution({p: scores[p] for p in v.players}, method, {"engine": "fixed", "order": list(order)})
