"""Attribution methods built on the Shapley engine.

Each Shapley-type method is a set-function constructor plus a call into
:mod:`shapattr.shapley_engine`.  Integrated gradients, the micro-feature
grid, the cost-sharing reduction and layer-wise composition live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import (
    AffineReparam,
    Dataset,
    Layered,
    Linear,
    Model,
    Sum,
    agreement_mask,
    feature_vector,
    gradient_columns,
    model_from_json,
    restrict_agreement,
    smoothing_tolerance,
)
from .distributions import ConditionalExpectation, DiscreteDistribution, distribution_from_json
from .errors import (
    CapabilityError,
    ConditioningError,
    DomainError,
    EvaluationError,
    ReductionError,
    SizeError,
)
from .shapley_engine import (
    DEFAULT_EXACT_CAP,
    PERMUTATION_BLOCK,
    Attribution,
    SetFunction,
    shapley_exact,
    shapley_sampled,
)

DEFAULT_IG_STEPS = 300
DEFAULT_SUPPORT_CAP = 100_000
DEFAULT_GRID_CAP = 2_000_000


def _bits(masks: np.ndarray, n: int) -> np.ndarray:
    """``(len(masks), n)`` boolean membership matrix."""
    return (np.asarray(masks, dtype=np.int64)[:, None] >> np.arange(n)) & 1 == 1


def _check_same_features(x: Mapping, baseline: Mapping) -> None:
    if set(x) != set(baseline):
        raise ValueError(
            f"explicand and baseline differ in features: {sorted(set(x) ^ set(baseline))}"
        )


def _solve(v: SetFunction, method: str, engine: str, n_perms: int, seed: int, cap: int) -> Attribution:
    if engine == "exact":
        return shapley_exact(v, cap=cap, method=method)
    if engine == "sampled":
        return shapley_sampled(v, n_perms, seed, method=method)
    raise ValueError(f"unknown engine {engine!r}")


# ---------------------------------------------------------------------------
# Set functions
# ---------------------------------------------------------------------------


def baseline_game(f: Model, x: Mapping[str, float], baseline: Mapping[str, float]) -> SetFunction:
    """``v(S) = f(x_S; baseline_rest)``."""
    _check_same_features(x, baseline)
    players = tuple(baseline)
    xv = np.asarray([x[p] for p in players])
    bv = np.asarray([baseline[p] for p in players])

    def batch(masks):
        on = _bits(masks, len(players))
        mixed = np.where(on, xv, bv)
        return f.evaluate({p: mixed[:, j] for j, p in enumerate(players)})

    return SetFunction(players, batch=batch, label="baseline")


def random_baseline_game(
    f: Model, x: Mapping[str, float], dist: DiscreteDistribution, support_cap: int = DEFAULT_SUPPORT_CAP
) -> SetFunction:
    """``v(S) = E_{z ~ D} f(x_S; z_rest)``, exact over the support."""
    if dist.support_size > support_cap:
        raise SizeError(f"support of {dist.support_size} atoms exceeds the cap of {support_cap}")
    players = dist.features
    xv = np.asarray([x[p] for p in players])
    atoms, probs = dist.atoms, dist.probs

    def batch(masks):
        on = _bits(masks, len(players))
        out = np.empty(len(masks))
        chunk = max(1, 200_000 // len(atoms))
        for start in range(0, len(masks), chunk):
            sel = on[start : start + chunk]
            mixed = np.where(sel[:, None, :], xv, atoms[None, :, :]).reshape(-1, len(players))
            vals = f.evaluate({p: mixed[:, j] for j, p in enumerate(players)}).reshape(len(sel), len(atoms))
            out[start : start + chunk] = vals @ probs
        return out

    return SetFunction(players, batch=batch, label="random-baseline")


def conditional_game(f: Model, x: Mapping[str, float], dist: DiscreteDistribution) -> SetFunction:
    """``v(S) = E_D[f | z_S = x_S]``."""
    ce = ConditionalExpectation(dist, f)
    players = dist.features
    disagree = (~ce.agreement(x)).astype(np.int64)

    def batch(masks):
        on = _bits(masks, len(players)).astype(np.int64)
        match = (on @ disagree.T) == 0
        mass = match @ dist.probs
        bad = np.flatnonzero(mass <= 0)
        if len(bad):
            subset = [p for j, p in enumerate(players) if on[bad[0], j]]
            raise ConditioningError(f"conditioning event on {subset} has zero probability under D")
        return (match @ (dist.probs * ce.values)) / mass

    return SetFunction(players, batch=batch, label="conditional-expectation")


def empirical_game(
    f: Model,
    x: Mapping[str, float],
    data: Dataset,
    tol: Mapping[str, float] | None = None,
) -> SetFunction:
    """``v(S)`` = weighted mean of ``f`` over the rows agreeing with ``x`` on ``S``."""
    fvals = f.evaluate(data.columns())
    weights = data.row_weights
    rows = np.arange(len(data))
    # rows carry their index so restrict_agreement can be used as-is
    indexed = Dataset(data.features + ("__row__",), np.column_stack([data.values, rows]), data.weights)

    def fn(subset):
        kept = restrict_agreement(indexed, x, subset, tol)
        if len(kept) == 0:
            raise ConditioningError(f"no rows agree with the explicand on {sorted(subset)}")
        idx = kept.column("__row__").astype(int)
        w = weights[idx]
        if w.sum() <= 0:
            raise ConditioningError(f"agreeing rows on {sorted(subset)} have zero weight")
        return float(w @ fvals[idx] / w.sum())

    return SetFunction(data.features, fn, label="empirical-agreement")


# ---------------------------------------------------------------------------
# Shapley-type methods
# ---------------------------------------------------------------------------


def bshap(
    f: Model,
    x: Mapping[str, float],
    baseline: Mapping[str, float],
    *,
    engine: str = "exact",
    n_perms: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_EXACT_CAP,
) -> Attribution:
    """Baseline Shapley: Shapley values of ``v(S) = f(x_S; baseline_rest)``."""
    v = baseline_game(f, x, baseline)
    attr = _solve(v, "bshap", engine, n_perms, seed, cap)
    attr.provenance["baseline"] = dict(baseline)
    return attr


def rbshap(
    f: Model,
    x: Mapping[str, float],
    dist: DiscreteDistribution,
    *,
    mode: str = "exact",
    n_samples: int = 100,
    seed: int = 0,
    cap: int = DEFAULT_EXACT_CAP,
    support_cap: int = DEFAULT_SUPPORT_CAP,
) -> Attribution:
    """BShap averaged over baselines drawn from ``dist``.

    ``mode="exact"`` weights every support atom by its probability (computed as
    one Shapley call on the probability-mixed set function, which is the same
    average by linearity); ``mode="sampled"`` averages ``n_samples`` baselines
    drawn with ``seed``.
    """
    if mode == "exact":
        v = random_baseline_game(f, x, dist, support_cap)
        attr = shapley_exact(v, cap=cap, method="rbshap")
        attr.provenance.update(distribution=dist.kind, support=dist.support_size)
        return attr
    if mode != "sampled":
        raise ValueError(f"unknown rbshap mode {mode!r}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(dist.probs), size=n_samples, p=dist.probs)
    total = np.zeros(len(dist.features))
    for a in picks:
        base = dict(zip(dist.features, map(float, dist.atoms[a])))
        total += bshap(f, {k: x[k] for k in dist.features}, base, cap=cap).as_array(dist.features)
    scores = dict(zip(dist.features, map(float, total / n_samples)))
    return Attribution(scores, "rbshap", {"engine": "sampled", "n_samples": n_samples, "seed": seed, "distribution": dist.kind})


def ces(
    f: Model,
    x: Mapping[str, float],
    dist: DiscreteDistribution,
    *,
    engine: str = "exact",
    n_perms: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_EXACT_CAP,
) -> Attribution:
    """Conditional Expectations Shapley over a finite distribution."""
    v = conditional_game(f, x, dist)
    attr = _solve(v, "ces", engine, n_perms, seed, cap)
    attr.provenance["distribution"] = dist.kind
    return attr


def ces_empirical(
    f: Model,
    x: Mapping[str, float],
    data: Dataset,
    tau: float = 0.0,
    *,
    append_explicand: bool = True,
    engine: str = "exact",
    n_perms: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_EXACT_CAP,
) -> Attribution:
    """CES over the empirical distribution of ``data``, with optional smoothing.

    ``tau`` is the closeness threshold as a fraction of each feature's standard
    deviation (0 means exact agreement).  Unless disabled, the explicand is
    appended as one extra row when no row agrees with it on every feature.
    """
    tol = smoothing_tolerance(data, tau)
    appended = False
    if append_explicand and not agreement_mask(data, x, data.features, tol).any():
        data = data.with_row(x)
        appended = True
    v = empirical_game(f, x, data, tol)
    attr = _solve(v, "ces_empirical", engine, n_perms, seed, cap)
    attr.provenance.update(tau=tau, rows=len(data), explicand_appended=appended)
    return attr


# ---------------------------------------------------------------------------
# Integrated gradients and micro-features
# ---------------------------------------------------------------------------


def ig(
    f: Model,
    x: Mapping[str, float],
    baseline: Mapping[str, float],
    steps: int = DEFAULT_IG_STEPS,
    mode: str = "analytic",
    h: float = 1e-6,
) -> Attribution:
    """Integrated gradients along the straight line, midpoint rule with ``steps`` nodes."""
    _check_same_features(x, baseline)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if f.piecewise_constant:
        raise CapabilityError(
            f"{type(f).__name__} is piecewise constant; its gradient is zero almost everywhere "
            "and integrated gradients is not applicable"
        )
    if mode == "analytic" and not f.analytic:
        raise CapabilityError(f"{type(f).__name__} has no analytic gradient; use mode='central-difference'")
    players = tuple(baseline)
    alphas = (np.arange(1, steps + 1) - 0.5) / steps
    cols = {p: baseline[p] + alphas * (x[p] - baseline[p]) for p in players}
    scores = {}
    for p in players:
        g = gradient_columns(f, cols, p, mode, h)
        if not np.all(np.isfinite(g)):
            raise DomainError(f"non-finite gradient for {p!r} along the path")
        scores[p] = float((x[p] - baseline[p]) * math.fsum(g) / steps)
    return Attribution(scores, "ig", {"baseline": dict(baseline), "steps": steps, "gradient": mode})


def _log_comb(n, k):
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def micro_shapley(
    f: Model,
    x: Mapping[str, float],
    baseline: Mapping[str, float],
    m: int,
    *,
    engine: str = "exact",
    n_perms: int = 10_000,
    seed: int = 0,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> Attribution:
    """Shapley over ``m`` equal micro-steps per feature, summed back per feature.

    A coalition of micro-features is evaluated at ``baseline + (k/m)(x - baseline)``
    where ``k_i`` counts feature ``i``'s micro-features in the coalition.  The
    exact engine exploits that micro-features of one feature are interchangeable
    and sums over the ``(m+1)**n`` count vectors instead of ``2**(n m)`` subsets.
    """
    _check_same_features(x, baseline)
    if m < 1:
        raise ValueError("m must be at least 1")
    players = tuple(baseline)
    n = len(players)
    xv = np.asarray([x[p] for p in players])
    bv = np.asarray([baseline[p] for p in players])

    def at_counts(counts: np.ndarray) -> np.ndarray:
        pts = bv + counts / m * (xv - bv)
        return f.evaluate({p: pts[:, j] for j, p in enumerate(players)})

    if engine == "exact":
        size = (m + 1) ** n
        if size > grid_cap:
            raise SizeError(f"micro-feature grid of {size} points exceeds the cap of {grid_cap}")
        grids = np.meshgrid(*[np.arange(m + 1)] * n, indexing="ij")
        counts = np.stack([g.ravel() for g in grids], axis=1)
        values = at_counts(counts).reshape((m + 1,) * n)
        total = counts.sum(axis=1).reshape((m + 1,) * n)
        big = n * m
        scores = {}
        for i, p in enumerate(players):
            lower = [slice(None)] * n
            lower[i] = slice(0, m)
            upper = list(lower)
            upper[i] = slice(1, m + 1)
            k = counts.reshape((m + 1,) * n + (n,))[tuple(lower)]
            s = total[tuple(lower)]
            logw = -math.log(big) - np.vectorize(_log_comb)(big - 1, s)
            for j in range(n):
                avail = m - 1 if j == i else m
                logw = logw + np.vectorize(_log_comb)(avail, k[..., j])
            diff = values[tuple(upper)] - values[tuple(lower)]
            scores[p] = float(m * math.fsum((np.exp(logw) * diff).ravel()))
        return Attribution(scores, "micro_shapley", {"m": m, "engine": "exact", "baseline": dict(baseline)})

    if engine != "sampled":
        raise ValueError(f"unknown engine {engine!r}")
    labels = np.repeat(np.arange(n), m)
    sums = np.zeros(n)
    for b, start in enumerate(range(0, n_perms, PERMUTATION_BLOCK)):
        k = min(PERMUTATION_BLOCK, n_perms - start)
        rng = np.random.default_rng([seed, b])
        order = rng.permuted(np.tile(labels, (k, 1)), axis=1)
        onehot = np.eye(n, dtype=np.int64)[order]  # k x nm x n
        prefix = np.concatenate([np.zeros((k, 1, n), dtype=np.int64), np.cumsum(onehot, axis=1)], axis=1)
        vals = at_counts(prefix.reshape(-1, n).astype(float)).reshape(k, n * m + 1)
        np.add.at(sums, order.ravel(), np.diff(vals, axis=1).ravel())
    scores = dict(zip(players, map(float, sums / n_perms)))
    return Attribution(scores, "micro_shapley", {"m": m, "engine": "sampled", "n_perms": n_perms, "seed": seed})


# ---------------------------------------------------------------------------
# Reduction to cost sharing
# ---------------------------------------------------------------------------


@dataclass
class CostSharingReduction:
    """``f(x) - f(baseline)`` split as two cost-sharing problems ``f1 - f2``.

    ``f1`` and ``f2`` are evaluated at ``x_n`` against the zero baseline.
    """

    normalized: Model
    f1: Model
    f2: Model
    x_n: dict
    zero: dict
    scales: dict
    shifts: dict
    infimum: float
    bound: str

    def box(self) -> tuple[dict, dict]:
        return dict(self.zero), dict(self.x_n)


def _grid_columns(lower: Mapping[str, float], upper: Mapping[str, float], resolution: int, cap: int) -> dict:
    names = list(lower)
    size = resolution ** len(names)
    if size > cap:
        raise SizeError(f"grid of {size} points exceeds the cap of {cap}")
    axes = [np.linspace(lower[k], upper[k], resolution) for k in names]
    grids = np.meshgrid(*axes, indexing="ij")
    return {k: g.ravel() for k, g in zip(names, grids)}


def reduce_to_cost_sharing(
    f: Model,
    x: Mapping[str, float],
    baseline: Mapping[str, float],
    *,
    resolution: int = 33,
    margin: float = 0.1,
    mode: str | None = None,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> CostSharingReduction:
    """Rewrite ``(f, x, baseline)`` as the difference of two cost-sharing problems.

    Each feature is reflected/shifted (scale ``c = +-1``, shift ``d = -c * baseline_i``)
    so the baseline becomes 0 and the explicand nonnegative.  ``p`` is a lower
    bound on every partial derivative over the box: exact for linear models and
    for models whose partials are constant on the grid, otherwise the grid
    minimum pushed ``margin * |min|`` further down.
    """
    _check_same_features(x, baseline)
    players = tuple(baseline)
    scales = {p: (1.0 if x[p] >= baseline[p] else -1.0) for p in players}
    shifts = {p: -scales[p] * baseline[p] for p in players}
    normalized: Model = f
    for p in players:
        normalized = AffineReparam(normalized, p, scales[p], shifts[p])
    x_n = {p: scales[p] * x[p] + shifts[p] for p in players}
    zero = {p: 0.0 for p in players}

    if isinstance(f, Linear):
        p_inf = min(scales[p] * f.coefficients.get(p, 0.0) for p in players)
        bound = "analytic"
    else:
        mode = mode or ("analytic" if normalized.analytic else "central-difference")
        cols = _grid_columns(zero, x_n, resolution, grid_cap)
        try:
            grads = [gradient_columns(normalized, cols, p, mode) for p in players]
        except (DomainError, EvaluationError, CapabilityError) as exc:
            raise ReductionError(f"cannot bound the partial derivatives: {exc}") from exc
        allg = np.concatenate(grads) if grads else np.zeros(1)
        if not np.all(np.isfinite(allg)):
            raise ReductionError("unbounded or undefined partial derivative on the grid")
        gmin = float(allg.min())
        if all(np.ptp(g) == 0 for g in grads):
            # constant partials: the grid minimum is the infimum
            p_inf, bound = gmin, "constant-gradient"
        else:
            p_inf, bound = gmin - margin * abs(gmin), f"grid-{mode}"
    if p_inf < 0:
        f2: Model = Linear(0.0, {p: -p_inf for p in players})
    else:
        f2 = Linear(0.0, {p: 0.0 for p in players})
    f1 = Sum(((1.0, normalized), (1.0, f2)))
    return CostSharingReduction(normalized, f1, f2, x_n, zero, scales, shifts, p_inf, bound)


def nondecreasing_on_grid(
    f: Model,
    lower: Mapping[str, float],
    upper: Mapping[str, float],
    resolution: int = 33,
    tol: float = 1e-9,
    grid_cap: int = DEFAULT_GRID_CAP,
) -> bool:
    """Whether ``f`` never decreases along any grid axis of the box."""
    names = list(lower)
    cols = _grid_columns(lower, upper, resolution, grid_cap)
    vals = f.evaluate(cols).reshape((resolution,) * len(names))
    scale = max(1.0, float(np.max(np.abs(vals))))
    return all(np.all(np.diff(vals, axis=a) >= -tol * scale) for a in range(len(names)))


# ---------------------------------------------------------------------------
# Layer-wise composition
# ---------------------------------------------------------------------------


def compositional_bshap(f: Model, x: Mapping[str, float], baseline: Mapping[str, float]) -> Attribution:
    """BShap applied layer by layer on a :class:`Layered` model.

    The outer model is attributed over its intermediate nodes; each node's score
    is passed down in proportion to the node's own BShap scores over the base
    features, as ``score * s_i / sum_j |s_j|`` (equal split over the node's
    features when every ``s_j`` is zero).
    """
    if not isinstance(f, Layered):
        raise ValueError("compositional_bshap needs a Layered model")
    _check_same_features(x, baseline)
    xc = {k: np.asarray([v]) for k, v in x.items()}
    bc = {k: np.asarray([v]) for k, v in baseline.items()}
    hx = {k: float(v[0]) for k, v in f.node_values(xc).items()}
    hb = {k: float(v[0]) for k, v in f.node_values(bc).items()}
    outer = bshap(f.outer, hx, hb)
    scores = {p: 0.0 for p in baseline}
    for node, model in f.nodes.items():
        inner = bshap(model, x, baseline)
        denom = sum(abs(s) for s in inner.scores.values())
        if denom == 0:
            share = [p for p in model.features if p in scores] or list(scores)
            for p in share:
                scores[p] += outer[node] / len(share)
        else:
            for p, s in inner.scores.items():
                scores[p] += outer[node] * s / denom
    return Attribution(
        scores,
        "compositional_bshap",
        {"baseline": dict(baseline), "redistribution": "signed share of sum |inner|", "node_scores": dict(outer.scores)},
    )


# ---------------------------------------------------------------------------
# Requests
# ---------------------------------------------------------------------------

METHOD_NAMES = ("bshap", "rbshap", "ces", "ces_empirical", "ig", "micro_shapley", "compositional_bshap")


@dataclass
class AttributionRequest:
    """Everything needed to run one attribution."""

    model: Model
    explicand: dict
    method: str
    baseline: Optional[dict] = None
    distribution: Optional[DiscreteDistribution] = None
    data: Optional[Dataset] = None
    engine: str = "exact"
    n_perms: int = 1000
    seed: int = 0
    steps: int = DEFAULT_IG_STEPS
    gradient: str = "analytic"
    smoothing: float = 0.0
    m: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        needs_baseline = {"bshap", "ig", "micro_shapley", "compositional_bshap"}
        if self.method not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHOD_NAMES}")
        if self.method in needs_baseline and self.baseline is None:
            raise ValueError(f"{self.method} needs a baseline")
        if self.method in {"rbshap", "ces"} and self.distribution is None:
            raise ValueError(f"{self.method} needs a distribution")
        if self.method == "ces_empirical" and self.data is None:
            raise ValueError("ces_empirical needs a dataset")
        if self.method == "micro_shapley" and self.m < 1:
            raise ValueError("micro_shapley needs m >= 1")

    @classmethod
    def from_json(cls, obj: Mapping, data: Dataset | None = None) -> "AttributionRequest":
        model = model_from_json(obj["model"])
        names = obj.get("features") or list(model.features)
        explicand = feature_vector(obj["explicand"], names)
        baseline = obj.get("baseline")
        dist = obj.get("distribution")
        opts = obj.get("engine", {})
        return cls(
            model=model,
            explicand=explicand,
            method=obj["method"],
            baseline=None if baseline is None else feature_vector(baseline, list(explicand)),
            distribution=None if dist is None else distribution_from_json(dist),
            data=data,
            engine=opts.get("mode", "exact"),
            n_perms=int(opts.get("n_perms", 1000)),
            seed=int(opts.get("seed", 0)),
            steps=int(obj.get("ig", {}).get("steps", DEFAULT_IG_STEPS)),
            gradient=obj.get("ig", {}).get("gradient", "analytic"),
            smoothing=float(obj.get("smoothing", 0.0)),
            m=int(obj.get("m", 1)),
        )

    def run(self) -> Attribution:
        eng = dict(engine=self.engine, n_perms=self.n_perms, seed=self.seed)
        if self.method == "bshap":
            return bshap(self.model, self.explicand, self.baseline, **eng)
        if self.method == "rbshap":
            mode = "exact" if self.engine == "exact" else "sampled"
            return rbshap(self.model, self.explicand, self.distribution, mode=mode, n_samples=self.n_perms, seed=self.seed)
        if self.method == "ces":
            return ces(self.model, self.explicand, self.distribution, **eng)
        if self.method == "ces_empirical":
            return ces_empirical(self.model, self.explicand, self.data, self.smoothing, **eng)
        if self.method == "ig":
            return ig(self.model, self.explicand, self.baseline, self.steps, self.gradient)
        if self.method == "micro_shapley":
            return micro_shapley(self.model, self.explicand, self.baseline, self.m, **eng)
        return compositional_bshap(self.model, self.explicand, self.baseline)
