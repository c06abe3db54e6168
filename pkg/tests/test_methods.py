import numpy as np
import pytest

import instances as gen
from shapattr import (
    AttributionRequest,
    Dataset,
    Expression,
    Layered,
    Linear,
    TreeEnsemble,
    bshap,
    ces,
    ces_empirical,
    compositional_bshap,
    empirical,
    ig,
    micro_shapley,
    rbshap,
    reduce_to_cost_sharing,
)
from shapattr import oracle
from shapattr.core import Leaf, Split, restrict_agreement, smoothing_tolerance
from shapattr.errors import CapabilityError, ConditioningError, ReductionError, SizeError


def test_bshap_matches_permutation_oracle():
    rng = np.random.default_rng(31)
    for _ in range(20):
        feats = gen.names(int(rng.integers(1, 5)))
        f = gen.polynomial(rng, feats)
        x, b = gen.point(rng, feats), gen.point(rng, feats)
        want = oracle.perm_shapley(feats, lambda s: f(oracle.mixed(x, b, s)))
        got = bshap(f, x, b)
        assert max(abs(got[p] - want[p]) for p in feats) <= 1e-9
        assert got.total() == pytest.approx(f(x) - f(b), abs=1e-9)


def test_bshap_sampled_engine():
    f = Expression("x1*x2 + x3")
    x, b = {"x1": 1.0, "x2": 2.0, "x3": 3.0}, {"x1": 0.0, "x2": 0.0, "x3": 0.0}
    a = bshap(f, x, b, engine="sampled", n_perms=4000, seed=1)
    assert a.scores == bshap(f, x, b, engine="sampled", n_perms=4000, seed=1).scores
    assert a.total() == pytest.approx(5.0)
    assert a["x3"] == pytest.approx(3.0)


def test_rbshap_is_average_of_bshap():
    rng = np.random.default_rng(32)
    f, x, dist, _ = gen.independent_instance(rng, max_players=3)
    want = sum(p * bshap(f, x, base).as_array(dist.features) for base, p in dist.support())
    assert np.allclose(rbshap(f, x, dist).as_array(dist.features), want, atol=1e-12)
    sampled = rbshap(f, x, dist, mode="sampled", n_samples=2000, seed=3)
    assert np.allclose(sampled.as_array(dist.features), want, atol=0.25 * max(1.0, np.abs(want).max()))


def test_ces_matches_brute_force():
    rng = np.random.default_rng(33)
    for _ in range(15):
        f, x, dist, marginals = gen.independent_instance(rng)
        rows = oracle.product_rows(marginals)
        want = oracle.perm_shapley(dist.features, lambda s: oracle.conditional_mean(rows, f, x, s))
        got = ces(f, x, dist)
        assert max(abs(got[p] - want[p]) for p in dist.features) <= 1e-9


def test_ces_empirical_appends_unique_explicand():
    data = Dataset.from_rows([{"a": 0.0, "b": 0.0}, {"a": 1.0, "b": 1.0}])
    f = Expression("a + 2*b")
    x = {"a": 5.0, "b": 7.0}
    a = ces_empirical(f, x, data)
    assert a.provenance["explicand_appended"]
    assert a["a"] == pytest.approx(a["b"])
    with pytest.raises(ConditioningError):
        ces_empirical(f, x, data, append_explicand=False)


def test_smoothing_widens_agreement():
    rng = np.random.default_rng(34)
    data = Dataset(("a", "b"), rng.normal(size=(60, 2)))
    f = Expression("a*b + a")
    x = data.row(0)
    exact, smooth = ces_empirical(f, x, data), ces_empirical(f, x, data, 0.5)
    assert exact.scores != smooth.scores
    near = restrict_agreement(data, x, data.features, smoothing_tolerance(data, 0.5))
    assert smooth.total() == pytest.approx(f.evaluate(near.columns()).mean() - f.evaluate(data.columns()).mean())


def test_ig_exact_on_quadratic():
    # midpoint rule is exact for gradients linear along the path
    f = Expression("x1^2 + 3*x1*x2")
    x, b = {"x1": 2.0, "x2": 1.0}, {"x1": 0.0, "x2": -1.0}
    a = ig(f, x, b, steps=1)
    assert a.total() == pytest.approx(f(x) - f(b))
    assert a.scores == pytest.approx(oracle.midpoint_ig(("x1", "x2"), lambda k, p: float(f.gradient({q: np.asarray([v]) for q, v in p.items()}, k)[0]), x, b, 1))


def test_ig_rejects_piecewise_constant_and_non_analytic():
    tree = TreeEnsemble((Split("a", 0.0, Leaf(0.0), Leaf(1.0)),))
    with pytest.raises(CapabilityError):
        ig(tree, {"a": 1.0}, {"a": -1.0})
    with pytest.raises(ValueError):
        ig(Expression("a"), {"a": 1.0}, {"a": 0.0}, steps=0)


def test_micro_shapley_m1_is_bshap_and_matches_walk():
    rng = np.random.default_rng(35)
    for _ in range(5):
        feats = gen.names(3)
        f = gen.polynomial(rng, feats)
        x, b = gen.point(rng, feats), gen.point(rng, feats)
        assert np.allclose(micro_shapley(f, x, b, 1).as_array(feats), bshap(f, x, b).as_array(feats), atol=1e-9)
        walk = oracle.micro_walk(feats, f, x, b, 3)
        assert np.allclose(micro_shapley(f, x, b, 3).as_array(feats), [walk[p] for p in feats], atol=1e-9)


def test_micro_shapley_sampled_and_caps():
    f = Expression("(x1 + x2)^3")
    x, b = {"x1": 5.0, "x2": 1.0}, {"x1": 0.0, "x2": 0.0}
    exact = micro_shapley(f, x, b, 4).as_array()
    sampled = micro_shapley(f, x, b, 4, engine="sampled", n_perms=20000, seed=2).as_array()
    assert np.allclose(sampled, exact, rtol=0.05)
    with pytest.raises(SizeError):
        micro_shapley(f, x, b, 1000, grid_cap=100)


def test_reduction_signs_and_linear_infimum():
    f = Linear(0.0, {"x1": -1.0, "x2": 1.0})
    red = reduce_to_cost_sharing(f, {"x1": 1.0, "x2": 1.0}, {"x1": 0.0, "x2": 0.0})
    assert red.infimum == -1.0 and red.bound == "analytic"
    assert red.f1({"x1": 1.0, "x2": 1.0}) == 2.0
    g = Expression("-x1 + x2")
    assert reduce_to_cost_sharing(g, {"x1": 1.0, "x2": 1.0}, {"x1": 0.0, "x2": 0.0}).infimum == -1.0
    flipped = reduce_to_cost_sharing(f, {"x1": -2.0, "x2": 1.0}, {"x1": 0.0, "x2": 0.0})
    assert flipped.scales["x1"] == -1.0 and flipped.x_n["x1"] == 2.0
    assert flipped.infimum == 1.0


def test_reduction_rejects_unbounded_derivative():
    with pytest.raises(ReductionError):
        reduce_to_cost_sharing(Expression("sqrt(x1) + x2"), {"x1": 1.0, "x2": 1.0}, {"x1": 0.0, "x2": 0.0})


def test_compositional_bshap_redistribution():
    f = Layered(Expression("h - z"), {"h": Expression("x1 - x2"), "z": Expression("x3")})
    a = compositional_bshap(f, {"x1": 1.0, "x2": 1.0, "x3": 2.0}, {"x1": 0.0, "x2": 0.0, "x3": 0.0})
    # h contributes 0 with inner scores (1, -1); z contributes -2
    assert a.scores == {"x1": 0.0, "x2": 0.0, "x3": -2.0}
    with pytest.raises(ValueError):
        compositional_bshap(Expression("x1"), {"x1": 1.0}, {"x1": 0.0})


def test_attribution_request_from_json():
    req = AttributionRequest.from_json(
        {"method": "bshap", "model": {"type": "linear", "coefficients": {"a": 2.0}}, "explicand": {"a": 3.0}, "baseline": {"a": 1.0}}
    )
    assert req.run()["a"] == 4.0


def test_ces_equals_empirical_oracle():
    rng = np.random.default_rng(36)
    for _ in range(10):
        feats = gen.names(3)
        data, x = gen.dataset_with(rng, feats, 8)
        f = gen.polynomial(rng, feats)
        rows = [(r, 1.0) for r in data.rows()]
        want = oracle.perm_shapley(feats, lambda s: oracle.conditional_mean(rows, f, x, s))
        got = ces(f, x, empirical(data))
        assert max(abs(got[p] - want[p]) for p in feats) <= 1e-9
