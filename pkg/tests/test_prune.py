import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gwprune.errors import DomainError
from gwprune.offspring import FiniteSupport, bridge_distribution, prune_distribution
from gwprune.oracle import enumerate_trees, exact_law_table, pruning_law
from gwprune.prune import (
    MarkedTree,
    SampleBudget,
    Truncated,
    attach_marks,
    cut_at,
    cut_many,
    draw_marks,
    expected_leaves,
    graft_forward,
    graft_forward_many,
    modified_gw_probability,
    prune_gw_many,
    prune_many,
    prune_once,
    sample_gw,
    sample_gw_many,
    sample_modified_gw,
    sample_modified_gw_many,
    total_infinite_rate,
    transition_probability,
    transition_rate_finite,
    transition_rate_infinite,
)
from gwprune.stats import OTHER, mean_and_se, total_variation, with_remainder
from gwprune.tree import FiniteTree, leaf_martingale, parse, restricted_class_probability

from conftest import trees

LEAF = FiniteTree.leaf()
CHERRY = parse("(()())")
N = 100_000


def _prop_ok(k, n, p, z=3.0):
    return abs(k / n - p) <= z * math.sqrt(p * (1 - p) / n)


def _tv_exact(batch, table, K):
    return total_variation(batch.law(K), with_remainder(table.entries))


# -- prune_once -------------------------------------------------------------------


@given(trees)
def test_prune_identity_and_root(t):
    assert prune_once(t, 1.0, rng=0) == t
    if 1 not in t.arities:
        assert prune_once(t, 0.0, rng=0) == LEAF


@given(trees, st.floats(0.0, 1.0), st.integers(0, 2**32))
def test_prune_is_subtree(t, u, seed):
    assert prune_once(t, u, rng=seed).is_subtree_of(t)


def test_prune_cherry_frequency(rng):
    law = prune_many(CHERRY, 0.7, N, rng).law()
    assert _prop_ok(law.counts["(()())"], N, 0.7)
    assert law.counts["(()())"] + law.counts["()"] == N


def test_prune_rejects_u_above_one():
    with pytest.raises(DomainError):
        prune_once(CHERRY, 1.2)


@pytest.mark.parametrize("text", ["((()())(()()()))", "(((()())())(()))", "((()()())()(()))"])
def test_pruning_law_matches_retention_model(rng, text):
    t = parse(text)
    exact = pruning_law(t, 0.6)
    assert math.fsum(exact.values()) == pytest.approx(1.0, abs=1e-12)
    assert total_variation(prune_many(t, 0.6, N, rng).law(), exact) < 0.01


def test_pruned_gw_sampler_matches_exact(binary, rng):
    table = exact_law_table(binary, 0.5, 7)
    assert _tv_exact(prune_gw_many(binary, 0.5, N, rng), table, 7) < 0.01


# -- marks and the coupled process -----------------------------------------------


def test_mark_laws(rng):
    m = draw_marks(np.array([2, 1, 3, 0]), rng, size=N)
    assert _prop_ok(int(np.sum(m[:, 0] <= 0.5)), N, 0.5)
    assert np.all(m[:, 1] == 0.0)
    assert _prop_ok(int(np.sum(m[:, 2] <= 0.5)), N, 0.25)
    assert np.all(np.isnan(m[:, 3]))


def test_marked_tree_validation():
    with pytest.raises(DomainError):
        MarkedTree(CHERRY, np.array([0.5, 0.1, np.nan]))
    with pytest.raises(DomainError):
        MarkedTree(parse("((()))"), np.array([0.3, 0.0, np.nan]))
    with pytest.raises(DomainError):
        MarkedTree(CHERRY, np.array([0.5, np.nan, np.nan]), scale=0.0)
    m = attach_marks(CHERRY, rng=1)
    assert list(m.mark_map) == [()]


@given(trees, st.integers(0, 2**32), st.floats(0.1, 3.0))
def test_cut_endpoints_and_nesting(t, seed, scale):
    m = attach_marks(t, scale, rng=seed)
    assert cut_at(m, scale) == t
    if 1 not in t.arities:
        assert cut_at(m, 0.0) == LEAF
    a, b = cut_at(m, 0.3 * scale), cut_at(m, 0.8 * scale)
    assert a.is_subtree_of(b)
    with pytest.raises(DomainError):
        cut_at(m, 1.01 * scale)


def test_nesting_10k_marked_trees():
    rng = np.random.default_rng(3)
    batch = sample_gw_many(FiniteSupport((0.4, 0.1, 0.3, 0.2)), 0.7, 10_000, rng=rng)
    for t in batch:
        m = attach_marks(t, rng=rng)
        assert cut_at(m, 0.3).is_subtree_of(cut_at(m, 0.8))


@pytest.mark.parametrize("u", [0.3, 0.7])
def test_coupling_consistency(rng, u):
    t = parse("((()())(()()()))")
    a = cut_many(t, u, N, rng)
    assert total_variation(a.law(), pruning_law(t, u)) < 0.01


@pytest.mark.parametrize("h", [0, 1, 2, 3])
def test_projectivity(h):
    t = parse("((()())(()(()())()))")
    u = 0.55
    exact = pruning_law(t, u)
    rh = t.restrict(h)
    got = math.fsum(p for k, p in exact.items() if parse(k).restrict(h) == rh)
    expo = sum(a - 1 for a, d in zip(t.arities, t.depths) if a > 0 and d < h)
    assert got == pytest.approx(u**expo, abs=1e-14)


# -- GW samplers -------------------------------------------------------------------


def test_sample_gw_root_frequency(binary, rng):
    b = sample_gw_many(binary, 0.5, N, rng=rng)
    assert _prop_ok(int(np.sum(b.num_nodes() == 1)), N, 0.75)
    assert not b.truncated.any()


def test_sample_gw_r2_classes(binary, rng):
    b = sample_gw_many(binary, 0.5, N, rng=rng)
    emp = {}
    for t in b:
        k = t.restrict(2).serialize()
        emp[k] = emp.get(k, 0) + 1
    exact = {}
    for t in enumerate_trees(7, 2):
        r = t.restrict(2)
        if r.height < 2 or all(a in (0, 2) for a in r.arities):
            exact.setdefault(r.serialize(), restricted_class_probability(binary, 0.5, r, 2))
    assert math.fsum(exact.values()) == pytest.approx(1.0, abs=1e-12)
    assert total_variation(emp, exact) < 0.01


def test_prune_of_gw_equals_gw_of_pruned(binary, rng):
    # Nodes below the height cap keep their true arities, so on the event that
    # the pruned tree has height < 7 the cap is invisible; every tree with at
    # most 7 nodes lies in that event and the comparison is exact.
    full = sample_gw_many(binary, 1.0, N, SampleBudget(height_cap=7), rng=rng)
    emp = {}
    for t in full:
        k = prune_once(t, 0.5, rng)
        k = k.serialize() if k.num_nodes <= 7 else OTHER
        emp[k] = emp.get(k, 0) + 1
    assert total_variation(emp, with_remainder(exact_law_table(binary, 0.5, 7).entries)) < 0.01


def test_supercritical_needs_budget(binary):
    with pytest.raises(DomainError):
        sample_gw(binary, 1.5)
    out = [sample_gw(binary, 1.9, SampleBudget(node_cap=50), rng=s) for s in range(50)]
    assert any(isinstance(t, Truncated) for t in out)
    assert all(str(t).startswith("TRUNCATED ") for t in out if isinstance(t, Truncated))


def test_height_cap(binary):
    b = sample_gw_many(binary, 1.8, 200, SampleBudget(height_cap=3), rng=5)
    assert all(t.height <= 3 for t in b)
    assert b.truncated.any()
    with pytest.raises(DomainError):
        SampleBudget(node_cap=0)


def test_modified_gw(binary, rng):
    # critical subtrees have infinite mean size; the cap does not affect the root
    b = sample_modified_gw_many(binary, 0.5, 1.0, N, SampleBudget(node_cap=1000), rng=rng)
    assert _prop_ok(int(np.sum(b.num_nodes() == 1)), N, 2.0 / 3.0)
    assert sample_modified_gw(binary, 0.4, 0.4, rng=1) == LEAF


def test_modified_gw_expected_leaves(binary, rng):
    a, b = 0.2, 0.6
    br = bridge_distribution(binary, a, b)
    db = prune_distribution(binary, b)
    target = br.p0 + br.mean * db.p0 / (1.0 - db.mean)
    mean, se = mean_and_se(sample_modified_gw_many(binary, a, b, N, rng=rng).num_leaves())
    assert abs(mean - target) < 4 * se


def test_modified_gw_probability_normalised(geom):
    total = math.fsum(modified_gw_probability(geom, 0.2, 0.5, t) for t in enumerate_trees(10))
    assert 0.97 < total <= 1.0 + 1e-12


# -- grafting ----------------------------------------------------------------------


def test_graft_nothing_grows(binary):
    t = parse("(()(()()))")
    assert graft_forward(t, binary, 0.5, 0.5, rng=2) == t


def test_graft_contains_start(binary):
    rng = np.random.default_rng(9)
    start = sample_gw_many(binary, 0.3, 500, rng=rng)
    out = graft_forward_many(start, binary, 0.3, 0.7, rng=rng)
    for s, t in zip(start, out):
        assert s.is_subtree_of(t)


def test_graft_marginal(binary, rng):
    start = sample_gw_many(binary, 0.3, N, rng=rng)
    out = graft_forward_many(start, binary, 0.3, 0.8, rng=rng)
    assert _tv_exact(out, exact_law_table(binary, 0.8, 7), 7) < 0.01


def test_graft_chapman_kolmogorov(geom, rng):
    start = sample_gw_many(geom, 0.2, N, rng=rng)
    one = graft_forward_many(start, geom, 0.2, 0.7, rng=rng)
    two = graft_forward_many(graft_forward_many(start, geom, 0.2, 0.45, rng=rng), geom, 0.45, 0.7, rng=rng)
    assert total_variation(one.law(7), two.law(7)) < 0.01


def test_graft_martingale_per_state(binary, rng):
    a, b = 0.3, 0.6
    for s in (LEAF, CHERRY, parse("(()(()()))")):
        out = graft_forward_many(type(sample_gw_many(binary, a, 1, rng=0)).from_trees([s] * N),
                                 binary, a, b, rng=rng)
        m = leaf_martingale(binary, b, LEAF) * out.num_leaves()
        mean, se = mean_and_se(m)
        assert abs(mean - leaf_martingale(binary, a, s)) < 4 * se


def test_transition_probability_sums_to_one(binary):
    s = CHERRY
    total = math.fsum(transition_probability(binary, 0.2, 0.5, s, t) for t in enumerate_trees(13, 2))
    assert 0.97 < total <= 1.0 + 1e-12
    assert transition_probability(binary, 0.2, 0.5, s, LEAF) == 0.0
    assert transition_probability(binary, 0.3, 0.3, s, s) == 1.0


# -- rates -------------------------------------------------------------------------


def test_finite_rate_examples(binary, geom):
    assert transition_rate_finite(binary, 0.5, LEAF, (), CHERRY) == pytest.approx(0.375, abs=1e-14)
    assert transition_rate_finite(geom, 0.5, LEAF, (), parse("((()))")) == 0.0
    with pytest.raises(DomainError):
        transition_rate_finite(binary, 0.5, LEAF, (), LEAF)
    with pytest.raises(DomainError):
        transition_rate_finite(binary, 0.5, CHERRY, (), CHERRY)


@pytest.mark.parametrize("target", ["(()())", "((()())())", "(()(()()))"])
def test_finite_rate_finite_difference(binary, target):
    u, h = 0.5, 1e-3
    s = CHERRY
    t = parse(target)
    grown = s.graft((1,), t)
    fd = transition_probability(binary, u, u + h, s, grown) / h
    rate = transition_rate_finite(binary, u, s, (1,), t)
    assert fd == pytest.approx(rate, rel=0.05)


def test_infinite_rate_examples(binary):
    assert transition_rate_infinite(binary, 0.9, LEAF, 2) == 0.0
    assert transition_rate_infinite(binary, 1.0, LEAF, 2) == 0.0
    assert transition_rate_infinite(binary, 1.5, LEAF, 2) == pytest.approx(16.0 / 9.0, abs=1e-13)
    assert total_infinite_rate(binary, 1.5, LEAF) == pytest.approx(16.0 / 9.0, abs=1e-13)
    assert total_infinite_rate(binary, 1.5, CHERRY) == pytest.approx(32.0 / 9.0, abs=1e-13)
    with pytest.raises(DomainError):
        transition_rate_infinite(binary, 1.5, LEAF, 0)


def test_total_rate_is_sum(geom):
    u = 1.3
    total = total_infinite_rate(geom, u, LEAF)
    parts = math.fsum(transition_rate_infinite(geom, u, LEAF, k) for k in range(1, 400))
    assert total == pytest.approx(parts, rel=1e-12)


def test_expected_leaves(binary, geom, rng):
    assert expected_leaves(binary, 0.5) == pytest.approx(1.5, abs=1e-15)
    assert expected_leaves(binary, 0.0) == 1.0
    assert expected_leaves(geom, 0.8) == pytest.approx(1.9091, abs=1e-4)
    with pytest.raises(DomainError):
        expected_leaves(binary, 1.0)
    mean, se = mean_and_se(sample_gw_many(geom, 0.8, N, rng=rng).num_leaves())
    assert abs(mean - expected_leaves(geom, 0.8)) < 4 * se
