import json
import math

import numpy as np
import pytest

from gwprune.ascension import (
    INF,
    AscensionPath,
    representation_samplers,
    sample_ascension_time,
    sample_ascension_times,
    sample_gw_conditioned_finite,
    sample_gw_conditioned_finite_many,
    sample_pre_ascension_tree,
    sample_pre_ascension_trees,
    simulate_ascension_path,
    simulate_ascension_paths,
)
from gwprune.errors import DomainError, TruncatedError
from gwprune.offspring import FiniteSupport, Geometric, extinction_probabilities, extinction_probability, prune_distribution
from gwprune.oracle import enumerate_trees, exact_law_table
from gwprune.prune import SampleBudget, sample_gw_many
from gwprune.stats import OTHER, ks_statistic, total_variation, with_remainder
from gwprune.tree import FiniteTree, leaf_martingale, parse, tree_probability

LEAF = FiniteTree.leaf()
CHERRY = parse("(()())")
N = 100_000


def _prop_ok(k, n, p, z=3.0):
    return abs(k / n - p) <= z * math.sqrt(p * (1 - p) / n)


def _exact_gw(d, u, K):
    return with_remainder(exact_law_table(d, u, K).entries)


# -- ascension time --------------------------------------------------------------------


def test_ascension_time_binary(binary, rng):
    A = sample_ascension_times(binary, N, rng)
    assert np.all((A >= 1.0) & (A <= 2.0))
    assert np.median(A) == pytest.approx(4.0 / 3.0, abs=0.01)
    rep = ks_statistic(A, lambda u: np.clip(2.0 - 2.0 / u, 0.0, 1.0), threshold=0.01)
    assert rep.passed
    assert 1.0 <= sample_ascension_time(binary, rng) <= 2.0


def test_ascension_time_geometric(geom, rng):
    A = sample_ascension_times(geom, 20_000, rng)
    assert np.all((A >= 1.0) & (A <= 1.5))
    assert ks_statistic(extinction_probabilities(geom, A), lambda x: x).passed


def test_F_of_A_uniform(binary, rng):
    A = sample_ascension_times(binary, N, rng)
    FA = 2.0 / A - 1.0
    assert ks_statistic(FA, lambda x: np.clip(x, 0.0, 1.0), threshold=0.01).passed


def test_ascension_rejects_infinite_ubar():
    with pytest.raises(DomainError):
        sample_ascension_times(FiniteSupport((0.5, 0.5)), 10)
    with pytest.raises(DomainError):
        sample_ascension_times(Geometric(0.5, 0.0), 10)


# -- conditioned on finite -------------------------------------------------------------


def test_conditioned_finite_root(binary, rng):
    b = sample_gw_conditioned_finite_many(binary, 1.5, N, rng=rng)
    assert _prop_ok(int(np.sum(b.num_nodes() == 1)), N, 0.75)
    assert prune_distribution(binary, 1.5).p0 / extinction_probability(binary, 1.5) == pytest.approx(0.75)
    assert isinstance(sample_gw_conditioned_finite(binary, 1.2, rng=1), FiniteTree)
    with pytest.raises(DomainError):
        sample_gw_conditioned_finite(binary, 0.5)


def test_conditioned_finite_at_one_is_critical(binary):
    a = sample_gw_conditioned_finite_many(binary, 1.0, 500, SampleBudget(node_cap=10**5), rng=4)
    b = sample_gw_many(binary, 1.0, 500, SampleBudget(node_cap=10**5), rng=4)
    assert np.array_equal(a.arities, b.arities)


def test_conditioned_finite_vs_rejection(binary, rng):
    raw = sample_gw_many(binary, 1.5, N, SampleBudget(height_cap=60, node_cap=300), rng=rng)
    kept = [t for t, tr in zip(raw, raw.truncated) if not tr]
    assert len(kept) > 0.3 * N
    emp = {}
    for t in kept:
        k = t.serialize() if t.num_nodes <= 7 else OTHER
        emp[k] = emp.get(k, 0) + 1
    direct = sample_gw_conditioned_finite_many(binary, 1.5, N, rng=rng)
    assert total_variation(emp, direct.law(7)) < 0.01
    assert total_variation(direct.law(7), _exact_gw(binary, 0.5, 7)) < 0.01


# -- paths ----------------------------------------------------------------------------


def test_grid_below_one_never_absorbs(geom):
    paths = simulate_ascension_paths(geom, [0.2, 0.5, 0.8], 5000, rng=2)
    assert paths.alive.all()
    # the critical endpoint has infinite mean size, so only a few paths
    paths = simulate_ascension_paths(geom, [0.3, 1.0], 50, SampleBudget(node_cap=10**6), rng=3)
    assert paths.alive.all()


def test_absorption_frequencies(binary, rng):
    grid = [0.5, 0.9, 1.2, 1.5, 1.8, 2.0]
    paths = simulate_ascension_paths(binary, grid, N, rng=rng)
    absorbed = (~paths.alive).sum(axis=0)
    for u, k in zip(grid, absorbed):
        target = 1.0 - extinction_probability(binary, u)
        if 0.0 < target < 1.0:
            assert _prop_ok(int(k), N, target, z=4.0)
        else:
            assert k == round(target * N)
    # absorption is monotone and permanent
    assert np.all(np.diff(paths.alive.astype(int), axis=1) <= 0)


def test_paths_nested(binary):
    paths = simulate_ascension_paths(binary, [0.3, 0.8, 1.1, 1.4, 1.7], 3000, rng=6)
    for j in range(len(paths)):
        p = paths.path(j)  # validates nesting and absorption
        fin = [s for s in p.states if s is not INF]
        assert all(a.is_subtree_of(b) for a, b in zip(fin, fin[1:]))


@pytest.mark.parametrize("grid", [[0.5, 1.2, 1.5], [0.7, 1.3, 1.6, 1.9]])
def test_conjugate_consistency_along_paths(binary, rng, grid):
    # given survival through the last grid point v, the state at u is GW(p^(u F(v)))
    paths = simulate_ascension_paths(binary, grid, 2 * N, rng=rng)
    v = grid[-1]
    Fv = extinction_probability(binary, v)
    survivors = paths.alive[:, -1]
    for i, u in enumerate(grid):
        b = paths.trees[i]
        emp = {}
        for j in np.flatnonzero(survivors):
            t = b.tree(int(j))
            k = t.serialize() if t.num_nodes <= 5 else OTHER
            emp[k] = emp.get(k, 0) + 1
        assert total_variation(emp, _exact_gw(binary, u * Fv, 5)) < 0.015
        # and, given only survival up to u itself, GW(p^(u_hat))
        alive_u = paths.finite_states(i)
        assert total_variation(alive_u.law(5), _exact_gw(binary, u * extinction_probability(binary, u), 5)) < 0.015


def test_single_path_and_jsonl(binary):
    p = simulate_ascension_path(binary, [0.5, 1.5, 2.0], rng=11)
    assert p.states[-1] is INF  # p0 at u_bar vanishes, so G(2) is infinite
    lines = [json.loads(x) for x in p.to_jsonl().splitlines()]
    assert [x["u"] for x in lines] == [0.5, 1.5, 2.0]
    assert lines[-1]["state"] == "INF"
    lo, hi = p.ascension_interval
    assert hi in (1.5, 2.0)
    assert p.last_finite is not None


def test_path_validation():
    with pytest.raises(DomainError):
        AscensionPath([0.1, 0.2, 0.3], [LEAF, INF, LEAF])
    with pytest.raises(DomainError):
        AscensionPath([0.1, 0.2], [CHERRY, LEAF])
    p = AscensionPath([0.1, 0.2], [LEAF, LEAF])
    assert p.ascension_interval is None and p.last_finite is None
    assert str(INF) == "INF"


def test_grid_validation(binary):
    with pytest.raises(DomainError):
        simulate_ascension_paths(binary, [0.5, 0.4], 10)
    with pytest.raises(DomainError):
        simulate_ascension_paths(binary, [0.5, 2.5], 10)
    with pytest.raises(DomainError):
        simulate_ascension_paths(binary, [], 10)


def test_truncation_reports_partial_path(binary):
    hits = 0
    for seed in range(20):
        try:
            simulate_ascension_path(binary, [0.5, 0.9, 1.0], SampleBudget(node_cap=3), rng=seed)
        except TruncatedError as exc:
            hits += 1
            assert isinstance(exc.partial, AscensionPath)
            assert 1 <= len(exc.partial.states) <= 3
    assert hits > 0


# -- pre-ascension tree ----------------------------------------------------------------


def test_pre_ascension_root(binary, rng):
    b = sample_pre_ascension_trees(binary, 1.5, N, rng)
    assert _prop_ok(int(np.sum(b.num_nodes() == 1)), N, 0.5)
    assert isinstance(sample_pre_ascension_tree(binary, 1.7, rng), FiniteTree)
    for a in (1.0, 2.0, 0.5):
        with pytest.raises(DomainError):
            sample_pre_ascension_tree(binary, a)


def test_pre_ascension_law(geom, rng):
    a = 1.3
    ah = a * extinction_probability(geom, a)
    b = sample_pre_ascension_trees(geom, a, N, rng)
    exact = {t.serialize(): leaf_martingale(geom, ah, t) * tree_probability(geom, ah, t)
             for t in enumerate_trees(5)}
    assert total_variation(b.law(5), with_remainder(exact)) < 0.01


# -- representation ----------------------------------------------------------------------


def test_representation_at_zero(binary):
    left, right = representation_samplers(binary, 0.0, 1000, rng=1)
    assert left.n_infinite == right.n_infinite == 0
    assert set(left.finite.keys()) == {"()"} == set(right.finite.keys())


@pytest.mark.parametrize("u", [0.8, 1.2, 1.6])
def test_representation_marginals(binary, rng, u):
    left, right = representation_samplers(binary, u, N, rng=rng)
    target = 1.0 - extinction_probability(binary, u)
    for side in (left, right):
        if target > 0.0:
            assert _prop_ok(side.n_infinite, side.n, target)
        else:
            assert side.n_infinite == 0
    assert total_variation(left.finite.law(5), right.finite.law(5)) < 0.015
