"""Named verification suites, one per acceptance criterion.

Each suite returns a list of :class:`TestReport`; a suite passes iff every
report does. Monte Carlo parts draw from ``spawn(seed, criterion, part)`` so
suites are reproducible and independent of the order they run in.
"""
from __future__ import annotations

import math
import time
from typing import Callable, Optional

import numpy as np

from ._rng import spawn
from .ascension import (
    representation_samplers,
    sample_ascension_times,
    sample_pre_ascension_trees,
    simulate_ascension_paths,
)
from .kesten import gstar_probability, kesten_class_probability, sample_gstar_many, sample_kesten_many
from .offspring import (
    FiniteSupport,
    Geometric,
    OffspringDistribution,
    ascension_density,
    conjugate,
    extinction_probabilities,
    extinction_probability,
    prune_distribution,
)
from .oracle import count_trees, enumerate_trees, exact_law_table, law_table_from, leaf_count_law, verify_leaf_conditioning
from .prune import (
    expected_leaves,
    graft_forward_many,
    prune_gw_many,
    sample_gw_many,
    transition_probability,
    transition_rate_finite,
)
from .stats import (
    EmpiricalLaw,
    TestReport,
    chi_square_statistic,
    ks_statistic,
    martingale_report,
    mean_and_se,
    total_variation,
    with_remainder,
    z_score,
)
from .tree import FiniteTree, leaf_martingale, parse, tree_probability

N_DEFAULT = 100_000
BINARY = FiniteSupport((0.5, 0.0, 0.5))
GEOM = Geometric.critical(0.5)


def _exact(name: str, err: float, tol: float, n: int = 0, notes: str = "") -> TestReport:
    return TestReport(name, float(err), tol, n, notes)


def _tv_report(name: str, emp: EmpiricalLaw, exact: dict, tol: float, max_nodes: int) -> TestReport:
    tv = total_variation(emp, with_remainder(exact))
    return TestReport(name, tv, tol, emp.total, f"trees with <= {max_nodes} nodes plus OTHER")


def _tv_two_sample(name: str, a: EmpiricalLaw, b: EmpiricalLaw, tol: float) -> TestReport:
    return TestReport(name, total_variation(a, b), tol, min(a.total, b.total), "two-sample")


def _prop_z(name: str, k: int, n: int, p: float) -> TestReport:
    """|k/n - p| in standard errors (binomial), threshold 4."""
    se = math.sqrt(p * (1.0 - p) / n)
    return TestReport(name, z_score(k / n, se, p), 4.0, n, f"observed {k / n:.5f}, expected {p:.5f}")


# 1 -----------------------------------------------------------------------------


def suite_binary_closed_forms(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    b = BINARY
    us = np.round(np.arange(1.0, 2.0 + 1e-9, 0.1), 10)
    F_err = max(abs(extinction_probability(b, u) - (2.0 / u - 1.0)) for u in us)
    hat_err = max(abs(conjugate(b, u) - (2.0 - u)) for u in us)
    dens_err = max(abs(ascension_density(b, u) - 2.0 / u**2) for u in us[1:-1])
    return [
        _exact("binary F(u) = 2/u - 1", F_err, 1e-10),
        _exact("binary u_hat = 2 - u", hat_err, 1e-10),
        _exact("binary density 2/u^2", dens_err, 1e-6),
        _exact("binary u_bar = 2", abs(b.max_parameter - 2.0), 0.0),
    ]


# 2 -----------------------------------------------------------------------------


def _geom_F(u, beta=0.5):
    return (2.0 - u - beta) / ((1.0 - u * beta) * u)


def _geom_density(u, beta=0.5):
    return (2.0 - beta) / u**2 + (1.0 - beta) ** 2 * beta / (1.0 - u * beta) ** 2


def suite_geometric_closed_forms(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    g = GEOM
    h = 1e-5
    us = np.linspace(1.05, 1.45, 9)
    fd = np.array([-(extinction_probability(g, u + h) - extinction_probability(g, u - h)) / (2 * h) for u in us])
    closed = _geom_density(us)
    dens = np.array([ascension_density(g, u) for u in us])
    F_err = max(abs(extinction_probability(g, u) - _geom_F(u)) for u in us)
    return [
        _exact("geometric u_bar = 1.5", abs(g.max_parameter - 1.5), 1e-12),
        _exact("geometric F(1.2) = 0.625", abs(extinction_probability(g, 1.2) - 0.625), 1e-10),
        _exact("geometric F(u) closed form", F_err, 1e-10),
        _exact("geometric density formula vs -F' finite differences (rel)", np.max(np.abs(closed - fd) / closed), 1e-4),
        _exact("geometric ascension_density vs -F' finite differences (rel)", np.max(np.abs(dens - fd) / fd), 1e-4),
    ]


# 3 -----------------------------------------------------------------------------


def suite_duality(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    out = []
    dists = [("binary", BINARY), ("geometric", GEOM)] if d is None else [(d.literal(), d)]
    for name, dist in dists:
        ubar = dist.max_parameter
        us = np.linspace(0.0, ubar, 41)[:-1]
        e1 = e2 = 0.0
        for u in us:
            F = extinction_probability(dist, u)
            uh = u * F
            e1 = max(e1, abs(float(dist.pgf(uh) - dist.pgf(u)) - (uh - u)))
            e2 = max(e2, abs(prune_distribution(dist, uh).p0 - prune_distribution(dist, u).p0 / F))
        out.append(_exact(f"{name}: g(u_hat) - g(u) = u_hat - u", e1, 1e-10))
        out.append(_exact(f"{name}: p0(u_hat) = p0(u)/F(u)", e2, 1e-10))
    return out


# 4 -----------------------------------------------------------------------------


def suite_pruning(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    d = BINARY if d is None else d
    out = []
    t0 = time.perf_counter()
    laws = []
    for i, u in enumerate((0.3, 0.5, 0.8)):
        batch = prune_gw_many(d, u, n, spawn(seed, 4, i))
        laws.append((u, batch.law(7)))
    elapsed = time.perf_counter() - t0
    for u, emp in laws:
        out.append(_tv_report(f"prune_once(GW(p), {u}) vs GW(p^(u))", emp, exact_law_table(d, u, 7).entries, 0.01, 7))
    out.append(TestReport("pruning sampler runtime (s)", elapsed, 30.0, 3 * n, "three parameters"))
    return out


# 5 -----------------------------------------------------------------------------


def suite_kernel(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    d = BINARY if d is None else d
    a, b, c = 0.3, 0.5, 0.8
    start = sample_gw_many(d, a, n, rng=spawn(seed, 5, 0))
    one = graft_forward_many(start, d, a, c, rng=spawn(seed, 5, 1))
    two = graft_forward_many(graft_forward_many(start, d, a, b, rng=spawn(seed, 5, 2)), d, b, c, rng=spawn(seed, 5, 3))
    exact = exact_law_table(d, c, 7).entries
    out = [
        _tv_two_sample(f"graft {a}->{c} vs {a}->{b}->{c}", one.law(7), two.law(7), 0.01),
        _tv_report(f"graft {a}->{c} marginal vs GW(p^({c}))", one.law(7), exact, 0.01, 7),
        _tv_report(f"graft {a}->{b}->{c} marginal vs GW(p^({c}))", two.law(7), exact, 0.01, 7),
    ]
    # finite-difference check of the finite-tree jump rate
    u, h = 0.5, 1e-3
    cases = [("()", (), "(()())"), ("(()())", (1,), "(()())"), ("(()())", (2,), "((()())())"),
             ("()", (), "((()())())")]
    worst = 0.0
    for s_txt, leaf, t_txt in cases:
        s, t = parse(s_txt), parse(t_txt)
        target = s.graft(leaf, t)
        rate = transition_rate_finite(d, u, s, leaf, t)
        fdiff = transition_probability(d, u, u + h, s, target) / h
        worst = max(worst, abs(fdiff - rate) / rate)
    out.append(_exact("finite-tree rate vs kernel finite difference (rel)", worst, 0.05, notes=f"h={h}"))
    return out


# 6 -----------------------------------------------------------------------------


def suite_martingale(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    d = BINARY if d is None else d
    grid = [0.2, 0.5, 0.8]
    out = [martingale_report(d, grid, n, spawn(seed, 6, 0))]
    for i, u in enumerate(grid):
        leaves = sample_gw_many(d, u, n, rng=spawn(seed, 6, 1 + i)).num_leaves()
        m, se = mean_and_se(leaves)
        target = expected_leaves(d, u)
        out.append(TestReport(f"E[#L(G({u}))] = p0/(1-mu)", z_score(m, se, target), 4.0, n,
                              f"mean {m:.5f} vs {target:.5f}"))
        M = (1.0 - prune_distribution(d, u).mean) * leaves / prune_distribution(d, u).p0
        mm, mse = mean_and_se(M)
        out.append(TestReport(f"E[M({u}, G({u}))] = 1", z_score(mm, mse, 1.0), 4.0, n, f"mean {mm:.5f}"))
    return out


# 7 -----------------------------------------------------------------------------


def _kesten_classes(d: OffspringDistribution, h: int, max_nodes: int) -> dict:
    if h == 1:
        trees = [FiniteTree((k,) + (0,) * k) for k in range(1, max_nodes)]
    else:
        trees = [t for t in enumerate_trees(max_nodes) if t.height <= h]
    return law_table_from(lambda t: kesten_class_probability(d, t, h), trees, max_nodes).entries


def suite_kesten(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    out = []
    batch, _ = sample_kesten_many(GEOM, 1, n, spawn(seed, 7, 0))
    out.append(chi_square_statistic(batch.law(12), _kesten_classes(GEOM, 1, 12),
                                    name="Kesten r_1 classes, critical geometric(0.5)"))
    batch, _ = sample_kesten_many(BINARY, 2, n, spawn(seed, 7, 1))
    out.append(chi_square_statistic(batch.law(7), _kesten_classes(BINARY, 2, 7),
                                    name="Kesten r_2 classes, binary"))
    gs = sample_gstar_many(BINARY, 0.5, n, spawn(seed, 7, 2))
    table = law_table_from(lambda t: gstar_probability(BINARY, 0.5, t), enumerate_trees(5, 2), 5).entries
    out.append(_tv_report("G*(0.5) vs exact law, binary", gs.law(5), table, 0.01, 5))
    worst = 0.0
    for dist in (BINARY, GEOM):
        for u in (0.0, 0.3, 0.5, 0.9):
            for t in enumerate_trees(9):
                lhs = gstar_probability(dist, u, t)
                rhs = leaf_martingale(dist, u, t) * tree_probability(dist, u, t)
                worst = max(worst, abs(lhs - rhs))
    out.append(_exact("critical density identity P(G*=t) = M(u,t) P(G=t)", worst, 1e-12, notes="<= 9 nodes"))
    return out


# 8 -----------------------------------------------------------------------------


def suite_ascension_time(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    out = []
    A = sample_ascension_times(BINARY, n, spawn(seed, 8, 0))
    out.append(ks_statistic(A, lambda u: np.clip(2.0 - 2.0 / u, 0.0, 1.0), "binary A vs 2 - 2/u", threshold=0.01))
    Ag = sample_ascension_times(GEOM, n, spawn(seed, 8, 1))
    out.append(ks_statistic(Ag, lambda u: np.clip(1.0 - _geom_F(u), 0.0, 1.0), "geometric(0.5) A vs 1 - F", threshold=0.01))
    FA = extinction_probabilities(BINARY, A)
    out.append(ks_statistic(FA, lambda x: np.clip(x, 0.0, 1.0), "F(A) uniform, binary", threshold=0.01))
    for j, grid in enumerate(([0.5, 1.5, 2.0], [0.5, 0.9, 1.2, 1.5, 1.8, 2.0])):
        paths = simulate_ascension_paths(BINARY, grid, n, rng=spawn(seed, 8, 2 + j))
        absorbed = (~paths.alive).sum(axis=0)
        for u, k in zip(grid, absorbed):
            target = 1.0 - extinction_probability(BINARY, u)
            if 0.0 < target < 1.0:
                out.append(_prop_z(f"path absorption by {u} = F_bar({u}), grid {grid}", int(k), n, target))
            else:
                out.append(_exact(f"path absorption by {u} = F_bar({u}), grid {grid}", abs(k / n - target), 0.0, n))
    return out


# 9 -----------------------------------------------------------------------------


def suite_pre_ascension(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    a = 1.5
    ah = conjugate(BINARY, a)
    batch = sample_pre_ascension_trees(BINARY, a, n, spawn(seed, 9, 0))
    table = law_table_from(lambda t: leaf_martingale(BINARY, ah, t) * tree_probability(BINARY, ah, t),
                           enumerate_trees(5, 2), 5).entries
    return [
        _tv_report(f"G(A-) given A={a} vs M({ah:g},t) P(G({ah:g})=t)", batch.law(5), table, 0.01, 5),
        _exact("all pre-ascension samples finite", float(n - len(batch)), 0.0, n),
    ]


# 10 ----------------------------------------------------------------------------


def suite_representation(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    out = []
    for i, u in enumerate((0.8, 1.2)):
        left, right = representation_samplers(BINARY, u, n, rng=spawn(seed, 10, i))
        p1, p2 = left.marker_fraction, right.marker_fraction
        se = math.sqrt(p1 * (1 - p1) / left.n + p2 * (1 - p2) / right.n)
        out.append(TestReport(f"marker probability at {u}: ascension vs G*(u gamma)", z_score(p1 - p2, se), 4.0, n,
                              f"{p1:.5f} vs {p2:.5f}, F_bar = {1 - extinction_probability(BINARY, u):.5f}"))
        out.append(_tv_two_sample(f"conditional tree law at {u}", left.finite.law(5), right.finite.law(5), 0.015))
    return out


# 11 ----------------------------------------------------------------------------


def suite_leaf_conditioning(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    r = verify_leaf_conditioning(BINARY, prune_distribution(BINARY, 0.5), 9)
    r2 = verify_leaf_conditioning(BINARY, GEOM, 9)
    worst = r.max_ratio_discrepancy
    return [
        _exact("binary vs binary pruned at 0.5: consistent", 0.0 if r.consistent else 1.0, 0.0),
        _exact("inferred u = 0.5", abs((r.inferred_u or math.inf) - 0.5), 1e-10),
        _exact("binary vs geometric: inconsistent", 0.0 if (not r2.consistent and r2.violations) else 1.0, 0.0,
               notes=f"{len(r2.violations)} violations"),
        _exact("per-tree ratio identity on <= 9 nodes", worst, 1e-12),
    ]


# 12 ----------------------------------------------------------------------------


def _catalan(n):
    return math.comb(2 * n, n) // (n + 1)


def _motzkin(n):
    m = [1, 1]
    for k in range(2, n + 1):
        m.append(((2 * k + 1) * m[-1] + (3 * k - 3) * m[-2]) // (k + 2))
    return m[n]


def suite_oracle(d=None, seed=0, n=N_DEFAULT) -> list[TestReport]:
    cat = [count_trees(k, k - 1) for k in range(1, 6)]
    mot = [count_trees(k, 2) for k in range(1, 6)]
    cat_ref = [_catalan(k - 1) for k in range(1, 6)]
    mot_ref = [_motzkin(k - 1) for k in range(1, 6)]
    law = leaf_count_law(BINARY, 1.0, 9)
    err = max(abs(law.table[k][1] - _catalan(k - 1) * 2.0 ** -(2 * k - 1)) for k in range(1, 6))
    complete = all(k in law.complete for k in range(1, 6))
    return [
        _exact(f"Catalan counts {cat}", sum(abs(a - b) for a, b in zip(cat, cat_ref)), 0.0),
        _exact(f"Motzkin counts {mot}", sum(abs(a - b) for a, b in zip(mot, mot_ref)), 0.0),
        _exact("binary P(#L=n) = Catalan(n-1) 2^-(2n-1), n <= 5", err if complete else math.inf, 0.0),
    ]


SUITES: dict[str, tuple[int, Callable]] = {
    "binary": (1, suite_binary_closed_forms),
    "geometric": (2, suite_geometric_closed_forms),
    "duality": (3, suite_duality),
    "pruning": (4, suite_pruning),
    "kernel": (5, suite_kernel),
    "martingale": (6, suite_martingale),
    "kesten": (7, suite_kesten),
    "ascension": (8, suite_ascension_time),
    "pretree": (9, suite_pre_ascension),
    "representation": (10, suite_representation),
    "leaf-conditioning": (11, suite_leaf_conditioning),
    "oracle": (12, suite_oracle),
}


def run_suite(name: str, d: Optional[OffspringDistribution] = None, seed: int = 0,
              n: int = N_DEFAULT) -> list[TestReport]:
    if name == "all":
        out = []
        for key in SUITES:
            out.extend(run_suite(key, None, seed, n))
        return out
    try:
        crit, fn = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}") from None
    reports = fn(d, seed, n)
    for r in reports:
        r.extra.setdefault("criterion", crit)
        r.extra.setdefault("suite", name)
    return reports
