"""Exact ground truth by brute-force enumeration of small ordered trees."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import DegenerateError, DomainError, ResourceError
from .offspring import OffspringDistribution, prune_distribution
from .tree import FiniteTree, serialize_arities, tree_probability

MAX_ENUM_NODES = 14


@lru_cache(maxsize=None)
def _forests(n_nodes: int, n_trees: int, max_arity: int) -> tuple:
    """Preorder arity words of ordered forests with exactly ``n_trees`` trees and ``n_nodes`` nodes."""
    if n_trees == 0:
        return ((),) if n_nodes == 0 else ()
    if n_nodes < n_trees:
        return ()
    out = []
    # first node's arity k turns the remaining forest into k + n_trees - 1 trees
    for k in range(0, min(max_arity, n_nodes - 1) + 1):
        for rest in _forests(n_nodes - 1, n_trees - 1 + k, max_arity):
            out.append((k,) + rest)
    return tuple(out)


def count_trees(n_nodes: int, max_arity: int) -> int:
    return len(_forests(n_nodes, 1, max_arity))


def enumerate_trees(max_nodes: int, max_arity: Optional[int] = None) -> list[FiniteTree]:
    """All ordered trees with at most ``max_nodes`` nodes and arities ``<= max_arity``.

    Sorted by node count, then by serialization.
    """
    if max_nodes < 1:
        raise DomainError("max_nodes must be >= 1")
    if max_nodes > MAX_ENUM_NODES:
        raise ResourceError(f"enumeration is capped at {MAX_ENUM_NODES} nodes")
    if max_arity is None:
        max_arity = max_nodes - 1
    if max_arity < 0:
        raise DomainError("max_arity must be >= 0")
    out = []
    for n in range(1, max_nodes + 1):
        words = sorted(_forests(n, 1, max_arity), key=serialize_arities)
        out.extend(FiniteTree(w) for w in words)
    return out


def _support_arity(d: OffspringDistribution, max_nodes: int) -> int:
    kmax = max_nodes - 1
    pk = d.pmf_array(kmax)
    nz = np.flatnonzero(pk[1:] > 0)
    return int(nz[-1] + 1) if nz.size else 0


@dataclass
class LawTable:
    entries: dict
    covered_mass: float
    bound: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(v <= 0.0 for v in self.entries.values()):
            raise DomainError("law table entries must be positive")
        if self.covered_mass > 1.0 + 1e-12:
            raise DomainError(f"covered mass {self.covered_mass!r} exceeds 1")

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps({"tree": k, "probability": v}) for k, v in sorted(self.entries.items())
        )


def law_table_from(fn, trees, bound: int, **meta) -> LawTable:
    entries = {}
    for t in trees:
        p = fn(t)
        if p > 0.0:
            entries[t.serialize()] = p
    return LawTable(entries, math.fsum(entries.values()), bound, meta)


def exact_law_table(d: OffspringDistribution, u: float, max_nodes: int) -> LawTable:
    """``P(G(u) = t)`` for every tree with at most ``max_nodes`` nodes."""
    du = prune_distribution(d, u)
    trees = enumerate_trees(max_nodes, max(_support_arity(du, max_nodes), 0))
    return law_table_from(lambda t: tree_probability(d, u, t), trees, max_nodes, u=float(u))


def pruning_law(t: FiniteTree, u: float) -> dict:
    """Exact law of ``prune_once(t, u)`` by enumerating all retention patterns."""
    inner = [i for i, a in enumerate(t.arities) if a >= 2]
    if len(inner) > 12:
        raise ResourceError("retention enumeration is capped at 12 branching nodes")
    sizes = t.sizes
    out: dict = {}
    for pattern in itertools.product((True, False), repeat=len(inner)):
        keep = dict(zip(inner, pattern))
        p = 1.0
        for i, kept in keep.items():
            q = u ** (t.arities[i] - 1)
            p *= q if kept else 1.0 - q
        if p == 0.0:
            continue
        ar = []
        i = 0
        while i < t.num_nodes:
            a = t.arities[i]
            if a >= 2 and not keep[i]:
                ar.append(0)
                i += int(sizes[i])
            else:
                ar.append(a)
                i += 1
        key = serialize_arities(ar)
        out[key] = out.get(key, 0.0) + p
    return out


# -- leaf counts --------------------------------------------------------------


@dataclass
class LeafCountLaw:
    """``n -> (C_p(n), P(#L = n))`` restricted to trees within the node cap."""

    table: dict
    complete: set
    max_nodes: int


def _inner_weight(pk: np.ndarray, ar) -> float:
    return float(np.prod([pk[a] for a in ar if a > 0]))


def leaf_count_law(d: OffspringDistribution, u: float, max_nodes: int) -> LeafCountLaw:
    du = prune_distribution(d, u)
    trees = enumerate_trees(max_nodes, max(_support_arity(du, max_nodes), 0))
    pk = du.pmf_array(max_nodes)
    C: dict = {}
    for t in trees:
        n = t.num_leaves
        C[n] = C.get(n, 0.0) + _inner_weight(pk, t.arities)
    table = {n: (c, c * du.p0**n) for n, c in sorted(C.items())}
    complete = set()
    if du.p1 == 0.0:
        # with no unary nodes an n-leaf tree has at most 2n - 1 nodes
        complete = {n for n in table if 2 * n - 1 <= max_nodes}
    return LeafCountLaw(table, complete, max_nodes)


# -- leaf conditioning --------------------------------------------------------


@dataclass
class LeafConditioningReport:
    consistent: bool
    inferred_u: Optional[float]
    violations: list
    max_nodes: int
    notes: str = ""
    max_ratio_discrepancy: float = 0.0

    def to_json(self) -> str:
        return json.dumps(
            {
                "consistent": self.consistent,
                "inferred_u": self.inferred_u,
                "violations": [list(v) for v in self.violations],
                "max_nodes": self.max_nodes,
                "notes": self.notes,
                "max_ratio_discrepancy": self.max_ratio_discrepancy,
            }
        )


def verify_leaf_conditioning(p: OffspringDistribution, q: OffspringDistribution, max_nodes: int,
                             tol: float = 1e-10) -> LeafConditioningReport:
    """Check that ``q`` is a pruning of ``p`` and that both give the same trees given ``#L``.

    Violations are ``(n, (t, t0), discrepancy)`` where ``t`` and the reference
    ``t0`` have ``n`` leaves and ``discrepancy`` is the difference of the
    conditional probabilities of ``t`` given ``#L = n`` under ``p`` and ``q``.
    Coefficient mismatches appear as ``(None, ("p_k", "q_k"), q_k - u**(k-1) p_k)``.
    """
    kmax = max_nodes - 1
    pk = p.pmf_array(max(kmax, 2))
    qk = q.pmf_array(max(kmax, 2))
    big = [k for k in range(2, pk.size) if pk[k] > 0.0]
    if not big:
        raise DegenerateError("p has no mass on k >= 2")
    if p.p1 >= 1.0:
        raise DomainError("p_1 must be < 1")
    n0 = big[0]
    u = (qk[n0] / pk[n0]) ** (1.0 / (n0 - 1))
    violations = []
    if abs(qk[1] - pk[1]) > tol:
        violations.append((None, ("p_1", "q_1"), float(qk[1] - pk[1])))
    for k in range(2, pk.size):
        diff = qk[k] - u ** (k - 1) * pk[k]
        if abs(diff) > tol:
            violations.append((None, (f"p_{k}", f"q_{k}"), float(diff)))

    # per-tree ratio identity
    trees = enumerate_trees(max_nodes, kmax)
    worst = 0.0
    by_leaves: dict = {}
    for t in trees:
        by_leaves.setdefault(t.num_leaves, []).append(t)
    for n, ts in sorted(by_leaves.items()):
        wp = [_inner_weight(pk, t.arities) for t in ts]
        wq = [_inner_weight(qk, t.arities) for t in ts]
        Cp, Cq = math.fsum(wp), math.fsum(wq)
        if Cp == 0.0:
            continue
        for t, a, b in zip(ts, wp, wq):
            lhs = a / Cp
            rhs = b / Cq if Cq > 0.0 else math.inf
            worst = max(worst, abs(lhs - rhs))
            if abs(lhs - rhs) > tol:
                violations.append((n, (t.serialize(), ts[0].serialize()), float(lhs - rhs)))
    consistent = not violations
    return LeafConditioningReport(
        consistent,
        float(u) if math.isfinite(u) else None,
        violations,
        max_nodes,
        f"certified for trees with at most {max_nodes} nodes only",
        worst,
    )
