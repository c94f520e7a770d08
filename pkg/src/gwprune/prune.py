"""Node pruning, the mark-based pruning process, GW samplers and grafting.

Single-sample functions return a :class:`FiniteTree` (or :class:`Truncated`
when a budget was hit); the ``*_many`` variants return a :class:`TreeBatch`
and are what the Monte Carlo checks use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels as K
from ._rng import as_rng
from .batch import TreeBatch
from .errors import DomainError
from .offspring import (
    OffspringDistribution,
    bridge_distribution,
    check_parameter,
    extinction_probability,
    mean_at,
    prune_distribution,
)
from .tree import FiniteTree, tree_probability


@dataclass(frozen=True)
class SampleBudget:
    height_cap: Optional[int] = None
    node_cap: Optional[int] = None

    def __post_init__(self):
        for name in ("height_cap", "node_cap"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise DomainError(f"{name} must be positive, got {v!r}")

    @property
    def bounded(self) -> bool:
        return self.height_cap is not None or self.node_cap is not None

    def _caps(self):
        h = -1 if self.height_cap is None else int(self.height_cap)
        n = -1 if self.node_cap is None else int(self.node_cap)
        return n, h


NO_BUDGET = SampleBudget()


@dataclass(frozen=True)
class Truncated:
    """A sample cut short by a budget; ``tree`` has the open frontier closed as leaves."""

    tree: FiniteTree

    def __str__(self):
        return f"TRUNCATED {self.tree.serialize()}"


TreeOrTruncated = Union[FiniteTree, Truncated]


def _one(batch: TreeBatch) -> TreeOrTruncated:
    t = batch.tree(0)
    return Truncated(t) if batch.truncated[0] else t


def _arr(t: FiniteTree) -> np.ndarray:
    return np.asarray(t.arities, dtype=np.int64)


# -- node pruning of a fixed tree ---------------------------------------------


def _check_unit(u: float) -> float:
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"node pruning needs u in [0, 1], got {u!r}")
    return u


def prune_once(t: FiniteTree, u: float, rng=None) -> FiniteTree:
    """Keep each inner node's children w.p. ``u**(k-1)``, independently."""
    return prune_many(t, u, 1, rng).tree(0)


def prune_many(t: FiniteTree, u: float, n: int, rng=None) -> TreeBatch:
    u = _check_unit(u)
    ar, off = K.prune_fixed_batch(_arr(t), t.sizes, u, int(n), as_rng(rng))
    return TreeBatch(ar, off)


def prune_gw_many(d: OffspringDistribution, u: float, n: int, rng=None,
                  budget: SampleBudget = NO_BUDGET) -> TreeBatch:
    """``prune_once`` applied to ``n`` independent GW(p) trees.

    The GW(p) tree is grown lazily: a node's children are only generated if
    its retention coin succeeds. Cut subtrees never influence the output, so
    this is the same law as pruning a fully grown tree, but it stays cheap for
    critical ``p`` whose total size has infinite mean.
    """
    u = _check_unit(u)
    node_cap, _ = budget._caps()
    ar, off, fl = K.pruned_gw_batch(d.sampling_cdf(), u, int(n), node_cap, as_rng(rng))
    return TreeBatch(ar, off, fl)


# -- marks ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MarkedTree:
    """A tree with one cut mark per inner node.

    ``marks`` is aligned with the preorder arity sequence; leaves carry NaN.
    Node ``i`` keeps its children at parameter ``u`` iff ``scale * marks[i] <= u``.
    """

    tree: FiniteTree
    marks: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        m = np.asarray(self.marks, dtype=float)
        if m.shape != (self.tree.num_nodes,):
            raise DomainError("one mark slot per node is required")
        ar = np.asarray(self.tree.arities)
        inner = ar > 0
        if np.any(np.isnan(m[inner])) or np.any(~np.isnan(m[~inner])):
            raise DomainError("inner nodes need a mark and leaves must have none")
        if np.any((m[inner] < 0.0) | (m[inner] > 1.0)):
            raise DomainError("marks must lie in [0, 1]")
        if np.any(m[ar == 1] != 0.0):
            raise DomainError("unary nodes must carry mark 0")
        if not self.scale > 0.0:
            raise DomainError("scale must be positive")
        object.__setattr__(self, "marks", m)

    @property
    def mark_map(self) -> dict:
        """Inner-node address -> mark."""
        return {
            a: float(x)
            for a, x, k in zip(self.tree.addresses, self.marks, self.tree.arities)
            if k > 0
        }


def draw_marks(arities: np.ndarray, rng, size: Optional[int] = None) -> np.ndarray:
    """``U**(1/(k-1))`` per inner node, 0 for unary nodes and NaN for leaves."""
    rng = as_rng(rng)
    ar = np.asarray(arities)
    shape = ar.shape if size is None else (size,) + ar.shape
    U = rng.random(shape)
    with np.errstate(divide="ignore"):
        expo = np.where(ar >= 2, 1.0 / np.maximum(ar - 1, 1), 1.0)
    m = U ** expo
    m = np.where(ar == 1, 0.0, m)
    return np.where(ar == 0, np.nan, m)


def attach_marks(t: FiniteTree, scale: float = 1.0, rng=None) -> MarkedTree:
    if not scale > 0.0:
        raise DomainError("scale must be positive")
    return MarkedTree(t, draw_marks(t.arities, rng), float(scale))


def cut_at(m: MarkedTree, u: float) -> FiniteTree:
    """The tree seen at parameter ``u``; nondecreasing in ``u``."""
    u = float(u)
    if not 0.0 <= u <= m.scale:
        raise DomainError(f"u must lie in [0, {m.scale!r}]")
    ar, off = K.cut_batch(_arr(m.tree), m.tree.sizes, (m.scale * m.marks)[None, :], u)
    return FiniteTree(tuple(int(a) for a in ar))


def cut_many(t: FiniteTree, u: float, n: int, rng=None, scale: float = 1.0) -> TreeBatch:
    """``cut_at(attach_marks(t, scale), u)`` for ``n`` independent mark sets."""
    marks = scale * draw_marks(t.arities, rng, size=int(n))
    ar, off = K.cut_batch(_arr(t), t.sizes, marks, float(u))
    return TreeBatch(ar, off)


# -- Galton-Watson samplers ---------------------------------------------------


def _require_budget(d, u, budget):
    if mean_at(d, u) > 1.0 and not budget.bounded:
        raise DomainError(f"u={u!r} is super-critical; a height or node cap is required")


def sample_gw_many(d: OffspringDistribution, u: float, n: int,
                   budget: SampleBudget = NO_BUDGET, rng=None) -> TreeBatch:
    """``n`` breadth-first GW(p^(u)) trees."""
    _require_budget(d, u, budget)
    cdf = prune_distribution(d, u).sampling_cdf()
    node_cap, height_cap = budget._caps()
    ar, off, fl = K.gw_batch(cdf, cdf, int(n), node_cap, height_cap, as_rng(rng))
    return TreeBatch(ar, off, fl)


def sample_gw(d: OffspringDistribution, u: float, budget: SampleBudget = NO_BUDGET,
              rng=None) -> TreeOrTruncated:
    return _one(sample_gw_many(d, u, 1, budget, rng))


def sample_modified_gw_many(d: OffspringDistribution, alpha: float, beta: float, n: int,
                            budget: SampleBudget = NO_BUDGET, rng=None) -> TreeBatch:
    """Root offspring ``~ p_{alpha,beta}``, everything below GW(p^(beta))."""
    _require_budget(d, beta, budget)
    root = bridge_distribution(d, alpha, beta).sampling_cdf()
    cdf = prune_distribution(d, beta).sampling_cdf()
    node_cap, height_cap = budget._caps()
    ar, off, fl = K.gw_batch(root, cdf, int(n), node_cap, height_cap, as_rng(rng))
    return TreeBatch(ar, off, fl)


def sample_modified_gw(d, alpha, beta, budget: SampleBudget = NO_BUDGET, rng=None) -> TreeOrTruncated:
    return _one(sample_modified_gw_many(d, alpha, beta, 1, budget, rng))


def graft_forward_many(batch: TreeBatch, d: OffspringDistribution, alpha: float, beta: float,
                       budget: SampleBudget = NO_BUDGET, rng=None) -> TreeBatch:
    """Graft an independent modified GW tree on every leaf of every tree.

    Only ``budget.node_cap`` is enforced here.
    """
    if beta < alpha:
        raise DomainError("need alpha <= beta")
    if mean_at(d, beta) > 1.0 and budget.node_cap is None:
        raise DomainError(f"beta={beta!r} is super-critical; a node cap is required")
    root = bridge_distribution(d, alpha, beta).sampling_cdf()
    cdf = prune_distribution(d, beta).sampling_cdf()
    node_cap, _ = budget._caps()
    ar, off, fl = K.graft_batch(batch.arities, batch.offsets, root, cdf, node_cap, as_rng(rng))
    return TreeBatch(ar, off, fl | batch.truncated)


def graft_forward(t_alpha: FiniteTree, d, alpha, beta, budget: SampleBudget = NO_BUDGET,
                  rng=None) -> TreeOrTruncated:
    return _one(graft_forward_many(TreeBatch.from_trees([t_alpha]), d, alpha, beta, budget, rng))


# -- exact kernels and rates ----------------------------------------------------


def modified_gw_probability(d: OffspringDistribution, alpha: float, beta: float, t: FiniteTree) -> float:
    br = bridge_distribution(d, alpha, beta)
    k = t.arities[0]
    p = br.pmf(k)
    if p == 0.0 or k == 0:
        return p
    for c in t.children:
        p *= tree_probability(d, beta, c)
    return p


def transition_probability(d: OffspringDistribution, alpha: float, beta: float,
                           s: FiniteTree, t: FiniteTree) -> float:
    """``P(G(beta) = t | G(alpha) = s)``: product of modified-tree laws over the leaves of ``s``."""
    if beta < alpha:
        raise DomainError("need alpha <= beta")
    p = 1.0
    for a, k in zip(s.addresses, s.arities):
        if a not in t:
            return 0.0
        if k > 0:
            if t.arity(a) != k:
                return 0.0
            continue
        p *= modified_gw_probability(d, alpha, beta, t.subtree(a))
        if p == 0.0:
            return 0.0
    return p


def transition_rate_finite(d: OffspringDistribution, u: float, s: FiniteTree, leaf, t: FiniteTree) -> float:
    """Rate of replacing leaf ``leaf`` of ``s`` by the finite tree ``t``."""
    u = check_parameter(d, u)
    if not 0.0 < u < d.max_parameter:
        raise DomainError("rate needs 0 < u < u_bar")
    if s.arity(leaf) != 0:
        raise DomainError(f"{tuple(leaf)!r} is not a leaf of s")
    if t.num_nodes == 1:
        raise DomainError("target tree must not be the root-only tree")
    p0 = prune_distribution(d, u).p0
    return (t.arities[0] - 1) / u * tree_probability(d, u, t) / p0


def transition_rate_infinite(d: OffspringDistribution, u: float, s: FiniteTree, k: int) -> float:
    """Per-leaf rate of growing ``k`` children with at least one infinite subtree."""
    if k < 1:
        raise DomainError("k must be >= 1")
    u = check_parameter(d, u)
    if u <= 1.0:
        return 0.0
    du = prune_distribution(d, u)
    F = extinction_probability(d, u)
    return (k - 1) / u * (1.0 - F**k) / du.p0 * du.pmf(k)


def total_infinite_rate(d: OffspringDistribution, u: float, s: FiniteTree) -> float:
    u = check_parameter(d, u)
    if u <= 1.0:
        return 0.0
    du = prune_distribution(d, u)
    F = extinction_probability(d, u)
    kmax = du.tail_cutoff()
    pk = du.pmf_array(kmax)
    k = np.arange(kmax + 1)
    terms = np.where(k >= 2, (k - 1) * pk * (1.0 - F ** k.astype(float)), 0.0)
    return s.num_leaves / (u * du.p0) * math.fsum(terms)


def expected_leaves(d: OffspringDistribution, u: float) -> float:
    """``E[#L(G(u))] = p0^(u) / (1 - mu(u))``."""
    u = check_parameter(d, u)
    if u >= d.critical_horizon:
        raise DomainError(f"u={u!r} must be below the critical horizon {d.critical_horizon!r}")
    du = prune_distribution(d, u)
    return du.p0 / (1.0 - du.mean)
