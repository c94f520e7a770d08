"""The ascension process: the pruning process run past criticality until it explodes.

Paths are simulated on a parameter grid. Between grid points every leaf of the
current tree grows ``N ~ p_{alpha,beta}`` children, and each child is declared
infinite with probability ``1 - F(beta)`` or else gets a finite subtree drawn
from GW(p^(beta_hat)), the law of a GW(p^(beta)) tree conditioned to die out.
The first infinite child absorbs the path into the marker ``INF``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as K
from ._rng import as_rng
from .batch import TreeBatch
from .errors import DomainError, TruncatedError
from .kesten import sample_gstar_many
from .offspring import (
    OffspringDistribution,
    bridge_distribution,
    conjugate,
    extinction_probability,
    prune_distribution,
    survival_inverse,
)
from .prune import NO_BUDGET, SampleBudget, sample_gw_many
from .tree import FiniteTree


class _Infinite:
    """The absorbing state standing for any infinite tree."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INF"

    __str__ = __repr__

    def serialize(self):
        return "INF"


INF = _Infinite()
State = Union[FiniteTree, _Infinite]


def _check_grid(d: OffspringDistribution, grid) -> list[float]:
    g = [float(x) for x in grid]
    if not g:
        raise DomainError("empty grid")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise DomainError("grid must be strictly increasing")
    ubar = d.max_parameter
    if g[0] < 0.0 or g[-1] > ubar * (1 + 1e-12):
        raise DomainError(f"grid must lie in [0, {ubar!r}]")
    for u in g[:-1]:
        if prune_distribution(d, u).p0 <= 0.0:
            raise DomainError(f"p0 vanishes at interior grid point {u!r}")
    return g


def _check_ascension_input(d: OffspringDistribution):
    ubar = d.max_parameter
    if not math.isfinite(ubar):
        raise DomainError("ascension needs a finite u_bar")
    if prune_distribution(d, ubar).p0 > 1e-12:
        raise DomainError("ascension needs p0 at u_bar to vanish (otherwise A = u_bar with positive probability)")


def _check_critical(d: OffspringDistribution):
    if abs(d.mean - 1.0) > 1e-9:
        raise DomainError(f"needs a critical law, mean is {d.mean!r}")


@dataclass
class AscensionPath:
    grid: list
    states: list

    def __post_init__(self):
        seen_inf = False
        prev = None
        for s in self.states:
            if s is INF:
                seen_inf = True
                continue
            if seen_inf:
                raise DomainError("INF must be absorbing")
            if prev is not None and not prev.is_subtree_of(s):
                raise DomainError("finite states must be nested")
            prev = s

    @property
    def absorbed_index(self) -> Optional[int]:
        for i, s in enumerate(self.states):
            if s is INF:
                return i
        return None

    @property
    def ascension_interval(self) -> Optional[tuple]:
        """Grid cell ``(lower, upper]`` containing A; ``lower`` is None if the start was infinite."""
        i = self.absorbed_index
        if i is None:
            return None
        return (self.grid[i - 1] if i > 0 else None, self.grid[i])

    @property
    def last_finite(self) -> Optional[FiniteTree]:
        i = self.absorbed_index
        if i is None or i == 0:
            return None
        return self.states[i - 1]

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps({"u": u, "state": s.serialize()}) for u, s in zip(self.grid, self.states)
        )


@dataclass
class AscensionBatch:
    """Many paths on one grid; ``trees[i]`` holds the states at ``grid[i]`` (empty slot if absorbed)."""

    grid: list
    trees: list
    alive: np.ndarray  # (n_paths, len(grid))
    truncated: np.ndarray = field(default=None)

    def __len__(self):
        return self.alive.shape[0]

    def absorbed_fraction(self) -> np.ndarray:
        return 1.0 - self.alive.mean(axis=0)

    def finite_states(self, i: int) -> TreeBatch:
        """The finite states at ``grid[i]`` as a batch (absorbed paths dropped)."""
        b = self.trees[i]
        keep = self.alive[:, i]
        offsets = np.concatenate([[0], b.offsets[1:][keep]]).astype(np.int64)
        return TreeBatch(b.arities, offsets)

    def path(self, j: int) -> AscensionPath:
        states = [
            self.trees[i].tree(j) if self.alive[j, i] else INF for i in range(len(self.grid))
        ]
        return AscensionPath(list(self.grid), states)


def _mask_batch(b: TreeBatch, keep: np.ndarray) -> TreeBatch:
    """Same slots as ``b`` but with the trees at ``~keep`` emptied."""
    lengths = np.where(keep, np.diff(b.offsets), 0)
    offsets = np.zeros(lengths.size + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    node_keep = np.repeat(keep, np.diff(b.offsets))
    return TreeBatch(b.arities[node_keep], offsets, b.truncated & keep)


def simulate_ascension_paths(d: OffspringDistribution, grid: Sequence[float], n: int,
                             budget: SampleBudget = NO_BUDGET, rng=None) -> AscensionBatch:
    g = _check_grid(d, grid)
    rng = as_rng(rng)
    n = int(n)
    node_cap, _ = budget._caps()
    alive = np.ones((n, len(g)), dtype=bool)
    F0 = extinction_probability(d, g[0])
    if F0 < 1.0:
        alive[:, 0] = rng.random(n) < F0
    first = sample_gw_many(d, conjugate(d, g[0]), n, budget, rng)
    trees = [_mask_batch(first, alive[:, 0])]
    trunc = trees[0].truncated.copy()
    if trunc.any():
        raise TruncatedError("node budget exhausted at the initial state",
                             partial=AscensionBatch(g[:1], trees, alive[:, :1], trunc))
    for i, (a, b) in enumerate(zip(g, g[1:]), start=1):
        bridge = bridge_distribution(d, a, b).sampling_cdf()
        F = extinction_probability(d, b)
        hat = prune_distribution(d, b * F).sampling_cdf()
        cur = trees[-1]
        ar, off, al, tr = K.ascension_step(cur.arities, cur.offsets, alive[:, i - 1].copy(),
                                           bridge, 1.0 - F, hat, node_cap, rng)
        alive[:, i] = al
        trees.append(TreeBatch(ar, off, tr))
        if tr.any():
            raise TruncatedError(f"node budget exhausted between {a!r} and {b!r}",
                                 partial=AscensionBatch(g[: i + 1], trees, alive[:, : i + 1], tr))
    return AscensionBatch(g, trees, alive, np.zeros(n, dtype=bool))


def simulate_ascension_path(d: OffspringDistribution, grid: Sequence[float],
                            budget: SampleBudget = NO_BUDGET, rng=None) -> AscensionPath:
    try:
        batch = simulate_ascension_paths(d, grid, 1, budget, rng)
    except TruncatedError as exc:
        part = exc.partial
        states = [INF if not part.alive[0, i] else part.trees[i].tree(0) for i in range(len(part.grid))]
        raise TruncatedError(str(exc), partial=_unchecked_path(part.grid, states)) from None
    return batch.path(0)


def _unchecked_path(grid, states) -> AscensionPath:
    p = AscensionPath.__new__(AscensionPath)
    p.grid, p.states = list(grid), list(states)
    return p


# -- exact ascension time and the pre-ascension tree ----------------------------


def sample_ascension_times(d: OffspringDistribution, n: int, rng=None) -> np.ndarray:
    """``A = F_bar^{-1}(1 - gamma)`` with ``gamma`` uniform; ``F(A) = gamma``."""
    _check_ascension_input(d)
    gamma = as_rng(rng).random(int(n))
    return np.atleast_1d(survival_inverse(d, 1.0 - gamma))


def sample_ascension_time(d: OffspringDistribution, rng=None) -> float:
    return float(sample_ascension_times(d, 1, rng)[0])


def sample_gw_conditioned_finite_many(d: OffspringDistribution, u: float, n: int,
                                      budget: SampleBudget = NO_BUDGET, rng=None) -> TreeBatch:
    """GW(p^(u)) conditioned on extinction, drawn directly as GW(p^(u_hat))."""
    if u < 1.0:
        raise DomainError("conditioning on finiteness is only non-trivial for u >= 1")
    return sample_gw_many(d, conjugate(d, u), n, budget, rng)


def sample_gw_conditioned_finite(d: OffspringDistribution, u: float, rng=None) -> FiniteTree:
    return sample_gw_conditioned_finite_many(d, u, 1, rng=rng).tree(0)


def sample_pre_ascension_trees(d: OffspringDistribution, a: float, n: int, rng=None) -> TreeBatch:
    """``G(A-)`` given ``A = a``, which is ``G*(a_hat)``."""
    _check_critical(d)
    ubar = d.max_parameter
    if not 1.0 < a < ubar:
        raise DomainError(f"a must lie in (1, {ubar!r})")
    return sample_gstar_many(d, conjugate(d, a), n, rng)


def sample_pre_ascension_tree(d: OffspringDistribution, a: float, rng=None) -> FiniteTree:
    return sample_pre_ascension_trees(d, a, 1, rng).tree(0)


@dataclass
class StateSample:
    """Finite states (as a batch) plus the count of ``INF`` draws."""

    finite: TreeBatch
    n_infinite: int

    @property
    def n(self) -> int:
        return len(self.finite) + self.n_infinite

    @property
    def marker_fraction(self) -> float:
        return self.n_infinite / self.n


def representation_samplers(d: OffspringDistribution, u_eval: float, n: int,
                            budget: SampleBudget = NO_BUDGET, rng=None) -> tuple[StateSample, StateSample]:
    """Both sides of the representation of the ascension process, at one time.

    Left: the state at ``u_eval`` of a path simulated on ``0, u_eval/2, u_eval``.
    Right: ``gamma`` uniform, ``INF`` if ``u_eval >= F_bar^{-1}(1 - gamma)``,
    else ``G*(u_eval * gamma)``.
    """
    _check_ascension_input(d)
    _check_critical(d)
    u = float(u_eval)
    ubar = d.max_parameter
    if not 0.0 <= u < ubar:
        raise DomainError(f"u_eval must lie in [0, {ubar!r})")
    rng = as_rng(rng)
    grid = [0.0] if u == 0.0 else [0.0, u / 2, u]
    paths = simulate_ascension_paths(d, grid, n, budget, rng)
    left = StateSample(paths.finite_states(len(grid) - 1), int((~paths.alive[:, -1]).sum()))

    gamma = rng.random(int(n))
    A = np.atleast_1d(survival_inverse(d, 1.0 - gamma))
    fin = u < A
    right = StateSample(sample_gstar_many(d, u * gamma[fin], rng=rng), int((~fin).sum()))
    return left, right
