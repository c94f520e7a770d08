"""The size-biased (Kesten) tree and its pruning ``G*(u)``."""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._rng import as_rng
from .batch import TreeBatch
from .errors import DomainError, ParseError
from .offspring import OffspringDistribution, mean_at, prune_distribution, size_biased
from .tree import FiniteTree, kesten_weight, parse, restricted_class_probability, tree_probability


@dataclass(frozen=True)
class SpinedTree:
    """``r_h`` of the Kesten tree; ``spine[j]`` is the child label taken at depth ``j``."""

    tree: FiniteTree
    spine: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "spine", tuple(int(j) for j in self.spine))
        addr: tuple = ()
        for j in self.spine:
            k = self.tree.arity(addr)
            if not 1 <= j <= k:
                raise DomainError(f"spine label {j} invalid at {addr!r} (arity {k})")
            addr = addr + (j,)
        if self.tree.height > len(self.spine):
            raise DomainError("tree is taller than the spine")

    @property
    def height(self) -> int:
        return len(self.spine)

    @property
    def spine_addresses(self) -> list[tuple]:
        out = [()]
        for j in self.spine:
            out.append(out[-1] + (j,))
        return out

    def serialize(self) -> str:
        return f"{self.tree.serialize()} spine:[{','.join(map(str, self.spine))}]"

    __str__ = serialize

    @classmethod
    def parse(cls, text: str) -> "SpinedTree":
        m = re.fullmatch(r"\s*(\S+)\s+spine:\[([0-9,\s]*)\]\s*", text)
        if not m:
            raise ParseError(f"bad spined tree {text!r}")
        body = m.group(2).strip()
        spine = tuple(int(x) for x in body.split(",")) if body else ()
        return cls(parse(m.group(1)), spine)


def _check_kesten_input(d: OffspringDistribution):
    if d.mean > 1.0 + 1e-12:
        raise DomainError("Kesten tree needs a critical or sub-critical law")
    if d.mean <= 0.0:
        raise DomainError("Kesten tree needs mu(1) > 0")


def sample_kesten_many(d: OffspringDistribution, h: int, n: int, rng=None) -> tuple[TreeBatch, np.ndarray]:
    """Returns the batch of ``r_h`` trees and an ``(n, h)`` array of spine labels."""
    if h < 0:
        raise DomainError("h must be >= 0")
    _check_kesten_input(d)
    ar, off, spines = K.kesten_batch(size_biased(d).sampling_cdf(), d.sampling_cdf(), int(h), int(n), as_rng(rng))
    return TreeBatch(ar, off), spines[:, :h]


def sample_kesten(d: OffspringDistribution, h: int, rng=None) -> SpinedTree:
    batch, spines = sample_kesten_many(d, h, 1, rng)
    return SpinedTree(batch.tree(0), tuple(spines[0]))


def kesten_class_probability(d: OffspringDistribution, t: FiniteTree, h: int) -> float:
    """``P(r_h G^inf = t) = mu^-h Z_h(t) P(r_h G = t)``."""
    if t.height > h:
        raise DomainError("tree taller than h")
    z = t.generation_size(h)
    if z == 0:
        return 0.0
    return d.mean ** (-h) * z * restricted_class_probability(d, 1.0, t, h)


def _check_gstar_u(u) -> np.ndarray:
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(us < 0.0) or np.any(us >= 1.0):
        raise DomainError("G*(u) needs 0 <= u < 1 (G*(1) is infinite)")
    return us


def sample_gstar_many(d: OffspringDistribution, u, n: int | None = None, rng=None) -> TreeBatch:
    """Spine-walk samples of ``G*(u)``.

    ``u`` may be a scalar (with ``n`` samples) or one parameter per sample.
    """
    _check_kesten_input(d)
    us = _check_gstar_u(u)
    if n is not None:
        if us.size != 1:
            raise DomainError("pass either a scalar u with n, or an array of u")
        us = np.full(int(n), us[0])
    pstar = size_biased(d)
    kmax = len(pstar.probs) - 1
    base = d.pmf_array(kmax)
    ar, off = K.gstar_batch(base, pstar.sampling_cdf(), us, as_rng(rng))
    return TreeBatch(ar, off)


def sample_gstar(d: OffspringDistribution, u: float, rng=None) -> FiniteTree:
    return sample_gstar_many(d, u, 1, rng).tree(0)


def gstar_probability(d: OffspringDistribution, u: float, t: FiniteTree) -> float:
    """``P(G*(u) = t)``."""
    _check_kesten_input(d)
    _check_gstar_u(u)
    du = prune_distribution(d, u)
    return kesten_weight(d, t) * (d.mean - mean_at(d, u)) / du.p0 * tree_probability(d, u, t)
