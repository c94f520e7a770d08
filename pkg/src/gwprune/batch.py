"""Flat storage for many sampled trees."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .stats import OTHER, EmpiricalLaw
from .tree import FiniteTree, serialize_arities


@dataclass
class TreeBatch:
    """Concatenated preorder arity sequences.

    Tree ``i`` is ``arities[offsets[i]:offsets[i+1]]``. ``truncated[i]`` marks
    trees closed off by a sampling budget.
    """

    arities: np.ndarray
    offsets: np.ndarray
    truncated: np.ndarray | None = None

    def __post_init__(self):
        if self.truncated is None:
            self.truncated = np.zeros(len(self.offsets) - 1, dtype=bool)

    @classmethod
    def from_trees(cls, trees) -> "TreeBatch":
        trees = list(trees)
        lengths = [t.num_nodes for t in trees]
        offsets = np.zeros(len(trees) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        flat = [a for t in trees for a in t.arities]
        return cls(np.asarray(flat, dtype=np.int64), offsets)

    def __len__(self):
        return len(self.offsets) - 1

    def slice(self, i: int) -> np.ndarray:
        return self.arities[self.offsets[i] : self.offsets[i + 1]]

    def tree(self, i: int) -> FiniteTree:
        return FiniteTree(tuple(int(a) for a in self.slice(i)))

    def __getitem__(self, i):
        return self.tree(i)

    def __iter__(self):
        for i in range(len(self)):
            yield self.tree(i)

    def num_nodes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def num_leaves(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64)
        leaf = (self.arities == 0).astype(np.int64)
        return np.add.reduceat(leaf, self.offsets[:-1])

    def keys(self, max_nodes: int | None = None) -> list[str]:
        """Serialized trees; trees above ``max_nodes`` nodes map to ``OTHER``."""
        sizes = self.num_nodes()
        cache: dict[bytes, str] = {}
        out = []
        for i in range(len(self)):
            if max_nodes is not None and sizes[i] > max_nodes:
                out.append(OTHER)
                continue
            raw = self.slice(i).tobytes()
            key = cache.get(raw)
            if key is None:
                key = cache[raw] = serialize_arities(self.slice(i).tolist())
            out.append(key)
        return out

    def law(self, max_nodes: int | None = None) -> EmpiricalLaw:
        return EmpiricalLaw(dict(Counter(self.keys(max_nodes))), len(self))

    def concat(self, other: "TreeBatch") -> "TreeBatch":
        return TreeBatch(
            np.concatenate([self.arities, other.arities]),
            np.concatenate([self.offsets[:-1], other.offsets + self.offsets[-1]]),
            np.concatenate([self.truncated, other.truncated]),
        )
