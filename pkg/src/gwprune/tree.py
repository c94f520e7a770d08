"""Finite rooted ordered trees.

A tree is stored as its preorder arity sequence (the Lukasiewicz word): the
root first, then the subtrees of its children ``1..k`` from left to right.
Neveu addresses, depths and subtree sizes are derived lazily. All traversals
are iterative so trees thousands of generations deep are fine.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ParseError
from .offspring import OffspringDistribution, prune_distribution

Address = tuple  # tuple[int, ...]; () is the root


@dataclass(frozen=True)
class FiniteTree:
    arities: tuple[int, ...]

    def __post_init__(self):
        ar = tuple(int(a) for a in self.arities)
        object.__setattr__(self, "arities", ar)
        slots = 1
        for a in ar:
            if slots == 0:
                raise DomainError("arity sequence has nodes after the tree closed")
            if a < 0:
                raise DomainError("negative arity")
            slots += a - 1
        if slots != 0 or not ar:
            raise DomainError(f"not a valid preorder arity sequence: {ar!r}")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def leaf(cls) -> "FiniteTree":
        return cls((0,))

    @classmethod
    def from_children(cls, children: Sequence["FiniteTree"]) -> "FiniteTree":
        ar = [len(children)]
        for c in children:
            ar.extend(c.arities)
        return cls(tuple(ar))

    @classmethod
    def parse(cls, text: str) -> "FiniteTree":
        return parse(text)

    @classmethod
    def from_nested(cls, obj) -> "FiniteTree":
        """Nested lists: ``[]`` is a leaf, ``[[], []]`` a cherry."""
        if not isinstance(obj, list):
            raise ParseError("nested tree must be a list")
        ar = []
        stack = [obj]
        while stack:
            node = stack.pop()
            if not isinstance(node, list):
                raise ParseError(f"nested tree contains a non-list: {node!r}")
            ar.append(len(node))
            stack.extend(reversed(node))
        return cls(tuple(ar))

    # -- derived structure ----------------------------------------------------

    @cached_property
    def depths(self) -> np.ndarray:
        out = np.empty(len(self.arities), dtype=np.int64)
        stack: list[int] = []
        for i, a in enumerate(self.arities):
            out[i] = len(stack)
            if a > 0:
                stack.append(a)
            else:
                while stack:
                    stack[-1] -= 1
                    if stack[-1] > 0:
                        break
                    stack.pop()
        return out

    @cached_property
    def sizes(self) -> np.ndarray:
        """Number of nodes in the subtree rooted at each preorder index."""
        out = np.empty(len(self.arities), dtype=np.int64)
        done: list[int] = []
        for i in range(len(self.arities) - 1, -1, -1):
            a = self.arities[i]
            s = 1
            for _ in range(a):
                s += done.pop()
            out[i] = s
            done.append(s)
        return out

    @cached_property
    def addresses(self) -> list[Address]:
        out = []
        path: list[int] = []
        stack: list[list[int]] = []
        for a in self.arities:
            out.append(tuple(path))
            if a > 0:
                stack.append([a, 1])
                path.append(1)
            else:
                while stack:
                    top = stack[-1]
                    top[0] -= 1
                    path.pop()
                    if top[0] > 0:
                        top[1] += 1
                        path.append(top[1])
                        break
                    stack.pop()
        return out

    @cached_property
    def _index(self) -> dict:
        return {a: i for i, a in enumerate(self.addresses)}

    def index_of(self, address: Iterable[int]) -> int:
        try:
            return self._index[tuple(address)]
        except KeyError:
            raise KeyError(f"address {tuple(address)!r} not in tree") from None

    def __contains__(self, address) -> bool:
        return tuple(address) in self._index

    def arity(self, address: Iterable[int] = ()) -> int:
        """``k_nu t``: number of children of the node at ``address``."""
        return self.arities[self.index_of(address)]

    # -- queries --------------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.arities)

    @cached_property
    def num_leaves(self) -> int:
        return self.arities.count(0)

    @cached_property
    def height(self) -> int:
        return int(self.depths.max())

    @property
    def leaves(self) -> list[Address]:
        return [w for w, a in zip(self.addresses, self.arities) if a == 0]

    @property
    def inner_nodes(self) -> list[Address]:
        return [w for w, a in zip(self.addresses, self.arities) if a > 0]

    def generation_size(self, n: int) -> int:
        """``Z_n t``."""
        return int(np.count_nonzero(self.depths == n))

    def restrict(self, h: int) -> "FiniteTree":
        """``r_h t``: nodes at height at most ``h``."""
        if h < 0:
            raise DomainError("restriction height must be >= 0")
        ar = tuple(a if d < h else 0 for a, d in zip(self.arities, self.depths) if d <= h)
        return FiniteTree(ar)

    def subtree(self, address: Iterable[int]) -> "FiniteTree":
        """``T_nu t``: the subtree above ``address``, re-rooted."""
        i = self.index_of(address)
        return FiniteTree(self.arities[i : i + int(self.sizes[i])])

    @property
    def children(self) -> list["FiniteTree"]:
        out = []
        i = 1
        for _ in range(self.arities[0]):
            n = int(self.sizes[i])
            out.append(FiniteTree(self.arities[i : i + n]))
            i += n
        return out

    def graft(self, leaf: Iterable[int], other: "FiniteTree") -> "FiniteTree":
        """``r(s, nu; t)``: replace the leaf at ``leaf`` by a copy of ``other``."""
        i = self.index_of(leaf)
        if self.arities[i] != 0:
            raise DomainError(f"{tuple(leaf)!r} is not a leaf")
        return FiniteTree(self.arities[:i] + other.arities + self.arities[i + 1 :])

    def is_subtree_of(self, other: "FiniteTree") -> bool:
        """Set inclusion of Neveu address sets (both share the root)."""
        return set(self.addresses) <= set(other.addresses)

    def serialize(self) -> str:
        return serialize(self)

    def to_nested(self) -> list:
        root: list = []
        stack = [(root, self.arities[0])] if self.arities[0] else []
        for a in self.arities[1:]:
            node: list = []
            parent, _ = stack[-1]
            parent.append(node)
            if a > 0:
                stack.append((node, a))
            else:
                while stack and len(stack[-1][0]) == stack[-1][1]:
                    stack.pop()
        return root

    def to_json(self) -> str:
        return json.dumps(self.to_nested(), separators=(",", ":"))

    def sort_key(self):
        return (self.num_nodes, self.serialize())

    def __str__(self):
        return self.serialize()


class TreeSummary(NamedTuple):
    num_nodes: int
    num_leaves: int
    height: int
    inner_nodes: list
    generation_sizes: list


def structure_queries(t: FiniteTree) -> TreeSummary:
    return TreeSummary(
        t.num_nodes,
        t.num_leaves,
        t.height,
        t.inner_nodes,
        [t.generation_size(n) for n in range(t.height + 1)],
    )


def serialize(t: FiniteTree) -> str:
    return serialize_arities(t.arities)


def serialize_arities(arities) -> str:
    """Balanced-parentheses word of a preorder arity sequence."""
    out = []
    stack: list[int] = []
    for a in arities:
        out.append("(")
        if a > 0:
            stack.append(a)
            continue
        out.append(")")
        while stack:
            stack[-1] -= 1
            if stack[-1] > 0:
                break
            stack.pop()
            out.append(")")
    return "".join(out)


def arities_from_parens(text: str) -> tuple[int, ...]:
    s = "".join(text.split())
    if not s:
        raise ParseError("empty tree string")
    ar: list[int] = []
    stack: list[int] = []
    for pos, ch in enumerate(s):
        if ch == "(":
            if stack:
                ar[stack[-1]] += 1
            elif ar:
                raise ParseError(f"more than one outer pair at position {pos}")
            stack.append(len(ar))
            ar.append(0)
        elif ch == ")":
            if not stack:
                raise ParseError(f"unbalanced ')' at position {pos}")
            stack.pop()
        else:
            raise ParseError(f"unexpected character {ch!r} at position {pos}")
    if stack:
        raise ParseError("unbalanced '(': missing closing parentheses")
    return tuple(ar)


def parse(text: str) -> FiniteTree:
    return FiniteTree(arities_from_parens(text))


def parse_json(text: str) -> FiniteTree:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON tree: {exc}") from exc
    return FiniteTree.from_nested(obj)


# -- laws ---------------------------------------------------------------------


def _pmf_for(d: OffspringDistribution, u: float, t: FiniteTree) -> np.ndarray:
    return prune_distribution(d, u).pmf_array(max(t.arities))


def tree_probability(d: OffspringDistribution, u: float, t: FiniteTree) -> float:
    """``P(G(u) = t)``: product of ``p^(u)_{k_nu t}`` over all nodes."""
    pk = _pmf_for(d, u, t)
    return float(np.prod(pk[np.asarray(t.arities)]))


def restricted_class_probability(d: OffspringDistribution, u: float, t: FiniteTree, h: int) -> float:
    """``P(r_h G(u) = r_h t)``: product over nodes of ``t`` strictly below height ``h``."""
    if h < 0:
        raise DomainError("h must be >= 0")
    pk = _pmf_for(d, u, t)
    mask = t.depths < h
    return float(np.prod(pk[np.asarray(t.arities)[mask]]))


def leaf_martingale(d: OffspringDistribution, u: float, t: FiniteTree) -> float:
    """``M(u, t) = (1 - mu(u)) #L(t) / p0^(u)``."""
    u = float(u)
    if u >= d.critical_horizon:
        raise DomainError(f"u={u!r} must be below the critical horizon {d.critical_horizon!r}")
    du = prune_distribution(d, u)
    if du.p0 <= 0.0:
        raise DomainError("p0^(u) is zero")
    return (1.0 - du.mean) * t.num_leaves / du.p0


def kesten_weight(d: OffspringDistribution, t: FiniteTree) -> float:
    """Sum over leaves of ``mu(1)^-(|nu|+1)``."""
    mu = d.mean
    if mu <= 0.0:
        raise DomainError("need mu(1) > 0")
    depths = t.depths[np.asarray(t.arities) == 0]
    if mu == 1.0:
        return float(depths.size)
    return float(np.sum(mu ** -(depths + 1.0)))
