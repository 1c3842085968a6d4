"""Possible worlds, S5 accessibility relations stored as partitions, and
the satisfaction relation of epistemic formulas over the full world space.

A world is an integer in ``[0, 2**nprops)`` whose bit ``k`` is set iff
proposition ``k`` holds.  A world set is a boolean numpy vector indexed by
world id.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .formulas import And, Formula, Know, Not, Prop, Top

__all__ = [
    "DEFAULT_WORLD_CAP",
    "world_cap",
    "WorldCapError",
    "Partition",
    "KripkeModel",
    "worlds_of",
    "prop_mask",
    "sat_set",
    "holds_at",
    "holds_direct",
    "split_by",
    "merge_on_prop",
    "diff_oracle",
    "relation_is",
    "pairs_from_partition",
    "partition_from_pairs",
    "format_world",
    "format_relation",
]

DEFAULT_WORLD_CAP = 20


def world_cap() -> int:
    """Proposition cap; ``KEPAL_WORLD_CAP`` overrides the default."""
    value = os.environ.get("KEPAL_WORLD_CAP")
    return int(value) if value else DEFAULT_WORLD_CAP


class WorldCapError(ValueError):
    pass


def _check_cap(nprops: int):
    cap = world_cap()
    if nprops > cap:
        raise WorldCapError(
            f"{nprops} propositions exceed the world-space cap of {cap} "
            f"(set KEPAL_WORLD_CAP to raise it)"
        )


def _canonical(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber labels so blocks are numbered by first-seen world id."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(first), dtype=np.int32)
    rank[order] = np.arange(len(first), dtype=np.int32)
    return rank[inverse.ravel()], len(first)


class Partition:
    """An equivalence relation over all worlds, one block id per world.

    Block ids are canonical, so two partitions inducing the same pair set
    have identical arrays.
    """

    __slots__ = ("blocks", "nblocks", "_hash", "_bytes")

    def __init__(self, labels, *, canonical: bool = False):
        labels = np.asarray(labels)
        if canonical:
            blocks, nblocks = labels.astype(np.int32, copy=False), int(labels.max()) + 1
        else:
            blocks, nblocks = _canonical(labels)
        blocks.flags.writeable = False
        self.blocks = blocks
        self.nblocks = nblocks
        self._hash = None
        self._bytes = None

    @classmethod
    def identity(cls, nprops: int) -> "Partition":
        _check_cap(nprops)
        return cls(np.arange(1 << nprops, dtype=np.int32), canonical=True)

    @classmethod
    def total(cls, nprops: int) -> "Partition":
        _check_cap(nprops)
        return cls(np.zeros(1 << nprops, dtype=np.int32), canonical=True)

    @classmethod
    def observing(cls, nprops: int, props: Iterable[int]) -> "Partition":
        """Worlds are related iff they agree on every proposition in ``props``."""
        _check_cap(nprops)
        mask = 0
        for k in props:
            mask |= 1 << k
        return cls(worlds_of(nprops) & mask)

    @property
    def nworlds(self) -> int:
        return len(self.blocks)

    def block_of(self, world: int) -> np.ndarray:
        return np.flatnonzero(self.blocks == self.blocks[world])

    def block_list(self) -> list[list[int]]:
        order = np.argsort(self.blocks, kind="stable")
        bounds = np.cumsum(np.bincount(self.blocks, minlength=self.nblocks))[:-1]
        return [part.tolist() for part in np.split(order, bounds)]

    def related(self, x: int, y: int) -> bool:
        return bool(self.blocks[x] == self.blocks[y])

    def tobytes(self) -> bytes:
        if self._bytes is None:
            self._bytes = self.blocks.tobytes()
        return self._bytes

    def refines(self, other: "Partition") -> bool:
        """True iff every block of ``self`` lies inside a block of ``other``."""
        pairs = np.unique(np.stack([self.blocks, other.blocks]), axis=1)
        return pairs.shape[1] == self.nblocks

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.nblocks == other.nblocks and self.tobytes() == other.tobytes()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nblocks, self.tobytes()))
        return self._hash

    def __repr__(self):
        return f"Partition(nworlds={self.nworlds}, nblocks={self.nblocks})"


@dataclass(frozen=True)
class KripkeModel:
    """Per-state Kripke model: all worlds, one partition per agent, identity valuation."""

    nprops: int
    relations: Mapping[int, Partition]

    def relation(self, agent: int) -> Partition:
        try:
            return self.relations[agent]
        except KeyError:
            raise KeyError(f"no accessibility relation for agent {agent}") from None


_WORLDS: dict[int, np.ndarray] = {}


def worlds_of(nprops: int) -> np.ndarray:
    ws = _WORLDS.get(nprops)
    if ws is None:
        ws = np.arange(1 << nprops, dtype=np.int64)
        ws.flags.writeable = False
        _WORLDS[nprops] = ws
    return ws


def prop_mask(nprops: int, k: int) -> np.ndarray:
    if not 0 <= k < nprops:
        raise IndexError(f"proposition index {k} out of range for {nprops} propositions")
    return ((worlds_of(nprops) >> k) & 1).astype(bool)


def sat_set(model: KripkeModel, psi: Formula, _memo: dict | None = None) -> np.ndarray:
    """Boolean vector of the worlds satisfying ``psi`` in ``model``."""
    if _memo is None:
        _memo = {}
    out = _memo.get(psi)
    if out is None:
        out = _memo[psi] = _sat(model, psi, _memo)
    return out


def _sat(model: KripkeModel, psi: Formula, memo: dict) -> np.ndarray:
    n = model.nprops
    if isinstance(psi, Top):
        return np.ones(1 << n, dtype=bool)
    if isinstance(psi, Prop):
        return prop_mask(n, psi.index)
    if isinstance(psi, Not):
        return ~sat_set(model, psi.body, memo)
    if isinstance(psi, And):
        return sat_set(model, psi.left, memo) & sat_set(model, psi.right, memo)
    if isinstance(psi, Know):
        inner = sat_set(model, psi.body, memo)
        rel = model.relation(psi.agent)
        # a block is in iff it has no world outside the inner set
        spoiled = np.zeros(rel.nblocks, dtype=bool)
        spoiled[rel.blocks[~inner]] = True
        return ~spoiled[rel.blocks]
    raise TypeError(f"not an epistemic formula: {psi!r}")


def holds_at(model: KripkeModel, world: int, psi: Formula) -> bool:
    return bool(sat_set(model, psi)[world])


def holds_direct(model: KripkeModel, world: int, psi: Formula) -> bool:
    """Recursive single-world evaluation, clause by clause."""
    if isinstance(psi, Top):
        return True
    if isinstance(psi, Prop):
        return bool((world >> psi.index) & 1)
    if isinstance(psi, Not):
        return not holds_direct(model, world, psi.body)
    if isinstance(psi, And):
        return holds_direct(model, world, psi.left) and holds_direct(model, world, psi.right)
    if isinstance(psi, Know):
        rel = model.relation(psi.agent)
        return all(holds_direct(model, int(y), psi.body) for y in rel.block_of(world))
    raise TypeError(f"not an epistemic formula: {psi!r}")


def split_by(rel: Partition, worlds: np.ndarray) -> Partition:
    """Cut every block into its part inside ``worlds`` and its part outside."""
    return Partition(rel.blocks.astype(np.int64) * 2 + np.asarray(worlds, dtype=np.int64))


def merge_on_prop(rel: Partition, k: int) -> Partition:
    """Finest equivalence containing ``rel`` and every pair ``(Y, Y xor {k})``."""
    ws = worlds_of(int(rel.nworlds).bit_length() - 1)
    a = rel.blocks
    b = rel.blocks[ws ^ (1 << k)]
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(rel.nblocks, rel.nblocks))
    _, component = connected_components(graph, directed=False)
    return Partition(component[rel.blocks])


def diff_oracle(model: KripkeModel, x: int, y: int, psi: Formula) -> bool:
    return holds_direct(model, x, psi) != holds_direct(model, y, psi)


def pairs_from_partition(rel: Partition) -> frozenset[tuple[int, int]]:
    return frozenset(
        (x, y) for block in rel.block_list() for x, y in product(block, repeat=2)
    )


def relation_is(rel, prop: str, nworlds: int | None = None) -> bool:
    """Check ``reflexive``, ``symmetric`` or ``transitive`` by enumeration.

    ``rel`` is a pair set (``nworlds`` required for reflexivity) or a
    :class:`Partition`.
    """
    if isinstance(rel, Partition):
        nworlds = rel.nworlds
        rel = pairs_from_partition(rel)
    pairs = set(rel)
    if prop == "reflexive":
        if nworlds is None:
            raise ValueError("reflexivity needs the world count")
        return all((x, x) in pairs for x in range(nworlds))
    if prop == "symmetric":
        return all((y, x) in pairs for x, y in pairs)
    if prop == "transitive":
        succ: dict[int, set[int]] = {}
        for x, y in pairs:
            succ.setdefault(x, set()).add(y)
        return all((x, z) in pairs for x, y in pairs for z in succ.get(y, ()))
    raise ValueError(f"unknown relation property {prop!r}")


def partition_from_pairs(pairs, nworlds: int) -> Partition:
    pairs = set(pairs)
    for prop in ("reflexive", "symmetric", "transitive"):
        if not relation_is(pairs, prop, nworlds):
            raise ValueError(f"pair set is not an equivalence: not {prop}")
    labels = np.arange(nworlds)
    for x, y in sorted(pairs):
        if y < labels[x]:
            labels[x] = y
    return Partition(labels)


def format_world(world: int, names: Sequence[str]) -> str:
    return "{" + ",".join(names[k] for k in range(len(names)) if (world >> k) & 1) + "}"


def format_relation(rel: Partition, names: Sequence[str]) -> str:
    """Blocks as proposition-set literals, e.g. ``{{},{q}} {{p},{p,q}}``."""
    return " ".join(
        "{" + ",".join(format_world(w, names) for w in block) + "}"
        for block in rel.block_list()
    )
