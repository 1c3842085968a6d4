"""Strong bisimulation of KLTS states and a bounded modal-equivalence oracle.

Two states are bisimilar iff they share the valuation, match each other's
labeled steps up to bisimilarity, and have equal per-state Kripke models on
the worlds generated from the current valuation.  Because worlds carry the
identity valuation, the world-level bisimulation can only pair a world with
itself, so the Kripke condition reduces to equality of generated submodels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .checker import Checker
from .epistemic import Partition, _canonical
from .formulas import Diamond, Formula, Know, Not, Prop, conj, disj
from .semantics import AgentState, KltsGraph, PoolState
from .syntax import NIL

__all__ = [
    "generated_worlds",
    "kripke_point_equiv",
    "point_fingerprint",
    "bisimilar",
    "BisimResult",
    "refine",
    "disjoint_union",
    "modal_equiv",
    "ModalResult",
    "characteristic_formula",
    "build_klts",
]


def _close(mask: np.ndarray, rels) -> np.ndarray:
    while True:
        grown = mask.copy()
        for rel in rels:
            hit = np.zeros(rel.nblocks, dtype=bool)
            hit[rel.blocks[grown]] = True
            grown |= hit[rel.blocks]
        if np.array_equal(grown, mask):
            return mask
        mask = grown


def generated_worlds(rels, world: int) -> np.ndarray:
    """Worlds reachable from ``world`` through any of the relations."""
    rels = list(rels)
    mask = np.zeros(rels[0].nworlds, dtype=bool)
    mask[world] = True
    return _close(mask, rels)


def kripke_point_equiv(rels_a: Mapping[int, Partition], a: int, rels_b: Mapping[int, Partition], b: int) -> bool:
    """Point equivalence of two pointed S5 models over the same worlds and agents."""
    if set(rels_a) != set(rels_b):
        raise ValueError("relation families cover different agents")
    if any(rels_a[i].nworlds != rels_b[i].nworlds for i in rels_a):
        raise ValueError("relation families are over different world spaces")
    if a != b:
        return False
    w = generated_worlds(list(rels_a.values()) + list(rels_b.values()), a)
    for i in rels_a:
        if not np.array_equal(_canonical(rels_a[i].blocks[w])[0], _canonical(rels_b[i].blocks[w])[0]):
            return False
    return True


def point_fingerprint(rels: Mapping[int, Partition], world: int) -> bytes:
    """Equal fingerprints iff :func:`kripke_point_equiv` holds."""
    agents = sorted(rels)
    w = generated_worlds([rels[i] for i in agents], world)
    parts = [world.to_bytes(8, "little"), np.packbits(w).tobytes()]
    for i in agents:
        parts.append(_canonical(rels[i].blocks[w])[0].tobytes())
    return b"|".join(parts)


@dataclass
class BisimResult:
    bisimilar: bool
    blocks: int
    rounds: int
    condition: int | None = None
    diagnostic: str = ""

    def as_record(self) -> dict:
        return {
            "bisimilar": self.bisimilar,
            "blocks": self.blocks,
            "rounds": self.rounds,
            "condition": self.condition,
            "diagnostic": self.diagnostic,
        }


def _relabel(keys) -> np.ndarray:
    ids: dict = {}
    return np.fromiter((ids.setdefault(k, len(ids)) for k in keys), dtype=np.int64, count=len(keys))


def refine(g: KltsGraph) -> list[np.ndarray]:
    """Block assignment per refinement round; the last entry is stable."""
    n = len(g.states)
    fps = [point_fingerprint(dict(zip(st.ids, st.relations)), st.world) for st in g.states]
    block = _relabel(fps)
    history = [block]
    succ = [g.successors(s) for s in range(n)]
    while True:
        keys = [(block[s], frozenset((label, block[t]) for label, t in succ[s])) for s in range(n)]
        new = _relabel(keys)
        if new.max(initial=-1) == block.max(initial=-1):
            return history
        block = new
        history.append(block)


def bisimilar(g: KltsGraph, s: int, t: int) -> BisimResult:
    n = len(g.states)
    for u in (s, t):
        if not 0 <= u < n:
            raise IndexError(f"unknown state {u}")
    history = refine(g)
    final = history[-1]
    blocks = int(final.max()) + 1 if n else 0
    if final[s] == final[t]:
        return BisimResult(True, blocks, len(history) - 1)
    a, b = g.states[s], g.states[t]
    if history[0][s] != history[0][t]:
        if a.world != b.world:
            return BisimResult(False, blocks, len(history) - 1, 1, "valuations differ")
        return BisimResult(
            False, blocks, len(history) - 1, 3,
            "Kripke models differ on the worlds generated from the valuation",
        )
    r = next(k for k in range(1, len(history)) if history[k][s] != history[k][t])
    prev = history[r - 1]
    sig_s = {(label, prev[u]) for label, u in g.successors(s)}
    sig_t = {(label, prev[u]) for label, u in g.successors(t)}
    label, blk = sorted(sig_s ^ sig_t, key=lambda x: (x[0], int(x[1])))[0]
    side = s if (label, blk) in sig_s else t
    return BisimResult(
        False, blocks, len(history) - 1, 2,
        f"state {side} has a {label} step into block {int(blk)} (round {r - 1}) that the other cannot match",
    )


def disjoint_union(g1: KltsGraph, g2: KltsGraph) -> tuple[KltsGraph, int, int]:
    """Combine two graphs over the same propositions and agents; returns the graph and both roots."""
    if g1.spec.props.names != g2.spec.props.names:
        raise ValueError("graphs use different proposition universes")
    if g1.spec.agent_ids != g2.spec.agent_ids:
        raise ValueError("graphs use different agent sets")
    off = len(g1.states)
    trans = list(g1.transitions) + [(s + off, label, t + off) for s, label, t in g2.transitions]
    g = KltsGraph(g1.spec, list(g1.states) + list(g2.states), trans, g1.root,
                  g1.truncated or g2.truncated)
    return g, g1.root, g2.root + off


# -- bounded modal equivalence ---------------------------------------------------------


@dataclass
class ModalResult:
    equivalent: bool
    depth: int
    epistemic_depth: int
    formula: Formula | None = None
    level: int | None = None


class _Classes:
    """Formula classes up to a modal and an epistemic depth, as interned integer ids.

    World classes at epistemic depth ``e`` are keyed by the world and, per
    agent, the set of depth ``e-1`` classes it considers possible.  State
    classes at modal depth ``d`` are keyed by the depth ``d-1`` class and the
    set of (label, successor class) pairs.  Tables are global, so ids are
    comparable across relation families and states.
    """

    def __init__(self, g: KltsGraph, epistemic_depth: int):
        self.g = g
        self.nprops = g.nprops
        self.edepth = epistemic_depth
        self.agents = g.spec.agent_ids
        self.world_defs: list[list] = [[] for _ in range(epistemic_depth + 1)]
        self._world_ids: list[dict] = [{} for _ in range(epistemic_depth + 1)]
        self.state_defs: list[list] = [[]]
        self._state_ids: list[dict] = [{}]
        self._families: dict = {}
        self._char: dict = {}
        self.levels = [[self._intern_state(0, self.world_class(s)) for s in range(len(g.states))]]

    @staticmethod
    def _intern(table: dict, defs: list, key) -> int:
        k = table.get(key)
        if k is None:
            k = table[key] = len(defs)
            defs.append(key)
        return k

    def _intern_state(self, d: int, key) -> int:
        return self._intern(self._state_ids[d], self.state_defs[d], key)

    def world_classes(self, rels: tuple) -> list:
        """Class id of every world at the deepest epistemic level, for one relation family."""
        out = self._families.get(rels)
        if out is not None:
            return out
        nworlds = 1 << self.nprops
        ids = [self._intern(self._world_ids[0], self.world_defs[0], x) for x in range(nworlds)]
        blocks = [rel.block_list() for rel in rels]
        for e in range(1, self.edepth + 1):
            seen = [[frozenset(ids[y] for y in blk) for blk in bl] for bl in blocks]
            ids = [
                self._intern(
                    self._world_ids[e], self.world_defs[e],
                    (x, tuple(seen[a][rel.blocks[x]] for a, rel in enumerate(rels))),
                )
                for x in range(nworlds)
            ]
        self._families[rels] = ids
        return ids

    def world_class(self, s: int) -> int:
        st = self.g.states[s]
        return self.world_classes(tuple(st.relations))[st.world]

    def level(self, d: int) -> list:
        while len(self.levels) <= d:
            prev = self.levels[-1]
            self.state_defs.append([])
            self._state_ids.append({})
            k = len(self.levels)
            self.levels.append([
                self._intern_state(k, (prev[s], frozenset((label, prev[t]) for label, t in self.g.successors(s))))
                for s in range(len(prev))
            ])
        return self.levels[d]

    # characteristic formulas

    def _valuation(self, x: int) -> Formula:
        return conj(Prop(k) if (x >> k) & 1 else Not(Prop(k)) for k in range(self.nprops))

    def _world_char(self, e: int, wid: int) -> Formula:
        memo = ("W", e, wid)
        if memo in self._char:
            return self._char[memo]
        key = self.world_defs[e][wid]
        if e == 0:
            out = self._valuation(key)
        else:
            x, per_agent = key
            parts = [self._valuation(x)]
            for agent, seen in zip(self.agents, per_agent):
                inner = [self._world_char(e - 1, c) for c in sorted(seen)]
                parts.append(Know(agent, disj(inner)))
                parts.extend(Not(Know(agent, Not(c))) for c in inner)
            out = conj(parts)
        self._char[memo] = out
        return out

    def char(self, d: int, cid: int) -> Formula:
        """Characteristic formula of state class ``cid`` at modal depth ``d``."""
        memo = ("S", d, cid)
        if memo in self._char:
            return self._char[memo]
        key = self.state_defs[d][cid]
        if d == 0:
            out = self._world_char(self.edepth, key)
        else:
            prev, steps = key
            present = set(self.level(d - 1))
            parts = [self.char(d - 1, prev)]
            by_label: dict = {}
            for label, c in sorted(steps):
                by_label.setdefault(label, set()).add(c)
                parts.append(Diamond(label, self.char(d - 1, c)))
            for label in self.g.labels():
                others = sorted(present - by_label.get(label, set()))
                if others:
                    parts.append(Not(Diamond(label, disj(self.char(d - 1, c) for c in others))))
            out = conj(parts)
        self._char[memo] = out
        return out


def characteristic_formula(g: KltsGraph, s: int, depth: int, epistemic_depth: int = 2) -> Formula:
    """A formula of the given depths true exactly at the states agreeing with ``s`` on all such formulas."""
    cls = _Classes(g, epistemic_depth)
    return cls.char(depth, cls.level(depth)[s])


def modal_equiv(
    g: KltsGraph,
    s: int,
    t: int,
    depth: int,
    epistemic_depth: int = 2,
    *,
    max_states: int = 200,
    max_props: int = 4,
) -> ModalResult:
    """Do ``s`` and ``t`` satisfy the same KT formulas up to the given depths?

    Formulas are enumerated up to logical equivalence: at each depth the
    definable state sets are unions of classes, so agreement on every class
    formula is agreement on every formula.  A disagreement comes with a
    distinguishing formula, re-checked with the model checker.
    """
    if depth < 0 or epistemic_depth < 0:
        raise ValueError("depths must be non-negative")
    if len(g.states) > max_states or g.nprops > max_props:
        raise ValueError("graph exceeds the modal-equivalence budget")
    cls = _Classes(g, epistemic_depth)
    for d in range(depth + 1):
        level = cls.level(d)
        if level[s] != level[t]:
            f = cls.char(d, level[s])
            checker = Checker(g)
            if not (checker.check(s, f) and not checker.check(t, f)):
                raise AssertionError("characteristic formula does not separate the states")
            return ModalResult(False, depth, epistemic_depth, f, d)
    return ModalResult(True, depth, epistemic_depth)


def build_klts(nprops: int, agents, valuations, relations, transitions) -> KltsGraph:
    """Assemble a KLTS from raw parts (for small hand-made or random graphs).

    ``relations[s]`` is a sequence of partitions aligned with ``agents``.
    """
    from .syntax import AgentDecl, Call, PropDecl, PropFamily, SystemSpec

    props = PropDecl(tuple(PropFamily(f"p{k}") for k in range(nprops)))
    spec = SystemSpec(props, {}, tuple(AgentDecl(i, None, Call("Nil"), "none") for i in agents))
    states = [
        PoolState(tuple(AgentState(i, NIL) for i in agents), tuple(rels), int(x))
        for x, rels in zip(valuations, relations)
    ]
    return KltsGraph(spec, states, list(transitions))
