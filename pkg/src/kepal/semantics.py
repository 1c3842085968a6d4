"""Pool-of-agents semantics: sequential steps, the pool/set/com rules, and
breadth-first generation of the reachable Kripke labeled transition system.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import numpy as np

from .epistemic import (
    KripkeModel,
    Partition,
    format_relation,
    merge_on_prop,
    prop_mask,
    sat_set,
    split_by,
)
from .formulas import And, Formula, Know, Not
from .printer import show_term
from .syntax import (
    Call,
    IndexedSum,
    Internal,
    Output,
    Prefix,
    Set,
    SpecError,
    Sum,
    SystemSpec,
    eval_expr,
    expand_indexed_sum,
    fold_constants,
    resolve_formula,
    substitute,
)

log = logging.getLogger(__name__)

__all__ = [
    "TAU",
    "AgentState",
    "PoolState",
    "Engine",
    "KltsGraph",
    "LTS",
    "agent_steps",
    "initial_state",
    "pool_steps",
    "apply_set",
    "apply_com",
    "explore",
    "canonical_key",
    "project_lts",
    "dump_graph",
]

TAU = "tau"


def visible(agent: int, action: str) -> str:
    return f"{agent}.{action}"


@dataclass(frozen=True)
class AgentState:
    ident: int
    term: object


@dataclass(frozen=True)
class PoolState:
    """One KLTS state: agent terms, one partition per agent, current world."""

    agents: tuple  # AgentState, in declaration order
    relations: tuple  # Partition, aligned with ``agents``
    world: int

    @property
    def ids(self) -> tuple:
        return tuple(a.ident for a in self.agents)

    def relation(self, ident: int) -> Partition:
        return self.relations[self.ids.index(ident)]

    def model(self, nprops: int) -> KripkeModel:
        return KripkeModel(nprops, dict(zip(self.ids, self.relations)))


def agent_steps(term, consts: dict) -> list[tuple]:
    """Initial actions of a closed term, with their continuations.

    Inputs stay symbolic; they are instantiated when a matching output is
    found at pool level.
    """
    if isinstance(term, Prefix):
        return [(term.action, term.cont)]
    if isinstance(term, Sum):
        out = []
        for part in term.parts:
            out.extend(agent_steps(part, consts))
        return out
    if isinstance(term, IndexedSum):
        return expand_indexed_sum(term)
    if isinstance(term, Call):
        cdef = consts.get(term.name)
        if cdef is None:
            raise SpecError(f"unknown constant {term.name}")
        values = [eval_expr(a) for a in term.args]
        return agent_steps(substitute(cdef.body, dict(zip(cdef.params, values))), consts)
    raise TypeError(f"not a process term: {term!r}")


def _agents_of(psi: Formula) -> frozenset:
    if isinstance(psi, Know):
        return frozenset([psi.agent]) | _agents_of(psi.body)
    if isinstance(psi, And):
        return _agents_of(psi.left) | _agents_of(psi.right)
    if isinstance(psi, Not):
        return _agents_of(psi.body)
    return frozenset()


class Engine:
    """Spec-bound evaluation context with memo tables for relation updates."""

    def __init__(self, spec: SystemSpec, *, check_factivity: bool = True):
        self.spec = spec
        self.nprops = len(spec.props)
        self.ids = spec.agent_ids
        self.pos = {ident: k for k, ident in enumerate(self.ids)}
        self.check_factivity = check_factivity
        self._partitions: dict[Partition, Partition] = {}
        self._merge: dict = {}
        self._split: dict = {}
        self.max_memo = 200_000
        self._agents = lru_cache(maxsize=None)(_agents_of)
        self._sat = lru_cache(maxsize=8192)(self._sat_uncached)

    # -- evaluation ---------------------------------------------------------------

    def intern(self, rel: Partition) -> Partition:
        return self._partitions.setdefault(rel, rel)

    def _sat_uncached(self, psi: Formula, rels: tuple) -> np.ndarray:
        model = KripkeModel(self.nprops, dict(rels))
        out = sat_set(model, psi)
        out.flags.writeable = False
        return out

    def sat(self, psi: Formula, state: PoolState) -> np.ndarray:
        agents = self._agents(psi)
        missing = sorted(a for a in agents if a not in self.pos)
        if missing:
            raise SpecError(f"formula mentions undeclared agent {missing[0]}")
        rels = tuple((i, state.relations[self.pos[i]]) for i in sorted(agents))
        return self._sat(psi, rels)

    def holds(self, psi: Formula, state: PoolState) -> bool:
        return bool(self.sat(psi, state)[state.world])

    def formula(self, template) -> Formula:
        return resolve_formula(template, {}, self.spec.props, self.spec.formulas)

    def name(self, n) -> str:
        return n.base + "".join(f"[{eval_expr(i)}]" for i in n.indices)

    # -- relation updates -------------------------------------------------------------

    def merged(self, rel: Partition, k: int) -> Partition:
        key = (rel, k)
        out = self._merge.get(key)
        if out is None:
            out = self._merge[key] = self.intern(merge_on_prop(rel, k))
        return out

    def split(self, rel: Partition, worlds: np.ndarray, key) -> Partition:
        key = (rel, key)
        out = self._split.get(key)
        if out is None:
            if len(self._split) >= self.max_memo:
                self._split.clear()
            out = self._split[key] = self.intern(split_by(rel, worlds))
        return out


def initial_state(spec: SystemSpec, engine: Engine | None = None) -> PoolState:
    engine = engine or Engine(spec)
    n = len(spec.props)
    agents, rels = [], []
    for decl in spec.agents:
        agents.append(AgentState(decl.ident, decl.init))
        if decl.observes == "all":
            rel = Partition.identity(n)
        elif decl.observes == "none":
            rel = Partition.total(n)
        else:
            rel = Partition.observing(n, decl.observes)
        rels.append(engine.intern(rel))
    world = sum(1 << k for k in spec.init)
    return PoolState(tuple(agents), tuple(rels), world)


_fold = lru_cache(maxsize=1 << 14)(fold_constants)


def _advance(state: PoolState, pos: int, term) -> tuple:
    agents = list(state.agents)
    agents[pos] = AgentState(agents[pos].ident, _fold(term))
    return tuple(agents)


def apply_set(engine: Engine, state: PoolState, j: int, k: int, w: bool, cont=None) -> PoolState:
    """Private assignment of proposition ``k`` by agent ``j``.

    The setter learns the value of ``k``; every other agent forgets it.
    """
    pos = engine.pos[j]
    world = state.world | (1 << k) if w else state.world & ~(1 << k)
    rels = []
    for q, rel in enumerate(state.relations):
        if q == pos:
            rels.append(engine.split(rel, prop_mask(engine.nprops, k), ("prop", k)))
        else:
            rels.append(engine.merged(rel, k))
    agents = state.agents if cont is None else _advance(state, pos, cont)
    return PoolState(agents, tuple(rels), world)


def apply_com(engine: Engine, state: PoolState, i: int, j: int, psi: Formula, conts=None) -> PoolState:
    """Private communication of ``psi`` from ``i`` to ``j``; only ``j`` learns.

    ``conts`` optionally carries the continuations ``(term_i, term_j)``.
    """
    if not engine.holds(Know(i, psi), state):
        raise AssertionError(f"com premise K[{i}] psi does not hold")
    if engine.check_factivity and not engine.holds(psi, state):
        raise AssertionError("communicated formula is false at the current world")
    pos = engine.pos[j]
    rels = list(state.relations)
    rels[pos] = engine.split(rels[pos], engine.sat(psi, state), ("psi", psi, state.relations))
    agents = state.agents
    if conts is not None:
        agents = _advance(state, engine.pos[i], conts[0])
        agents = list(agents)
        agents[pos] = AgentState(j, _fold(conts[1]))
        agents = tuple(agents)
    return PoolState(agents, tuple(rels), state.world)


def pool_steps(engine: Engine, state: PoolState) -> list[tuple[str, PoolState]]:
    """All outgoing transitions, ordered by rule (pool, set, com), then agent, then branch."""
    consts = engine.spec.consts
    steps = [agent_steps(a.term, consts) for a in state.agents]
    internal, sets, com = [], [], []
    outputs, inputs = [], []
    for pos, (agent, branches) in enumerate(zip(state.agents, steps)):
        for b, (action, cont) in enumerate(branches):
            if isinstance(action, Internal):
                label = visible(agent.ident, engine.name(action.name))
                internal.append((label, PoolState(_advance(state, pos, cont), state.relations, state.world)))
            elif isinstance(action, Set):
                k = engine.formula(action.prop).index
                w = eval_expr(action.value) != 0
                sets.append((TAU, apply_set(engine, state, agent.ident, k, w, cont)))
            elif isinstance(action, Output):
                outputs.append((pos, agent.ident, action, cont))
            else:
                inputs.append((pos, agent.ident, action, cont))
    for pos_i, i, out, cont_i in outputs:
        dest = eval_expr(out.dest)
        if dest == i or dest not in engine.pos:
            continue
        channel = engine.name(out.channel)
        psi = None
        for pos_j, j, inp, cont_j in inputs:
            if j != dest or engine.name(inp.channel) != channel:
                continue
            if psi is None:
                psi = engine.formula(out.formula)
                if not engine.holds(Know(i, psi), state):
                    break
            bindings = {}
            if inp.agent_var is not None:
                bindings[inp.agent_var] = i
            if inp.formula_var is not None:
                bindings[inp.formula_var] = psi
            com.append((TAU, apply_com(engine, state, i, j, psi, (cont_i, substitute(cont_j, bindings)))))
    return internal + sets + com


@dataclass
class KltsGraph:
    """Reachable KLTS: state table, root 0, transitions ``(src, label, dst)``."""

    spec: SystemSpec
    states: list
    transitions: list
    root: int = 0
    truncated: bool = False
    depth: list = field(default_factory=list)

    @property
    def nprops(self) -> int:
        return len(self.spec.props)

    def valuation(self, s: int) -> int:
        return self.states[s].world

    def relation(self, s: int, agent: int) -> Partition:
        return self.states[s].relation(agent)

    def model(self, s: int) -> KripkeModel:
        return self.states[s].model(self.nprops)

    def successors(self, s: int) -> list[tuple[str, int]]:
        adj = self.__dict__.get("_succ")
        if adj is None:
            adj = [[] for _ in self.states]
            for src, label, dst in self.transitions:
                adj[src].append((label, dst))
            self.__dict__["_succ"] = adj
        return adj[s]

    def labels(self) -> list[str]:
        return sorted({label for _, label, _ in self.transitions})


@dataclass
class LTS:
    states: range
    transitions: list
    root: int


def _internal_key(state: PoolState, terms: dict, rels: dict) -> tuple:
    return (
        tuple(terms.setdefault(a.term, (len(terms), a.term))[0] for a in state.agents),
        tuple(rels.setdefault(r, len(rels)) for r in state.relations),
        state.world,
    )


def _shared(state: PoolState, terms: dict) -> PoolState:
    """Rebuild ``state`` from the first-seen copies of its agent terms."""
    return PoolState(tuple(AgentState(a.ident, terms[a.term][1]) for a in state.agents), state.relations, state.world)


def explore(
    spec: SystemSpec,
    max_states: int | None = None,
    max_depth: int | None = None,
    engine: Engine | None = None,
) -> KltsGraph:
    """Breadth-first reachable sub-KLTS from the initial pool.

    States are deduplicated on (terms, partitions, world), which is equality
    of :func:`canonical_key`.  Hitting a limit sets ``truncated``.
    """
    engine = engine or Engine(spec)
    root = initial_state(spec, engine)
    terms: dict = {}
    rels: dict = {}
    index = {_internal_key(root, terms, rels): 0}
    states = [root]
    depth = [0]
    transitions = []
    truncated = False
    queue = deque([0])
    while queue:
        s = queue.popleft()
        if max_depth is not None and depth[s] >= max_depth:
            if pool_steps(engine, states[s]):
                truncated = True
            continue
        for label, succ in pool_steps(engine, states[s]):
            key = _internal_key(succ, terms, rels)
            t = index.get(key)
            if t is None:
                if max_states is not None and len(states) >= max_states:
                    truncated = True
                    continue
                t = index[key] = len(states)
                states.append(_shared(succ, terms))
                depth.append(depth[s] + 1)
                queue.append(t)
            transitions.append((s, label, t))
    if truncated:
        log.warning("exploration truncated at %d states", len(states))
    return KltsGraph(spec, states, transitions, 0, truncated, depth)


def canonical_key(state: PoolState, spec: SystemSpec | None = None) -> bytes:
    """Byte key: per agent (declaration order) term text and partition labels, then X."""
    names = spec.props.names if spec is not None else None
    parts = []
    for agent, rel in zip(state.agents, state.relations):
        text = show_term(agent.term, names).encode()
        parts.append(agent.ident.to_bytes(4, "little"))
        parts.append(len(text).to_bytes(4, "little") + text)
        parts.append(rel.tobytes())
    parts.append(state.world.to_bytes(8, "little"))
    return b"".join(parts)


def project_lts(g: KltsGraph) -> LTS:
    return LTS(range(len(g.states)), list(g.transitions), g.root)


def dump_graph(g: KltsGraph, relations: str = "auto") -> Iterator[str]:
    """Line-oriented graph dump.

    ``relations`` is ``inline`` (blocks on every STATE line), ``table``
    (distinct relations listed once as ``RELATION r<k>`` lines and
    referenced by name) or ``auto`` (inline up to 8 propositions).
    """
    names = g.spec.props.names
    if relations == "auto":
        relations = "inline" if len(names) <= 8 else "table"
    yield f"KLTS states={len(g.states)} transitions={len(g.transitions)} root={g.root}"
    table: dict[Partition, str] = {}
    if relations == "table":
        for st in g.states:
            for rel in st.relations:
                if rel not in table:
                    table[rel] = f"r{len(table)}"
                    yield f"RELATION {table[rel]} {format_relation(rel, names)}"
    for s, st in enumerate(g.states):
        bits = format(st.world, f"0{max(len(names), 1)}b")[::-1] if names else ""
        agents = ";".join(f"{a.ident}:{show_term(a.term, names)}" for a in st.agents)
        rels = " ".join(
            f"REL[{a.ident}]=" + (table[r] if relations == "table" else format_relation(r, names))
            for a, r in zip(st.agents, st.relations)
        )
        yield f"STATE {s} X={bits} AGENTS={agents} {rels}"
    for src, label, dst in g.transitions:
        yield f"TRANS {src} {label} {dst}"
