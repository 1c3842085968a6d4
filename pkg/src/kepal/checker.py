"""Model checking of KT formulas over an explored KLTS.

Temporal operators are evaluated by global labeling.  ``F`` is the least
fixpoint of ``X = sat(body) | pre(X)``; ``G`` is the greatest fixpoint of
``X = sat(body) & pre(X)``, i.e. *some* infinite path stays in ``body``.
Deadlocked states never satisfy ``G``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .epistemic import KripkeModel, sat_set
from .formulas import (
    ANY_LABEL,
    Always,
    And,
    Diamond,
    Eventually,
    Formula,
    Know,
    Not,
    Prop,
    Top,
    is_epistemic,
)
from .semantics import KltsGraph

__all__ = ["Checker", "check", "sat_states", "witness", "Witness", "replay"]


@lru_cache(maxsize=1 << 16)
def _agents(psi) -> frozenset:
    if isinstance(psi, Know):
        return frozenset([psi.agent]) | _agents(psi.body)
    if isinstance(psi, And):
        return _agents(psi.left) | _agents(psi.right)
    if isinstance(psi, Not):
        return _agents(psi.body)
    return frozenset()


@lru_cache(maxsize=1 << 16)
def _has_know(f) -> bool:
    if isinstance(f, Know):
        return True
    if isinstance(f, And):
        return _has_know(f.left) or _has_know(f.right)
    if isinstance(f, Not):
        return _has_know(f.body)
    return False


class Checker:
    """Caches satisfaction sets per formula for one graph."""

    def __init__(self, g: KltsGraph):
        self.g = g
        n = len(g.states)
        self.n = n
        self.src = np.fromiter((t[0] for t in g.transitions), dtype=np.int64, count=len(g.transitions))
        self.dst = np.fromiter((t[2] for t in g.transitions), dtype=np.int64, count=len(g.transitions))
        labels = [t[1] for t in g.transitions]
        self.label_names = sorted(set(labels))
        lookup = {name: k for k, name in enumerate(self.label_names)}
        self.lab = np.fromiter((lookup[x] for x in labels), dtype=np.int64, count=len(labels))
        self.worlds = np.fromiter((s.world for s in g.states), dtype=np.int64, count=n)
        self.pred = [[] for _ in range(n)]
        self.succ = [[] for _ in range(n)]
        for s, label, t in g.transitions:
            self.pred[t].append(s)
            self.succ[s].append((label, t))
        self._memo: dict = {}

    def _edge_mask(self, label: str) -> np.ndarray:
        if label == ANY_LABEL:
            return np.ones(len(self.src), dtype=bool)
        if label not in self.label_names:
            return np.zeros(len(self.src), dtype=bool)
        return self.lab == self.label_names.index(label)

    def _epistemic(self, psi: Formula) -> np.ndarray:
        """Evaluate an epistemic formula at ``v(s)`` in each state's own model."""
        agents = sorted(_agents(psi))
        nprops = self.g.nprops
        out = np.zeros(self.n, dtype=bool)
        groups: dict = {}
        for s, st in enumerate(self.g.states):
            key = tuple(st.relation(i) for i in agents)
            groups.setdefault(key, []).append(s)
        for key, members in groups.items():
            worlds = sat_set(KripkeModel(nprops, dict(zip(agents, key))), psi)
            idx = np.asarray(members)
            out[idx] = worlds[self.worlds[idx]]
        return out

    def sat(self, f: Formula) -> np.ndarray:
        out = self._memo.get(f)
        if out is None:
            out = self._sat(f)
            out.flags.writeable = False
            self._memo[f] = out
        return out

    def _sat(self, f: Formula) -> np.ndarray:
        if is_epistemic(f) and _has_know(f):
            return self._epistemic(f)
        if isinstance(f, Top):
            return np.ones(self.n, dtype=bool)
        if isinstance(f, Prop):
            return ((self.worlds >> f.index) & 1).astype(bool)
        if isinstance(f, Not):
            return ~self.sat(f.body)
        if isinstance(f, And):
            return self.sat(f.left) & self.sat(f.right)
        if isinstance(f, Diamond):
            target = self.sat(f.body)
            mask = self._edge_mask(f.label) & target[self.dst]
            out = np.zeros(self.n, dtype=bool)
            out[self.src[mask]] = True
            return out
        if isinstance(f, Eventually):
            return self._least(self.sat(f.body))
        if isinstance(f, Always):
            return self._greatest(self.sat(f.body))
        raise TypeError(f"not a KT formula: {f!r}")

    def _least(self, base: np.ndarray) -> np.ndarray:
        out = base.copy()
        queue = deque(np.flatnonzero(base).tolist())
        while queue:
            t = queue.popleft()
            for s in self.pred[t]:
                if not out[s]:
                    out[s] = True
                    queue.append(s)
        return out

    def _greatest(self, base: np.ndarray) -> np.ndarray:
        out = base.copy()
        count = np.zeros(self.n, dtype=np.int64)
        inside = out[self.dst] & out[self.src]
        np.add.at(count, self.src[inside], 1)
        queue = deque(np.flatnonzero(out & (count == 0)).tolist())
        for s in queue:
            out[s] = False
        while queue:
            t = queue.popleft()
            for s in self.pred[t]:
                if out[s]:
                    count[s] -= 1
                    if count[s] == 0:
                        out[s] = False
                        queue.append(s)
        return out

    def check(self, s: int, f: Formula) -> bool:
        if not 0 <= s < self.n:
            raise IndexError(f"unknown state {s}")
        return bool(self.sat(f)[s])

    # -- witnesses ---------------------------------------------------------------

    def witness(self, s: int, f: Formula) -> "Witness":
        verdict = self.check(s, f)
        if isinstance(f, Diamond) and verdict:
            target = self.sat(f.body)
            for label, t in self.succ[s]:
                if (f.label == ANY_LABEL or label == f.label) and target[t]:
                    return Witness(True, "path", [(s, label), (t, None)])
        if isinstance(f, Eventually) and verdict:
            return Witness(True, "path", self._shortest(s, self.sat(f.body)))
        if isinstance(f, Always) and verdict:
            stem, cycle = self._lasso(s, self.sat(f))
            return Witness(True, "lasso", stem, cycle)
        return Witness(verdict, "summary", message=self._summary(s, f, verdict))

    def _shortest(self, s: int, target: np.ndarray) -> list:
        parent = {s: None}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if target[u]:
                path = [(u, None)]
                while parent[u] is not None:
                    u, label = parent[u]
                    path.append((u, label))
                return path[::-1]
            for label, t in self.succ[u]:
                if t not in parent:
                    parent[t] = (u, label)
                    queue.append(t)
        raise AssertionError("no path to the target set")

    def _lasso(self, s: int, inside: np.ndarray):
        seen = {}
        trail = []
        u = s
        while u not in seen:
            seen[u] = len(trail)
            step = next((label, t) for label, t in self.succ[u] if inside[t])
            trail.append((u, step[0]))
            u = step[1]
        k = seen[u]
        return trail[:k], trail[k:]

    def _summary(self, s, f, verdict) -> str:
        if isinstance(f, Eventually) and not verdict:
            return "no reachable state satisfies the body"
        if isinstance(f, Always) and not verdict:
            if not self.sat(f.body)[s]:
                return "the body fails at the state itself"
            return "every path leaves the body or deadlocks"
        if isinstance(f, Diamond) and not verdict:
            return f"no {f.label} transition leads to a state satisfying the body"
        if isinstance(f, Not):
            return f"negated subformula is {'false' if verdict else 'true'}"
        if isinstance(f, And) and not verdict:
            side = "left" if not self.sat(f.left)[s] else "right"
            return f"the {side} conjunct fails"
        return f"formula is {'true' if verdict else 'false'} at state {s}"


@dataclass
class Witness:
    verdict: bool
    kind: str  # path, lasso or summary
    trace: list = field(default_factory=list)
    cycle: list = field(default_factory=list)
    message: str = ""

    def as_record(self) -> dict:
        return {
            "verdict": self.verdict,
            "kind": self.kind,
            "trace": [[s, label] for s, label in self.trace],
            "cycle": [[s, label] for s, label in self.cycle],
            "message": self.message,
        }


def replay(checker: Checker, s: int, f: Formula, w: Witness) -> bool:
    """Re-derive the verdict by stepping the witness through the graph."""

    def step_ok(u, label, v):
        return (label, v) in checker.succ[u]

    if w.kind == "path":
        trace = w.trace
        if trace[0][0] != s:
            return False
        for (u, label), (v, _) in zip(trace, trace[1:]):
            if not step_ok(u, label, v):
                return False
        end = trace[-1][0]
        body = checker.sat(f.body)
        if isinstance(f, Diamond):
            return len(trace) == 2 and bool(body[end]) and (f.label == ANY_LABEL or trace[0][1] == f.label)
        return bool(body[end])
    if w.kind == "lasso":
        if not w.cycle:
            return False
        path = w.trace + w.cycle
        if path[0][0] != s:
            return False
        body = checker.sat(f.body)
        for k, (u, label) in enumerate(path):
            v = path[k + 1][0] if k + 1 < len(path) else w.cycle[0][0]
            if not step_ok(u, label, v) or not body[u]:
                return False
        return True
    return w.verdict == checker.check(s, f)


def sat_states(g: KltsGraph, f: Formula) -> np.ndarray:
    return Checker(g).sat(f)


def check(g: KltsGraph, s: int, f: Formula) -> bool:
    return Checker(g).check(s, f)


def witness(g: KltsGraph, s: int, f: Formula) -> Witness:
    return Checker(g).witness(s, f)
