"""Formula trees for the epistemic layer and the temporal (KT) layer.

Both layers share ``Top``, ``Prop``, ``Not`` and ``And``.  ``Know`` may only
wrap epistemic formulas; ``Diamond``, ``Eventually`` and ``Always`` only live
in the outer layer.  Disjunction and implication are sugar and are desugared
by the constructors ``Or`` and ``Implies``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "Formula",
    "Top",
    "Prop",
    "Not",
    "And",
    "Know",
    "Diamond",
    "Eventually",
    "Always",
    "Or",
    "Implies",
    "conj",
    "disj",
    "ANY_LABEL",
    "is_epistemic",
    "epistemic_depth",
    "modal_depth",
]

# label pattern matching any transition
ANY_LABEL = "-"


class _Node:
    """Mixin caching the structural hash; formula trees are hashed a lot."""

    __slots__ = ()

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_h", h)
        return h


class _Interned(type):
    """Hash-consing: structurally equal formulas are the same object.

    Formulas built by the equivalence oracle are DAGs with heavy sharing;
    without interning, comparing two equal copies walks the unfolded tree.
    """

    _table: "weakref.WeakValueDictionary" = weakref.WeakValueDictionary()

    def __call__(cls, *args, **kwargs):
        obj = super().__call__(*args, **kwargs)
        return _Interned._table.setdefault((cls,) + obj._key(), obj)


@dataclass(frozen=True, eq=True)
class Formula(_Node, metaclass=_Interned):
    def _key(self):
        return ()

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Top(Formula):
    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Prop(Formula):
    index: int

    def _key(self):
        return (self.index,)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Not(Formula):
    body: Formula

    def _key(self):
        return (self.body,)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class And(Formula):
    left: Formula
    right: Formula

    def _key(self):
        return (self.left, self.right)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Know(Formula):
    agent: int
    body: Formula

    def _key(self):
        return (self.agent, self.body)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Diamond(Formula):
    """``<label> body``; ``label`` is a transition label string or ``ANY_LABEL``."""

    label: str
    body: Formula

    def _key(self):
        return (self.label, self.body)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Eventually(Formula):
    body: Formula

    def _key(self):
        return (self.body,)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Always(Formula):
    """Existential globally: some infinite path stays inside ``body``."""

    body: Formula

    def _key(self):
        return (self.body,)

    __hash__ = _Node.__hash__


def Or(left: Formula, right: Formula) -> Formula:
    return Not(And(Not(left), Not(right)))


def Implies(left: Formula, right: Formula) -> Formula:
    return Not(And(left, Not(right)))


def conj(items) -> Formula:
    items = list(items)
    if not items:
        return Top()
    out = items[0]
    for f in items[1:]:
        out = And(out, f)
    return out


def disj(items) -> Formula:
    items = list(items)
    if not items:
        return Not(Top())
    out = items[0]
    for f in items[1:]:
        out = Or(out, f)
    return out


@lru_cache(maxsize=1 << 16)
def is_epistemic(f: Formula) -> bool:
    if isinstance(f, (Top, Prop)):
        return True
    if isinstance(f, (Not, Know)):
        return is_epistemic(f.body)
    if isinstance(f, And):
        return is_epistemic(f.left) and is_epistemic(f.right)
    return False


@lru_cache(maxsize=1 << 16)
def epistemic_depth(f: Formula) -> int:
    if isinstance(f, (Top, Prop)):
        return 0
    if isinstance(f, Know):
        return 1 + epistemic_depth(f.body)
    if isinstance(f, And):
        return max(epistemic_depth(f.left), epistemic_depth(f.right))
    return epistemic_depth(f.body)


@lru_cache(maxsize=1 << 16)
def modal_depth(f: Formula) -> int:
    """Nesting depth of temporal operators (``Know`` does not count)."""
    if isinstance(f, (Top, Prop, Know)):
        return 0
    if isinstance(f, (Diamond, Eventually, Always)):
        return 1 + modal_depth(f.body)
    if isinstance(f, And):
        return max(modal_depth(f.left), modal_depth(f.right))
    return modal_depth(f.body)
