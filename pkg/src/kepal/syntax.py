"""Abstract syntax of the sequential calculus and of pool specifications.

Expressions and formula templates may mention variables; a term becomes
executable once every variable has been replaced by a value (an integer or
a resolved epistemic formula) through :func:`substitute`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Union

from .formulas import And, Formula, Know, Not, Prop, Top

__all__ = [
    "SpecError",
    "Lit",
    "Var",
    "BinOp",
    "Expr",
    "eval_expr",
    "PropRef",
    "FormulaVar",
    "KnowT",
    "MacroCall",
    "resolve_formula",
    "Name",
    "Internal",
    "Input",
    "Output",
    "Set",
    "Action",
    "Prefix",
    "IndexedSum",
    "Sum",
    "Call",
    "NIL",
    "Term",
    "Cmp",
    "Member",
    "BoolOp",
    "BoolNot",
    "eval_cond",
    "substitute",
    "fold_constants",
    "free_vars",
    "expand_indexed_sum",
    "index_tuples",
    "PropFamily",
    "PropDecl",
    "ConstDef",
    "FormulaDef",
    "AgentDecl",
    "SystemSpec",
]


class SpecError(ValueError):
    """Load-time or evaluation error, optionally carrying a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(where + message)


def _node(cls):
    """Frozen dataclass with a cached structural hash."""
    cls = dataclass(frozen=True, eq=True)(cls)
    keys = tuple(f for f in cls.__dataclass_fields__)

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((cls.__name__,) + tuple(getattr(self, k) for k in keys))
            object.__setattr__(self, "_h", h)
        return h

    cls.__hash__ = __hash__
    return cls


# -- expressions --------------------------------------------------------------


@_node
class Lit:
    value: int


@_node
class Var:
    name: str


@_node
class BinOp:
    op: str  # one of + - * mod
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Var, BinOp]


def eval_expr(e: Expr, env: Mapping[str, object] | None = None) -> int:
    """Integer value of ``e``; ``mod`` yields the non-negative remainder."""
    env = env or {}
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise SpecError(f"unbound variable {e.name}")
        value = env[e.name]
        if not isinstance(value, int):
            raise SpecError(f"variable {e.name} holds a formula, not an integer")
        return value
    a = eval_expr(e.left, env)
    b = eval_expr(e.right, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "mod":
        if b == 0:
            raise SpecError("mod by zero")
        return a % abs(b)
    raise SpecError(f"unknown operator {e.op}")


# -- formula templates --------------------------------------------------------
# Templates reuse Top/Not/And from formulas.py; closed parts may already be
# resolved Prop/Know nodes (e.g. a formula received through an input).


@_node
class PropRef:
    name: str
    indices: tuple


@_node
class FormulaVar:
    name: str


@_node
class KnowT:
    agent: Expr
    body: object


@_node
class MacroCall:
    name: str
    args: tuple


def resolve_formula(t, env: Mapping[str, object], props: "PropDecl", macros=None) -> Formula:
    """Evaluate a formula template to an epistemic formula over flat indices."""
    if isinstance(t, (Top, Prop)):
        return t
    if isinstance(t, PropRef):
        return Prop(props.index(t.name, tuple(eval_expr(i, env) for i in t.indices)))
    if isinstance(t, FormulaVar):
        value = env.get(t.name)
        if value is None:
            raise SpecError(f"unbound variable {t.name}")
        if not isinstance(value, Formula):
            raise SpecError(f"variable {t.name} holds an integer, not a formula")
        return value
    if isinstance(t, Not):
        return Not(resolve_formula(t.body, env, props, macros))
    if isinstance(t, And):
        return And(
            resolve_formula(t.left, env, props, macros),
            resolve_formula(t.right, env, props, macros),
        )
    if isinstance(t, KnowT):
        return Know(eval_expr(t.agent, env), resolve_formula(t.body, env, props, macros))
    if isinstance(t, Know):
        return Know(t.agent, resolve_formula(t.body, env, props, macros))
    if isinstance(t, MacroCall):
        if macros is None or t.name not in macros:
            raise SpecError(f"unknown formula {t.name}")
        fdef = macros[t.name]
        if len(fdef.params) != len(t.args):
            raise SpecError(f"formula {t.name} expects {len(fdef.params)} arguments")
        inner = dict(zip(fdef.params, (eval_expr(a, env) for a in t.args)))
        return resolve_formula(fdef.body, inner, props, macros)
    raise TypeError(f"not a formula template: {t!r}")


# -- actions and terms ----------------------------------------------------------


@_node
class Name:
    """Possibly indexed action/channel name such as ``ask[i][j]``."""

    base: str
    indices: tuple = ()


@_node
class Internal:
    name: Name


@_node
class Input:
    channel: Name
    agent_var: str | None
    formula_var: str | None


@_node
class Output:
    channel: Name
    dest: Expr
    formula: object


@_node
class Set:
    prop: PropRef
    value: Expr


Action = Union[Internal, Input, Output, Set]


@_node
class Prefix:
    action: Action
    cont: "Term"


@_node
class Cmp:
    op: str  # one of = != < <= > >=
    left: Expr
    right: Expr


@_node
class Member:
    item: Expr
    items: tuple
    negated: bool = False


@_node
class BoolOp:
    op: str  # & or |
    left: object
    right: object


@_node
class BoolNot:
    body: object


@_node
class IndexedSum:
    """``sum v1,v2 : lo..hi, w : lo..hi where cond . body``."""

    binders: tuple  # ((var, lo, hi), ...)
    cond: object | None
    body: "Term"


@_node
class Sum:
    """Choice over summands; the empty sum is the halted process."""

    parts: tuple


@_node
class Call:
    name: str
    args: tuple = ()


NIL = Sum(())

Term = Union[Sum, Prefix, IndexedSum, Call]


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def eval_cond(c, env) -> bool:
    if c is None:
        return True
    if isinstance(c, Cmp):
        return _CMP[c.op](eval_expr(c.left, env), eval_expr(c.right, env))
    if isinstance(c, Member):
        found = eval_expr(c.item, env) in {eval_expr(e, env) for e in c.items}
        return found != c.negated
    if isinstance(c, BoolOp):
        if c.op == "&":
            return eval_cond(c.left, env) and eval_cond(c.right, env)
        return eval_cond(c.left, env) or eval_cond(c.right, env)
    if isinstance(c, BoolNot):
        return not eval_cond(c.body, env)
    raise TypeError(f"not a condition: {c!r}")


# -- substitution -----------------------------------------------------------------


# marker key (not an identifier) asking substitution to fold closed arithmetic
_FOLD = " fold"


def _sub_expr(e, b):
    if isinstance(e, Var):
        if e.name in b:
            value = b[e.name]
            if not isinstance(value, int):
                raise SpecError(f"sort mismatch: {e.name} is an integer variable")
            return Lit(value)
        return e
    if isinstance(e, BinOp):
        out = BinOp(e.op, _sub_expr(e.left, b), _sub_expr(e.right, b))
        if _FOLD in b and isinstance(out.left, Lit) and isinstance(out.right, Lit):
            try:
                return Lit(eval_expr(out))
            except SpecError:
                return out  # e.g. mod 0 on a branch that may never run
        return out
    return e


def _sub_formula(t, b):
    if isinstance(t, FormulaVar):
        if t.name in b:
            value = b[t.name]
            if not isinstance(value, Formula):
                raise SpecError(f"sort mismatch: {t.name} is a formula variable")
            return value
        return t
    if isinstance(t, PropRef):
        return PropRef(t.name, tuple(_sub_expr(i, b) for i in t.indices))
    if isinstance(t, Not):
        return Not(_sub_formula(t.body, b))
    if isinstance(t, And):
        return And(_sub_formula(t.left, b), _sub_formula(t.right, b))
    if isinstance(t, KnowT):
        return KnowT(_sub_expr(t.agent, b), _sub_formula(t.body, b))
    if isinstance(t, Know):
        return Know(t.agent, _sub_formula(t.body, b))
    if isinstance(t, MacroCall):
        return MacroCall(t.name, tuple(_sub_expr(a, b) for a in t.args))
    return t


def _sub_cond(c, b):
    if c is None:
        return None
    if isinstance(c, Cmp):
        return Cmp(c.op, _sub_expr(c.left, b), _sub_expr(c.right, b))
    if isinstance(c, Member):
        return Member(_sub_expr(c.item, b), tuple(_sub_expr(e, b) for e in c.items), c.negated)
    if isinstance(c, BoolOp):
        return BoolOp(c.op, _sub_cond(c.left, b), _sub_cond(c.right, b))
    return BoolNot(_sub_cond(c.body, b))


def _sub_name(n: Name, b) -> Name:
    if not n.indices:
        return n
    return Name(n.base, tuple(_sub_expr(i, b) for i in n.indices))


def _without(b, names):
    names = [n for n in names if n is not None and n in b]
    if not names:
        return b
    return {k: v for k, v in b.items() if k not in names}


def _sub_action(a, b):
    if isinstance(a, Internal):
        return Internal(_sub_name(a.name, b))
    if isinstance(a, Input):
        return Input(_sub_name(a.channel, b), a.agent_var, a.formula_var)
    if isinstance(a, Output):
        return Output(_sub_name(a.channel, b), _sub_expr(a.dest, b), _sub_formula(a.formula, b))
    return Set(_sub_formula(a.prop, b), _sub_expr(a.value, b))


def substitute(term: Term, bindings: Mapping[str, object]) -> Term:
    """Replace free occurrences of the bound variables.

    Integer-sorted variables take ``int`` values, formula variables take
    resolved :class:`Formula` values.  Input binders and indexed-sum binders
    shadow the bindings inside their scope.
    """
    if not bindings:
        return term
    if isinstance(term, Sum):
        return Sum(tuple(substitute(p, bindings) for p in term.parts))
    if isinstance(term, Prefix):
        action = _sub_action(term.action, bindings)
        inner = bindings
        if isinstance(term.action, Input):
            inner = _without(bindings, (term.action.agent_var, term.action.formula_var))
        return Prefix(action, substitute(term.cont, inner))
    if isinstance(term, IndexedSum):
        binders = tuple((v, _sub_expr(lo, bindings), _sub_expr(hi, bindings)) for v, lo, hi in term.binders)
        inner = _without(bindings, [v for v, _, _ in term.binders])
        return IndexedSum(binders, _sub_cond(term.cond, inner), substitute(term.body, inner))
    if isinstance(term, Call):
        return Call(term.name, tuple(_sub_expr(a, bindings) for a in term.args))
    raise TypeError(f"not a process term: {term!r}")


def fold_constants(term: Term) -> Term:
    """Replace every closed arithmetic subexpression by its value."""
    return substitute(term, {_FOLD: True})


# -- free variables ---------------------------------------------------------------


def _fv_expr(e, out):
    if isinstance(e, Var):
        out.add(e.name)
    elif isinstance(e, BinOp):
        _fv_expr(e.left, out)
        _fv_expr(e.right, out)


def _fv_formula(t, out):
    if isinstance(t, FormulaVar):
        out.add(t.name)
    elif isinstance(t, PropRef):
        for i in t.indices:
            _fv_expr(i, out)
    elif isinstance(t, (Not, Know)):
        _fv_formula(t.body, out)
    elif isinstance(t, And):
        _fv_formula(t.left, out)
        _fv_formula(t.right, out)
    elif isinstance(t, KnowT):
        _fv_expr(t.agent, out)
        _fv_formula(t.body, out)
    elif isinstance(t, MacroCall):
        for a in t.args:
            _fv_expr(a, out)


def _fv_cond(c, out):
    if isinstance(c, Cmp):
        _fv_expr(c.left, out)
        _fv_expr(c.right, out)
    elif isinstance(c, Member):
        _fv_expr(c.item, out)
        for e in c.items:
            _fv_expr(e, out)
    elif isinstance(c, BoolOp):
        _fv_cond(c.left, out)
        _fv_cond(c.right, out)
    elif isinstance(c, BoolNot):
        _fv_cond(c.body, out)


def _fv_action(a, out):
    name = a.name if isinstance(a, Internal) else getattr(a, "channel", None)
    if name is not None:
        for i in name.indices:
            _fv_expr(i, out)
    if isinstance(a, Output):
        _fv_expr(a.dest, out)
        _fv_formula(a.formula, out)
    elif isinstance(a, Set):
        _fv_formula(a.prop, out)
        _fv_expr(a.value, out)


def free_vars(term: Term) -> set[str]:
    out: set[str] = set()
    if isinstance(term, Sum):
        for p in term.parts:
            out |= free_vars(p)
    elif isinstance(term, Prefix):
        _fv_action(term.action, out)
        inner = free_vars(term.cont)
        if isinstance(term.action, Input):
            inner -= {term.action.agent_var, term.action.formula_var}
        out |= inner
    elif isinstance(term, IndexedSum):
        bound = {v for v, _, _ in term.binders}
        for _, lo, hi in term.binders:
            _fv_expr(lo, out)
            _fv_expr(hi, out)
        inner: set[str] = set()
        _fv_cond(term.cond, inner)
        inner |= free_vars(term.body)
        out |= inner - bound
    elif isinstance(term, Call):
        for a in term.args:
            _fv_expr(a, out)
    return out


# -- indexed sums -------------------------------------------------------------------


def _summands(term: Term) -> list[Prefix]:
    """Flatten a closed guarded term to its prefix summands."""
    if isinstance(term, Prefix):
        return [term]
    if isinstance(term, Sum):
        out = []
        for p in term.parts:
            out.extend(_summands(p))
        return out
    if isinstance(term, IndexedSum):
        return [Prefix(a, k) for a, k in expand_indexed_sum(term)]
    raise SpecError(f"unguarded constant call {term.name} inside a sum")


def _conjuncts(c) -> list:
    if c is None:
        return []
    if isinstance(c, BoolOp) and c.op == "&":
        return _conjuncts(c.left) + _conjuncts(c.right)
    return [c]


def index_tuples(binders, cond, env: Mapping[str, object] | None = None):
    """Yield binder assignments (dicts) meeting ``cond``, in lexicographic order.

    Each top-level conjunct is tested as soon as its binders are fixed, so
    impossible prefixes are pruned early.
    """
    env = dict(env or {})
    names = [v for v, _, _ in binders]
    checks: list[list] = [[] for _ in names]
    for c in _conjuncts(cond):
        used: set[str] = set()
        _fv_cond(c, used)
        last = max((names.index(v) for v in used if v in names), default=0)
        checks[last].append(c)

    def walk(k: int, local: dict):
        if k == len(names):
            yield local
            return
        _, lo, hi = binders[k]
        for value in range(eval_expr(lo, local), eval_expr(hi, local) + 1):
            inner = {**local, names[k]: value}
            if all(eval_cond(c, inner) for c in checks[k]):
                yield from walk(k + 1, inner)

    yield from walk(0, env)


def expand_indexed_sum(t: IndexedSum, env: Mapping[str, object] | None = None) -> list[tuple]:
    """One ``(action, continuation)`` branch per index tuple meeting the constraint.

    Tuples are enumerated in lexicographic order of the binders.  An empty
    expansion is legal and behaves like the halted process.
    """
    names = [v for v, _, _ in t.binders]
    branches = []
    for local in index_tuples(t.binders, t.cond, env):
        body = substitute(t.body, {v: local[v] for v in names})
        for p in _summands(body):
            branches.append((p.action, p.cont))
    return branches


# -- declarations --------------------------------------------------------------------


@dataclass(frozen=True)
class PropFamily:
    name: str
    ranges: tuple = ()  # ((lo, hi), ...) inclusive bounds


@dataclass(frozen=True)
class PropDecl:
    """Indexed proposition families flattened into one ordered universe."""

    families: tuple = ()
    names: tuple = field(init=False)
    positions: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        names = []
        positions = {}
        for fam in self.families:
            if fam.name in {f for f, _ in positions}:
                raise SpecError(f"duplicate proposition family {fam.name}")
            for lo, hi in fam.ranges:
                if hi < lo:
                    raise SpecError(f"empty index range {lo}..{hi} for {fam.name}")
            for idx in product(*[range(lo, hi + 1) for lo, hi in fam.ranges]):
                positions[(fam.name, idx)] = len(names)
                names.append(fam.name + "".join(f"[{i}]" for i in idx))
        object.__setattr__(self, "names", tuple(names))
        object.__setattr__(self, "positions", positions)

    def __len__(self):
        return len(self.names)

    def family(self, name: str) -> PropFamily | None:
        for fam in self.families:
            if fam.name == name:
                return fam
        return None

    def index(self, name: str, idx: tuple = ()) -> int:
        try:
            return self.positions[(name, tuple(idx))]
        except KeyError:
            label = name + "".join(f"[{i}]" for i in idx)
            raise SpecError(f"unknown proposition {label}") from None

    def lookup(self, label: str) -> int:
        return self.names.index(label)


@dataclass(frozen=True)
class ConstDef:
    name: str
    params: tuple
    body: Term


@dataclass(frozen=True)
class FormulaDef:
    name: str
    params: tuple
    body: object


@dataclass(frozen=True)
class AgentDecl:
    """``agent <id> [as <name>] : <Call> observes all|none|{props}``.

    ``observes`` is ``"all"``, ``"none"`` or a tuple of flat proposition indices.
    """

    ident: int
    alias: str | None
    init: Call
    observes: object


@dataclass(frozen=True)
class SystemSpec:
    props: PropDecl
    consts: dict
    agents: tuple
    init: frozenset = frozenset()
    formulas: dict = field(default_factory=dict)
    warnings: tuple = ()

    @property
    def agent_ids(self) -> tuple:
        return tuple(a.ident for a in self.agents)

    def const(self, name: str) -> ConstDef:
        try:
            return self.consts[name]
        except KeyError:
            raise SpecError(f"unknown constant {name}") from None
