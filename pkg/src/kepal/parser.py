"""Parser for ``.kpa`` pool specifications and for formula text.

A specification has the sections ``props:``, ``formula``, ``const``,
``pool:`` and ``init:``; ``#`` starts a line comment and every declaration
may end with a ``.``::

    props: p, q[1..3].
    const C(x) := set(q[x], 1) . a!(x, q[x]) . C((x mod 3) + 1).
    pool:
      agent 0 : C(1) observes all.
      agent 1 as bob : Listener observes {p}.
    init: {p}.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .epistemic import WorldCapError, _check_cap
from .formulas import (
    ANY_LABEL,
    Always,
    And,
    Diamond,
    Eventually,
    Formula,
    Implies,
    Know,
    Not,
    Or,
    Top,
)
from .syntax import (
    AgentDecl,
    BinOp,
    BoolNot,
    BoolOp,
    Call,
    Cmp,
    ConstDef,
    FormulaDef,
    FormulaVar,
    IndexedSum,
    Input,
    Internal,
    KnowT,
    Lit,
    MacroCall,
    Member,
    Name,
    NIL,
    Output,
    Prefix,
    PropDecl,
    PropFamily,
    PropRef,
    Set,
    SpecError,
    Sum,
    SystemSpec,
    Var,
    resolve_formula,
)

__all__ = ["parse_system", "parse_formula", "parse_term", "SpecError"]

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|\.\.|->|!=|<=|>=|==|[.:,()\[\]{}+\-*!?&|<>=])
    """,
    re.VERBOSE,
)

_SECTIONS = {"props", "const", "formula", "pool", "init", "agent"}
_RESERVED_CHANNELS = {"tau", "set"}
_FORMULA_KEYWORDS = {"true", "false", "K", "F", "G"}


@dataclass
class Tok:
    kind: str
    value: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SpecError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind != "ws":
            toks.append(Tok(kind, m.group(), line, pos - start + 1))
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, *, props: PropDecl | None = None, macros=None, aliases=None):
        self.toks = tokenize(text)
        self.i = 0
        self.props = props or PropDecl(())
        self.families = {f.name for f in self.props.families}
        self.consts: set[str] = set()
        self.arity: dict[str, int] = {}
        self.macros = dict(macros or {})
        self.macro_names = set(self.macros)
        self.aliases = dict(aliases or {})
        self.scope: list[dict[str, str]] = [{}]
        self.calls: list[tuple[Call, Tok]] = []

    # -- token helpers ----------------------------------------------------------

    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Tok | None = None):
        tok = tok or self.tok
        raise SpecError(msg, tok.line, tok.col)

    def at(self, value: str) -> bool:
        return self.tok.value == value and self.tok.kind in ("sym", "name")

    def accept(self, value: str) -> Tok | None:
        if self.at(value):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, value: str) -> Tok:
        tok = self.accept(value)
        if tok is None:
            shown = self.tok.value or "end of input"
            self.error(f"expected {value!r}, found {shown!r}")
        return tok

    def name(self) -> Tok:
        if self.tok.kind != "name":
            self.error(f"expected a name, found {self.tok.value or 'end of input'!r}")
        tok = self.tok
        self.i += 1
        return tok

    def integer(self) -> int:
        neg = self.accept("-") is not None
        if self.tok.kind != "int":
            self.error(f"expected an integer, found {self.tok.value or 'end of input'!r}")
        value = int(self.tok.value)
        self.i += 1
        return -value if neg else value

    # -- scopes -------------------------------------------------------------------

    def lookup(self, name: str) -> str | None:
        for frame in reversed(self.scope):
            if name in frame:
                return frame[name]
        return None

    def push(self, bindings: dict[str, str]):
        self.scope.append(bindings)

    def pop(self):
        self.scope.pop()

    # -- expressions ----------------------------------------------------------------

    def expr(self):
        left = self.expr_term()
        while self.at("+") or self.at("-"):
            op = self.tok.value
            self.i += 1
            left = BinOp(op, left, self.expr_term())
        return left

    def expr_term(self):
        left = self.expr_factor()
        while self.at("*") or self.at("mod"):
            op = self.tok.value
            self.i += 1
            left = BinOp(op, left, self.expr_factor())
        return left

    def expr_factor(self):
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Lit(int(tok.value))
        if self.accept("-"):
            inner = self.expr_factor()
            if isinstance(inner, Lit):
                return Lit(-inner.value)
            return BinOp("-", Lit(0), inner)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name":
            self.i += 1
            sort = self.lookup(tok.value)
            if sort == "int":
                return Var(tok.value)
            if sort == "formula":
                self.error(f"sort mismatch: {tok.value} is a formula variable", tok)
            if tok.value in self.aliases:
                return Lit(self.aliases[tok.value])
            self.error(f"unbound variable {tok.value}", tok)
        self.error(f"expected an expression, found {tok.value or 'end of input'!r}")

    def indices(self) -> tuple:
        out = []
        while self.accept("["):
            out.append(self.expr())
            self.expect("]")
        return tuple(out)

    # -- conditions of indexed sums ---------------------------------------------------

    def cond(self):
        left = self.cond_and()
        while self.accept("|"):
            left = BoolOp("|", left, self.cond_and())
        return left

    def cond_and(self):
        left = self.cond_not()
        while self.accept("&"):
            left = BoolOp("&", left, self.cond_not())
        return left

    def cond_not(self):
        if self.accept("!"):
            return BoolNot(self.cond_not())
        if self.at("("):
            save = self.i
            self.i += 1
            try:
                c = self.cond()
                self.expect(")")
                return c
            except SpecError:
                self.i = save
        left = self.expr()
        for op in ("!=", "<=", ">=", "==", "=", "<", ">"):
            if self.accept(op):
                return Cmp("=" if op == "==" else op, left, self.expr())
        negated = False
        if self.accept("notin"):
            negated = True
        elif not self.accept("in"):
            self.error("expected a comparison or set membership")
        self.expect("{")
        items = []
        if not self.at("}"):
            items.append(self.expr())
            while self.accept(","):
                items.append(self.expr())
        self.expect("}")
        return Member(left, tuple(items), negated)

    # -- formulas -----------------------------------------------------------------------

    def formula(self, temporal: bool = False):
        left = self.f_or(temporal)
        if self.accept("->"):
            return Implies(left, self.formula(temporal))
        return left

    def f_or(self, temporal):
        left = self.f_and(temporal)
        while self.accept("|"):
            left = Or(left, self.f_and(temporal))
        return left

    def f_and(self, temporal):
        left = self.f_unary(temporal)
        while self.accept("&"):
            left = And(left, self.f_unary(temporal))
        return left

    def f_unary(self, temporal):
        tok = self.tok
        if self.accept("!"):
            return Not(self.f_unary(temporal))
        if tok.kind == "name" and tok.value == "K" and self.peek().value == "[":
            self.i += 1
            self.expect("[")
            agent = self.expr()
            self.expect("]")
            body = self.f_unary(False)
            return KnowT(agent, body)
        if temporal and tok.kind == "name" and tok.value in ("F", "G"):
            self.i += 1
            body = self.f_unary(True)
            return Eventually(body) if tok.value == "F" else Always(body)
        if temporal and self.accept("<"):
            label = self.label()
            return Diamond(label, self.f_unary(True))
        return self.f_atom(temporal)

    def label(self) -> str:
        if self.accept("->"):
            return ANY_LABEL
        if self.accept("-"):
            self.expect(">")
            return ANY_LABEL
        if self.accept("tau"):
            self.expect(">")
            return "tau"
        tok = self.tok
        if tok.kind == "int":
            agent = int(tok.value)
            self.i += 1
        elif tok.kind == "name" and tok.value in self.aliases:
            agent = self.aliases[tok.value]
            self.i += 1
        else:
            self.error("expected a transition label such as <tau>, <->, <0.b>")
        self.expect(".")
        action = self.name().value
        idx = []
        while self.accept("["):
            idx.append(str(self.integer()))
            self.expect("]")
        self.expect(">")
        return f"{agent}.{action}" + "".join(f"[{i}]" for i in idx)

    def f_atom(self, temporal):
        tok = self.tok
        if self.accept("true"):
            return Top()
        if self.accept("false"):
            return Not(Top())
        if self.accept("("):
            f = self.formula(temporal)
            self.expect(")")
            return f
        if tok.kind != "name":
            self.error(f"expected a formula, found {tok.value or 'end of input'!r}")
        self.i += 1
        name = tok.value
        if name in self.families:
            idx = self.indices()
            fam = self.props.family(name)
            if len(idx) != len(fam.ranges):
                self.error(f"proposition {name} takes {len(fam.ranges)} indices", tok)
            return PropRef(name, idx)
        sort = self.lookup(name)
        if sort == "formula":
            return FormulaVar(name)
        if sort == "int":
            self.error(f"sort mismatch: {name} is an integer variable", tok)
        if name in self.macro_names:
            args = []
            if self.accept("("):
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
            return MacroCall(name, tuple(args))
        self.error(f"unknown proposition or formula {name}", tok)

    # -- process terms --------------------------------------------------------------------

    def term(self):
        parts = [self.summand()]
        while self.accept("+"):
            parts.append(self.summand())
        if len(parts) == 1:
            return parts[0]
        for p in parts:
            if isinstance(p, Call):
                self.error(f"unguarded constant call {p.name} inside a choice")
        return Sum(tuple(parts))

    def summand(self):
        if self.accept("sum"):
            binders = []
            bound = {}
            while True:
                names = [self.name().value]
                while self.accept(","):
                    names.append(self.name().value)
                self.expect(":")
                lo = self.expr()
                self.expect("..")
                hi = self.expr()
                for n in names:
                    binders.append((n, lo, hi))
                    bound[n] = "int"
                if not self.accept(","):
                    break
            self.push(bound)
            cond = self.cond() if self.accept("where") else None
            self.expect(".")
            tok = self.tok
            body = self.summand()
            self.pop()
            if isinstance(body, Call):
                self.error("the body of an indexed sum must start with an action", tok)
            return IndexedSum(tuple(binders), cond, body)
        return self.prefix()

    def prefix(self):
        tok = self.tok
        if tok.kind == "int" and tok.value == "0":
            self.i += 1
            return NIL
        if self.accept("("):
            t = self.term()
            self.expect(")")
            return t
        if tok.kind != "name":
            self.error(f"expected a process term, found {tok.value or 'end of input'!r}")
        if tok.value in self.consts:
            self.i += 1
            args = []
            if self.accept("("):
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
            call = Call(tok.value, tuple(args))
            self.calls.append((call, tok))
            return call
        action, binds = self.action()
        self.expect(".")
        if binds:
            self.push(binds)
        cont = self.summand()
        if binds:
            self.pop()
        return Prefix(action, cont)

    def binder(self, sort: str, binds: dict):
        if self.accept("_"):
            return None
        tok = self.name()
        if tok.value in binds:
            self.error(f"variable {tok.value} bound twice", tok)
        binds[tok.value] = sort
        return tok.value

    def action(self):
        if self.accept("set"):
            self.expect("(")
            ptok = self.name()
            if ptok.value not in self.families:
                self.error(f"unknown proposition {ptok.value}", ptok)
            idx = self.indices()
            fam = self.props.family(ptok.value)
            if len(idx) != len(fam.ranges):
                self.error(f"proposition {ptok.value} takes {len(fam.ranges)} indices", ptok)
            self.expect(",")
            value = self.expr()
            self.expect(")")
            return Set(PropRef(ptok.value, idx), value), None
        ntok = self.name()
        name = Name(ntok.value, self.indices())
        if self.at("!") or self.at("?"):
            if ntok.value in _RESERVED_CHANNELS:
                self.error(f"reserved channel name {ntok.value}", ntok)
            if self.accept("!"):
                self.expect("(")
                dest = self.expr()
                self.expect(",")
                payload = self.formula(False)
                self.expect(")")
                return Output(name, dest, payload), None
            self.expect("?")
            self.expect("(")
            binds: dict[str, str] = {}
            y = self.binder("int", binds)
            self.expect(",")
            f = self.binder("formula", binds)
            self.expect(")")
            return Input(name, y, f), binds
        if ntok.value in _SECTIONS:
            self.error(f"unexpected keyword {ntok.value}", ntok)
        if self.at("("):
            self.error(f"unknown constant {ntok.value}", ntok)
        if not self.at("."):
            self.error(f"unknown constant {ntok.value}", ntok)
        return Internal(name), None

    # -- sections ---------------------------------------------------------------------------

    def end_decl(self, end: int | None = None):
        self.accept(".")
        if end is not None and self.i != end:
            self.error(f"unexpected {self.tok.value!r}")

    def prop_section(self) -> PropDecl:
        fams = []
        while True:
            tok = self.name()
            ranges = []
            while self.accept("["):
                lo = self.integer()
                self.expect("..")
                hi = self.integer()
                self.expect("]")
                if hi < lo:
                    self.error(f"empty index range {lo}..{hi}", tok)
                ranges.append((lo, hi))
            if tok.value in _FORMULA_KEYWORDS or tok.value in _SECTIONS:
                self.error(f"reserved name {tok.value} used as a proposition", tok)
            fams.append(PropFamily(tok.value, tuple(ranges)))
            if not self.accept(","):
                break
        self.end_decl()
        return PropDecl(tuple(fams))

    def params(self) -> tuple:
        out = []
        if self.accept("("):
            if not self.at(")"):
                out.append(self.name().value)
                while self.accept(","):
                    out.append(self.name().value)
            self.expect(")")
        if len(set(out)) != len(out):
            self.error("duplicate parameter")
        return tuple(out)

    def observes(self):
        if self.accept("all"):
            return "all"
        if self.accept("none"):
            return "none"
        self.expect("{")
        out = []
        while not self.at("}"):
            ptok = self.name()
            fam = self.props.family(ptok.value)
            if fam is None:
                self.error(f"unknown proposition {ptok.value}", ptok)
            pattern = []
            while self.accept("["):
                if self.accept("*"):
                    pattern.append(None)
                else:
                    pattern.append(self.integer())
                self.expect("]")
            if len(pattern) != len(fam.ranges):
                self.error(f"proposition {ptok.value} takes {len(fam.ranges)} indices", ptok)
            hits = [
                k for (name, idx), k in self.props.positions.items()
                if name == ptok.value and all(p is None or p == v for p, v in zip(pattern, idx))
            ]
            if not hits:
                self.error(f"unknown proposition {ptok.value}", ptok)
            out.extend(hits)
            if not self.accept(","):
                break
        self.expect("}")
        return tuple(sorted(set(out)))

    def prop_literal(self) -> int:
        ptok = self.name()
        idx = []
        while self.accept("["):
            idx.append(self.integer())
            self.expect("]")
        try:
            return self.props.index(ptok.value, tuple(idx))
        except SpecError as err:
            self.error(err.message, ptok)


def _prescan(p: _Parser):
    toks = p.toks
    for k, tok in enumerate(toks):
        prev = toks[k - 1] if k else None
        if tok.kind == "name" and k + 1 < len(toks) and toks[k + 1].kind == "name":
            if tok.value == "const":
                p.consts.add(toks[k + 1].value)
            elif tok.value == "formula":
                p.macro_names.add(toks[k + 1].value)
        if tok.value == "as" and prev is not None and prev.kind == "int":
            if k + 1 < len(toks) and toks[k + 1].kind == "name":
                p.aliases[toks[k + 1].value] = int(prev.value)


def parse_system(text: str, *, check_cap: bool = True) -> SystemSpec:
    """Parse and validate one specification file."""
    p = _Parser(text)
    _prescan(p)
    props = None
    consts: dict[str, ConstDef] = {}
    macros: dict[str, FormulaDef] = {}
    agents: list[AgentDecl] = []
    init: set[int] | None = None
    pending_consts = []
    pending_macros = []
    pending_agents = []
    pending_init = None

    # props come first so that names in every other section resolve
    while p.tok.kind != "eof":
        tok = p.tok
        if p.accept("props"):
            p.expect(":")
            if props is not None:
                p.error("duplicate props section", tok)
            props = p.prop_section()
        elif p.accept("const"):
            start = p.i
            _skip_decl(p)
            pending_consts.append((tok, start, p.i))
        elif p.accept("formula"):
            start = p.i
            _skip_decl(p)
            pending_macros.append((tok, start, p.i))
        elif p.accept("pool"):
            p.expect(":")
            while p.at("agent"):
                atok = p.tok
                p.i += 1
                start = p.i
                _skip_decl(p)
                pending_agents.append((atok, start, p.i))
        elif p.accept("init"):
            p.expect(":")
            start = p.i
            _skip_decl(p)
            pending_init = (tok, start, p.i)
        else:
            p.error(f"expected a section (props:, const, formula, pool:, init:), found {tok.value!r}")

    props = props or PropDecl(())
    p.props = props
    p.families = {f.name for f in props.families}
    if check_cap:
        try:
            _check_cap(len(props))
        except WorldCapError as err:
            raise SpecError(str(err), 1, 1) from None
    clash = p.families & (p.consts | p.macro_names)
    if clash:
        raise SpecError(f"name {sorted(clash)[0]} is both a proposition and a definition")

    for tok, start, end in pending_macros:
        p.i = start
        ntok = p.name()
        params = p.params()
        p.expect(":=")
        p.push({x: "int" for x in params})
        body = p.formula(False)
        p.pop()
        p.end_decl(end)
        if ntok.value in macros:
            p.error(f"duplicate formula {ntok.value}", ntok)
        macros[ntok.value] = FormulaDef(ntok.value, params, body)
    p.macros = macros

    for tok, start, end in pending_consts:
        p.i = start
        ntok = p.name()
        params = p.params()
        p.expect(":=")
        p.push({x: "int" for x in params})
        body = p.term()
        p.pop()
        p.end_decl(end)
        if ntok.value in consts:
            p.error(f"duplicate constant {ntok.value}", ntok)
        consts[ntok.value] = ConstDef(ntok.value, params, body)
        p.arity[ntok.value] = len(params)

    seen_ids = {}
    for atok, start, end in pending_agents:
        p.i = start
        ident = p.integer()
        if ident < 0:
            p.error("agent identities are non-negative integers", atok)
        alias = None
        if p.accept("as"):
            alias = p.name().value
        if ident in seen_ids:
            p.error(f"duplicate agent id {ident}", atok)
        seen_ids[ident] = alias
        p.expect(":")
        ctok = p.name()
        if ctok.value not in p.consts:
            p.error(f"unknown constant {ctok.value}", ctok)
        args = []
        if p.accept("("):
            if not p.at(")"):
                args.append(p.expr())
                while p.accept(","):
                    args.append(p.expr())
            p.expect(")")
        call = Call(ctok.value, tuple(args))
        p.calls.append((call, ctok))
        p.expect("observes")
        obs = p.observes()
        p.end_decl(end)
        agents.append(AgentDecl(ident, alias, call, obs))

    if pending_init is not None:
        tok, start, end = pending_init
        p.i = start
        p.expect("{")
        init = set()
        while not p.at("}"):
            init.add(p.prop_literal())
            if not p.accept(","):
                break
        p.expect("}")
        p.end_decl(end)

    for call, ctok in p.calls:
        if call.name not in consts:
            raise SpecError(f"unknown constant {call.name}", ctok.line, ctok.col)
        if len(call.args) != p.arity[call.name]:
            raise SpecError(
                f"constant {call.name} expects {p.arity[call.name]} arguments, got {len(call.args)}",
                ctok.line, ctok.col,
            )

    if not agents:
        raise SpecError("the pool declares no agents")
    _check_guarded(consts)
    spec = SystemSpec(props, consts, tuple(agents), frozenset(init or ()), macros)
    # macros with literal arguments must resolve; catches bad agent indices early
    ids = set(spec.agent_ids)
    for fdef in macros.values():
        if not fdef.params:
            _check_agents(resolve_formula(fdef.body, {}, props, macros), ids)
    for cdef in consts.values():
        _check_literal_agents(cdef.body, ids, cdef.name)
    warnings = tuple(_lint(spec))
    return SystemSpec(props, consts, tuple(agents), frozenset(init or ()), macros, warnings)


def _check_agents(f, ids):
    if isinstance(f, Know):
        if f.agent not in ids:
            raise SpecError(f"K[{f.agent}] names an undeclared agent")
        _check_agents(f.body, ids)
    elif isinstance(f, Not):
        _check_agents(f.body, ids)
    elif isinstance(f, And):
        _check_agents(f.left, ids)
        _check_agents(f.right, ids)


def _check_literal_agents(term, ids, where: str):
    """Reject ``K[n]`` with a literal ``n`` that is not a declared agent."""

    def formula(f):
        if isinstance(f, KnowT):
            if isinstance(f.agent, Lit) and f.agent.value not in ids:
                raise SpecError(f"{where}: K[{f.agent.value}] names an undeclared agent")
            formula(f.body)
        elif isinstance(f, Know):
            if f.agent not in ids:
                raise SpecError(f"{where}: K[{f.agent}] names an undeclared agent")
            formula(f.body)
        elif isinstance(f, Not):
            formula(f.body)
        elif isinstance(f, And):
            formula(f.left)
            formula(f.right)

    def walk(t):
        if isinstance(t, Sum):
            for part in t.parts:
                walk(part)
        elif isinstance(t, Prefix):
            if isinstance(t.action, Output):
                formula(t.action.formula)
            walk(t.cont)
        elif isinstance(t, IndexedSum):
            walk(t.body)

    walk(term)


def _skip_decl(p: _Parser):
    """Advance to the start of the next section keyword."""
    depth = 0
    while p.tok.kind != "eof":
        tok = p.tok
        if tok.value in ("(", "[", "{"):
            depth += 1
        elif tok.value in (")", "]", "}"):
            depth -= 1
        elif depth == 0 and tok.kind == "name" and tok.value in _SECTIONS:
            if tok.value in ("const", "formula", "agent"):
                return
            if p.peek().value == ":":
                return
        p.i += 1


def _check_guarded(consts: dict):
    """Reject cycles of constant bodies that are bare constant calls."""
    for start in consts:
        seen = [start]
        body = consts[start].body
        while isinstance(body, Call):
            if body.name in seen:
                chain = " -> ".join(seen + [body.name])
                raise SpecError(f"unguarded recursion: {chain}")
            seen.append(body.name)
            body = consts[body.name].body


def _lint(spec: SystemSpec):
    ids = set(spec.agent_ids)

    def walk(t):
        if isinstance(t, Sum):
            for q in t.parts:
                yield from walk(q)
        elif isinstance(t, IndexedSum):
            yield from walk(t.body)
        elif isinstance(t, Prefix):
            a = t.action
            if isinstance(a, Output) and isinstance(a.dest, Lit) and a.dest.value not in ids:
                yield f"output {a.channel.base}! targets undeclared agent {a.dest.value}; branch is dead"
            yield from walk(t.cont)

    for c in spec.consts.values():
        for w in walk(c.body):
            yield f"{c.name}: {w}"


def parse_formula(text: str, spec: SystemSpec | None = None, *, temporal: bool = True) -> Formula:
    """Parse a closed formula against the propositions and agents of ``spec``.

    With ``temporal`` set, ``<label>``, ``F`` and ``G`` are accepted.
    """
    props = spec.props if spec is not None else PropDecl(())
    macros = spec.formulas if spec is not None else {}
    aliases = {a.alias: a.ident for a in spec.agents if a.alias} if spec is not None else {}
    p = _Parser(text, props=props, macros=macros, aliases=aliases)
    raw = p.formula(temporal)
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.value!r} after formula")
    out = _close(raw, props, macros)
    if spec is not None:
        _check_agents_kt(out, set(spec.agent_ids))
    return out


def _check_agents_kt(f, ids):
    if isinstance(f, Know):
        _check_agents(f, ids)
    elif isinstance(f, And):
        _check_agents_kt(f.left, ids)
        _check_agents_kt(f.right, ids)
    elif hasattr(f, "body"):
        _check_agents_kt(f.body, ids)


def _close(t, props, macros):
    if isinstance(t, (Diamond, Eventually, Always)):
        body = _close(t.body, props, macros)
        if isinstance(t, Diamond):
            return Diamond(t.label, body)
        return type(t)(body)
    if isinstance(t, Not):
        return Not(_close(t.body, props, macros))
    if isinstance(t, And):
        return And(_close(t.left, props, macros), _close(t.right, props, macros))
    return resolve_formula(t, {}, props, macros)


def parse_term(text: str, spec: SystemSpec | None = None, params: tuple = ()):
    """Parse a single process term, e.g. for tests; constants come from ``spec``."""
    p = _Parser(text, props=spec.props if spec else None, macros=spec.formulas if spec else None)
    if spec is not None:
        p.consts = set(spec.consts)
        p.arity = {c.name: len(c.params) for c in spec.consts.values()}
        p.aliases = {a.alias: a.ident for a in spec.agents if a.alias}
    p.push({x: "int" for x in params})
    t = p.term()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.value!r} after term")
    return t
