"""Concrete-syntax printing of expressions, formulas, terms and whole specs.

Output re-parses to the same tree, so ``parse(show(parse(text)))`` is a
fixed point.
"""
from __future__ import annotations

from .formulas import Always, And, Diamond, Eventually, Know, Not, Prop, Top
from .syntax import (
    BoolOp,
    Call,
    Cmp,
    FormulaVar,
    IndexedSum,
    Input,
    Internal,
    KnowT,
    Lit,
    MacroCall,
    Member,
    Output,
    Prefix,
    PropRef,
    Set,
    Sum,
    SystemSpec,
    Var,
)

__all__ = ["show_expr", "show_formula", "show_term", "show_action", "show_spec"]

_PREC = {"+": 1, "-": 1, "*": 2, "mod": 2}


def show_expr(e, prec: int = 0) -> str:
    if isinstance(e, Lit):
        return str(e.value) if e.value >= 0 else f"({e.value})"
    if isinstance(e, Var):
        return e.name
    p = _PREC[e.op]
    op = f" {e.op} " if e.op == "mod" else e.op
    # left-associative: the right operand needs parentheses at equal precedence
    text = show_expr(e.left, p) + op + show_expr(e.right, p + 1)
    return f"({text})" if p < prec else text


def _idx(indices) -> str:
    return "".join(f"[{show_expr(i)}]" for i in indices)


def show_formula(f, names=None, prec: int = 0) -> str:
    """Print a formula or formula template; ``names`` maps flat prop indices."""
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Prop):
        return names[f.index] if names is not None else f"#{f.index}"
    if isinstance(f, PropRef):
        return f.name + _idx(f.indices)
    if isinstance(f, FormulaVar):
        return f.name
    if isinstance(f, MacroCall):
        if not f.args:
            return f.name
        return f"{f.name}(" + ", ".join(show_expr(a) for a in f.args) + ")"
    if isinstance(f, Not):
        if isinstance(f.body, Top):
            return "false"
        inner = f.body
        if isinstance(inner, And) and isinstance(inner.left, Not) and isinstance(inner.right, Not):
            # the parser's desugaring of a | b
            text = show_formula(inner.left.body, names, 1) + " | " + show_formula(inner.right.body, names, 2)
            return f"({text})" if prec > 1 else text
        return "!" + show_formula(f.body, names, 3)
    if isinstance(f, And):
        text = show_formula(f.left, names, 2) + " & " + show_formula(f.right, names, 3)
        return f"({text})" if prec > 2 else text
    if isinstance(f, Know):
        return f"K[{f.agent}]" + show_formula(f.body, names, 3)
    if isinstance(f, KnowT):
        return f"K[{show_expr(f.agent)}]" + show_formula(f.body, names, 3)
    if isinstance(f, Diamond):
        return f"<{f.label}>" + show_formula(f.body, names, 3)
    if isinstance(f, Eventually):
        return "F " + show_formula(f.body, names, 3)
    if isinstance(f, Always):
        return "G " + show_formula(f.body, names, 3)
    raise TypeError(f"not a formula: {f!r}")


def _name(n) -> str:
    return n.base + _idx(n.indices)


def show_action(a, names=None) -> str:
    if isinstance(a, Internal):
        return _name(a.name)
    if isinstance(a, Input):
        return f"{_name(a.channel)}?({a.agent_var or '_'}, {a.formula_var or '_'})"
    if isinstance(a, Output):
        return f"{_name(a.channel)}!({show_expr(a.dest)}, {show_formula(a.formula, names)})"
    if isinstance(a, Set):
        return f"set({show_formula(a.prop, names)}, {show_expr(a.value)})"
    raise TypeError(f"not an action: {a!r}")


def _show_cond(c, prec: int = 0) -> str:
    if isinstance(c, Cmp):
        return f"{show_expr(c.left)} {c.op} {show_expr(c.right)}"
    if isinstance(c, Member):
        kw = "notin" if c.negated else "in"
        return f"{show_expr(c.item)} {kw} {{" + ", ".join(show_expr(e) for e in c.items) + "}"
    if isinstance(c, BoolOp):
        p = 1 if c.op == "|" else 2
        text = f"{_show_cond(c.left, p)} {c.op} {_show_cond(c.right, p + 1)}"
        return f"({text})" if p < prec else text
    return "!" + _show_cond(c.body, 3)


def show_term(t, names=None, prec: int = 0) -> str:
    """Precedence levels: 0 choice, 1 summand, 2 continuation."""
    if isinstance(t, Sum):
        if not t.parts:
            return "0"
        text = " + ".join(show_term(p, names, 1) for p in t.parts)
        return f"({text})" if prec > 0 and len(t.parts) > 1 else text
    if isinstance(t, Prefix):
        return show_action(t.action, names) + "." + show_term(t.cont, names, 2)
    if isinstance(t, IndexedSum):
        groups = []
        for var, lo, hi in t.binders:
            groups.append(f"{var} : {show_expr(lo)}..{show_expr(hi)}")
        head = "sum " + ", ".join(groups)
        if t.cond is not None:
            head += " where " + _show_cond(t.cond)
        return head + " . " + show_term(t.body, names, 2)
    if isinstance(t, Call):
        if not t.args:
            return t.name
        return f"{t.name}(" + ", ".join(show_expr(a) for a in t.args) + ")"
    raise TypeError(f"not a process term: {t!r}")


def _show_observes(obs, names) -> str:
    if obs in ("all", "none"):
        return obs
    return "{" + ", ".join(names[k] for k in obs) + "}"


def show_spec(spec: SystemSpec) -> str:
    names = spec.props.names
    lines = []
    if spec.props.families:
        fams = []
        for fam in spec.props.families:
            fams.append(fam.name + "".join(f"[{lo}..{hi}]" for lo, hi in fam.ranges))
        lines.append("props: " + ", ".join(fams) + ".")
    for fdef in spec.formulas.values():
        params = f"({', '.join(fdef.params)})" if fdef.params else ""
        lines.append(f"formula {fdef.name}{params} := {show_formula(fdef.body, names)}.")
    for cdef in spec.consts.values():
        params = f"({', '.join(cdef.params)})" if cdef.params else ""
        lines.append(f"const {cdef.name}{params} :=\n    {show_term(cdef.body, names)}.")
    lines.append("pool:")
    for a in spec.agents:
        alias = f" as {a.alias}" if a.alias else ""
        lines.append(
            f"  agent {a.ident}{alias} : {show_term(a.init, names)} observes {_show_observes(a.observes, names)}."
        )
    lines.append("init: {" + ", ".join(names[k] for k in sorted(spec.init)) + "}.")
    return "\n".join(lines) + "\n"
