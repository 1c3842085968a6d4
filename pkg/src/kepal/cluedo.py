"""Generator of parameterized Cluedo pool specifications.

The game: ``n`` cards, ``m`` players holding ``c`` cards each, ``k`` secret
cards kept by the dealer (``k + m*c = n``).  Propositions ``p[i][j]`` (player
``j`` holds card ``i``) and ``q[i]`` (card ``i`` is secret).  Players are
agents ``0..m-1``; the dealer is agent ``m``.

By default the dealer announces the game rules (every card lies in exactly
one place, hands and the secret have their fixed sizes) to each player once
dealing is over.  Without that announcement no communication ever carries
information about the ``q`` propositions, so no player can come to know the
secret; ``announce_rules=False`` emits that literal model.

Players ask opponents in the order ``(x+1) mod m, ..., (x+m-1) mod m``.  A
player answering an asker ``z`` first tells every silent player whether it
holds one of the asked cards (``3-x-z`` for three players).
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb, prod

from .syntax import Call, IndexedSum, Prefix, SpecError, Sum, SystemSpec, eval_expr, index_tuples

__all__ = ["CluedoConfig", "generate", "count_deal_branches", "deal_count_closed_form", "win_formula", "parse_fix_deal", "rules_formula"]


@dataclass(frozen=True)
class CluedoConfig:
    cards: int
    players: int
    hand: int
    secret: int

    def __post_init__(self):
        if min(self.cards, self.players, self.hand, self.secret) <= 0:
            raise SpecError("all Cluedo parameters must be positive")
        if self.players < 2:
            raise SpecError("Cluedo needs at least two players")
        if self.secret + self.players * self.hand != self.cards:
            raise SpecError(
                f"{self.secret} secret + {self.players}*{self.hand} dealt cards != {self.cards} cards"
            )

    @property
    def nprops(self) -> int:
        return self.players * self.cards + self.cards

    @property
    def dealer(self) -> int:
        return self.players


def _vars(prefix: str, count: int, start: int = 1) -> list[str]:
    return [f"{prefix}{start + t}" for t in range(count)]


def _increasing(names) -> list[str]:
    return [f"{a} < {b}" for a, b in zip(names, names[1:])]


def _conj(items) -> str:
    items = list(items)
    if not items:
        return "true"
    return " & ".join(items)


def _disj(items) -> str:
    items = list(items)
    if not items:
        return "false"
    return " | ".join(items)


def _exactly_one(lits) -> str:
    parts = ["(" + _disj(lits) + ")"]
    parts += [f"!({a} & {b})" for a, b in combinations(lits, 2)]
    return _conj(parts)


def _at_most(lits, bound) -> list[str]:
    return ["!(" + " & ".join(group) + ")" for group in combinations(lits, bound + 1)]


def rules_formula(cfg: CluedoConfig) -> str:
    n, m = cfg.cards, cfg.players
    parts = []
    for i in range(1, n + 1):
        parts.append(_exactly_one([f"p[{i}][{j}]" for j in range(m)] + [f"q[{i}]"]))
    for j in range(m):
        parts += _at_most([f"p[{i}][{j}]" for i in range(1, n + 1)], cfg.hand)
    parts += _at_most([f"q[{i}]" for i in range(1, n + 1)], cfg.secret)
    return _conj(parts)


def win_formula(cfg: CluedoConfig, agent: str) -> str:
    """``phi_x``: the agent knows which cards are secret."""
    groups = combinations(range(1, cfg.cards + 1), cfg.secret)
    return _disj(f"K[{agent}](" + " & ".join(f"q[{i}]" for i in g) + ")" for g in groups)


def _pin(names, values) -> list[str]:
    return [f"{v} = {val}" for v, val in zip(names, values)]


def _dealer(cfg: CluedoConfig, fix_deal, announce_rules: bool) -> list[str]:
    n, m, c, k = cfg.cards, cfg.players, cfg.hand, cfg.secret
    secret_vars = _vars("k", k)
    secret_fix = fix_deal[0] if fix_deal else None
    conds = _increasing(secret_vars) + (_pin(secret_vars, secret_fix) if fix_deal else [])
    where = f" where {_conj(conds)}" if conds else ""
    sets = "".join(f"set(q[{v}], 1)." for v in secret_vars)
    lines = [
        f"const Dealer :=\n    sum {', '.join(secret_vars)} : 1..{n}{where} .\n"
        f"    {sets}Deal({', '.join(secret_vars)})."
    ]
    params = _vars("x", k)
    taken = list(params)
    body = []
    for j in range(m):
        hand = _vars("i", c, start=1 + j * c)
        conds = _increasing(hand) + [f"{h} notin {{{', '.join(taken)}}}" for h in hand]
        if fix_deal:
            conds += _pin(hand, fix_deal[1][j])
        sets = "".join(f"set(p[{h}][{j}], 1)." for h in hand)
        told = " & ".join(f"p[{h}][{j}]" for h in hand)
        body.append(f"sum {', '.join(hand)} : 1..{n} where {_conj(conds)} .\n"
                    f"      {sets}deal!({j}, {told}).")
        taken += hand
    tail = "".join(f"rules!({j}, rules)." for j in range(m)) if announce_rules else ""
    lines.append(
        f"const Deal({', '.join(params)}) :=\n    " + "\n    ".join(body) + f"\n    {tail}Play(0)."
    )
    lines.append(
        f"const Play(x) :=\n    start_turn!(x, true).(end_turn?(_, _).Play((x + 1) mod {m}) + win?(_, _).0)."
    )
    return lines


def _silent_shows(cfg: CluedoConfig, payload: str, then: str) -> str:
    """Outputs of ``payload`` to every player other than ``x`` and ``z``, then ``then``."""
    m = cfg.players
    if m == 2:
        return then
    if m == 3:
        return f"show!(3 - x - z, {payload}).{then}"
    branches = []
    for xx in range(m):
        for zz in range(m):
            if xx == zz:
                continue
            chain = "".join(f"show!({w}, {payload})." for w in range(m) if w not in (xx, zz))
            branches.append(f"sum u : 0..0 where x = {xx} & z = {zz} . {chain}{then}")
    return "(" + " + ".join(branches) + ")"


def _player(cfg: CluedoConfig, announce_rules: bool) -> list[str]:
    n, m = cfg.cards, cfg.players
    rules_in = "rules?(_, _)." if announce_rules else ""
    asked = "".join(
        f"ask[i1][i2]!((x + {d}) mod {m}, true).show?(_, _)." for d in range(1, m)
    )
    has = "p[i1][x] | p[i2][x]"
    hasnt = "!p[i1][x] & !p[i2][x]"
    reveal = "(show!(z, p[i1][x]).Idle(x, y) + show!(z, p[i2][x]).Idle(x, y))"
    answer = (
        "(" + _silent_shows(cfg, has, reveal) + "\n       + "
        + _silent_shows(cfg, hasnt, f"show!(z, {hasnt}).Idle(x, y)") + ")"
    )
    return [
        f"const Player(x) := deal?(y, _).{rules_in}Idle(x, y).",
        "const Idle(x, y) :=\n"
        f"    start_turn?(_, _).\n"
        f"      sum i1, i2 : 1..{n} where i1 < i2 .\n"
        f"      {asked}\n"
        f"      (end_turn!(y, !phi(x)).Idle(x, y) + win!(y, phi(x)).0)\n"
        f"  + sum i1, i2 : 1..{n} where i1 < i2 .\n"
        f"      ask[i1][i2]?(z, _).\n      {answer}\n"
        f"  + show?(_, _).Idle(x, y).",
    ]


def generate(cfg: CluedoConfig, fix_deal=None, announce_rules: bool = True) -> str:
    """Emit the ``.kpa`` text of the game.

    ``fix_deal`` pins the dealer's choices: ``(secret_cards, (hand_0, ..., hand_{m-1}))``.
    """
    n, m = cfg.cards, cfg.players
    if fix_deal is not None:
        fix_deal = _check_fix(cfg, fix_deal)
    lines = [
        f"# Cluedo: {n} cards, {m} players with {cfg.hand} cards each, {cfg.secret} secret cards",
        f"props: p[1..{n}][0..{m - 1}], q[1..{n}].",
        f"formula phi(x) := {win_formula(cfg, 'x')}.",
    ]
    lines += [f"formula phi_{j} := phi({j})." for j in range(m)]
    if announce_rules:
        lines.append(f"formula rules := {rules_formula(cfg)}.")
    lines += _dealer(cfg, fix_deal, announce_rules)
    lines += _player(cfg, announce_rules)
    lines.append("pool:")
    lines.append(f"  agent {cfg.dealer} as dealer : Dealer observes all.")
    for j in range(m):
        lines.append(f"  agent {j} : Player({j}) observes {{p[*][{j}]}}.")
    lines.append("init: {}.")
    return "\n".join(lines) + "\n"


def _check_fix(cfg: CluedoConfig, fix_deal):
    secret, hands = fix_deal
    secret = tuple(sorted(secret))
    hands = tuple(tuple(sorted(h)) for h in hands)
    cards = list(secret) + [c for h in hands for c in h]
    if (
        len(secret) != cfg.secret
        or len(hands) != cfg.players
        or any(len(h) != cfg.hand for h in hands)
        or sorted(cards) != list(range(1, cfg.cards + 1))
    ):
        raise SpecError("fixed deal must place every card exactly once with the configured sizes")
    return secret, hands


def parse_fix_deal(text: str):
    """``"1,2/3,4/5,6"``: secret cards, then one hand per player."""
    groups = [tuple(int(v) for v in g.split(",") if v.strip()) for g in text.split("/")]
    return groups[0], tuple(groups[1:])


def count_deal_branches(spec: SystemSpec, start: str = "Dealer", stop: str = "Play") -> int:
    """Count paths from ``start`` to the first call of ``stop`` by syntactic expansion.

    Index variables are carried in an environment rather than substituted,
    so the count never materializes the expanded terms.
    """

    def count(term, env) -> int:
        if isinstance(term, Call):
            if term.name == stop:
                return 1
            cdef = spec.const(term.name)
            values = [eval_expr(a, env) for a in term.args]
            return count(cdef.body, dict(zip(cdef.params, values)))
        if isinstance(term, Prefix):
            return count(term.cont, env)
        if isinstance(term, Sum):
            return sum(count(p, env) for p in term.parts)
        if isinstance(term, IndexedSum):
            return sum(count(term.body, inner) for inner in index_tuples(term.binders, term.cond, env))
        raise TypeError(f"not a process term: {term!r}")

    return count(spec.const(start).body, {})


def deal_count_closed_form(cfg: CluedoConfig) -> int:
    remaining = cfg.cards - cfg.secret
    factors = [comb(cfg.cards, cfg.secret)]
    for _ in range(cfg.players):
        factors.append(comb(remaining, cfg.hand))
        remaining -= cfg.hand
    return prod(factors)
