"""Command-line front end: ``kepal validate|explore|check|bisim|cluedo-gen``.

Reports are ``key=value`` lines (``--format text``) or one JSON object
(``--format record``).  The ``elapsed`` field is the only non-deterministic
part of a report.

Exit codes: 0 success or verdict true, 1 usage or spec error, 2 verdict
false, 3 verdict computed on a truncated graph.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

from .checker import Checker, replay
from .cluedo import CluedoConfig, count_deal_branches, deal_count_closed_form, generate, parse_fix_deal
from .epistemic import WorldCapError
from .equivalence import bisimilar, disjoint_union
from .parser import parse_formula, parse_system
from .printer import show_formula
from .semantics import dump_graph, explore
from .syntax import SpecError

EXIT_OK, EXIT_ERROR, EXIT_FALSE, EXIT_TRUNCATED = 0, 1, 2, 3

log = logging.getLogger("kepal")


class Report:
    """Ordered report fields; ``elapsed`` is appended when emitted."""

    def __init__(self, command: str):
        self.fields: dict = {"command": command}
        self.started = time.perf_counter()

    def __setitem__(self, key, value):
        self.fields[key] = value

    def emit(self, fmt: str, stream=None) -> None:
        stream = stream or sys.stdout
        fields = dict(self.fields, elapsed=round(time.perf_counter() - self.started, 4))
        if fmt == "record":
            stream.write(json.dumps(fields, sort_keys=False) + "\n")
            return
        for key, value in fields.items():
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, (list, dict)):
                value = json.dumps(value)
            stream.write(f"{key}={value}\n")


def _load(path: str):
    text = Path(path).read_text()
    return parse_system(text), hashlib.sha256(text.encode()).hexdigest()


def _limits(args) -> dict:
    return {"max_states": args.max_states, "max_depth": args.max_depth}


def cmd_validate(args) -> int:
    rep = Report("validate")
    spec, digest = _load(args.spec)
    rep["spec"] = args.spec
    rep["digest"] = digest
    rep["props"] = len(spec.props)
    rep["agents"] = len(spec.agents)
    rep["constants"] = len(spec.consts)
    rep["warnings"] = list(spec.warnings)
    rep["valid"] = True
    rep.emit(args.format)
    return EXIT_OK


def cmd_explore(args) -> int:
    rep = Report("explore")
    spec, digest = _load(args.spec)
    g = explore(spec, **_limits(args))
    rep["spec"] = args.spec
    rep["digest"] = digest
    rep["states"] = len(g.states)
    rep["transitions"] = len(g.transitions)
    rep["truncated"] = g.truncated
    if args.out:
        lines = "\n".join(dump_graph(g, args.relations)) + "\n"
        if args.out == "-":
            sys.stdout.write(lines)
        else:
            Path(args.out).write_text(lines)
            rep["dump"] = args.out
    rep.emit(args.format)
    if g.truncated:
        print("warning: exploration hit a limit; the graph is partial", file=sys.stderr)
    return EXIT_OK


def _trace_text(steps) -> str:
    return " ".join(f"{s}" if label is None else f"{s} -{label}->" for s, label in steps)


def cmd_check(args) -> int:
    rep = Report("check")
    spec, digest = _load(args.spec)
    f = parse_formula(args.formula, spec)
    g = explore(spec, **_limits(args))
    checker = Checker(g)
    w = checker.witness(g.root, f)
    rep["spec"] = args.spec
    rep["digest"] = digest
    rep["formula"] = show_formula(f, spec.props.names)
    rep["states"] = len(g.states)
    rep["transitions"] = len(g.transitions)
    rep["truncated"] = g.truncated
    rep["sat_states"] = int(checker.sat(f).sum())
    rep["verdict"] = w.verdict
    if args.format == "record":
        rep["witness"] = w.as_record()
    else:
        rep["witness"] = w.kind
        if w.trace:
            rep["trace"] = _trace_text(w.trace)
        if w.cycle:
            rep["cycle"] = _trace_text(w.cycle)
        if w.message:
            rep["message"] = w.message
    rep["replayed"] = replay(checker, g.root, f, w)
    rep.emit(args.format)
    if g.truncated:
        return EXIT_TRUNCATED
    return EXIT_OK if w.verdict else EXIT_FALSE


def cmd_bisim(args) -> int:
    rep = Report("bisim")
    spec_a, digest_a = _load(args.spec)
    g = explore(spec_a, **_limits(args))
    rep["spec"] = args.spec
    rep["digest"] = digest_a
    if args.other:
        spec_b, digest_b = _load(args.other)
        g, s, t = disjoint_union(g, explore(spec_b, **_limits(args)))
        rep["other"] = args.other
        rep["other_digest"] = digest_b
    elif args.states:
        s, t = args.states
    else:
        raise SpecError("bisim needs a second spec or --states S T")
    res = bisimilar(g, s, t)
    rep["states"] = [s, t]
    rep["truncated"] = g.truncated
    for key, value in res.as_record().items():
        rep[key] = "" if value is None else value
    rep.emit(args.format)
    if g.truncated:
        return EXIT_TRUNCATED
    return EXIT_OK if res.bisimilar else EXIT_FALSE


def cmd_cluedo_gen(args) -> int:
    rep = Report("cluedo-gen")
    cfg = CluedoConfig(args.cards, args.players, args.hand, args.secret)
    fix = parse_fix_deal(args.fix_deal) if args.fix_deal else None
    text = generate(cfg, fix_deal=fix, announce_rules=not args.no_rules)
    spec = parse_system(text, check_cap=False)
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
        rep["out"] = args.out
    else:
        sys.stdout.write(text)
    rep["config"] = [cfg.cards, cfg.players, cfg.hand, cfg.secret]
    rep["props"] = cfg.nprops
    rep["digest"] = hashlib.sha256(text.encode()).hexdigest()
    rep["deal_branches"] = count_deal_branches(spec)
    rep["closed_form"] = deal_count_closed_form(cfg) if fix is None else 1
    rep.emit(args.format, sys.stderr if not args.out or args.out == "-" else None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kepal", description=__doc__.splitlines()[0])
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, limits=True):
        p.add_argument("--format", choices=("text", "record"), default="text")
        if limits:
            p.add_argument("--max-states", type=int, default=None)
            p.add_argument("--max-depth", type=int, default=None)

    p = sub.add_parser("validate", help="parse and statically check a spec")
    p.add_argument("spec")
    common(p, limits=False)
    p.set_defaults(run=cmd_validate)

    p = sub.add_parser("explore", help="generate the reachable KLTS")
    p.add_argument("spec")
    p.add_argument("--out", help="write the graph dump here ('-' for stdout)")
    p.add_argument("--relations", choices=("auto", "inline", "table"), default="auto")
    common(p)
    p.set_defaults(run=cmd_explore)

    p = sub.add_parser("check", help="model-check a KT formula at the root")
    p.add_argument("spec")
    p.add_argument("formula")
    common(p)
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("bisim", help="decide bisimilarity of two roots or two states")
    p.add_argument("spec")
    p.add_argument("other", nargs="?")
    p.add_argument("--states", type=int, nargs=2, metavar=("S", "T"))
    common(p)
    p.set_defaults(run=cmd_bisim)

    p = sub.add_parser("cluedo-gen", help="emit a Cluedo spec")
    p.add_argument("cards", type=int)
    p.add_argument("players", type=int)
    p.add_argument("hand", type=int)
    p.add_argument("secret", type=int)
    p.add_argument("--fix-deal", help="secret/hand0/hand1/..., e.g. 1,2/3/4")
    p.add_argument("--no-rules", action="store_true", help="omit the rules announcement")
    p.add_argument("--out")
    common(p, limits=False)
    p.set_defaults(run=cmd_cluedo_gen)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.run(args)
    except (SpecError, WorldCapError, OSError, IndexError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
