"""Acceptance criteria, one test each; every test prints a single verdict line."""
import random
import time
from pathlib import Path

import pytest

from acceptance_log import record
from kepal.checker import Checker, replay
from kepal.cli import main
from kepal.cluedo import CluedoConfig, count_deal_branches, generate
from kepal.epistemic import KripkeModel, Partition, holds_direct, merge_on_prop, pairs_from_partition, sat_set
from kepal.equivalence import bisimilar, modal_equiv
from kepal.formulas import And, Know, Not, Prop
from kepal.parser import parse_formula, parse_system
from kepal.semantics import explore

from oracles import (
    PairEngine,
    flip_pairs,
    full_closure,
    is_equivalence,
    pairs_of,
    perturb,
    random_epistemic,
    random_klts,
    random_partition,
    random_spec_text,
    single_step_closure,
    union_klts,
)

SPECS = Path(__file__).resolve().parent.parent / "specs"
P = Prop(0)


def _verdict(number, ok, detail):
    record(number, ok, detail)
    assert ok, detail


def test_criterion_01_deal_count():
    t = time.perf_counter()
    spec = parse_system(generate(CluedoConfig(8, 3, 2, 2)), check_cap=False)
    count = count_deal_branches(spec)
    dt = time.perf_counter() - t
    _verdict(1, count == 2520 and dt < 1.0, f"deal branches {count} (want 2520) in {dt:.2f}s (limit 1s)")


@pytest.fixture(scope="module")
def reduced_cluedo():
    spec = parse_system((SPECS / "cluedo_4_2_1_2.kpa").read_text())
    t = time.perf_counter()
    g = explore(spec)
    return spec, g, Checker(g), time.perf_counter() - t


def test_criterion_02_reduced_cluedo_reachability(reduced_cluedo):
    spec, g, checker, dt = reduced_cluedo
    f = parse_formula("F (phi_0 | phi_1)", spec)
    verdict = checker.check(g.root, f)
    w = checker.witness(g.root, f)
    ok = verdict and not g.truncated and len(g.states) < 10**6 and dt < 60 and replay(checker, g.root, f, w)
    _verdict(2, ok, f"F(phi_0 | phi_1)={verdict}, {len(g.states)} states, explored in {dt:.2f}s, "
                    f"witness path of {len(w.trace) - 1} steps")


def test_criterion_03_reduced_cluedo_unreachability(reduced_cluedo):
    spec, g, checker, _ = reduced_cluedo
    f = parse_formula("G (!phi_0 & !phi_1)", spec)
    verdict = checker.check(g.root, f)
    w = checker.witness(g.root, f)
    ok = verdict and w.kind == "lasso" and replay(checker, g.root, f, w)
    _verdict(3, ok, f"G(!phi_0 & !phi_1)={verdict}, {w.kind} witness: stem {len(w.trace)}, "
                    f"cycle {len(w.cycle)}, replayed={replay(checker, g.root, f, w)}")


def test_criterion_04_relations_stay_equivalences():
    rng = random.Random(1)
    t = time.perf_counter()
    mismatches = bad_relations = states_seen = 0
    for _ in range(200):
        spec = parse_system(random_spec_text(rng))
        nworlds = 1 << len(spec.props)
        g = explore(spec, max_states=200)
        ref_states, ref_trans = PairEngine(spec).explore(max_states=200)
        states_seen += len(g.states)
        for st in g.states:
            bad_relations += sum(not is_equivalence(pairs_from_partition(r), nworlds) for r in st.relations)
        same = len(ref_states) == len(g.states) and ref_trans == g.transitions and all(
            world == st.world and [pairs_from_partition(r) for r in st.relations] == list(rels)
            for (_, rels, world), st in zip(ref_states, g.states)
        )
        mismatches += not same
    dt = time.perf_counter() - t
    ok = mismatches == 0 and bad_relations == 0 and dt < 120
    _verdict(4, ok, f"200 specs, {states_seen} states: {mismatches} engine mismatches, "
                    f"{bad_relations} non-equivalence relations, {dt:.1f}s (limit 120s)")


def test_criterion_05_bisimilarity_vs_modal_equivalence():
    rng = random.Random(5)
    t = time.perf_counter()
    disagreements = escalated = 0
    for _ in range(200):
        nprops = rng.randint(1, 3)
        agents = list(range(rng.randint(1, 2)))
        labels = rng.sample(["tau", "0.a", "1.b"], rng.randint(1, 3))
        v, r, tr = random_klts(rng, nprops, agents, rng.randint(2, 14), labels)
        tr2, v2, r2, _ = perturb(rng, nprops, agents, v, r, tr, labels)
        g, (o1, o2) = union_klts(nprops, agents, [(v, r, tr), (v2, r2, tr2)])
        b = bisimilar(g, o1, o2).bisimilar
        m = modal_equiv(g, o1, o2, 4, 2).equivalent
        if b and not m:
            disagreements += 1
        elif not b and m:
            escalated += 1
            disagreements += modal_equiv(g, o1, o2, 6, 6).equivalent
    dt = time.perf_counter() - t
    ok = disagreements == 0 and dt < 300
    _verdict(5, ok, f"200 pairs: {disagreements} disagreements, {escalated} escalated to depth 6, "
                    f"{dt:.1f}s (limit 300s)")


def test_criterion_06_sat_set_vs_direct_evaluation():
    rng = random.Random(6)
    t = time.perf_counter()
    wrong = checked = 0
    for _ in range(100):
        nprops = rng.randint(1, 4)
        agents = list(range(rng.randint(1, 3)))
        model = KripkeModel(nprops, {i: random_partition(rng, nprops) for i in agents})
        for _ in range(50):
            psi = random_epistemic(rng, nprops, agents, 4)
            got = sat_set(model, psi)
            for x in range(1 << nprops):
                checked += 1
                wrong += bool(got[x]) != holds_direct(model, x, psi)
    dt = time.perf_counter() - t
    _verdict(6, wrong == 0 and dt < 60, f"{checked} world evaluations, {wrong} differences, {dt:.1f}s (limit 60s)")


def test_criterion_07_closure_discrepancy():
    # p is bit 0, q is bit 1: blocks {{},{q}} {{p}} {{p,q}}
    rel = Partition([0, 1, 0, 2])
    merged = merge_on_prop(rel, 0)
    seed = pairs_of(rel) | flip_pairs(4, 0)
    literal = single_step_closure(seed)
    ok = (
        merged.nblocks == 1
        and pairs_of(merged) == full_closure(seed, 4)
        and literal != full_closure(seed, 4)
        and not is_equivalence(literal, 4)
    )
    _verdict(7, ok, f"merge gives {merged.nblocks} block of {merged.nworlds} worlds; single-step closure has "
                    f"{len(literal)} of 16 pairs (transitive={is_equivalence(literal, 4)})")


def test_criterion_08_unsuccessful_formula():
    spec = parse_system((SPECS / "unsuccessful.kpa").read_text())
    g = explore(spec)
    c = Checker(g)
    psi = And(P, Not(Know(1, P)))
    premise = c.check(0, Know(0, psi)) and c.check(0, psi)
    (_, _, post), = g.transitions
    knows = c.check(post, Know(1, P))
    knows_psi = c.check(post, Know(1, psi))
    ok = premise and knows and not knows_psi
    _verdict(8, ok, f"premise={premise}, post K[1]p={knows}, post K[1](p & !K[1]p)={knows_psi}")


def test_criterion_09_knowledge_update():
    spec = parse_system((SPECS / "forgetting.kpa").read_text())
    g = explore(spec)
    c = Checker(g)
    (_, _, post), = g.transitions
    setter = c.check(post, Know(0, P))
    prior = {i: c.check(0, Know(i, Not(P))) for i in (1, 2)}
    after = {i: (c.check(post, Know(i, P)), c.check(post, Know(i, Not(P)))) for i in (1, 2)}
    ok = setter and all(prior.values()) and all(v == (False, False) for v in after.values())
    _verdict(9, ok, f"K[0]p={setter}; before: " + ", ".join(f"K[{i}]!p={prior[i]}" for i in prior)
                    + "; after: " + ", ".join(f"K[{i}]p={a}, K[{i}]!p={b}" for i, (a, b) in after.items()))


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    text = "".join(line for line in out.out.splitlines(True) if not line.startswith("elapsed="))
    if text.startswith("{"):
        text = text.replace(text[text.index('"elapsed"'):text.rindex("}")], '"elapsed": 0')
    return code, text.encode(), out.err.encode()


def test_criterion_10_determinism(capsys):
    runs = 0
    same = True
    for path in sorted(SPECS.glob("cluedo_*.kpa")):
        spec = parse_system(path.read_text(), check_cap=False)
        if len(spec.props) > 20:
            argvs = [["validate", str(path), "--format", "record"]]
        else:
            players = len(spec.agents) - 1
            goal = "F (" + " | ".join(f"phi_{j}" for j in range(players)) + ")"
            argvs = [["explore", str(path), "--out", "-"], ["check", str(path), goal, "--format", "record"]]
        for argv in argvs:
            first, second = _run(capsys, argv), _run(capsys, argv)
            same &= first == second
            runs += 2
    _verdict(10, same, f"{runs} CLI runs over the Cluedo corpus, repeated outputs byte-identical={same}")
