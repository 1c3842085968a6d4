import random
from pathlib import Path

import pytest

from kepal.epistemic import Partition, pairs_from_partition
from kepal.formulas import And, Know, Not, Prop
from kepal.parser import parse_system, parse_term
from kepal.printer import show_term
from kepal.semantics import (
    TAU,
    Engine,
    agent_steps,
    apply_com,
    apply_set,
    canonical_key,
    dump_graph,
    explore,
    initial_state,
    pool_steps,
    project_lts,
)
from kepal.syntax import Input, Internal, Set

from oracles import PairEngine, is_equivalence, random_spec_text, single_step_closure

SPECS = Path(__file__).resolve().parent.parent / "specs"
P, Q = Prop(0), Prop(1)


def _spec(name):
    return parse_system((SPECS / name).read_text())


def test_agent_steps_of_choice():
    spec = parse_system("props: p. const C := a.C + set(p, 1).0. pool: agent 0 : C observes all. init: {}.")
    steps = agent_steps(spec.const("C").body, spec.consts)
    assert [type(a) for a, _ in steps] == [Internal, Set]
    assert show_term(steps[0][1]) == "C"


def test_agent_steps_unfold_and_keep_inputs_symbolic():
    spec = _spec("forward.kpa")
    steps = agent_steps(parse_term("Fwd(2)", spec), spec.consts)
    (action, cont), = steps
    assert isinstance(action, Input) and action.agent_var == "y"
    assert show_term(cont) == "send!((2+1) mod 3, f).Fwd(2)"


def test_agent_steps_expand_indexed_sum():
    steps = agent_steps(parse_term("sum i : 1..3 where i != 2 . b[i].0"), {})
    assert len(steps) == 2


def test_deadlock_has_no_steps():
    spec = parse_system("props: p. const C := 0. pool: agent 0 : C observes all. init: {}.")
    g = explore(spec)
    assert (len(g.states), g.transitions) == (1, [])


def test_initial_relations():
    spec = _spec("forgetting.kpa")
    st = initial_state(spec)
    assert st.relation(0) == Partition.total(2)
    assert st.relation(1) == Partition.identity(2)
    assert st.relation(2) == Partition.observing(2, [0])
    assert st.world == 0b10


def test_set_updates_knowledge():
    spec = _spec("forgetting.kpa")
    eng = Engine(spec)
    st = initial_state(spec, eng)
    post = apply_set(eng, st, 0, 0, True)
    assert post.world == 0b11
    assert eng.holds(Know(0, P), post)
    for i in (1, 2):
        assert eng.holds(Know(i, Not(P)), st)
        assert not eng.holds(Know(i, P), post) and not eng.holds(Know(i, Not(P)), post)
    # agent 1 still knows q; only p was forgotten
    assert eng.holds(Know(1, Q), post)


def test_set_is_private_even_when_value_unchanged():
    spec = _spec("forgetting.kpa")
    eng = Engine(spec)
    st = initial_state(spec, eng)
    post = apply_set(eng, st, 0, 0, False)
    assert post.world == st.world
    assert not eng.holds(Know(1, Not(P)), post)


def test_com_only_informs_receiver():
    spec = _spec("unsuccessful.kpa")
    eng = Engine(spec)
    st = initial_state(spec, eng)
    psi = And(P, Not(Know(1, P)))
    post = apply_com(eng, st, 0, 1, psi)
    assert eng.holds(Know(1, P), post)
    assert not eng.holds(Know(1, psi), post)
    assert post.relation(0) == st.relation(0)
    assert post.world == st.world


def test_com_premise_enforced():
    spec = _spec("unsuccessful.kpa")
    eng = Engine(spec)
    st = initial_state(spec, eng)
    with pytest.raises(AssertionError, match="premise"):
        apply_com(eng, st, 1, 0, P)


def test_pool_steps_rule_order_and_labels():
    spec = parse_system(
        "props: p. const A := go.0 + set(p, 1).0 + m!(1, true).0. const B := m?(x, f).0 + stop.0. "
        "pool: agent 0 : A observes all. agent 1 : B observes none. init: {}."
    )
    eng = Engine(spec)
    labels = [label for label, _ in pool_steps(eng, initial_state(spec, eng))]
    assert labels == ["0.go", "1.stop", TAU, TAU]


def test_input_binds_sender_and_formula():
    spec = parse_system(
        "props: p. const A := m!(1, p).0. const B := m?(x, f).r!(x, f).0. const Z := 0. "
        "pool: agent 0 : A observes all. agent 1 : B observes all. agent 2 : Z observes none. init: {p}."
    )
    eng = Engine(spec)
    (_, post), = pool_steps(eng, initial_state(spec, eng))
    assert show_term(post.agents[1].term, spec.props.names) == "r!(0, p).0"


def test_no_communication_without_premise():
    spec = parse_system(
        "props: p. const A := m!(1, p).0. const B := m?(_, _).0. "
        "pool: agent 0 : A observes none. agent 1 : B observes none. init: {p}."
    )
    eng = Engine(spec)
    assert pool_steps(eng, initial_state(spec, eng)) == []


def test_self_and_dead_outputs_are_skipped():
    spec = parse_system(
        "props: p. const A := m!(0, p).0 + m!(5, p).0 + m?(_, _).0. "
        "pool: agent 0 : A observes all. init: {p}."
    )
    eng = Engine(spec)
    assert pool_steps(eng, initial_state(spec, eng)) == []


@pytest.mark.parametrize(
    "name, states, transitions",
    [("loop.kpa", 1, 1), ("minimal.kpa", 2, 1), ("forward.kpa", 5, 5), ("unsuccessful.kpa", 2, 1)],
)
def test_explore_sizes(name, states, transitions):
    g = explore(_spec(name))
    assert (len(g.states), len(g.transitions)) == (states, transitions)
    assert not g.truncated


def test_explore_set_sequence():
    spec = parse_system("props: p. const C := set(p, 1).set(p, 0).0. pool: agent 0 : C observes none. init: {}.")
    g = explore(spec)
    assert len(g.states) == 3
    assert [g.valuation(s) for s in range(3)] == [0, 1, 0]


def test_explore_limits():
    spec = parse_system("props: p. const C(x) := go.C(x + 1). pool: agent 0 : C(0) observes all. init: {}.")
    g = explore(spec, max_states=5)
    assert g.truncated and len(g.states) == 5
    g = explore(spec, max_depth=3)
    assert g.truncated and max(g.depth) == 3


def test_interleavings_meet_in_one_state():
    spec = parse_system(
        "props: p, q. const A := set(p, 1).0. const B := set(q, 1).0. "
        "pool: agent 0 : A observes all. agent 1 : B observes all. init: {}."
    )
    g = explore(spec)
    assert len(g.states) == 4  # root, two single steps, shared diamond bottom
    keys = {canonical_key(st, spec) for st in g.states}
    assert len(keys) == len(g.states)


def test_canonical_key_is_stable():
    spec = _spec("forward.kpa")
    a, b = explore(spec), explore(spec)
    assert [canonical_key(s, spec) for s in a.states] == [canonical_key(s, spec) for s in b.states]


def test_project_lts():
    g = explore(_spec("forward.kpa"))
    lts = project_lts(g)
    assert list(lts.states) == list(range(len(g.states)))
    assert lts.transitions == g.transitions and lts.root == 0


def test_dump_format():
    g = explore(_spec("minimal.kpa"))
    lines = list(dump_graph(g))
    assert lines[0] == "KLTS states=2 transitions=1 root=0"
    assert lines[1].startswith("STATE 0 X=0 AGENTS=0:")
    assert lines[-1] == "TRANS 0 tau 1"
    table = list(dump_graph(g, "table"))
    assert any(line.startswith("RELATION r0 ") for line in table)
    assert all("REL[0]=r" in line for line in table if line.startswith("STATE"))


def test_random_specs_match_pair_engine():
    rng = random.Random(5)
    for _ in range(25):
        spec = parse_system(random_spec_text(rng))
        g = explore(spec, max_states=120)
        states, trans = PairEngine(spec).explore(max_states=120)
        assert trans == g.transitions
        for (_, rels, world), st in zip(states, g.states):
            assert world == st.world
            assert [pairs_from_partition(r) for r in st.relations] == list(rels)
            assert all(is_equivalence(r, 1 << len(spec.props)) for r in rels)


def test_single_step_closure_breaks_transitivity_on_reachable_state():
    # two announcements carve W's relation into {{},{q}} {{p}} {{p,q}}, then p is set privately
    spec = parse_system(
        "props: p, q. const A := set(p, 1).0. const B := m!(1, !p | q).m!(1, !p | !q).0. "
        "const W := m?(_, _).m?(_, _).0. "
        "pool: agent 0 : A observes all. agent 2 : B observes all. agent 1 : W observes none. init: {}."
    )
    literal, _ = PairEngine(spec, closure=single_step_closure).explore()
    assert not all(is_equivalence(r, 4) for _, rels, _ in literal for r in rels)
    g = explore(spec)
    assert len(g.states) == len(literal)
    assert all(is_equivalence(pairs_from_partition(r), 4) for st in g.states for r in st.relations)


def test_computed_undeclared_knower_is_a_spec_error():
    from kepal.syntax import SpecError

    spec = parse_system(
        "props: p. formula f(x) := K[x] p. const C(x) := m!(1, f(x)).0. const D := m?(_, _).0. "
        "pool: agent 0 : C(5) observes all. agent 1 : D observes none. init: {p}."
    )
    with pytest.raises(SpecError, match="undeclared agent 5"):
        explore(spec)
