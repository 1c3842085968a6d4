import random
from pathlib import Path

import numpy as np
import pytest

from kepal.checker import Checker
from kepal.epistemic import Partition
from kepal.equivalence import (
    bisimilar,
    build_klts,
    characteristic_formula,
    disjoint_union,
    generated_worlds,
    kripke_point_equiv,
    modal_equiv,
    point_fingerprint,
    refine,
)
from kepal.formulas import epistemic_depth, modal_depth
from kepal.parser import parse_system
from kepal.semantics import explore

from oracles import perturb, point_equiv_bruteforce, random_klts, random_partition, union_klts

SPECS = Path(__file__).resolve().parent.parent / "specs"


def _g(name):
    return explore(parse_system((SPECS / name).read_text()))


def _bisim_bruteforce(g):
    """Greatest bisimulation on state pairs, straight from the three clauses."""
    n = len(g.states)
    nw = 1 << g.nprops
    ok_point = {}
    for s in range(n):
        for t in range(n):
            a, b = g.states[s], g.states[t]
            ok_point[s, t] = a.world == b.world and point_equiv_bruteforce(
                dict(zip(a.ids, a.relations)), a.world, dict(zip(b.ids, b.relations)), b.world, nw)
    rel = {p for p, ok in ok_point.items() if ok}
    changed = True
    while changed:
        changed = False
        for s, t in list(rel):
            fwd = all(any(l2 == l and (u, v) in rel for l2, v in g.successors(t)) for l, u in g.successors(s))
            bwd = all(any(l2 == l and (u, v) in rel for l2, u in g.successors(s)) for l, v in g.successors(t))
            if not (fwd and bwd):
                rel.discard((s, t))
                changed = True
    return rel


# -- Kripke point equivalence ----------------------------------------------------------


@pytest.mark.parametrize("seed", range(30))
def test_point_equiv_matches_bruteforce(seed):
    rng = random.Random(seed)
    nprops = rng.randint(1, 3)
    agents = [0, 1]
    a = {i: random_partition(rng, nprops) for i in agents}
    b = dict(a) if rng.random() < 0.4 else {i: random_partition(rng, nprops) for i in agents}
    if rng.random() < 0.5:
        # change a block far from the base world only
        i = rng.choice(agents)
        blocks = b[i].blocks.copy()
        blocks[rng.randrange(len(blocks))] = blocks.max() + 1
        b[i] = Partition(blocks)
    x = rng.randrange(1 << nprops)
    y = x if rng.random() < 0.8 else rng.randrange(1 << nprops)
    want = point_equiv_bruteforce(a, x, b, y, 1 << nprops)
    assert kripke_point_equiv(a, x, b, y) == want
    assert (point_fingerprint(a, x) == point_fingerprint(b, y)) == want


def test_point_equiv_ignores_unreachable_worlds():
    # agent sees everything: only the base world is generated
    a = {0: Partition.identity(2)}
    b = {0: Partition([0, 1, 2, 2])}
    assert kripke_point_equiv(a, 0, b, 0)
    assert not kripke_point_equiv(a, 2, b, 2)
    assert generated_worlds([b[0]], 3).tolist() == [False, False, True, True]


def test_point_equiv_rejects_mismatched_families():
    with pytest.raises(ValueError):
        kripke_point_equiv({0: Partition.total(1)}, 0, {1: Partition.total(1)}, 0)


# -- bisimilarity ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(25))
def test_bisimilar_matches_bruteforce(seed):
    rng = random.Random(seed)
    nprops, agents = rng.randint(1, 2), [0, 1]
    labels = ["tau", "0.a"]
    v, r, t = random_klts(rng, nprops, agents, rng.randint(2, 8), labels)
    t2, v2, r2, _ = perturb(rng, nprops, agents, v, r, t, labels)
    g, _ = union_klts(nprops, agents, [(v, r, t), (v2, r2, t2)])
    want = _bisim_bruteforce(g)
    final = refine(g)[-1]
    for s in range(len(g.states)):
        for u in range(len(g.states)):
            assert (final[s] == final[u]) == ((s, u) in want)


def test_bisimilarity_is_an_equivalence():
    rng = random.Random(4)
    v, r, t = random_klts(rng, 2, [0], 10, ["tau"])
    g = build_klts(2, [0], v, r, t)
    n = len(g.states)
    m = np.array([[bisimilar(g, s, u).bisimilar for u in range(n)] for s in range(n)])
    assert m.diagonal().all() and (m == m.T).all()
    assert ((m.astype(int) @ m.astype(int) > 0) == m).all()


def test_renamed_copy_is_bisimilar():
    g, s, t = disjoint_union(_g("loop.kpa"), _g("loop_renamed.kpa"))
    res = bisimilar(g, s, t)
    assert res.bisimilar and res.condition is None


def test_observation_change_is_condition_three():
    g, s, t = disjoint_union(_g("loop.kpa"), _g("loop_blind.kpa"))
    res = bisimilar(g, s, t)
    assert not res.bisimilar and res.condition == 3


def test_valuation_difference_is_condition_one():
    rel = (Partition.total(1),)
    g = build_klts(1, [0], [0, 1], [rel, rel], [])
    res = bisimilar(g, 0, 1)
    assert (res.bisimilar, res.condition, res.diagnostic) == (False, 1, "valuations differ")


def test_step_difference_is_condition_two():
    rel = (Partition.total(1),)
    g = build_klts(1, [0], [0, 0, 0], [rel] * 3, [(0, "tau", 2)])
    res = bisimilar(g, 0, 1)
    assert not res.bisimilar and res.condition == 2
    assert "state 0 has a tau step" in res.diagnostic


def test_unfolding_is_bisimilar():
    rel = (Partition.total(1),)
    g = build_klts(1, [0], [0, 0, 0], [rel] * 3, [(0, "tau", 0), (1, "tau", 2), (2, "tau", 1)])
    assert bisimilar(g, 0, 1).bisimilar


def test_disjoint_union_checks_universe():
    with pytest.raises(ValueError):
        disjoint_union(_g("loop.kpa"), _g("forgetting.kpa"))


# -- bounded modal equivalence ----------------------------------------------------------


def test_distinguishing_formula_is_checked():
    rel = (Partition.total(1),)
    g = build_klts(1, [0], [0, 0, 0], [rel] * 3, [(0, "tau", 2)])
    res = modal_equiv(g, 0, 1, 2)
    assert not res.equivalent and res.level == 1
    c = Checker(g)
    assert c.check(0, res.formula) and not c.check(1, res.formula)
    assert modal_depth(res.formula) <= 1


def test_characteristic_formula_defines_class():
    rng = random.Random(8)
    v, r, t = random_klts(rng, 2, [0, 1], 8, ["tau", "1.b"])
    g = build_klts(2, [0, 1], v, r, t)
    c = Checker(g)
    for s in range(len(g.states)):
        f = characteristic_formula(g, s, 2, 1)
        assert epistemic_depth(f) <= 1
        sat = c.sat(f)
        assert sat[s]
        for u in np.flatnonzero(sat):
            assert modal_equiv(g, s, int(u), 2, 1).equivalent


@pytest.mark.parametrize("seed", range(15))
def test_bisimilar_implies_modal_equivalence(seed):
    rng = random.Random(seed)
    labels = ["tau", "0.a"]
    v, r, t = random_klts(rng, 2, [0], rng.randint(2, 8), labels)
    t2, v2, r2, _ = perturb(rng, 2, [0], v, r, t, labels)
    g, (o1, o2) = union_klts(2, [0], [(v, r, t), (v2, r2, t2)])
    b = bisimilar(g, o1, o2).bisimilar
    m = modal_equiv(g, o1, o2, 4, 2)
    if b:
        assert m.equivalent
    elif not m.equivalent:
        c = Checker(g)
        assert c.check(o1, m.formula) != c.check(o2, m.formula)


def test_modal_equiv_budget():
    rel = (Partition.total(1),)
    g = build_klts(1, [0], [0], [rel], [])
    with pytest.raises(ValueError):
        modal_equiv(g, 0, 0, -1)
    assert modal_equiv(g, 0, 0, 3).equivalent
