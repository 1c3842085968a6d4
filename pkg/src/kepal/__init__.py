"""Explicit-state model checking for pools of communicating epistemic agents."""
from .checker import Checker, Witness, check, replay, sat_states, witness
from .cluedo import CluedoConfig, count_deal_branches, deal_count_closed_form, generate
from .epistemic import KripkeModel, Partition, WorldCapError, holds_direct, merge_on_prop, sat_set, split_by
from .equivalence import bisimilar, build_klts, disjoint_union, kripke_point_equiv, modal_equiv
from .formulas import Always, And, Diamond, Eventually, Formula, Know, Not, Prop, Top
from .parser import parse_formula, parse_system, parse_term
from .semantics import Engine, KltsGraph, PoolState, apply_com, apply_set, explore, pool_steps
from .syntax import SpecError, SystemSpec

__version__ = "0.1.0"

__all__ = [
    "Always", "And", "Checker", "CluedoConfig", "Diamond", "Engine", "Eventually", "Formula",
    "KltsGraph", "Know", "KripkeModel", "Not", "Partition", "PoolState", "Prop", "SpecError",
    "SystemSpec", "Top", "Witness", "WorldCapError", "apply_com", "apply_set", "bisimilar",
    "build_klts", "check", "count_deal_branches", "deal_count_closed_form", "disjoint_union",
    "explore", "generate", "holds_direct", "kripke_point_equiv", "merge_on_prop", "modal_equiv",
    "parse_formula", "parse_system", "parse_term", "pool_steps", "replay", "sat_set",
    "sat_states", "split_by", "witness",
]
