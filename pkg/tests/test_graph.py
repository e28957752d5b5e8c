import random

import pytest
from hypothesis import given, settings, strategies as st

from crl.core import Role, Slice, Variable
from crl.errors import CycleDetected, UnknownVariable
from crl.graph import (
    CausalGraph,
    check_ddn_constraints,
    conditionally_irrelevant,
    d_separated,
    is_action_sufficient_cbn,
    is_action_sufficient_scm,
    satisfies_backdoor,
    topo_order,
)
from crl.model import load

import oracles
from generators import random_dag


def graph(edges, observed=None, roles=None, slices=None):
    names = []
    for p, c in edges:
        for n in (p, c):
            if n not in names:
                names.append(n)
    roles, slices = roles or {}, slices or {}
    variables = tuple(Variable(n, ("0", "1"), roles.get(n, Role.STATE), slices.get(n, Slice.CURRENT)) for n in names)
    return CausalGraph(variables, frozenset(edges), frozenset(names if observed is None else observed))


def test_topo_order_respects_edges():
    g = graph([("X", "Y"), ("Y", "Z")])
    assert topo_order(g) == ["X", "Y", "Z"]
    online = load("online-cbn").graph
    order = topo_order(online)
    assert order == ["PH", "CG", "GH", "SH", "SC"]
    for p, c in online.edges:
        assert order.index(p) < order.index(c)


def test_cycle_is_reported_with_witness():
    with pytest.raises(CycleDetected) as info:
        graph([("X", "Y"), ("Y", "X")])
    assert set(info.value.cycle) == {"X", "Y"}


def test_dseparation_examples():
    g = load("offline-cbn").graph
    assert d_separated(g, {"GH"}, {"SH"}, set())
    assert oracles.d_separated(g, {"GH"}, {"SH"}, set())
    assert not d_separated(g, {"PH"}, {"SC"}, set())
    chain = graph([("X", "Y"), ("Y", "Z")])
    assert d_separated(chain, {"X"}, {"Z"}, {"Y"})
    assert not d_separated(chain, {"X"}, {"Z"}, set())
    collider = graph([("X", "Y"), ("Z", "Y"), ("Y", "W")])
    assert d_separated(collider, {"X"}, {"Z"}, set())
    assert not d_separated(collider, {"X"}, {"Z"}, {"W"})
    with pytest.raises(UnknownVariable):
        d_separated(chain, {"Q"}, {"Z"}, set())


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_dseparation_matches_path_enumeration(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 7)
    names = [f"N{i}" for i in range(n)]
    g = CausalGraph(tuple(Variable(x, ("0", "1")) for x in names), frozenset((names[i], names[j]) for i, j in random_dag(rng, n, 0.5)))
    shuffled = rng.sample(names, n)
    cut1, cut2 = sorted(rng.sample(range(1, n + 1), 2)) if n > 1 else (1, 1)
    X = set(shuffled[:1])
    Y = set(shuffled[1:max(2, cut1)])
    Z = set(shuffled[max(2, cut1):cut2])
    expected = oracles.d_separated(g, X, Y, Z)
    assert d_separated(g, X, Y, Z) == expected
    assert d_separated(g, Y, X, Z) == expected


def test_action_sufficiency_senses():
    assert is_action_sufficient_cbn(load("online-cbn").graph, "SH")
    assert not is_action_sufficient_cbn(load("offline-cbn").graph, "SH")
    assert is_action_sufficient_scm(load("offline-unconfounded-scm").graph, "SH")
    assert not is_action_sufficient_scm(load("offline-confounded-scm").graph, "SH")
    lone = graph([("A", "R")], roles={"A": Role.ACTION})
    assert is_action_sufficient_cbn(lone, "A") and is_action_sufficient_scm(lone, "A")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_cbn_sense_implies_scm_sense_for_source_parents(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    names = [f"N{i}" for i in range(n)]
    edges = {(names[i], names[j]) for i, j in random_dag(rng, n, 0.5)}
    a = names[-1]
    variables = tuple(Variable(x, ("0", "1"), Role.ACTION if x == a else Role.STATE) for x in names)
    g = CausalGraph(variables, frozenset(edges), frozenset(x for x in names if rng.random() < 0.5))
    latent_parents = [p for p in g.parents(a) if p not in g.observed]
    if all(not g.parents(p) for p in latent_parents) and is_action_sufficient_cbn(g, a):
        assert is_action_sufficient_scm(g, a)


def test_ddn_constraints():
    report = check_ddn_constraints(load("sports-ddn").graph)
    assert report.passed()
    roles = {"A": Role.ACTION, "R": Role.REWARD}
    bad = graph([("S", "A"), ("A", "R"), ("R", "S2")], roles=roles)
    assert bad_report(bad).reward_out == (("R", "S2"),)
    nxt = graph([("S'", "S"), ("S", "A"), ("A", "R")], roles=roles, slices={"S'": Slice.NEXT})
    assert bad_report(nxt).next_to_current == (("S'", "S"),)
    a3 = graph([("A", "S"), ("A", "R")], roles=roles)
    r = check_ddn_constraints(a3)
    assert r.action_to_state == (("A", "S"),)
    assert not r.passed() and r.passed(relax_a3=True)


def bad_report(g):
    r = check_ddn_constraints(g)
    assert not r.passed()
    return r


def test_no_reward_children_within_slice_on_passing_fixtures():
    g = load("sports-ddn").graph
    for p, c in g.edges:
        if g.var(p).role is Role.REWARD:
            assert g.var(p).slice is not g.var(c).slice


def test_conditional_irrelevance():
    g = load("sports-ddn").graph
    assert not conditionally_irrelevant(g, "GH", "SH")
    roles = {"A": Role.ACTION, "R": Role.REWARD}
    four = graph([("S", "A"), ("S", "R"), ("A", "R"), ("T", "U")], roles=roles)
    assert conditionally_irrelevant(four, "T", "A")
    assert not conditionally_irrelevant(four, "S", "A")


def test_backdoor_criterion():
    g = load("offline-cbn").graph
    assert satisfies_backdoor(g, "SH", "SC", {"PH", "CG"})
    assert not satisfies_backdoor(g, "SH", "SC", {"PH"})  # SH <- CG -> SC stays open
    assert not satisfies_backdoor(g, "SH", "SC", {"CG"})
    for adj in ({"PH", "CG"}, {"PH"}, {"CG"}, set()):
        cut = g.with_edges((p, c) for p, c in g.edges if p != "SH")
        assert satisfies_backdoor(g, "SH", "SC", adj) == oracles.d_separated(cut, {"SH"}, {"SC"}, adj)
    chain = graph([("A", "M"), ("M", "Y")])
    assert not satisfies_backdoor(chain, "A", "Y", {"M"})
