from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from crl.core import Assignment, Distribution, Variable, enum_guard, magnitude, merge, normalize
from crl.errors import Conflict, DomainViolation, ZeroMass

F = Fraction


def test_normalize_examples():
    d = normalize({Assignment(u="u0"): 1, Assignment(u="u1"): 1})
    assert d[Assignment(u="u0")] == F(1, 2)
    d = normalize({Assignment(u="u0"): 1, Assignment(u="u1"): 3})
    assert d[Assignment(u="u1")] == F(3, 4)
    with pytest.raises(ZeroMass):
        normalize({Assignment(u="u0"): 0, Assignment(u="u1"): 0})


weights = st.dictionaries(
    st.integers(0, 5).map(lambda i: Assignment(u=f"u{i}")),
    st.fractions(min_value=0, max_value=10, max_denominator=12),
    min_size=1,
).filter(lambda w: any(w.values()))


@given(weights)
def test_normalize_sums_to_one_and_is_idempotent(w):
    d = normalize(w)
    assert sum(d.values()) == 1
    assert normalize(d) == d
    assert all(p > 0 for p in d.values())


def test_distribution_rejects_bad_mass():
    with pytest.raises(ValueError):
        Distribution({Assignment(x="0"): F(1, 2)})
    with pytest.raises(ValueError):
        Distribution({Assignment(x="0"): F(1, 2), Assignment(y="0"): F(1, 2)})


def test_distribution_marginal_and_prob():
    d = Distribution({Assignment(x="0", y="0"): F(1, 4), Assignment(x="0", y="1"): F(1, 4), Assignment(x="1", y="1"): F(1, 2)})
    assert d.marginal(["x"])[Assignment(x="0")] == F(1, 2)
    assert d.prob({"y": "1"}) == F(3, 4)
    assert Distribution.point({"x": "1"}).prob({"x": "1"}) == 1
    assert hash(d) == hash(Distribution(dict(d)))


def test_assignment_is_order_free_and_hashable():
    a = Assignment([("b", 1), ("a", 0)])
    assert a == Assignment(a="0", b="1") == {"a": "0", "b": "1"}
    assert hash(a) == hash(Assignment(a="0", b="1"))
    assert a.restrict(["a"]) == Assignment(a="0")
    assert a.without(["a"]) == Assignment(b="1")
    assert a.agrees({"a": "0", "c": "5"})
    assert not a.agrees({"a": "1"})
    assert a.text(["b", "a"]) == "b=1,a=0"


def test_merge_detects_conflict():
    assert merge({"a": "0"}, {"b": "1"}) == Assignment(a="0", b="1")
    with pytest.raises(Conflict):
        merge({"a": "0"}, {"a": "1"})


def test_variable_domain_checks():
    v = Variable("X", ("0", "1", "2"))
    assert v.card == 3 and v.index("2") == 2
    with pytest.raises(DomainViolation):
        v.index("3")
    with pytest.raises(DomainViolation):
        Variable("X", ("0",))
    with pytest.raises(DomainViolation):
        Variable("X", ("0", "0"))


def test_magnitude():
    assert magnitude("-1") == -1
    assert magnitude("3/2") == F(3, 2)
    with pytest.raises(DomainViolation):
        magnitude("lo")


def test_enum_guard_env(monkeypatch):
    monkeypatch.setenv("CRL_ENUM_GUARD", "64")
    assert enum_guard() == 64
    monkeypatch.delenv("CRL_ENUM_GUARD")
    assert enum_guard() == 2**20
