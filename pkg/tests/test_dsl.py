import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from crl.dsl import parse_model, parse_query, print_model, query_text
from crl.errors import ParseError, QueryError, RowNotNormalized, SemanticError
from crl.expr import BinOp, Num, Ref, leaves
from crl.model import FIXTURES, fixture_text

from generators import random_doc

HEAD = 'model cbn "t"\nvar X {0,1}\nvar Y {0,1}\nedge X -> Y\nprior X : 1/2 1/2\n'


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_round_trip(name):
    doc = parse_model(fixture_text(name))
    text = print_model(doc)
    assert parse_model(text) == doc
    assert print_model(parse_model(text)) == text


def test_equation_tree():
    doc = parse_model(fixture_text("online-scm"))
    (sc,) = [e for e in doc.eqns if e.child == "SC"]
    assert [x.name for x in leaves(sc.expr) if isinstance(x, Ref)] == ["PH", "CG", "SH", "GH"]
    assert sc.expr.op == "*"
    assert sc.expr.right == BinOp("-", Num(Fraction(1)), Ref("GH"))


def test_uniform_prior():
    doc = parse_model(fixture_text("online-cbn"))
    (ph,) = [p for p in doc.priors if p.name == "PH"]
    assert ph.probs == (Fraction(1, 2), Fraction(1, 2))


def test_wildcard_rows_expand():
    doc = parse_model(fixture_text("online-cbn"))
    (sc,) = [c for c in doc.cpts if c.child == "SC"]
    assert len(sc.rows) == 2**4
    assert "*" not in print_model(doc)


def test_row_sum_error():
    with pytest.raises(RowNotNormalized) as info:
        parse_model(HEAD + "cpt Y | X :\n  0 : 0.5 0.4\n  1 : 1 0\n")
    assert info.value.line == 7


@pytest.mark.parametrize(
    "text, line, col",
    [
        ("var X {0,1}\n", 1, 1),
        ('model cbn "t"\nvar X {0,1 role=state\n', 2, 12),
        ('model cbn "t"\nvar X {0,1}\nedge X => Y\n', 3, 9),
        ('model cbn "t"\n  0 : 1\n', 2, 3),
        ('model cbn "t"\nvar X {0,1}\nprior X : 1/2 $\n', 3, 15),
        ('model foo "t"\n', 1, 7),
    ],
)
def test_syntax_errors_carry_positions(text, line, col):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    assert (info.value.line, info.value.column) == (line, col)


@pytest.mark.parametrize(
    "extra",
    [
        "cpt Y | X :\n  0 : 1 0\n",  # uncovered configuration
        "cpt Y | Z :\n  * : 1 0\n",  # undeclared parent
        "cpt Y | X :\n  * : 1 0\ncpt Y | X :\n  * : 1 0\n",  # two mechanisms
        "edge Y -> X\ncpt Y | X :\n  * : 1 0\n",  # cycle
    ],
)
def test_semantic_errors(extra):
    with pytest.raises(SemanticError):
        parse_model(HEAD + extra)


def test_queries():
    q = parse_query("P(SC=1 | CG=1, do(SH=1))")
    assert q.level == "interventional" and q.do == (("SH", "1"),)
    q = parse_query("P(SC[SH=1]=1 | CG=1, PH=1, SC=1)")
    assert q.level == "counterfactual" and q.targets[0].subscript == (("SH", "1"),)
    assert parse_query("P(X=1)").level == "conditional"
    with pytest.raises(QueryError):
        parse_query("P(X=1 | X=0, do(X=1))")
    for text in ("P(SC=1|CG=1,do(SH=1))", "P(SC[SH=1]=1|CG=1,PH=1,SC=1)", "P(R=-1)"):
        assert query_text(parse_query(text)) == text


def test_query_error_position():
    with pytest.raises(ParseError) as info:
        parse_query("P(SC=1 | CG)")
    assert info.value.column == 12


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="P()[]|,=do XY01-/ ", max_size=30))
def test_query_parser_is_total(text):
    try:
        parse_query(text)
    except ParseError as exc:
        assert exc.line == 1 and 1 <= exc.column <= len(text) + 1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 400), st.text(alphabet=" :|{}*-#=/\n\tXq0", min_size=1, max_size=3))
def test_model_parser_errors_point_inside_input(seed, where, junk):
    text = print_model(random_doc(random.Random(seed)))
    pos = where % (len(text) + 1)
    mutated = text[:pos] + junk + text[pos:]
    try:
        parse_model(mutated)
    except ParseError as exc:
        lines = mutated.split("\n")
        assert 1 <= exc.line <= len(lines)
        assert 1 <= exc.column <= len(lines[exc.line - 1]) + 1


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6))
def test_random_documents_round_trip(seed):
    doc = random_doc(random.Random(seed))
    assert parse_model(print_model(doc)) == doc
