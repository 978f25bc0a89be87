import pytest
from hypothesis import given, settings, strategies as st

from lcn.errors import ParseError
from lcn.model import atom, conj, disj, iff, implies, neg, xor
from lcn.parser import (
    format_formula, format_program, parse_formula, parse_program, parse_query, strip_positions,
)

from test_model import formulas
from conftest import data_path

DATA = ["xor.lcn", "credal_chain.lcn", "incompat.lcn", "appendix_a.lcn", "smokers.lcn",
        "appendix_d.lcn"]

a, b, c = atom("a"), atom("b"), atom("c")


def test_two_marginals():
    prog = parse_program("0.3 <= P(x) <= 0.7\n0.3 <= P(y) <= 0.7")
    assert len(prog.sentences) == 2
    assert all(s.tau and s.r is None for s in prog.sentences)
    assert [(s.lower, s.upper) for s in prog.sentences] == [(0.3, 0.7), (0.3, 0.7)]


def test_tau_annotation():
    (s,) = parse_program("0.2 <= P(a) <= 0.3 ; tau=false").sentences
    assert s.tau is False


def test_conditional_sentence():
    (s,) = parse_program("0.6 <= P(b | a) <= 0.7").sentences
    assert s.q == b and s.r == a and s.kind == "conditional"


def test_point_and_one_sided_sugar():
    ss = parse_program("P(a) = 0.25\nP(b) <= 0.4\nP(c) >= 0.1").sentences
    assert [(s.lower, s.upper) for s in ss] == [(0.25, 0.25), (0.0, 0.4), (0.1, 1.0)]


def test_queries():
    q = parse_query("P(x xor y)")
    assert q.kind == "marginal" and q.q == xor(atom("x"), atom("y"))
    q = parse_query("P(a | b)")
    assert q.kind == "conditional" and q.q == a and q.e == b
    assert parse_query("P((a))") == parse_query("P(a)")


def test_bar_is_only_the_conditional_separator():
    q = parse_query("P(a | b or c)")
    assert q.q == a and q.e == disj(b, c)


@pytest.mark.parametrize("text, want", [
    ("not a and b", conj(neg(a), b)),
    ("a and b xor c", xor(conj(a, b), c)),
    ("a xor b or c", disj(xor(a, b), c)),
    ("a or b -> c", implies(disj(a, b), c)),
    ("a -> b <-> c", iff(implies(a, b), c)),
    ("a -> b -> c", implies(a, implies(b, c))),
    ("a <-> b <-> c", iff(iff(a, b), c)),
    ("!a & b", conj(neg(a), b)),
])
def test_precedence_fixtures(text, want):
    assert parse_formula(text) == want


@pytest.mark.parametrize("text, fragment", [
    ("1.2 <= P(a) <= 1.5", "outside [0, 1]"),
    ("0.5 <= P(a) <= 0.2", "exceeds"),
    ("s: 0.1 <= P(a) <= 0.2\ns: 0.1 <= P(b) <= 0.2", "duplicate"),
    ("0.1 <= P(Sm(x)) <= 0.2 forall x : People", "undeclared"),
    ("0.1 <= P(a and ) <= 0.2", ""),
])
def test_diagnostics(text, fragment):
    with pytest.raises(ParseError) as e:
        parse_program(text)
    assert fragment in str(e.value)
    lines = text.split("\n")
    for d in e.value.diagnostics:
        assert 1 <= d.line <= len(lines)
        assert 1 <= d.column <= len(lines[d.line - 1]) + 1


def test_all_diagnostics_collected():
    with pytest.raises(ParseError) as e:
        parse_program("0.5 <= P(a) <= 0.2\n0.1 <= P(b or) <= 0.3\n2 <= P(c) <= 3")
    assert sorted({d.line for d in e.value.diagnostics}) == [1, 2, 3]


def test_arity_and_domain_checks():
    base = "domain P = {A, B}\ndomain Q = {C}\npredicate F(P, P)\npredicate G(Q)\n"
    with pytest.raises(ParseError, match="arity|argument"):
        parse_program(base + "0.1 <= P(F(x)) <= 0.2 forall x : P")
    with pytest.raises(ParseError):
        parse_program(base + "0.1 <= P(G(x)) <= 0.2 forall x : P")


@pytest.mark.parametrize("name", DATA)
def test_bundled_files_round_trip(name):
    text = open(data_path(name), encoding="utf-8").read()
    prog = parse_program(text)
    again = parse_program(format_program(prog))
    assert strip_positions(again) == strip_positions(prog)


def test_crlf_and_comments():
    prog = parse_program("# header\r\n0.1 <= P(a) <= 0.2   # trailing\r\n")
    assert len(prog.sentences) == 1


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_formula_print_parse_round_trip(f):
    assert parse_formula(format_formula(f)) == f


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="aPb()<=|&!.0123456789 ;:\nxortndfl=-", max_size=60))
def test_parser_is_total(text):
    try:
        parse_program(text)
    except ParseError as e:
        assert e.diagnostics
        n = len(text.replace("\r\n", "\n").split("\n"))
        assert all(1 <= d.line <= n for d in e.diagnostics)
