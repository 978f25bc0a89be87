import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcn.bp import (
    FULL, BPConfig, IntervalMessage, build_factor_graph, factor_to_variable, run_bp,
    variable_to_factor,
)
from lcn.depgraph import IndependenceStatement
from lcn.errors import InconsistencyError
from lcn.exact import (
    build_linear_constraints, build_markov_constraints, compile_program, query_interval,
)
from lcn.generators import random_credal_polytree, random_product_lcn
from lcn.parser import parse_query
from lcn.solver import NLP, Objective, SolverConfig, solve

from conftest import ground_file, ground_text

FAST = SolverConfig(starts=4)


def test_credal_chain_has_three_factors():
    fg = build_factor_graph(ground_file("credal_chain.lcn"))
    assert [len(f.sentences) for f in fg.factors] == [1, 2, 2]
    assert [f.atoms for f in fg.factors] == [("x",), ("x", "y"), ("y", "z")]


def test_incompat_factor_grouping(incompat):
    fg = build_factor_graph(incompat)
    assert [[s.label for s in f.sentences] for f in fg.factors] == [["f1"], ["f2a", "f2b"], ["f3"]]


def test_single_sentence_is_a_star():
    fg = build_factor_graph(ground_text("0.2 <= P(a and (b or c)) <= 0.5\n"))
    assert len(fg.factors) == 1
    assert sorted(fg.edges()) == [("a", "f1"), ("b", "f1"), ("c", "f1")]


def test_graph_is_bipartite_and_partitions_sentences(appendix_a):
    fg = build_factor_graph(appendix_a)
    labels = [s.label for f in fg.factors for s in f.sentences]
    assert sorted(labels) == sorted(s.label for s in appendix_a.sentences)
    for v, f in fg.edges():
        assert v in fg.variables and f in fg.by_name


# -- messages ---------------------------------------------------------------------

def test_degree_one_variable_sends_full(incompat):
    fg = build_factor_graph(incompat)
    assert fg.degree("a") == 2
    fg1 = build_factor_graph(ground_text("0.2 <= P(a) <= 0.3\n"))
    assert variable_to_factor(fg1, "a", "f1", {}) == FULL


def test_variable_message_intersects():
    fg = build_factor_graph(ground_text("0.1 <= P(v) <= 0.9\n0 <= P(v and w) <= 1\n"
                                        "0 <= P(v or u) <= 1\n"))
    inbox = {("f2", "v"): IntervalMessage(0.2, 0.6), ("f3", "v"): IntervalMessage(0.3, 0.9)}
    assert tuple(variable_to_factor(fg, "v", "f1", inbox)) == (0.3, 0.6)


def test_variable_message_crossing_names_the_atom():
    fg = build_factor_graph(ground_text("0.1 <= P(v) <= 0.9\n0 <= P(v and w) <= 1\n"
                                        "0 <= P(v or u) <= 1\n"))
    inbox = {("f2", "v"): IntervalMessage(0.5, 0.6), ("f3", "v"): IntervalMessage(0.1, 0.2)}
    with pytest.raises(InconsistencyError) as e:
        variable_to_factor(fg, "v", "f1", inbox)
    assert "v" in str(e.value)


def test_factor_message_appendix_b(incompat):
    fg = build_factor_graph(incompat)
    m = factor_to_variable(fg, "f2", "b", {("a", "f2"): IntervalMessage(0.2, 0.3)})
    assert tuple(m) == pytest.approx((0.2, 0.35), abs=1e-3)
    m = factor_to_variable(fg, "f3", "b", {})
    assert tuple(m) == pytest.approx((0.3, 0.4), abs=1e-6)


def test_factor_message_uses_pairwise_independence():
    gp = ground_text("0.3 <= P(c and (d or e)) <= 0.4\n")
    m = factor_to_variable(build_factor_graph(gp), "f1", "d", {})
    # oracle: the full joint over c, d, e with the extra row P(c and e) = P(c) P(e)
    stmt = IndependenceStatement("c", frozenset(), frozenset({"e"}))
    quad = tuple(q for _, q in build_markov_constraints([stmt], gp.index, 3))
    d = compile_program(gp, markov=False).indicator(parse_query("P(d)").q)
    nlp = NLP(8, Objective.linear(d), tuple(build_linear_constraints(gp)), quad)
    lo, hi = solve(nlp, "min").value, solve(nlp, "max").value
    assert (m.l, m.u) == pytest.approx((lo, hi), abs=1e-3)


def test_infeasible_factor_is_inconsistent():
    fg = build_factor_graph(ground_text("0.6 <= P(a and b) <= 0.7\n"))
    with pytest.raises(InconsistencyError) as e:
        factor_to_variable(fg, "f1", "a", {("b", "f1"): IntervalMessage(0.1, 0.2)})
    assert "f1" in str(e.value)


# -- full runs --------------------------------------------------------------------

def test_incompat_run_matches_message_table(incompat):
    res = run_bp(build_factor_graph(incompat))
    assert res.converged
    expect = {
        ("a", "f2"): (0.2, 0.3),
        ("f2", "a"): (0.2, 0.6),
        ("f2", "b"): (0.2, 0.35),
        ("b", "f2"): (0.3, 0.4),
    }
    for key, lu in expect.items():
        assert tuple(res.message(*key)) == pytest.approx(lu, abs=1e-3)
    assert tuple(res.intervals["b"]) == pytest.approx((0.3, 0.35), abs=1e-3)
    # the L2U answer [0.1, 0.26] is not reproduced
    assert res.intervals["b"].l > 0.26


def test_credal_chain_bp_is_exact():
    gp = ground_file("credal_chain.lcn")
    res = run_bp(build_factor_graph(gp))
    for a in gp.atom_names:
        r = query_interval(gp, f"P({a})")
        assert tuple(res.intervals[a]) == pytest.approx((r.lower, r.upper), abs=0.02)


@pytest.mark.parametrize("seed", range(3))
def test_polytree_exactness(seed):
    rng = np.random.default_rng(300 + seed)
    text = random_credal_polytree(rng, max_nodes=4)
    gp = ground_text(text)
    res = run_bp(build_factor_graph(gp), BPConfig(solver=FAST))
    cp = compile_program(gp)
    for a in gp.atom_names:
        r = query_interval(gp, f"P({a})", program=cp, config=FAST)
        assert tuple(res.intervals[a]) == pytest.approx((r.lower, r.upper), abs=0.02)


def test_polytree_with_extra_marginal():
    gp = ground_text("0.3 <= P(x) <= 0.7\n0.1 <= P(y | x) <= 0.2\n0.6 <= P(y | not x) <= 0.7\n"
                     "0.4 <= P(y) <= 0.5\n")
    res = run_bp(build_factor_graph(gp))
    for a in gp.atom_names:
        r = query_interval(gp, f"P({a})")
        assert tuple(res.intervals[a]) == pytest.approx((r.lower, r.upper), abs=0.02)


def _assert_monotone(trace, slack=1e-6):
    for prev, cur in zip(trace, trace[1:]):
        for key, m in cur.items():
            assert m.l >= prev[key].l - slack, key
            assert m.u <= prev[key].u + slack, key


@settings(max_examples=6, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_rounds(seed):
    gp = ground_text(random_product_lcn(np.random.default_rng(seed), max_atoms=5))
    res = run_bp(build_factor_graph(gp), BPConfig(solver=FAST), trace=True)
    assert res.rounds <= 100
    _assert_monotone(res.trace)
    assert res.max_regression <= 1e-5
    for m in res.intervals.values():
        assert 0.0 <= m.l <= m.u <= 1.0


def test_trace_starts_from_full(incompat):
    res = run_bp(build_factor_graph(incompat), trace=True)
    assert all(m == FULL for m in res.trace[0].values())
    assert len(res.trace) == res.rounds + 1
    _assert_monotone(res.trace)


def test_round_cap():
    res = run_bp(build_factor_graph(ground_file("incompat.lcn")), BPConfig(max_rounds=1))
    assert res.rounds == 1 and not res.converged


def test_inconsistent_program_is_reported():
    gp = ground_text("0.6 <= P(a) <= 0.7\n0.1 <= P(a and b) <= 0.9\n0.1 <= P(a or b) <= 0.2\n")
    with pytest.raises(InconsistencyError):
        run_bp(build_factor_graph(gp), BPConfig(solver=FAST))
