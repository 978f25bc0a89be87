import itertools
import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcn import mastermind as mm
from lcn.mastermind import Game, GameConfig, Puzzle, Row, feedback, knuth_guess


def oracle_feedback(code, guess):
    """Multiset intersection for whites plus blacks, via Counter."""
    blacks = sum(a == b for a, b in zip(code, guess))
    return blacks, sum((Counter(code) & Counter(guess)).values()) - blacks


@pytest.fixture(scope="module")
def game():
    return Game(3, 4)


@pytest.fixture(scope="module")
def puzzles(game):
    out, _ = mm.generate_puzzles(GameConfig(seed=11), 12, game)
    return out


# -- feedback ---------------------------------------------------------------------

def test_feedback_examples():
    assert feedback((1, 2, 3), (1, 2, 3)) == (3, 0)
    assert feedback((1, 1, 2, 3), (1, 2, 2, 1)) == (2, 1)
    assert feedback((0, 0, 1), (2, 3, 3)) == (0, 0)


def test_feedback_length_mismatch():
    with pytest.raises(ValueError):
        feedback((1, 2), (1, 2, 3))


@settings(max_examples=300)
@given(st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 5), min_size=n, max_size=n),
    st.lists(st.integers(0, 5), min_size=n, max_size=n))))
def test_feedback_matches_multiset_oracle(pair):
    code, guess = pair
    assert feedback(tuple(code), tuple(guess)) == oracle_feedback(code, guess)


def test_feedback_table(game):
    for g in (0, 7, 33, 63):
        for c in range(0, game.N, 5):
            assert game.decode(game.table[g, c]) == feedback(game.code(c), game.code(g))


# -- Knuth minimax ----------------------------------------------------------------

def test_single_candidate(game):
    assert knuth_guess(game, np.array([17])) == 17


def _worst_partition(codes, guess):
    return max(Counter(oracle_feedback(c, guess) for c in codes).values())


def test_classic_opening():
    g = Game(4, 6)
    first = g.code(knuth_guess(g, np.arange(g.N)))
    assert first == (0, 0, 1, 1)
    codes = [g.code(i) for i in range(g.N)]
    worst = {p: _worst_partition(codes, p) for p in
             [(0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 1), (0, 0, 1, 2), (0, 1, 2, 3)]}
    assert min(worst, key=worst.get) == (0, 0, 1, 1)
    assert worst[(0, 0, 1, 1)] == 256


def _optimal_depth(codes, all_codes):
    """Exhaustive game-tree search: worst-case guesses needed to finish."""
    if len(codes) == 1:
        return 1
    best = None
    for g in all_codes:
        parts = {}
        for c in codes:
            parts.setdefault(oracle_feedback(c, g), []).append(c)
        if len(parts) == 1 and g not in codes:
            continue
        depth = 1 + max((0 if fb == (len(g), 0) else _optimal_depth(p, all_codes))
                        for fb, p in parts.items())
        best = depth if best is None else min(best, depth)
    return best


def test_two_by_two_game_is_optimal():
    g = Game(2, 2)
    codes = [g.code(i) for i in range(g.N)]
    worst = 0
    for hidden in range(g.N):
        cand, n = np.arange(g.N), 0
        while True:
            guess = knuth_guess(g, cand)
            n += 1
            if guess == hidden:
                break
            cand = cand[g.table[guess, cand] == g.table[guess, hidden]]
        worst = max(worst, n)
    assert worst == _optimal_depth(codes, codes) == 3


# -- generation -------------------------------------------------------------------

def test_generation_is_deterministic(game):
    a, na = mm.generate_puzzles(GameConfig(seed=5), 4, game)
    b, nb = mm.generate_puzzles(GameConfig(seed=5), 4, game)
    assert na == nb
    assert [json.dumps(p.to_json(True)) for p in a] == [json.dumps(p.to_json(True)) for p in b]


def test_feedback_validity(puzzles, game):
    for pz in puzzles:
        for r in pz.board:
            b, w = r.feedback
            assert b + w <= pz.pegs and (b, w) != (pz.pegs - 1, 1)
            assert game.encode(r.feedback) in game.achievable(game.index(r.guess))


def test_board_and_priors(puzzles):
    for pz in puzzles:
        assert pz.K == len(pz.lie_probs) == len(pz.priors) == len(pz.lies)
        for p, (lo, hi) in zip(pz.lie_probs, pz.priors):
            assert 0.3 <= lo <= p <= hi <= 0.7


def test_lie_flags_match_board(puzzles, game):
    for pz in puzzles:
        for r, lied in zip(pz.board, pz.lies):
            assert (feedback(pz.hidden, r.guess) != tuple(r.feedback)) == lied


def test_knowledge_soundness(puzzles):
    for pz in puzzles:
        assert len(pz.knowledge) == pz.K - 1
        p = pz.lie_probs
        for k in pz.knowledge:
            i = k.i
            exact = p[i] * p[i + 1] if k.op == "and" else 1 - (1 - p[i]) * (1 - p[i + 1])
            assert k.op == ("and" if i % 2 == 0 else "or")
            assert k.lo <= exact + 1e-12 and exact <= k.hi + 1e-12


def test_knowledge_degenerate_and():
    pz = Puzzle(0, 3, 4, [Row((0, 0, 0), (0, 0))] * 2, (1, 1, 1), [0.3, 0.3])
    k = mm.generate_knowledge(pz, np.random.default_rng(0))[0]
    assert k.lo == pytest.approx(0.09) and 0.09 <= k.hi <= 0.49


def test_truthful_games_are_rejected(game):
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert mm.generate_puzzle(GameConfig(), rng, game, lie_probs_override=0.0) is None


def test_fixed_priors(game):
    out, _ = mm.generate_puzzles(GameConfig(seed=2, fixed_priors=True), 2, game)
    assert all(p == (0.3, 0.7) for pz in out for p in pz.priors)


def test_config_validation():
    with pytest.raises(ValueError):
        GameConfig(pegs=1)
    with pytest.raises(ValueError):
        GameConfig(pegs=6, colors=6)


# -- ground truth -----------------------------------------------------------------

def _oracle_truth(pz, game):
    scores = []
    for i in range(game.N):
        code = game.code(i)
        s = 1.0
        for r, p in zip(pz.board, pz.lie_probs):
            lie = oracle_feedback(code, r.guess) != tuple(r.feedback)
            s *= p if lie else 1 - p
        scores.append(s)
    best = max(scores)
    return [i for i, s in enumerate(scores) if s >= best * (1 - 1e-9)]


def test_ground_truth_matches_independent_scorer(puzzles, game):
    for pz in puzzles:
        assert mm.ground_truth_map(pz, game) == _oracle_truth(pz, game)


def test_truthful_round_pins_code(game):
    hidden = (1, 2, 3)
    board = [Row(game.code(g), feedback(hidden, game.code(g))) for g in range(game.N)]
    pz = Puzzle(0, 3, 4, board, hidden, [0.4] * len(board))
    assert mm.ground_truth_map(pz, game) == [game.index(hidden)]


def test_half_probabilities_tie(puzzles, game):
    pz = puzzles[0]
    s = mm.code_scores(game, pz, [0.5] * pz.K)
    assert len(mm.argmax_indices(s)) == game.N


def test_colour_permutation_invariance(puzzles, game):
    perm = (2, 0, 3, 1)
    for pz in puzzles[:4]:
        board = [Row(tuple(perm[c] for c in r.guess), r.feedback) for r in pz.board]
        moved = replace(pz, board=board, hidden=tuple(perm[c] for c in pz.hidden))
        truth = {tuple(perm[c] for c in game.code(i)) for i in mm.ground_truth_map(pz, game)}
        assert {game.code(i) for i in mm.ground_truth_map(moved, game)} == truth


# -- methods ----------------------------------------------------------------------

def test_bayes_midpoint_half_ties(game):
    out, _ = mm.generate_puzzles(GameConfig(seed=1, fixed_priors=True), 1, game)
    assert len(mm.method_codes(out[0], "bayes-midpoint", game)) == game.N


def test_credal_equals_lcn_without_knowledge(game):
    pz = Puzzle(0, 3, 4, [Row((0, 1, 2), (1, 1))], (0, 2, 1), [0.4], [(0.35, 0.45)])
    assert mm.method_codes(pz, "credal-maximin", game) == mm.method_codes(pz, "lcn-maximin", game)


def test_nilsson_lower_bounds_are_zero(puzzles, game):
    # every code ties at a zero lower bound once the board is long enough
    pz = max(puzzles, key=lambda p: p.K)
    assert len(mm.method_codes(pz, "nilsson-maximin", game)) == game.N


def test_method_outputs_are_nonempty(puzzles, game):
    for m in mm.DEFAULT_METHODS:
        chosen = mm.method_codes(puzzles[0], m, game)
        assert chosen and all(0 <= i < game.N for i in chosen)


def test_unknown_method(puzzles):
    with pytest.raises(ValueError):
        mm.method_codes(puzzles[0], "oracle")


def test_evaluate_and_summarize(puzzles, game):
    res = mm.evaluate_puzzles(puzzles[:3], ["credal-maximin", "lcn-maximin"], game)
    for s in res.values():
        assert 0 <= s.first_of_tie <= s.any_of_tie <= 1
    summary = mm.summarize({0: res, 1: res}, ["credal-maximin", "lcn-maximin"])
    assert summary["methods"]["lcn-maximin"]["stdev"] == 0.0


def test_files_round_trip(puzzles, tmp_path):
    mm.write_puzzles(puzzles[:3], tmp_path)
    blind = json.loads((tmp_path / "puzzles.jsonl").read_text().splitlines()[0])
    assert "hidden" not in blind
    back = mm.read_puzzles(tmp_path)
    for a, b in zip(puzzles, back):
        assert a.to_json(True) == b.to_json(True)
        assert [k.exact for k in a.knowledge] == pytest.approx([k.exact for k in b.knowledge])
