"""Mastermind with lies: puzzle generation, ground truth and method scoring.

A puzzle is a board of (guess, feedback) rows collected from several Knuth
minimax runs against a hidden code, where each reported feedback is a lie
with a per-round probability.  Every candidate code implies a truth
assignment to the lie atoms ``l1..lK``; MAP inference over those atoms
recovers the most probable code.
"""

from __future__ import annotations

import itertools
import json
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exact import query_interval
from .map_inference import MapTask, argmax_set, map_assignment
from .model import ground
from .parser import Query, parse_program
from .solver import SolverConfig

METHODS = ("bayes-midpoint", "credal-maximax", "credal-maximin", "lcn-maximax",
           "lcn-maximin", "lcn-maxent", "nilsson-maximin")
DEFAULT_METHODS = ("bayes-midpoint", "credal-maximax", "credal-maximin", "lcn-maximax",
                   "lcn-maximin", "lcn-maxent")
MAX_CODES = 20736
AND_RANGE = (0.09, 0.49)
OR_RANGE = (0.51, 0.91)

Code = Tuple[int, ...]
Feedback = Tuple[int, int]


@dataclass(frozen=True)
class GameConfig:
    pegs: int = 3
    colors: int = 4
    knuth_runs: int = 3
    prior_range: Tuple[float, float] = (0.3, 0.7)
    seed: int = 0
    fixed_priors: bool = False
    max_rounds: int = 20

    def __post_init__(self):
        if self.pegs < 2 or self.colors < 2:
            raise ValueError("need at least 2 pegs and 2 colors")
        if self.colors ** self.pegs > MAX_CODES:
            raise ValueError(f"{self.colors}^{self.pegs} codes exceeds the cap of {MAX_CODES}")


@dataclass
class Row:
    guess: Code
    feedback: Feedback


@dataclass
class KnowledgeSentence:
    op: str  # "and" | "or"
    i: int  # lie atoms l{i+1} and l{i+2}
    lo: float
    hi: float
    exact: float

    @property
    def formula(self) -> str:
        return f"l{self.i + 1} {self.op} l{self.i + 2}"


@dataclass
class Puzzle:
    id: int
    pegs: int
    colors: int
    board: List[Row]
    hidden: Code
    lie_probs: List[float]
    priors: List[Tuple[float, float]] = field(default_factory=list)
    knowledge: List[KnowledgeSentence] = field(default_factory=list)
    lies: List[bool] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.board)

    def to_json(self, with_hidden: bool = False) -> dict:
        d = {
            "id": self.id, "pegs": self.pegs, "colors": self.colors,
            "board": [{"guess": list(r.guess), "feedback": list(r.feedback)} for r in self.board],
            "lie_probs": list(self.lie_probs),
            "priors": [list(p) for p in self.priors],
            "knowledge": [{"formula": k.formula, "lo": k.lo, "hi": k.hi} for k in self.knowledge],
        }
        if with_hidden:
            d["hidden"] = list(self.hidden)
        return d


# -- game mechanics -----------------------------------------------------------------

def feedback(code: Sequence[int], guess: Sequence[int]) -> Feedback:
    """(blacks, whites): exact position matches, then colour matches elsewhere."""
    if len(code) != len(guess):
        raise ValueError("code and guess differ in length")
    blacks = sum(a == b for a, b in zip(code, guess))
    common = sum(min(code.count(c), guess.count(c)) for c in set(code))
    return blacks, common - blacks


class Game:
    """All codes of a (pegs, colors) game with a precomputed feedback table."""

    def __init__(self, pegs: int, colors: int):
        self.pegs, self.colors = pegs, colors
        self.codes = np.array(list(itertools.product(range(colors), repeat=pegs)), dtype=np.int8)
        self.N = len(self.codes)
        c = self.codes
        blacks = (c[:, None, :] == c[None, :, :]).sum(-1)
        counts = np.stack([(c == k).sum(1) for k in range(colors)], axis=1)
        common = np.minimum(counts[:, None, :], counts[None, :, :]).sum(-1)
        self.base = pegs + 1
        # table[g, c] encodes feedback(code=c, guess=g) as blacks * base + whites
        self.table = (blacks * self.base + (common - blacks)).astype(np.int16)
        self.win = pegs * self.base

    def code(self, i: int) -> Code:
        return tuple(int(v) for v in self.codes[i])

    def index(self, code: Sequence[int]) -> int:
        i = 0
        for v in code:
            i = i * self.colors + int(v)
        return i

    def decode(self, fb: int) -> Feedback:
        return divmod(int(fb), self.base)

    def encode(self, fb: Feedback) -> int:
        return fb[0] * self.base + fb[1]

    def achievable(self, guess: int) -> np.ndarray:
        """Feedback codes some hidden code would produce for ``guess``."""
        return np.unique(self.table[guess])


def knuth_guess(game: Game, candidates: np.ndarray) -> int:
    """Minimax guess index: smallest worst-case partition, candidates first, then lowest code."""
    cand = np.asarray(candidates)
    if len(cand) == 1:
        return int(cand[0])
    sub = game.table[:, cand].astype(np.int64)
    nb = game.base * game.base
    counts = np.zeros((game.N, nb), dtype=np.int64)
    rows = np.repeat(np.arange(game.N), len(cand))
    np.add.at(counts, (rows, sub.ravel()), 1)
    worst = counts.max(axis=1)
    is_cand = np.zeros(game.N, dtype=bool)
    is_cand[cand] = True
    key = np.lexsort((np.arange(game.N), ~is_cand, worst))
    return int(key[0])


def _run(game: Game, hidden: int, probs_rng, cfg: GameConfig, rows, probs, lies) -> bool:
    """One Knuth run; appends rows.  Returns False when the hidden code was guessed."""
    cand = np.arange(game.N)
    lo, hi = cfg.prior_range
    for _ in range(cfg.max_rounds):
        g = knuth_guess(game, cand)
        if g == hidden:
            return False
        true_fb = int(game.table[g, hidden])
        p = float(probs_rng.uniform(lo, hi))
        lied = bool(probs_rng.random() < p)
        fb = true_fb
        if lied:
            options = [v for v in game.achievable(g) if v != true_fb]
            fb = int(options[int(probs_rng.integers(len(options)))])
        rows.append(Row(game.code(g), game.decode(fb)))
        probs.append(p)
        lies.append(lied)
        if fb == game.win:
            break
        cand = cand[game.table[g, cand] == fb]
        if len(cand) == 0:
            break
    return True


def puzzle_rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, attempt])


def generate_puzzle(cfg: GameConfig, rng: np.random.Generator, game: Optional[Game] = None,
                    pid: int = 0, lie_probs_override: Optional[float] = None) -> Optional[Puzzle]:
    """Concatenate ``knuth_runs`` runs into one board; None when the code got guessed."""
    game = game or Game(cfg.pegs, cfg.colors)
    hidden = int(rng.integers(game.N))
    rows: List[Row] = []
    probs: List[float] = []
    lies: List[bool] = []
    run_cfg = cfg
    if lie_probs_override is not None:
        run_cfg = GameConfig(cfg.pegs, cfg.colors, cfg.knuth_runs,
                             (lie_probs_override, lie_probs_override), cfg.seed,
                             cfg.fixed_priors, cfg.max_rounds)
    for _ in range(cfg.knuth_runs):
        if not _run(game, hidden, rng, run_cfg, rows, probs, lies):
            return None
    pz = Puzzle(pid, cfg.pegs, cfg.colors, rows, game.code(hidden), probs, lies=lies)
    lo, hi = cfg.prior_range
    if cfg.fixed_priors:
        pz.priors = [(lo, hi) for _ in probs]
    else:
        pz.priors = [(float(rng.uniform(lo, p)), float(rng.uniform(p, hi))) for p in probs]
    pz.knowledge = generate_knowledge(pz, rng)
    return pz


def generate_knowledge(puzzle: Puzzle, rng: np.random.Generator) -> List[KnowledgeSentence]:
    """Alternating AND / OR bounds over consecutive lie atoms, each containing the true value."""
    out = []
    p = puzzle.lie_probs
    for i in range(len(p) - 1):
        if i % 2 == 0:
            op, (x, y), exact = "and", AND_RANGE, p[i] * p[i + 1]
        else:
            op, (x, y), exact = "or", OR_RANGE, p[i] + p[i + 1] - p[i] * p[i + 1]
        lo = float(rng.uniform(min(x, exact), exact))
        hi = float(rng.uniform(exact, max(y, exact)))
        out.append(KnowledgeSentence(op, i, lo, hi, exact))
    return out


def generate_puzzles(cfg: GameConfig, count: int, game: Optional[Game] = None,
                     max_attempts: Optional[int] = None) -> Tuple[List[Puzzle], int]:
    """``count`` accepted puzzles and the number of attempts used."""
    game = game or Game(cfg.pegs, cfg.colors)
    out: List[Puzzle] = []
    attempt = 0
    limit = max_attempts if max_attempts is not None else 50 * count + 100
    while len(out) < count and attempt < limit:
        pz = generate_puzzle(cfg, puzzle_rng(cfg.seed, attempt), game, pid=len(out))
        attempt += 1
        if pz is not None:
            out.append(pz)
    return out, attempt


# -- ground truth ------------------------------------------------------------------

def lie_assignments(game: Game, puzzle: Puzzle) -> np.ndarray:
    """``(N, K)`` boolean matrix: row c holds the lie assignment implied by code c."""
    K = puzzle.K
    out = np.zeros((game.N, K), dtype=bool)
    for i, r in enumerate(puzzle.board):
        g = game.index(r.guess)
        out[:, i] = game.table[g] != game.encode(r.feedback)
    return out


def code_scores(game: Game, puzzle: Puzzle, probs: Optional[Sequence[float]] = None) -> np.ndarray:
    p = np.asarray(puzzle.lie_probs if probs is None else probs, dtype=float)
    A = lie_assignments(game, puzzle)
    return np.prod(np.where(A, p, 1.0 - p), axis=1)


def ground_truth_map(puzzle: Puzzle, game: Optional[Game] = None) -> List[int]:
    """Indices of the codes with the largest probability under the true lie probabilities."""
    game = game or Game(puzzle.pegs, puzzle.colors)
    s = code_scores(game, puzzle)
    return argmax_indices(s)


def argmax_indices(scores: np.ndarray, rtol: float = 1e-9) -> List[int]:
    """Ties within a relative tolerance; products over long boards get tiny but stay exact."""
    best = float(scores.max())
    return [int(i) for i in np.flatnonzero(scores >= best - rtol * abs(best))]


# -- methods ----------------------------------------------------------------------------

def method_program(puzzle: Puzzle, method: str) -> str:
    """LCN text used by ``method``."""
    lines = []
    for i, (lo, hi) in enumerate(puzzle.priors):
        if method == "bayes-midpoint":
            mid = 0.5 * (lo + hi)
            lines.append(f"P(l{i + 1}) = {mid!r}")
        else:
            lines.append(f"{lo!r} <= P(l{i + 1}) <= {hi!r}")
    if method.startswith("lcn") or method.startswith("nilsson"):
        for k in puzzle.knowledge:
            lines.append(f"{k.lo!r} <= P({k.formula}) <= {k.hi!r} ; tau=false")
    return "\n".join(lines) + "\n"


def method_codes(puzzle: Puzzle, method: str, game: Optional[Game] = None,
                 config: Optional[SolverConfig] = None) -> List[int]:
    """Codes selected by ``method`` (the full tie set)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    game = game or Game(puzzle.pegs, puzzle.colors)
    cfg = config or SolverConfig(starts=4)
    A = lie_assignments(game, puzzle)
    keys = [tuple(bool(v) for v in row) for row in A]
    uniq = list(dict.fromkeys(keys))
    gp = ground(parse_program(method_program(puzzle, method)))
    atoms = tuple(f"l{i + 1}" for i in range(puzzle.K))
    if method == "bayes-midpoint":
        crit, mode = "maximin", "markov"
    else:
        crit = method.split("-", 1)[1]
        mode = "no-markov" if method.startswith("nilsson") else "markov"
    if mode == "no-markov":
        scores = {}
        for a in uniq:
            q = Query("marginal", _conj(atoms, a))
            r = query_interval(gp, q, "no-markov", cfg, lp_backend=True)
            scores[a] = r.lower
        best = set(argmax_set(scores))
    else:
        res = map_assignment(gp, MapTask(atoms, crit), cfg, candidates=uniq, method="factored")
        best = set(res.argmax)
    return [i for i, k in enumerate(keys) if k in best]


def _conj(atoms, values):
    from .map_inference import assignment_formula
    return assignment_formula(atoms, values)


@dataclass
class MethodScore:
    any_of_tie: float
    first_of_tie: float


def evaluate_puzzles(puzzles: Sequence[Puzzle], methods: Sequence[str],
                     game: Optional[Game] = None,
                     config: Optional[SolverConfig] = None) -> Dict[str, MethodScore]:
    """Accuracy of each method on one puzzle set.

    ``any_of_tie`` counts a puzzle when the method's tie set meets the ground
    truth set; ``first_of_tie`` uses only the lowest-index code of each set.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if not puzzles:
        return {m: MethodScore(0.0, 0.0) for m in methods}
    game = game or Game(puzzles[0].pegs, puzzles[0].colors)
    hits = {m: [0, 0] for m in methods}
    for pz in puzzles:
        truth = set(ground_truth_map(pz, game))
        for m in methods:
            chosen = method_codes(pz, m, game, config)
            hits[m][0] += bool(truth & set(chosen))
            hits[m][1] += chosen[0] in truth
    n = len(puzzles)
    return {m: MethodScore(a / n, f / n) for m, (a, f) in hits.items()}


def evaluate_methods(seeds: Sequence[int], methods: Sequence[str], cfg: GameConfig,
                     count: int, config: Optional[SolverConfig] = None) -> dict:
    """Per-seed accuracies plus mean and standard deviation across seeds."""
    game = Game(cfg.pegs, cfg.colors)
    per_seed = {}
    for s in seeds:
        c = GameConfig(cfg.pegs, cfg.colors, cfg.knuth_runs, cfg.prior_range, s,
                       cfg.fixed_priors, cfg.max_rounds)
        puzzles, _ = generate_puzzles(c, count, game)
        per_seed[s] = evaluate_puzzles(puzzles, methods, game, config)
    return summarize(per_seed, methods)


def summarize(per_seed: Dict[int, Dict[str, MethodScore]], methods: Sequence[str]) -> dict:
    out = {"seeds": [int(s) for s in per_seed], "methods": {}}
    for m in methods:
        any_ = [per_seed[s][m].any_of_tie for s in per_seed]
        first = [per_seed[s][m].first_of_tie for s in per_seed]
        out["methods"][m] = {
            "per_seed": any_,
            "mean": statistics.fmean(any_),
            "stdev": statistics.stdev(any_) if len(any_) > 1 else 0.0,
            "first_of_tie_mean": statistics.fmean(first),
        }
    return out


# -- files -------------------------------------------------------------------------

def write_puzzles(puzzles: Sequence[Puzzle], directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "puzzles.jsonl", "w", encoding="utf-8") as fh:
        for pz in puzzles:
            fh.write(json.dumps(pz.to_json(), sort_keys=True) + "\n")
    with open(d / "hidden.jsonl", "w", encoding="utf-8") as fh:
        for pz in puzzles:
            fh.write(json.dumps({"id": pz.id, "hidden": list(pz.hidden)}) + "\n")


def read_puzzles(directory) -> List[Puzzle]:
    d = Path(directory)
    hidden = {}
    if (d / "hidden.jsonl").exists():
        for line in open(d / "hidden.jsonl", encoding="utf-8"):
            rec = json.loads(line)
            hidden[rec["id"]] = tuple(rec["hidden"])
    out = []
    for line in open(d / "puzzles.jsonl", encoding="utf-8"):
        rec = json.loads(line)
        board = [Row(tuple(r["guess"]), tuple(r["feedback"])) for r in rec["board"]]
        know = []
        for i, k in enumerate(rec["knowledge"]):
            op = "and" if " and " in k["formula"] else "or"
            p = rec["lie_probs"]
            exact = p[i] * p[i + 1] if op == "and" else p[i] + p[i + 1] - p[i] * p[i + 1]
            know.append(KnowledgeSentence(op, i, k["lo"], k["hi"], exact))
        out.append(Puzzle(rec["id"], rec["pegs"], rec["colors"], board,
                          hidden.get(rec["id"], ()), rec["lie_probs"],
                          [tuple(p) for p in rec["priors"]], know))
    return out
