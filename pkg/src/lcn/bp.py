"""Interval belief propagation on the factor graph of a ground program.

Sentences over the same atom set form one factor.  Messages are probability
intervals.  A variable forwards the intersection of what its other factors
told it; a factor answers by solving a small constraint program over its own
atoms, with the incoming intervals as marginal bounds on the other atoms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .depgraph import IndependenceStatement, build_dependency_graph, markov_statements
from .errors import InconsistencyError
from .exact import build_linear_constraints, build_markov_constraints
from .model import Atom, GroundProgram, Sentence, sentence_atoms
from .solver import NLP, LinearConstraint, Objective, SolverConfig, solve

log = logging.getLogger(__name__)

CROSS_TOL = 1e-6


@dataclass(frozen=True)
class IntervalMessage:
    l: float
    u: float

    def __iter__(self):
        yield self.l
        yield self.u


FULL = IntervalMessage(0.0, 1.0)


@dataclass(frozen=True)
class Factor:
    name: str
    atoms: Tuple[str, ...]
    sentences: Tuple[Sentence, ...]


@dataclass
class FactorGraph:
    variables: Tuple[str, ...]
    factors: Tuple[Factor, ...]

    def __post_init__(self):
        self.var_factors: Dict[str, List[str]] = {v: [] for v in self.variables}
        self.by_name = {f.name: f for f in self.factors}
        for f in self.factors:
            for v in f.atoms:
                self.var_factors[v].append(f.name)

    def degree(self, v: str) -> int:
        return len(self.var_factors[v])

    def edges(self) -> List[Tuple[str, str]]:
        return [(v, f.name) for f in self.factors for v in f.atoms]


def build_factor_graph(gp: GroundProgram) -> FactorGraph:
    """Group sentences by the set of atoms they mention, in order of first appearance."""
    order = {a: i for i, a in enumerate(gp.atom_names)}
    groups: Dict[FrozenSet[str], List[Sentence]] = {}
    for s in gp.sentences:
        groups.setdefault(sentence_atoms(s), []).append(s)
    factors = []
    for k, (key, sents) in enumerate(groups.items(), 1):
        atoms = tuple(sorted(key, key=order.__getitem__))
        factors.append(Factor(f"f{k}", atoms, tuple(sents)))
    return FactorGraph(tuple(gp.atom_names), tuple(factors))


def variable_to_factor(fg: FactorGraph, v: str, f: str,
                       inbox: Dict[Tuple[str, str], IntervalMessage]) -> IntervalMessage:
    """Intersection of the messages from ``v``'s other factors ([0,1] if none)."""
    l, u = 0.0, 1.0
    for g in fg.var_factors[v]:
        if g == f:
            continue
        m = inbox.get((g, v), FULL)
        l, u = max(l, m.l), min(u, m.u)
    return _checked(l, u, v)


def _checked(l: float, u: float, node: str) -> IntervalMessage:
    if l > u + CROSS_TOL:
        raise InconsistencyError(f"crossed interval [{l:.6g}, {u:.6g}] at {node}", node)
    if l > u:
        l = u = 0.5 * (l + u)
    return IntervalMessage(float(l), float(u))


class _LocalProgram:
    """The fixed part of a factor's local program: its sentences and independences."""

    def __init__(self, factor: Factor, target: str):
        self.atoms = list(factor.atoms)
        self.index = {a: i for i, a in enumerate(self.atoms)}
        self.n = len(self.atoms)
        self.target = target
        self.others = [a for a in self.atoms if a != target]
        local = GroundProgram([Atom(a, (), i) for i, a in enumerate(self.atoms)],
                              list(factor.sentences), [])
        self.linear = build_linear_constraints(local)
        g = build_dependency_graph(local)
        stmts = list(markov_statements(g))
        for i, a in enumerate(self.others):
            for b in self.others[i + 1:]:
                directed = (a in g.parents(b)) != (b in g.parents(a))
                if not directed:
                    stmts.append(IndependenceStatement(a, frozenset(), frozenset({b})))
        self.quadratic = [q for _, q in build_markov_constraints(stmts, self.index, self.n)]
        self.target_row = self._atom_row(target)

    def _atom_row(self, a: str) -> np.ndarray:
        w = np.arange(2**self.n)
        return ((w >> self.index[a]) & 1).astype(float)

    def nlp(self, incoming: Dict[str, IntervalMessage]) -> NLP:
        rows = list(self.linear)
        for a in self.others:
            m = incoming[a]
            row = self._atom_row(a)
            if m.l > 0:
                rows.append(LinearConstraint(row, ">=", m.l, f"msg:{a}:lower"))
            if m.u < 1:
                rows.append(LinearConstraint(row, "<=", m.u, f"msg:{a}:upper"))
        return NLP(2**self.n, Objective.linear(self.target_row), tuple(rows), tuple(self.quadratic))


@dataclass
class BPConfig:
    max_rounds: int = 100
    tol: float = 1e-6
    local_starts: int = 8
    solver: SolverConfig = field(default_factory=SolverConfig)


class _FactorSolver:
    def __init__(self, fg: FactorGraph, cfg: BPConfig):
        self.fg = fg
        self.cfg = cfg
        self.programs: Dict[Tuple[str, str], _LocalProgram] = {}
        self.cache: Dict[tuple, IntervalMessage] = {}
        self.solver_cfg = SolverConfig(**{**self.cfg.solver.__dict__, "starts": cfg.local_starts})
        self.reports: List = []

    def message(self, f: str, v: str, inbox: Dict[Tuple[str, str], IntervalMessage]) -> IntervalMessage:
        factor = self.fg.by_name[f]
        incoming = {a: inbox.get((a, f), FULL) for a in factor.atoms if a != v}
        key = (f, v, tuple((a, m.l, m.u) for a, m in incoming.items()))
        if key in self.cache:
            return self.cache[key]
        prog = self.programs.get((f, v))
        if prog is None:
            prog = self.programs[(f, v)] = _LocalProgram(factor, v)
        nlp = prog.nlp(incoming)
        lo = solve(nlp, "min", self.solver_cfg)
        hi = solve(nlp, "max", self.solver_cfg)
        self.reports.extend([lo, hi])
        if lo.status == "infeasible" or hi.status == "infeasible":
            raise InconsistencyError(f"local program of {f} is infeasible when messaging {v}", f)
        msg = _checked(lo.value, hi.value, f)
        self.cache[key] = msg
        return msg


def factor_to_variable(fg: FactorGraph, f: str, v: str,
                       inbox: Dict[Tuple[str, str], IntervalMessage],
                       config: Optional[BPConfig] = None) -> IntervalMessage:
    """Bounds on P(v) from ``f``'s sentences and the other atoms' incoming intervals."""
    return _FactorSolver(fg, config or BPConfig()).message(f, v, inbox)


@dataclass
class BPResult:
    intervals: Dict[str, IntervalMessage]
    messages: Dict[Tuple[str, str], IntervalMessage]
    rounds: int
    converged: bool
    trace: List[Dict[Tuple[str, str], IntervalMessage]]
    reports: List = field(default_factory=list)
    # largest amount by which a raw local solve was looser than the previous message
    max_regression: float = 0.0

    def message(self, src: str, dst: str) -> IntervalMessage:
        return self.messages[(src, dst)]


def run_bp(fg: FactorGraph, config: Optional[BPConfig] = None, trace: bool = False) -> BPResult:
    """Synchronous rounds: all variable messages, then all factor messages.

    A factor message is intersected with its previous value, which only
    removes numerical noise since exact local bounds are monotone in the
    incoming intervals.  Stops when no message moves by ``tol`` or after ``max_rounds``.  The
    answer for an atom intersects the messages of all its factors.
    """
    cfg = config or BPConfig()
    fs = _FactorSolver(fg, cfg)
    msgs: Dict[Tuple[str, str], IntervalMessage] = {}
    for v, f in fg.edges():
        msgs[(v, f)] = FULL
        msgs[(f, v)] = FULL
    history = [dict(msgs)] if trace else []
    rounds = 0
    converged = False
    regression = 0.0
    while rounds < cfg.max_rounds:
        rounds += 1
        new: Dict[Tuple[str, str], IntervalMessage] = {}
        for v, f in fg.edges():
            new[(v, f)] = variable_to_factor(fg, v, f, msgs)
        for v, f in fg.edges():
            m, old = fs.message(f, v, new), msgs[(f, v)]
            # exact local bounds can only tighten as the inputs tighten, so keep the
            # previous message where the numerical solve came out looser
            regression = max(regression, old.l - m.l, m.u - old.u)
            new[(f, v)] = _checked(max(m.l, old.l), min(m.u, old.u), f)
        delta = max((max(abs(new[k].l - msgs[k].l), abs(new[k].u - msgs[k].u)) for k in new),
                    default=0.0)
        msgs = new
        if trace:
            history.append(dict(msgs))
        if delta < cfg.tol:
            converged = True
            break
    intervals = {}
    for v in fg.variables:
        l, u = 0.0, 1.0
        for f in fg.var_factors[v]:
            m = msgs[(f, v)]
            l, u = max(l, m.l), min(u, m.u)
        intervals[v] = _checked(l, u, v)
    if regression > CROSS_TOL:
        log.debug("local solves loosened a message by up to %.3g", regression)
    return BPResult(intervals, msgs, rounds, converged, history, fs.reports, regression)


def bp_query(gp: GroundProgram, query_atom: str, config: Optional[BPConfig] = None) -> IntervalMessage:
    fg = build_factor_graph(gp)
    if query_atom not in fg.variables:
        raise KeyError(query_atom)
    return run_bp(fg, config).intervals[query_atom]
