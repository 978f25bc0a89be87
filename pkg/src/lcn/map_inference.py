"""MAP assignments under the maximax, maximin and maxent criteria."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .depgraph import build_dependency_graph
from .errors import CapacityError, GroundingError
from .exact import (
    FactoredProgram, compile_program, factored_maxent, factored_query_interval, query_interval,
    query_maxent,
)
from .model import Formula, GroundProgram, atom, conj, literal, truth_table
from .parser import Query
from .solver import SolverConfig

CRITERIA = ("maximax", "maximin", "maxent")
MAX_QUERY_ATOMS = 20
TIE_RTOL = 1e-9

Assignment = Tuple[bool, ...]


@dataclass(frozen=True)
class MapTask:
    atoms: Tuple[str, ...]
    criterion: str = "maximin"
    evidence: Optional[Formula] = None

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a MAP task needs at least one query atom")
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")


@dataclass
class MapResult:
    criterion: str
    atoms: Tuple[str, ...]
    argmax: List[Assignment]
    scores: Dict[Assignment, float]
    intervals: Dict[Assignment, Tuple[float, float]] = field(default_factory=dict)

    @property
    def first(self) -> Assignment:
        """Deterministic single choice: the lexicographically first maximiser."""
        return self.argmax[0]

    def to_json(self) -> dict:
        def name(a):
            return ",".join(f"{k}={int(v)}" for k, v in zip(self.atoms, a))
        return {
            "criterion": self.criterion,
            "atoms": list(self.atoms),
            "argmax": [{k: bool(v) for k, v in zip(self.atoms, a)} for a in self.argmax],
            "scores": {name(a): float(s) for a, s in self.scores.items()},
        }


def assignment_formula(atoms: Sequence[str], values: Assignment) -> Formula:
    return conj(*(literal(atom(a), v) for a, v in zip(atoms, values)))


def argmax_set(scores: Dict[Assignment, float], rtol: float = TIE_RTOL) -> List[Assignment]:
    """All assignments whose score ties the best, in lexicographic order."""
    best = max(scores.values())
    cut = best - rtol * max(1.0, abs(best))
    return sorted(a for a, s in scores.items() if s >= cut)


def _atom_formulas(gp: GroundProgram, atoms: Sequence[str]) -> List[str]:
    known = set(gp.atom_names)
    for a in atoms:
        if a not in known:
            raise GroundingError(f"unknown query atom {a!r}")
    return list(atoms)


def map_assignment(gp: GroundProgram, task: MapTask, config: Optional[SolverConfig] = None,
                   candidates: Optional[Sequence[Assignment]] = None, method: str = "auto",
                   mode: str = "markov") -> MapResult:
    """Score every assignment of the query atoms and return the maximisers.

    ``method`` is ``exact`` (full joint), ``factored`` (independent atoms) or
    ``auto``, which picks the factored path when the dependency graph has no
    edges.  ``candidates`` restricts the scored assignments.
    """
    cfg = config or SolverConfig()
    atoms = _atom_formulas(gp, task.atoms)
    if len(atoms) > MAX_QUERY_ATOMS:
        raise CapacityError(f"{len(atoms)} query atoms exceeds the enumeration cap of {MAX_QUERY_ATOMS}")
    if candidates is None:
        candidates = list(itertools.product((False, True), repeat=len(atoms)))
    else:
        candidates = list(dict.fromkeys(tuple(bool(v) for v in c) for c in candidates))
    if method == "auto":
        method = "exact" if build_dependency_graph(gp).has_edges() else "factored"
    if method == "factored" and mode == "no-markov":
        method = "exact"
    if method not in ("exact", "factored"):
        raise ValueError(f"unknown method {method!r}")

    scores: Dict[Assignment, float] = {}
    intervals: Dict[Assignment, Tuple[float, float]] = {}
    if task.criterion == "maxent":
        scores = _maxent_scores(gp, atoms, candidates, task.evidence, cfg, method, mode)
    else:
        if method == "exact":
            program = compile_program(gp, markov=(mode == "markov"))
        else:
            fp = FactoredProgram(gp)
            side = ("upper",) if task.criterion == "maximax" else ("lower",)
        for a in candidates:
            q = Query("marginal" if task.evidence is None else "conditional",
                      assignment_formula(atoms, a), task.evidence)
            if method == "factored":
                r = factored_query_interval(gp, q, cfg, program=fp, sides=side)
            else:
                r = query_interval(gp, q, mode, cfg, program=program)
            intervals[a] = (r.lower, r.upper)
            scores[a] = r.upper if task.criterion == "maximax" else r.lower
    return MapResult(task.criterion, tuple(atoms), argmax_set(scores), scores, intervals)


def _maxent_scores(gp, atoms, candidates, evidence, cfg, method, mode):
    n = len(gp.atom_names)
    idx = gp.index
    if method == "factored":
        m = factored_maxent(gp, cfg)
        cols = np.array([idx[a] for a in atoms])
        if evidence is None:
            return {a: float(np.prod(np.where(a, m[cols], 1 - m[cols]))) for a in candidates}
        w = np.arange(2**n)
        bits = ((w[:, None] >> np.arange(n)) & 1).astype(bool)
        p = np.prod(np.where(bits, m, 1 - m), axis=1)
    else:
        p = query_maxent(gp, cfg, mode=mode).p
        w = np.arange(2**n)
        bits = ((w[:, None] >> np.arange(n)) & 1).astype(bool)
    e = truth_table(evidence, idx, n) if evidence is not None else np.ones(2**n, dtype=bool)
    den = float(p[e].sum())
    if den <= 1e-12:
        from .errors import UndefinedConditionalError
        raise UndefinedConditionalError("the evidence has probability zero under the maxent model")
    cols = [idx[a] for a in atoms]
    out = {}
    for a in candidates:
        mask = e.copy()
        for c, v in zip(cols, a):
            mask &= bits[:, c] if v else ~bits[:, c]
        out[a] = float(p[mask].sum()) / den
    return out
