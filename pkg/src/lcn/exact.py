"""Exact inference over the full joint distribution of a ground program.

The decision vector holds one probability per world.  Sentence bounds become
linear rows, the independences implied by the dependency graph become
bilinear equalities, and each query is answered by minimising and
maximising its probability over the resulting feasible set.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .depgraph import IndependenceStatement, build_dependency_graph, markov_statements
from .errors import (
    GroundingError, InfeasibleError, PreconditionError, UndefinedConditionalError,
)
from .model import (
    MAX_ATOMS, Formula, GroundProgram, Sentence, atoms_in_order, canonical, conj,
    truth_table,
)
from .parser import Query, parse_query
from .solver import (
    NLP, LinearConstraint, Objective, QuadraticConstraint, SolveReport, SolverConfig,
    residual, solve,
)

log = logging.getLogger(__name__)

UNDEFINED_EPS = 1e-9


@dataclass
class ConstraintProgram:
    """The joint-distribution program of a ground LCN, without an objective."""

    nlp: NLP
    atoms: List[str]
    index: Dict[str, int]
    sentence_rows: Dict[str, Tuple[int, ...]]
    markov_rows: List[Tuple[IndependenceStatement, Tuple[int, ...]]]

    @property
    def n(self) -> int:
        return len(self.atoms)

    def indicator(self, f: Formula) -> np.ndarray:
        return truth_table(f, self.index, self.n).astype(float)


@dataclass
class IntervalResult:
    query: str
    lower: float
    upper: float
    mode: str
    status: Dict[str, str]
    atoms: List[str]
    reports: Dict[str, Optional[SolveReport]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "lower": float(self.lower),
            "upper": float(self.upper),
            "mode": self.mode,
            "status": dict(self.status),
            "atoms": list(self.atoms),
        }


# -- compilation ----------------------------------------------------------------

def world_bits(n: int) -> np.ndarray:
    """``(2**n, n)`` boolean matrix; row ``w`` holds the atom values of world ``w``."""
    if n > MAX_ATOMS:
        from .errors import CapacityError
        raise CapacityError(f"{n} atoms exceeds the world-enumeration cap of {MAX_ATOMS}")
    w = np.arange(2**n, dtype=np.int64)
    return ((w[:, None] >> np.arange(n)) & 1).astype(bool)


def build_linear_constraints(gp: GroundProgram) -> List[LinearConstraint]:
    """Two rows per sentence: the lower and the upper bound.

    Conditional bounds are multiplied through by P(r), so they stay linear and
    remain valid when P(r) = 0.  Rows that every distribution satisfies are
    kept and flagged ``vacuous``.
    """
    idx, n = gp.index, len(gp.atoms)
    rows = []
    for s in gp.sentences:
        q = truth_table(s.q, idx, n)
        if s.r is None:
            v = q.astype(float)
            rows.append(LinearConstraint(v, ">=", s.lower, f"{s.label}:lower", s.lower <= 0.0))
            rows.append(LinearConstraint(v, "<=", s.upper, f"{s.label}:upper", s.upper >= 1.0))
        else:
            r = truth_table(s.r, idx, n).astype(float)
            qr = (q & (r > 0)).astype(float)
            rows.append(LinearConstraint(qr - s.lower * r, ">=", 0.0, f"{s.label}:lower",
                                         s.lower <= 0.0))
            rows.append(LinearConstraint(qr - s.upper * r, "<=", 0.0, f"{s.label}:upper",
                                         s.upper >= 1.0))
    return rows


def _config_mask(bits: np.ndarray, cols: Sequence[int], values: Sequence[bool]) -> np.ndarray:
    m = np.ones(bits.shape[0], dtype=bool)
    for c, v in zip(cols, values):
        m &= bits[:, c] if v else ~bits[:, c]
    return m


def build_markov_constraints(stmts: Sequence[IndependenceStatement], index: Dict[str, int],
                             n: int) -> List[Tuple[IndependenceStatement, QuadraticConstraint]]:
    """Bilinear equalities ``P(x,pi) P(pi,nu) = P(x,pi,nu) P(pi)``.

    Emitted for every configuration ``pi`` of the given set and every
    configuration ``nu`` of the independent set except all-false, with ``x``
    true.  Identical equalities arising from different statements (for
    example the two directions of a marginal independence) are emitted once.
    """
    bits = world_bits(n)
    out = []
    seen = set()
    for st in stmts:
        pcols = sorted(index[a] for a in st.given)
        ncols = sorted(index[a] for a in st.independent_of)
        if not ncols:
            continue
        xcol = bits[:, index[st.x]]
        for pv in itertools.product((False, True), repeat=len(pcols)):
            pi = _config_mask(bits, pcols, pv)
            x_pi = xcol & pi
            for nv in itertools.product((False, True), repeat=len(ncols)):
                if not any(nv):
                    continue
                pi_nu = pi & _config_mask(bits, ncols, nv)
                x_pi_nu = x_pi & pi_nu
                key = frozenset((
                    frozenset((np.packbits(x_pi).tobytes(), np.packbits(pi_nu).tobytes())),
                    frozenset((np.packbits(x_pi_nu).tobytes(), np.packbits(pi).tobytes())),
                ))
                if key in seen:
                    continue
                seen.add(key)
                label = f"{st.x}|{''.join('1' if v else '0' for v in pv)}|{''.join('1' if v else '0' for v in nv)}"
                out.append((st, QuadraticConstraint(
                    ((1.0, x_pi.astype(float), pi_nu.astype(float)),
                     (-1.0, x_pi_nu.astype(float), pi.astype(float))),
                    label=label)))
    return out


def compile_program(gp: GroundProgram, markov: bool = True) -> ConstraintProgram:
    n = len(gp.atoms)
    lin = build_linear_constraints(gp)
    rows: Dict[str, Tuple[int, ...]] = {}
    for i, s in enumerate(gp.sentences):
        rows[s.label] = (2 * i, 2 * i + 1)
    quads: List[Tuple[IndependenceStatement, QuadraticConstraint]] = []
    if markov:
        g = build_dependency_graph(gp)
        quads = build_markov_constraints(markov_statements(g), gp.index, n)
    by_stmt: Dict[IndependenceStatement, List[int]] = {}
    for k, (st, _) in enumerate(quads):
        by_stmt.setdefault(st, []).append(k)
    nlp = NLP(2**n, Objective.linear(np.zeros(2**n)), tuple(lin), tuple(q for _, q in quads))
    return ConstraintProgram(nlp, gp.atom_names, gp.index, rows,
                             [(st, tuple(v)) for st, v in by_stmt.items()])


# -- queries ----------------------------------------------------------------------

QueryLike = Union[str, Query]


def resolve_query(gp: GroundProgram, query: QueryLike) -> Query:
    """Parse (if needed) and ground a query against ``gp``."""
    if isinstance(query, str):
        query = parse_query(query)
    q = gp.ground_formula(query.q)
    e = gp.ground_formula(query.e) if query.e is not None else None
    return Query(query.kind, q, e)


def query_objective(cp: ConstraintProgram, query: Query) -> Objective:
    if query.e is None:
        return Objective.linear(cp.indicator(query.q))
    e = cp.indicator(query.e)
    return Objective.ratio(cp.indicator(query.q) * e, e, UNDEFINED_EPS)


def _check_feasible(lo: SolveReport, hi: SolveReport, what: str):
    if lo.status == "infeasible" and hi.status == "infeasible":
        raise InfeasibleError(
            f"no distribution satisfies the program ({what}); "
            f"smallest residual {min(lo.max_residual, hi.max_residual):.3g}")


def query_interval(gp: GroundProgram, query: QueryLike, mode: str = "markov",
                   config: Optional[SolverConfig] = None, program: Optional[ConstraintProgram] = None,
                   samples: int = 0, lp_backend: bool = False) -> IntervalResult:
    """Lower and upper probability of a marginal or conditional query.

    ``mode="no-markov"`` drops every independence constraint.  With
    ``samples > 0`` uniformly sampled feasible distributions widen the
    interval whenever they fall outside it.  ``lp_backend`` answers
    no-markov marginal queries with an exact linear program instead.
    """
    if mode not in ("markov", "no-markov"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = config or SolverConfig()
    q = resolve_query(gp, query)
    cp = program or compile_program(gp, markov=(mode == "markov"))
    nlp = cp.nlp if mode == "markov" else cp.nlp.without_quadratic()
    if lp_backend and mode == "no-markov" and q.e is None:
        return _lp_interval(cp, nlp, q, str(query))
    obj = query_objective(cp, q)
    nlp = nlp.with_objective(obj)
    lo = solve(nlp, "min", cfg)
    hi = solve(nlp, "max", cfg)
    _check_feasible(lo, hi, str(query))
    if q.e is not None:
        den = cp.indicator(q.e)
        attained = max((float(den @ r.point) for r in (lo, hi) if r.status != "infeasible"),
                       default=0.0)
        if attained <= UNDEFINED_EPS:
            top = solve(nlp.with_objective(Objective.linear(den)), "max", cfg)
            if top.status == "infeasible" or top.value <= UNDEFINED_EPS:
                raise UndefinedConditionalError(
                    f"the evidence of {query} has probability zero in every model")
    lower, upper = lo.value, hi.value
    if samples > 0:
        vals = sample_feasible_values(nlp, samples, cfg.seed, cfg.tol_feas)
        if len(vals):
            lower = min(lower, float(vals.min()))
            upper = max(upper, float(vals.max()))
    return IntervalResult(str(query) if not isinstance(query, Query) else _qstr(query),
                          float(lower), float(upper), mode,
                          {"lower": lo.status, "upper": hi.status}, list(cp.atoms),
                          {"lower": lo, "upper": hi})


def _qstr(q: Query) -> str:
    return str(q)


def sample_feasible_values(nlp: NLP, count: int, seed: int, tol: float) -> np.ndarray:
    """Objective values at uniformly sampled simplex points that satisfy ``nlp``."""
    rng = np.random.default_rng(seed + 7919)
    vals = []
    for _ in range(count):
        p = rng.dirichlet(np.ones(nlp.dimension))
        if residual(nlp, p) <= tol:
            vals.append(nlp.objective.value(p))
    return np.asarray(vals)


def _lp_interval(cp: ConstraintProgram, nlp: NLP, q: Query, label: str) -> IntervalResult:
    from scipy.optimize import linprog

    m = nlp.dimension
    A_ub, b_ub = [], []
    for c in nlp.linear:
        if c.relation == "<=":
            A_ub.append(c.coeffs)
            b_ub.append(c.rhs)
        elif c.relation == ">=":
            A_ub.append(-c.coeffs)
            b_ub.append(-c.rhs)
    A_eq = [np.ones(m)] + [c.coeffs for c in nlp.linear if c.relation == "=="]
    b_eq = [1.0] + [c.rhs for c in nlp.linear if c.relation == "=="]
    obj = cp.indicator(q.q)
    out = {}
    for name, sign in (("lower", 1.0), ("upper", -1.0)):
        res = linprog(sign * obj, A_ub=np.array(A_ub) if A_ub else None,
                      b_ub=np.array(b_ub) if b_ub else None, A_eq=np.array(A_eq),
                      b_eq=np.array(b_eq), bounds=(0, 1), method="highs")
        if res.status == 2:
            raise InfeasibleError(f"no distribution satisfies the program ({label})")
        p = np.clip(res.x, 0, None)
        p /= p.sum()
        out[name] = SolveReport(float(obj @ p), p, "converged" if res.success else "max-iterations",
                                residual(nlp, p), 1, [])
    return IntervalResult(label, out["lower"].value, out["upper"].value, "no-markov",
                          {k: v.status for k, v in out.items()}, list(cp.atoms), out)


# -- maximum entropy ----------------------------------------------------------------

@dataclass
class MaxentResult:
    p: np.ndarray
    atoms: List[str]
    index: Dict[str, int]
    report: SolveReport

    def probability(self, f: Formula, given: Optional[Formula] = None) -> float:
        n = len(self.atoms)
        q = truth_table(f, self.index, n)
        if given is None:
            return float(self.p[q].sum())
        e = truth_table(given, self.index, n)
        den = float(self.p[e].sum())
        if den <= UNDEFINED_EPS:
            raise UndefinedConditionalError("conditioning event has probability zero")
        return float(self.p[q & e].sum()) / den


def query_maxent(gp: GroundProgram, config: Optional[SolverConfig] = None,
                 mode: str = "markov", program: Optional[ConstraintProgram] = None) -> MaxentResult:
    """The feasible joint distribution with the largest entropy."""
    cfg = config or SolverConfig()
    cp = program or compile_program(gp, markov=(mode == "markov"))
    nlp = cp.nlp if mode == "markov" else cp.nlp.without_quadratic()
    rep = solve(nlp.with_objective(Objective.negentropy()), "min", cfg)
    if rep.status == "infeasible":
        raise InfeasibleError("no distribution satisfies the program")
    return MaxentResult(rep.point, list(cp.atoms), dict(cp.index), rep)


# -- factored fast path -------------------------------------------------------------

class _Multilinear:
    """Several formulas evaluated together as multilinear polynomials of atom marginals.

    Each satisfying local world of each formula becomes one row of a padded
    matrix of (column, polarity) pairs; padding points at a constant-one slot.
    """

    def __init__(self, formulas: Sequence[Formula], index: Dict[str, int], n: int):
        self.n = n
        self.k = len(formulas)
        locals_ = []
        for f in formulas:
            keys = atoms_in_order(f)
            tt = truth_table(f, {a: i for i, a in enumerate(keys)}, len(keys))
            locals_.append(([index[a] for a in keys], np.flatnonzero(tt)))
        width = max([len(c) for c, _ in locals_] + [1])
        cols, pos, owner = [], [], []
        for k, (c, worlds) in enumerate(locals_):
            pad = width - len(c)
            for w in worlds:
                cols.append(c + [n] * pad)
                pos.append([bool(w >> j & 1) for j in range(len(c))] + [True] * pad)
                owner.append(k)
        self.cols = np.array(cols, dtype=int).reshape(len(cols), width)
        self.pos = np.array(pos, dtype=bool).reshape(len(pos), width)
        self.sgn = np.where(self.pos, 1.0, -1.0)
        self.sgn[self.cols == n] = 0.0
        self.owner = np.array(owner, dtype=int)
        self._flat = (self.owner[:, None] * (n + 1) + self.cols).ravel()

    def _terms(self, m):
        v = np.append(m, 1.0)[self.cols]
        return np.where(self.pos, v, 1.0 - v)

    def value(self, m) -> np.ndarray:
        return np.bincount(self.owner, self._terms(m).prod(axis=1), minlength=self.k)

    def jacobian(self, m) -> np.ndarray:
        t = self._terms(m)
        # product of all other factors via prefix and suffix products (exact at zeros)
        pre = np.ones_like(t)
        pre[:, 1:] = np.cumprod(t[:, :-1], axis=1)
        suf = np.ones_like(t)
        suf[:, :-1] = np.cumprod(t[:, ::-1], axis=1)[:, ::-1][:, 1:]
        J = np.bincount(self._flat, (self.sgn * pre * suf).ravel(), minlength=self.k * (self.n + 1))
        return J.reshape(self.k, self.n + 1)[:, :self.n]


class FactoredProgram:
    """Sentence bounds of an edge-free program as ``A @ poly(m) + b >= 0`` over marginals."""

    def __init__(self, gp: GroundProgram):
        require_edge_free(gp)
        self.gp = gp
        self.n = len(gp.atoms)
        formulas: List[Formula] = []
        slot: Dict[Formula, int] = {}

        def use(f):
            if f not in slot:
                slot[f] = len(formulas)
                formulas.append(f)
            return slot[f]

        rows, b = [], []
        for s in gp.sentences:
            if s.r is None:
                i = use(s.q)
                if s.lower > 0:
                    rows.append({i: 1.0})
                    b.append(-s.lower)
                if s.upper < 1:
                    rows.append({i: -1.0})
                    b.append(s.upper)
            else:
                i, j = use(conj(s.q, s.r)), use(s.r)
                if s.lower > 0:
                    rows.append({i: 1.0, j: -s.lower})
                    b.append(0.0)
                if s.upper < 1:
                    rows.append({i: -1.0, j: s.upper})
                    b.append(0.0)
        self.poly = _Multilinear(formulas, gp.index, self.n) if formulas else None
        self.A = np.zeros((len(rows), len(formulas)))
        for r, row in enumerate(rows):
            for i, c in row.items():
                self.A[r, i] += c
        self.b = np.array(b, dtype=float)
        self.box = _atomic_box_partial(gp)

    def constraints(self, m) -> np.ndarray:
        if self.poly is None:
            return np.zeros(0)
        return self.A @ self.poly.value(m) + self.b

    def jacobian(self, m) -> np.ndarray:
        if self.poly is None:
            return np.zeros((0, self.n))
        return self.A @ self.poly.jacobian(m)

    def violation(self, m) -> float:
        c = self.constraints(m)
        return float(max(0.0, -c.min())) if len(c) else 0.0

    def scipy_constraints(self):
        if not len(self.b):
            return []
        return [{"type": "ineq", "fun": self.constraints, "jac": self.jacobian}]


def _literals(f: Formula):
    """``[(atom key, value)]`` if ``f`` is a conjunction of distinct literals, else None."""
    c = canonical(f)
    parts = c.args if c.op == "and" else (c,)
    out = {}
    for p in parts:
        if p.op == "atom":
            k, v = p.key, True
        elif p.op == "not" and p.args[0].op == "atom":
            k, v = p.args[0].key, False
        else:
            return None
        if out.get(k, v) != v:
            return None
        out[k] = v
    return list(out.items())


def _atomic_box(gp: GroundProgram):
    """Per-atom [lo, hi] when every sentence bounds a single literal unconditionally."""
    n = len(gp.atoms)
    lo, hi = np.zeros(n), np.ones(n)
    for s in gp.sentences:
        lits = _literals(s.q) if s.r is None else None
        if lits is None or len(lits) != 1:
            return None
        (k, v), = lits
        i = gp.index[k]
        l, u = (s.lower, s.upper) if v else (1.0 - s.upper, 1.0 - s.lower)
        lo[i], hi[i] = max(lo[i], l), min(hi[i], u)
    return lo, hi


def require_edge_free(gp: GroundProgram):
    g = build_dependency_graph(gp)
    if g.has_edges():
        raise PreconditionError(
            "the factored fast path needs a dependency graph without edges; "
            "use the full-joint engine (query_interval) instead")


def factored_query_interval(gp: GroundProgram, query: QueryLike,
                            config: Optional[SolverConfig] = None,
                            program: Optional[FactoredProgram] = None,
                            sides: Sequence[str] = ("lower", "upper")) -> IntervalResult:
    """Query bounds when all atoms are mutually independent.

    The decision variables are the atom marginals.  Box-only programs with a
    literal-conjunction query are answered in closed form; everything else
    goes to a multi-start SLSQP run.  ``sides`` limits the work to one bound
    (the other is reported as NaN).
    """
    cfg = config or SolverConfig()
    fp = program if program is not None else FactoredProgram(gp)
    q = resolve_query(gp, query)
    label = _qstr(query) if isinstance(query, Query) else str(query)
    box = _atomic_box(gp)
    lits = _literals(q.q) if q.e is None else None
    if box is not None and lits is not None:
        lo, hi = box
        if np.any(lo > hi + cfg.tol_feas):
            raise InfeasibleError(f"crossed marginal bounds ({label})")
        vals = []
        for bound in (0, 1):
            prod = 1.0
            for k, v in lits:
                i = gp.index[k]
                a, b = (lo[i], hi[i]) if v else (1 - hi[i], 1 - lo[i])
                prod *= a if bound == 0 else b
            vals.append(prod)
        st = {"lower": "converged", "upper": "converged"}
        return IntervalResult(label, vals[0], vals[1], "factored", st, gp.atom_names, {})
    return _factored_nlp(fp, q, label, cfg, sides)


def _factored_nlp(fp: FactoredProgram, q: Query, label: str, cfg: SolverConfig,
                  sides: Sequence[str] = ("lower", "upper")) -> IntervalResult:
    from scipy.optimize import minimize

    gp, n = fp.gp, fp.n
    idx = gp.index
    lits = _literals(q.q) if q.e is None else None
    if q.e is None:
        Q = _Multilinear([q.q], idx, n)

        def f(m):
            return float(Q.value(m)[0])

        def fg(m):
            return Q.jacobian(m)[0]
    else:
        QE = _Multilinear([conj(q.q, q.e), q.e], idx, n)

        def f(m):
            a, d = QE.value(m)
            return float(a / max(d, UNDEFINED_EPS))

        def fg(m):
            (a, d), J = QE.value(m), QE.jacobian(m)
            d = max(d, UNDEFINED_EPS)
            return (J[0] * d - J[1] * a) / d**2

    cons = fp.scipy_constraints()
    box = fp.box
    bounds = list(zip(box[0], box[1]))
    rng = np.random.default_rng(cfg.seed)
    starts = [np.clip(np.full(n, 0.5), box[0], box[1])]
    # the box corner favoured by the literals is often optimal
    if lits is not None:
        for want in (0, 1):
            x = (box[0] + box[1]) / 2
            for k, v in lits:
                i = idx[k]
                x[i] = box[1][i] if (v == bool(want)) else box[0][i]
            starts.append(x)
    while len(starts) < max(cfg.starts, 2):
        starts.append(rng.uniform(box[0], box[1]))

    if lits is not None:
        # log of a product of literals is separable and better scaled
        cols = np.array([idx[k] for k, _ in lits])
        pos = np.array([v for _, v in lits])
        sg = np.where(pos, 1.0, -1.0)

        def base(m):
            t = np.maximum(np.where(pos, m[cols], 1 - m[cols]), 1e-12)
            return float(np.sum(np.log(t))), t

        def make(sign):
            def obj(m):
                return sign * base(m)[0]

            def jac(m):
                g = np.zeros(n)
                g[cols] = sign * sg / base(m)[1]
                return g
            return obj, jac
    else:
        def make(sign):
            return (lambda m: sign * f(m)), (lambda m: sign * fg(m))

    out = {}
    for name, sign in (("lower", 1.0), ("upper", -1.0)):
        if name not in sides:
            continue
        obj, jac = make(sign)
        best = None
        for x0 in starts:
            try:
                with warnings.catch_warnings():
                    # SLSQP clips its own overshoots back into the box
                    warnings.simplefilter("ignore", RuntimeWarning)
                    res = minimize(obj, x0, jac=jac, method="SLSQP", bounds=bounds,
                                   constraints=cons,
                                   options={"maxiter": cfg.max_iter, "ftol": 1e-12})
                x = np.clip(res.x, 0.0, 1.0)
            except (ValueError, FloatingPointError):  # pragma: no cover - scipy edge cases
                continue
            r = fp.violation(x)
            v = f(x)
            cand = (r <= cfg.tol_feas, -sign * v if r <= cfg.tol_feas else -r)
            if best is None or cand > best[0]:
                best = (cand, v, x, r)
        if best is None or best[3] > cfg.infeasible_tol:
            raise InfeasibleError(f"no marginals satisfy the program ({label})")
        status = "converged" if best[3] <= cfg.tol_feas else "max-iterations"
        out[name] = SolveReport(best[1], best[2], status, best[3], len(starts), [])
    nan = float("nan")
    return IntervalResult(label, out["lower"].value if "lower" in out else nan,
                          out["upper"].value if "upper" in out else nan, "factored",
                          {k: out[k].status if k in out else "skipped" for k in ("lower", "upper")},
                          gp.atom_names, out)


def _atomic_box_partial(gp: GroundProgram):
    """Per-atom bounds implied by the single-literal unconditional sentences."""
    n = len(gp.atoms)
    lo, hi = np.zeros(n), np.ones(n)
    for s in gp.sentences:
        if s.r is not None:
            continue
        lits = _literals(s.q)
        if lits is None or len(lits) != 1:
            continue
        (k, v), = lits
        i = gp.index[k]
        l, u = (s.lower, s.upper) if v else (1.0 - s.upper, 1.0 - s.lower)
        lo[i], hi[i] = max(lo[i], l), min(hi[i], u)
    if np.any(lo > hi):
        raise InfeasibleError("crossed marginal bounds")
    return lo, hi


def factored_maxent(gp: GroundProgram, config: Optional[SolverConfig] = None,
                    program: Optional[FactoredProgram] = None) -> np.ndarray:
    """Marginals of the largest-entropy product distribution satisfying ``gp``."""
    from scipy.optimize import minimize

    cfg = config or SolverConfig()
    fp = program if program is not None else FactoredProgram(gp)
    lo, hi = fp.box

    def negent(m):
        m = np.clip(m, 1e-12, 1 - 1e-12)
        return float(np.sum(m * np.log(m) + (1 - m) * np.log(1 - m)))

    def grad(m):
        m = np.clip(m, 1e-12, 1 - 1e-12)
        return np.log(m) - np.log(1 - m)

    x0 = np.clip(np.full(fp.n, 0.5), lo, hi)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(negent, x0, jac=grad, method="SLSQP", bounds=list(zip(lo, hi)),
                       constraints=fp.scipy_constraints(),
                       options={"maxiter": cfg.max_iter, "ftol": 1e-12})
    m = np.clip(res.x, 0.0, 1.0)
    if fp.violation(m) > cfg.infeasible_tol:
        raise InfeasibleError("no product distribution satisfies the program")
    return m


# -- credal network oracle ------------------------------------------------------------

@dataclass
class CredalNetwork:
    """Interval CPTs: ``cpt[x][config] = (lo, hi)`` with configs over ``parents[x]``."""

    atoms: List[str]
    parents: Dict[str, Tuple[str, ...]]
    cpt: Dict[str, Dict[Tuple[bool, ...], Tuple[float, float]]]


def credal_structure(gp: GroundProgram) -> CredalNetwork:
    """Recognise a separately specified credal network, or raise PreconditionError."""
    parents: Dict[str, Tuple[str, ...]] = {}
    cpt: Dict[str, Dict[Tuple[bool, ...], Tuple[float, float]]] = {}
    for s in gp.sentences:
        if s.q.op != "atom":
            raise PreconditionError(f"{s.label}: the conclusion is not an atom")
        x = s.q.key
        if s.r is None:
            pa: Tuple[str, ...] = ()
            cfg: Tuple[bool, ...] = ()
        else:
            lits = _literals(s.r)
            if lits is None:
                raise PreconditionError(f"{s.label}: the condition is not a conjunction of literals")
            lits = sorted(lits, key=lambda kv: gp.index[kv[0]])
            pa = tuple(k for k, _ in lits)
            cfg = tuple(v for _, v in lits)
        if parents.setdefault(x, pa) != pa:
            raise PreconditionError(f"{x} is assessed with two different parent sets")
        if cfg in cpt.setdefault(x, {}):
            raise PreconditionError(f"{x} has two assessments for one parent configuration")
        cpt[x][cfg] = (s.lower, s.upper)
    for x in gp.atom_names:
        if x not in parents:
            raise PreconditionError(f"{x} has no assessment")
        if len(cpt[x]) != 2 ** len(parents[x]):
            raise PreconditionError(f"{x} has an incomplete conditional table")
    _check_acyclic(parents)
    return CredalNetwork(gp.atom_names, parents, cpt)


def _check_acyclic(parents):
    state: Dict[str, int] = {}

    def visit(x):
        if state.get(x) == 1:
            raise PreconditionError(f"cycle through {x}")
        if state.get(x) == 2:
            return
        state[x] = 1
        for p in parents[x]:
            visit(p)
        state[x] = 2

    for x in parents:
        visit(x)


def credal_vertex_oracle(gp: GroundProgram, query: QueryLike, max_atoms: int = 12,
                         chunk: int = 4096) -> IntervalResult:
    """Brute-force strong-extension bounds by enumerating CPT interval endpoints."""
    net = credal_structure(gp)
    n = len(net.atoms)
    if n > max_atoms:
        raise PreconditionError(f"{n} atoms exceeds the oracle limit of {max_atoms}")
    q = resolve_query(gp, query)
    label = _qstr(query) if isinstance(query, Query) else str(query)
    idx = gp.index
    bits = world_bits(n)
    entries: List[Tuple[float, float]] = []
    # per atom: (entry index per world)
    world_entry = np.zeros((n, 2**n), dtype=int)
    for x in net.atoms:
        i = idx[x]
        pa = net.parents[x]
        local = {}
        for cfg, lu in sorted(net.cpt[x].items()):
            local[cfg] = len(entries)
            entries.append(lu)
        pcols = [idx[p] for p in pa]
        for cfg, e in local.items():
            mask = _config_mask(bits, pcols, cfg)
            world_entry[i, mask] = e
    qv = truth_table(q.q, idx, n)
    ev = truth_table(q.e, idx, n) if q.e is not None else np.ones(2**n, dtype=bool)
    choices = [sorted({lo, hi}) for lo, hi in entries]
    lo_v, hi_v = np.inf, -np.inf
    combos = itertools.product(*choices)
    while True:
        batch = list(itertools.islice(combos, chunk))
        if not batch:
            break
        V = np.array(batch, dtype=float)  # (b, entries)
        joint = np.ones((len(batch), 2**n))
        for i in range(n):
            pv = V[:, world_entry[i]]
            joint *= np.where(bits[:, i], pv, 1.0 - pv)
        num = joint[:, qv & ev].sum(axis=1)
        den = joint[:, ev].sum(axis=1)
        ok = den > UNDEFINED_EPS
        if not ok.any():
            continue
        vals = num[ok] / den[ok]
        lo_v, hi_v = min(lo_v, vals.min()), max(hi_v, vals.max())
    if not np.isfinite(lo_v):
        raise UndefinedConditionalError(f"the evidence of {label} has probability zero")
    st = {"lower": "converged", "upper": "converged"}
    return IntervalResult(label, float(lo_v), float(hi_v), "vertex", st, gp.atom_names, {})


def joint_from_point_network(gp: GroundProgram) -> np.ndarray:
    """Joint distribution of a point-probability Bayesian network program."""
    net = credal_structure(gp)
    for x in net.atoms:
        for lo, hi in net.cpt[x].values():
            if lo != hi:
                raise PreconditionError(f"{x} has an interval, not a point, assessment")
    n = len(net.atoms)
    bits = world_bits(n)
    joint = np.ones(2**n)
    for x in net.atoms:
        i = gp.index[x]
        pcols = [gp.index[p] for p in net.parents[x]]
        for cfg, (p, _) in net.cpt[x].items():
            mask = _config_mask(bits, pcols, cfg)
            joint[mask] *= np.where(bits[mask, i], p, 1.0 - p)
    return joint
