"""Nonlinear programs over the probability simplex.

The programs produced by exact inference have one variable per world, linear
sentence constraints, bilinear independence constraints and a linear, ratio
or negative-entropy objective.  They are solved by an augmented Lagrangian
whose inner subproblems are minimised with spectral projected gradient
(Euclidean projection onto the simplex).  Every start finishes with a
Gauss-Newton feasibility polish so the reported value is attained by a point
whose constraint residual is below ``tol_feas``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import CapacityError

log = logging.getLogger(__name__)

MAX_DIMENSION = 2**25
RELATIONS = ("<=", ">=", "==")


@dataclass(frozen=True)
class LinearConstraint:
    coeffs: np.ndarray
    relation: str
    rhs: float
    label: str = ""
    vacuous: bool = False

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")


@dataclass(frozen=True)
class QuadraticConstraint:
    """``sum_k coef_k * (a_k . p) * (b_k . p) + linear . p == rhs``."""

    terms: tuple  # of (coef, a_row, b_row)
    linear: Optional[np.ndarray] = None
    rhs: float = 0.0
    label: str = ""

    def sparse_terms(self):
        """Expand the bilinear terms into ``(i, j, coeff)`` triples (i <= j)."""
        acc: dict = {}
        for coef, a, b in self.terms:
            for i in np.flatnonzero(a):
                for j in np.flatnonzero(b):
                    key = (min(i, j), max(i, j))
                    acc[key] = acc.get(key, 0.0) + coef * a[i] * b[j]
        return [(int(i), int(j), c) for (i, j), c in sorted(acc.items()) if c != 0.0]


@dataclass(frozen=True)
class Objective:
    kind: str  # "linear" | "ratio" | "negentropy"
    numerator: Optional[np.ndarray] = None
    denominator: Optional[np.ndarray] = None
    floor: float = 1e-9

    @classmethod
    def linear(cls, c):
        return cls("linear", np.asarray(c, dtype=float))

    @classmethod
    def ratio(cls, num, den, floor=1e-9):
        return cls("ratio", np.asarray(num, dtype=float), np.asarray(den, dtype=float), floor)

    @classmethod
    def negentropy(cls):
        return cls("negentropy")

    def value(self, p):
        if self.kind == "linear":
            return float(self.numerator @ p)
        if self.kind == "ratio":
            return float(self.numerator @ p) / max(float(self.denominator @ p), self.floor)
        q = p[p > 0]
        return float(np.sum(q * np.log(q)))

    def gradient(self, p):
        if self.kind == "linear":
            return self.numerator
        if self.kind == "ratio":
            num = float(self.numerator @ p)
            den = float(self.denominator @ p)
            if den <= self.floor:
                return self.numerator / self.floor
            return (self.numerator * den - self.denominator * num) / (den * den)
        return np.log(np.maximum(p, 1e-300)) + 1.0

    def hessian(self, p):
        m = len(p)
        if self.kind == "linear":
            return np.zeros((m, m))
        if self.kind == "ratio":
            n, d = self.numerator, self.denominator
            num = float(n @ p)
            den = max(float(d @ p), self.floor)
            H = -(np.outer(n, d) + np.outer(d, n)) / den**2 + 2 * num * np.outer(d, d) / den**3
            return H
        return np.diag(1.0 / np.maximum(p, 1e-12))


@dataclass(frozen=True)
class NLP:
    dimension: int
    objective: Objective
    linear: tuple = ()
    quadratic: tuple = ()
    simplex: bool = True

    def __post_init__(self):
        if self.dimension > MAX_DIMENSION:
            raise CapacityError(f"dimension {self.dimension} exceeds {MAX_DIMENSION}")

    def with_objective(self, objective: Objective) -> "NLP":
        return replace(self, objective=objective)

    def without_quadratic(self) -> "NLP":
        return replace(self, quadratic=())


@dataclass
class SolverConfig:
    starts: int = 16
    tol_feas: float = 1e-7
    tol_step: float = 1e-9
    max_iter: int = 200
    max_inner: int = 50
    seed: int = 0
    rho0: float = 10.0
    rho_max: float = 1e8
    infeasible_tol: float = 1e-4


@dataclass
class SolveReport:
    value: float
    point: np.ndarray
    status: str  # "converged" | "max-iterations" | "infeasible"
    max_residual: float
    starts_used: int
    start_values: list = field(default_factory=list)


class _Compiled:
    """Stacked matrix form of an NLP used inside the optimisation loops."""

    def __init__(self, nlp: NLP):
        m = nlp.dimension
        self.m = m
        self.simplex = nlp.simplex
        self.objective = nlp.objective
        eq, eq_rhs, ineq, ineq_rhs = [], [], [], []
        for c in nlp.linear:
            row = np.asarray(c.coeffs, dtype=float)
            if c.relation == "==":
                eq.append(row)
                eq_rhs.append(c.rhs)
            elif c.relation == "<=":
                ineq.append(row)
                ineq_rhs.append(c.rhs)
            else:
                ineq.append(-row)
                ineq_rhs.append(-c.rhs)
        self.E = np.array(eq).reshape(len(eq), m)
        self.e = np.array(eq_rhs, dtype=float)
        self.G = np.array(ineq).reshape(len(ineq), m)
        self.g = np.array(ineq_rhs, dtype=float)

        qa, qb, coef, idx = [], [], [], []
        ql = np.zeros((len(nlp.quadratic), m))
        qrhs = np.zeros(len(nlp.quadratic))
        for k, q in enumerate(nlp.quadratic):
            for c, a, b in q.terms:
                qa.append(np.asarray(a, dtype=float))
                qb.append(np.asarray(b, dtype=float))
                coef.append(float(c))
                idx.append(k)
            if q.linear is not None:
                ql[k] = q.linear
            qrhs[k] = q.rhs
        self.QA = np.array(qa).reshape(len(qa), m)
        self.QB = np.array(qb).reshape(len(qb), m)
        self.qcoef = np.array(coef, dtype=float)
        self.qidx = np.array(idx, dtype=int)
        self.QL = ql
        self.qrhs = qrhs
        self.nq = len(nlp.quadratic)
        self.has_ql = bool(np.any(ql))

        # fused row stack: [E; QA; QB; G] with duplicate rows merged, stored sparse,
        # so one sparse matvec serves every constraint
        stack = np.vstack([self.E, self.QA, self.QB, self.G])
        uniq, self._inv = np.unique(stack, axis=0, return_inverse=True)
        self._inv = self._inv.reshape(-1)
        self._nu = len(uniq)
        self.M = scipy.sparse.csr_matrix(uniq.reshape(len(uniq), m))
        self.MT = self.M.T.tocsr()
        ne, nt = len(self.e), len(self.qcoef)
        self._sl = (ne, ne + nt, ne + 2 * nt)

    def eval_all(self, p):
        y = (self.M @ p)[self._inv]
        i1, i2, i3 = self._sl
        a, b = y[i1:i2], y[i2:i3]
        hq = np.bincount(self.qidx, self.qcoef * a * b, minlength=self.nq) - self.qrhs
        if self.has_ql:
            hq = hq + self.QL @ p
        return np.concatenate([y[:i1] - self.e, hq]), y[i3:] - self.g, (a, b)

    def vjp_all(self, v_eq, v_in, aux):
        a, b = aux
        i1 = self._sl[0]
        vq = v_eq[i1:]
        w = self.qcoef * vq[self.qidx]
        full = np.concatenate([v_eq[:i1], w * b, w * a, v_in])
        out = self.MT @ np.bincount(self._inv, full, minlength=self._nu)
        if self.has_ql:
            out = out + self.QL.T @ vq
        return out

    # equality residuals h(p) = [E p - e ; quad(p) - rhs]
    def eq(self, p):
        a = self.QA @ p
        b = self.QB @ p
        hq = np.bincount(self.qidx, self.qcoef * a * b, minlength=self.nq) - self.qrhs
        if self.has_ql:
            hq = hq + self.QL @ p
        return np.concatenate([self.E @ p - self.e, hq]), a, b

    def eq_vjp(self, v, a, b):
        ne = len(self.e)
        out = self.E.T @ v[:ne]
        vq = v[ne:]
        if self.nq:
            w = self.qcoef * vq[self.qidx]
            out = out + self.QA.T @ (w * b) + self.QB.T @ (w * a)
            if self.has_ql:
                out = out + self.QL.T @ vq
        return out

    def eq_jacobian(self, p):
        a = self.QA @ p
        b = self.QB @ p
        Jq = np.zeros((self.nq, self.m))
        if len(self.qcoef):
            contrib = self.qcoef[:, None] * (self.QA * b[:, None] + self.QB * a[:, None])
            np.add.at(Jq, self.qidx, contrib)
        if self.has_ql:
            Jq = Jq + self.QL
        return np.vstack([self.E, Jq])

    def ineq(self, p):
        return self.G @ p - self.g

    def quad_hessian(self, weights):
        """``sum_k weights_k * hess(q_k)`` for the bilinear constraint rows."""
        if not len(self.qcoef):
            return np.zeros((self.m, self.m))
        w = self.qcoef * weights[self.qidx]
        H = self.QA.T @ (w[:, None] * self.QB)
        return H + H.T

    def domain_violation(self, p):
        if self.simplex:
            return max(abs(float(p.sum()) - 1.0), float(max(0.0, -p.min())))
        return float(max(0.0, -p.min(), p.max() - 1.0))

    def residual(self, p):
        h, _, _ = self.eq(p)
        gi = self.ineq(p)
        r = self.domain_violation(p)
        if len(h):
            r = max(r, float(np.abs(h).max()))
        if len(gi):
            r = max(r, float(gi.max()))
        return r

    def project(self, y):
        if not self.simplex:
            return np.clip(y, 0.0, 1.0)
        return project_simplex(y)


def project_simplex(y):
    """Euclidean projection onto the unit simplex (sort-based)."""
    # projection is invariant to a constant shift; anchoring at the max keeps css exact
    y = y - y.max()
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, len(y) + 1)
    hits = np.flatnonzero(u - css / ind > 0)
    # the first index always qualifies in exact arithmetic; rounding on huge inputs can hide it
    k = hits[-1] if len(hits) else 0
    theta = css[k] / (k + 1)
    return np.maximum(y - theta, 0.0)


def _spg(fg, project, x, tol, max_iter, memory=10):
    """Spectral projected gradient with a nonmonotone Armijo line search."""
    f, g = fg(x)
    pg = project(x - g) - x
    pgn = np.abs(pg).max()
    if pgn <= tol:
        return x, f, 0
    alpha = min(1e10, max(1e-10, 1.0 / pgn))
    hist = [f]
    for it in range(1, max_iter + 1):
        d = project(x - alpha * g) - x
        gd = float(g @ d)
        if gd >= 0 or not np.isfinite(gd):
            d = pg
            gd = float(g @ d)
            if gd >= 0:
                break
        fmax = max(hist[-memory:])
        lam = 1.0
        while True:
            xn = x + lam * d
            fn, gn = fg(xn)
            if fn <= fmax + 1e-4 * lam * gd or lam < 1e-14:
                break
            denom = fn - f - lam * gd
            lt = 0.5 * lam * lam * -gd / denom if denom > 0 else lam / 2
            lam = lt if 0.1 * lam <= lt <= 0.9 * lam else lam / 2
        s = xn - x
        y = gn - g
        x, f, g = xn, fn, gn
        hist.append(f)
        sy = float(s @ y)
        alpha = 1e10 if sy <= 0 else min(1e10, max(1e-10, float(s @ s) / sy))
        pg = project(x - g) - x
        if np.abs(pg).max() <= tol or np.abs(s).max() <= 1e-15:
            return x, f, it
    return x, f, max_iter


def _auglag(comp: _Compiled, sign: float, x0, cfg: SolverConfig):
    """Minimise ``sign * objective`` from one start; returns the final point."""
    obj = comp.objective
    n_eq = len(comp.e) + comp.nq
    n_in = len(comp.g)
    lam = np.zeros(n_eq)
    mu = np.zeros(n_in)
    rho = cfg.rho0
    x = comp.project(np.asarray(x0, dtype=float))
    inner_tol = 1e-3
    prev_viol = np.inf
    prev_val = np.inf

    for outer in range(cfg.max_iter):
        def fg(p, lam=lam, mu=mu, rho=rho):
            h, gi, aux = comp.eval_all(p)
            val = sign * obj.value(p)
            grad = sign * obj.gradient(p)
            wt_eq = lam + rho * h
            t = np.maximum(0.0, mu + rho * gi)
            val += float(lam @ h) + 0.5 * rho * float(h @ h) + float((t @ t - mu @ mu) / (2 * rho))
            return val, grad + comp.vjp_all(wt_eq, t, aux)

        x, _, _ = _spg(fg, comp.project, x, inner_tol, cfg.max_inner)
        h, gi, _ = comp.eval_all(x)
        viol = 0.0
        if n_eq:
            viol = float(np.abs(h).max())
            lam = lam + rho * h
        if n_in:
            viol = max(viol, float(np.abs(np.maximum(gi, -mu / rho)).max()))
            mu = np.maximum(0.0, mu + rho * gi)
        val = obj.value(x)
        if viol <= cfg.tol_feas or (viol <= 1e-3 and abs(val - prev_val) <= 1e-4):
            break
        if viol > 0.25 * prev_viol:
            rho = min(rho * 10.0, cfg.rho_max)
        prev_viol = viol
        prev_val = val
        inner_tol = max(inner_tol * 0.1, 1e-9)
    return x, lam, mu


def _lstsq(A, b, cond):
    """Minimum-norm least squares via complete orthogonal factorisation."""
    return scipy.linalg.lstsq(A, b, cond=cond, lapack_driver="gelsy", check_finite=False)[0]


def _newton_step(H, J, g, c, rcond=1e-12):
    """Null-space solution of the KKT system ``[H J'; J 0][dx; lam] = -[g; c]``.

    One SVD of ``J`` handles rank-deficient (redundant) constraint rows; the
    result matches the minimum-norm least-squares solution of the full system
    when the reduced Hessian is nonsingular.
    """
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(J)) and np.all(np.isfinite(g))
            and np.all(np.isfinite(c))):
        return None
    nc, nf = J.shape
    try:
        if nc:
            U, s, Vt = scipy.linalg.svd(J, full_matrices=nc < nf, check_finite=False,
                                        lapack_driver="gesdd")
        else:
            U, s, Vt = np.zeros((0, 0)), np.zeros(0), np.eye(nf)
    except (np.linalg.LinAlgError, ValueError):
        return None
    k = int((s > rcond * s[0]).sum()) if len(s) and s[0] > 0 else 0
    Ur, sr, Vr, Z = U[:, :k], s[:k], Vt[:k].T, Vt[k:].T
    dx = Vr @ ((Ur.T @ -c) / sr)
    if Z.shape[1]:
        rhs = -Z.T @ (g + H @ dx)
        try:
            z = _lstsq(Z.T @ H @ Z, rhs, rcond)
        except (np.linalg.LinAlgError, ValueError):
            return None
        dx = dx + Z @ z
    lam = Ur @ ((Vr.T @ -(g + H @ dx)) / sr)
    if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(lam))):
        return None
    return dx, lam


def _refine_kkt(comp: _Compiled, sign: float, x, mu, max_newton=25, max_active=12):
    """Local Newton-KKT refinement on the active set identified by ``x``.

    Returns a candidate point, or ``None`` when the iteration breaks down.
    """
    m = comp.m
    obj = comp.objective
    p = x.copy()
    lo_fixed = p < 1e-7
    hi_fixed = np.zeros(m, dtype=bool) if comp.simplex else p > 1 - 1e-7
    p[lo_fixed] = 0.0
    p[hi_fixed] = 1.0
    gi = comp.ineq(p)
    active = (gi > -1e-6) | (mu > 1e-9) if len(gi) else np.zeros(0, dtype=bool)
    n_eq = len(comp.e) + comp.nq

    for _ in range(max_active):
        free = ~(lo_fixed | hi_fixed)
        if not free.any():
            return p
        lam_q = np.zeros(comp.nq)
        ok = blocked = False
        for _ in range(max_newton):
            h, _, _ = comp.eq(p)
            rows = [comp.eq_jacobian(p), comp.G[active]]
            res = [h, comp.ineq(p)[active]]
            if comp.simplex:
                rows.insert(0, np.ones((1, m)))
                res.insert(0, np.array([p.sum() - 1.0]))
            J = np.vstack(rows)
            c = np.concatenate(res)
            H = sign * obj.hessian(p) + comp.quad_hessian(lam_q)
            grad = sign * obj.gradient(p)
            step = _newton_step(H[np.ix_(free, free)], J[:, free], grad[free], c)
            if step is None:
                return None
            dx, lam_new = step
            off = 1 if comp.simplex else 0
            lam_q = lam_new[off + len(comp.e): off + n_eq]
            # stop at the first bound or idle inequality the step would cross
            t, block_var, block_ineq = _first_block(comp, p, free, active, dx)
            if t < 1.0:
                p[free] += t * dx
                if block_var is not None:
                    i = np.flatnonzero(free)[block_var]
                    if dx[block_var] > 0:
                        hi_fixed[i], p[i] = True, 1.0
                    else:
                        lo_fixed[i], p[i] = True, 0.0
                else:
                    active[block_ineq] = True
                blocked = True
                break
            p[free] += dx
            if np.abs(dx).max() <= 1e-13 and np.abs(c).max() <= 1e-13:
                ok = True
                break
        if blocked:
            continue
        if not ok and np.abs(c).max() > 1e-9:
            return None
        # active-set correction: leave bounds / inequalities with wrong-sign multipliers
        neg = p < -1e-12
        if not comp.simplex:
            neg |= p > 1 + 1e-12
        if neg.any():
            return None
        off = 1 if comp.simplex else 0
        mu_act = lam_new[off + n_eq:]
        grad = sign * obj.gradient(p)
        reduced = grad + J.T @ lam_new
        changed = False
        # zero curvature on the current face (e.g. a linear objective): Newton cannot
        # move, so walk down the reduced gradient until a bound or inequality blocks
        d = -reduced[free]
        if np.abs(d).max() > 1e-9:
            step = _ratio_step(comp, p, free, active, d, H[np.ix_(free, free)], grad[free])
            if step is None:
                break
            t, block_var, block_ineq = step
            p[free] += t * d
            if block_var is not None:
                i = np.flatnonzero(free)[block_var]
                if p[i] >= 0.5 and not comp.simplex:
                    hi_fixed[i], p[i] = True, 1.0
                else:
                    lo_fixed[i], p[i] = True, 0.0
            elif block_ineq is not None:
                active[block_ineq] = True
            continue
        if len(mu_act) and mu_act.min() < -1e-8:
            idx = np.flatnonzero(active)[int(np.argmin(mu_act))]
            active[idx] = False
            changed = True
        else:
            cand = np.flatnonzero(lo_fixed & (reduced < -1e-8))
            if comp.simplex is False:
                cand = np.concatenate([cand, np.flatnonzero(hi_fixed & (reduced > 1e-8))])
            if len(cand):
                i = cand[np.argmax(np.abs(reduced[cand]))]
                lo_fixed[i] = hi_fixed[i] = False
                changed = True
        if not changed:
            break
    np.clip(p, 0.0, 1.0, out=p)
    return p


def _first_block(comp: _Compiled, p, free, active, d):
    """Largest ``t`` keeping ``p + t d`` inside the bounds and idle inequalities.

    Returns ``(t, blocking_free_index, blocking_inequality)``; ``t`` is
    ``inf`` when nothing blocks.  Idle rows that are already violated block at
    ``t = 0`` as soon as ``d`` worsens them.
    """
    t_best, block_var, block_ineq = np.inf, None, None
    pf = p[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(d < -1e-15, pf / -d, np.inf)
        if not comp.simplex:
            tv = np.minimum(tv, np.where(d > 1e-15, (1.0 - pf) / d, np.inf))
    tv = np.maximum(tv, 0.0)
    if len(tv) and tv.min() < t_best:
        block_var = int(np.argmin(tv))
        t_best = float(tv[block_var])
    if len(comp.g):
        idle = np.flatnonzero(~active)
        if len(idle):
            Gd = comp.G[idle][:, free] @ d
            gi = comp.ineq(p)[idle]
            with np.errstate(divide="ignore", invalid="ignore"):
                tg = np.where(Gd > 1e-15, np.maximum(-gi, 0.0) / Gd, np.inf)
            if tg.min() < t_best:
                block_var, block_ineq = None, int(idle[int(np.argmin(tg))])
                t_best = float(tg.min())
    return t_best, block_var, block_ineq


def _ratio_step(comp: _Compiled, p, free, active, d, H, g):
    """Step length along ``d`` (free variables) and what blocks it.

    The unblocked length is the curvature minimiser along ``d``.  Returns
    ``(t, blocking_free_index, blocking_inequality)`` or ``None`` when
    nothing limits the step.
    """
    curv = float(d @ H @ d)
    slope = float(g @ d)
    t_min = -slope / curv if curv > 1e-12 * float(d @ d) else np.inf
    t, block_var, block_ineq = _first_block(comp, p, free, active, d)
    if t_min <= t:
        t, block_var, block_ineq = t_min, None, None
    if not np.isfinite(t):
        return None
    return t, block_var, block_ineq


def _polish(comp: _Compiled, x, max_iter=30):
    """Gauss-Newton minimum-norm steps onto the active constraint manifold."""
    best = x.copy()
    best_r = comp.residual(x)
    if best_r <= 1e-14:
        return best
    p = x.copy()
    if comp.simplex:
        p[p < 1e-13] = 0.0
    else:
        p = np.clip(p, 0.0, 1.0)
        p[p < 1e-13] = 0.0
        p[p > 1 - 1e-13] = 1.0
    for _ in range(max_iter):
        h, _, _ = comp.eq(p)
        gi = comp.ineq(p)
        viol = gi > 0
        rows = [comp.eq_jacobian(p), comp.G[viol]]
        res = [h, gi[viol]]
        if comp.simplex:
            rows.insert(0, np.ones((1, comp.m)))
            res.insert(0, np.array([p.sum() - 1.0]))
        J = np.vstack(rows)
        r = np.concatenate(res)
        if not len(r) or np.abs(r).max() <= 1e-15:
            break
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(r))):
            break
        # variables on a bound may leave it when the min-norm step points inward
        free = np.ones(comp.m, dtype=bool)
        at_lo = p <= 0.0
        at_hi = (p >= 1.0) if not comp.simplex else np.zeros(comp.m, dtype=bool)
        for _ in range(4):
            if not free.any():
                break
            try:
                step = _lstsq(J[:, free], -r, None)
            except (np.linalg.LinAlgError, ValueError):
                return best
            full = np.zeros(comp.m)
            full[free] = step
            wrong = (at_lo & (full < 0)) | (at_hi & (full > 0))
            if not wrong.any():
                break
            free &= ~wrong
        if not free.any():
            break
        p = p + full
        if comp.simplex:
            p[p < 1e-15] = 0.0
        else:
            p[p < 1e-15] = 0.0
            p[p > 1 - 1e-15] = 1.0
        cur = comp.residual(p)
        if cur < best_r:
            best, best_r = p.copy(), cur
        if cur <= 1e-14:
            break
    return best


def start_points(m: int, count: int, seed: int, simplex: bool = True):
    """Deterministic, prefix-stable list of starting points."""
    rng = np.random.default_rng(seed)
    pts = []
    if simplex:
        pts.append(np.full(m, 1.0 / m))
        if m <= 8:
            for i in range(m):
                v = np.zeros(m)
                v[i] = 1.0
                pts.append(v)
        while len(pts) < count:
            pts.append(rng.dirichlet(np.ones(m)))
    else:
        pts.append(np.full(m, 0.5))
        while len(pts) < count:
            pts.append(rng.uniform(0.0, 1.0, m))
    return pts[:count]


def solve(nlp: NLP, direction: str = "min", config: Optional[SolverConfig] = None,
          starts: Optional[Sequence[np.ndarray]] = None) -> SolveReport:
    """Minimise or maximise the objective of ``nlp``; best of several starts."""
    cfg = config or SolverConfig()
    if direction not in ("min", "max"):
        raise ValueError(f"direction must be 'min' or 'max', got {direction!r}")
    comp = _Compiled(nlp)
    sign = 1.0 if direction == "min" else -1.0
    if starts is None:
        starts = start_points(nlp.dimension, cfg.starts, cfg.seed, nlp.simplex)

    best = None  # (value, point, residual, index)
    fallback = None
    values = []
    for i, x0 in enumerate(starts):
        x, _, mu = _auglag(comp, sign, x0, cfg)
        x = _polish(comp, x)
        r = comp.residual(x)
        v = nlp.objective.value(x)
        y = _refine_kkt(comp, sign, x, mu)
        if y is not None:
            y = _polish(comp, y)
            ry = comp.residual(y)
            vy = nlp.objective.value(y)
            if ry <= cfg.tol_feas and (r > cfg.tol_feas or sign * vy < sign * v):
                x, r, v = y, ry, vy
        values.append((v, r))
        if r <= cfg.tol_feas:
            if best is None or sign * v < sign * best[0]:
                best = (v, x, r, i)
        elif r <= cfg.infeasible_tol:
            if fallback is None or sign * v < sign * fallback[0]:
                fallback = (v, x, r, i)
    n = len(starts)
    if best is not None:
        return SolveReport(best[0], best[1], "converged", best[2], n, values)
    if fallback is not None:
        return SolveReport(fallback[0], fallback[1], "max-iterations", fallback[2], n, values)
    idx = int(np.argmin([r for _, r in values])) if values else 0
    return SolveReport(float("nan"), np.asarray(starts[idx]) if n else np.zeros(nlp.dimension),
                       "infeasible", min((r for _, r in values), default=np.inf), n, values)


def residual(nlp: NLP, p) -> float:
    """Maximum constraint violation of ``p`` (domain included)."""
    return _Compiled(nlp).residual(np.asarray(p, dtype=float))


def check_gradients(nlp: NLP, point, h: float = 1e-6) -> float:
    """Max abs error between analytic and central-difference gradients.

    Covers the objective and every equality/inequality residual row.
    """
    comp = _Compiled(nlp)
    p = np.asarray(point, dtype=float)
    m = len(p)
    err = 0.0
    g = nlp.objective.gradient(p)
    J = np.vstack([comp.eq_jacobian(p), comp.G])
    for i in range(m):
        e = np.zeros(m)
        e[i] = h
        fd = (nlp.objective.value(p + e) - nlp.objective.value(p - e)) / (2 * h)
        err = max(err, abs(fd - g[i]))
        hp, _, _ = comp.eq(p + e)
        hm, _, _ = comp.eq(p - e)
        col = np.concatenate([(hp - hm) / (2 * h), (comp.ineq(p + e) - comp.ineq(p - e)) / (2 * h)])
        if len(col):
            err = max(err, float(np.abs(col - J[:, i]).max()))
    return err
