"""Random program generators used by the test-suite and the benchmarks."""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np


def _lit(name: str, value: bool) -> str:
    return name if value else f"not {name}"


def random_polytree(rng: np.random.Generator, n: int, max_in: int = 2) -> Dict[str, Tuple[str, ...]]:
    """Parents map of a random polytree over ``x0..x{n-1}`` with bounded in-degree."""
    names = [f"x{i}" for i in range(n)]
    parents: Dict[str, List[str]] = {v: [] for v in names}
    order = list(rng.permutation(n))
    for k in range(1, n):
        a = names[order[k]]
        b = names[order[int(rng.integers(0, k))]]
        # orient randomly, flipping when the head would exceed the in-degree cap
        u, v = (a, b) if rng.random() < 0.5 else (b, a)
        if len(parents[v]) >= max_in:
            u, v = v, u
        if len(parents[v]) >= max_in:
            u, v = v, u
        parents[v].append(u)
    return {v: tuple(sorted(ps, key=names.index)) for v, ps in parents.items()}


def _topological(parents: Dict[str, Tuple[str, ...]]) -> List[str]:
    out: List[str] = []
    seen = set()

    def visit(v):
        if v in seen:
            return
        seen.add(v)
        for p in parents[v]:
            visit(p)
        out.append(v)

    for v in parents:
        visit(v)
    return out


def cpt_program(parents: Dict[str, Tuple[str, ...]], rng: np.random.Generator,
                width: float = 0.2, point: bool = False) -> str:
    """LCN text of a (credal or point) network with one sentence per CPT entry."""
    lines = []
    for v in _topological(parents):
        pa = parents[v]
        for cfg in np.ndindex(*(2,) * len(pa)):
            p = float(rng.uniform(0.05, 0.95))
            if point:
                lo = hi = round(p, 4)
            else:
                w = float(rng.uniform(0.0, width))
                lo, hi = round(max(0.0, p - w / 2), 4), round(min(1.0, p + w / 2), 4)
            if pa:
                cond = " and ".join(_lit(a, bool(b)) for a, b in zip(pa, cfg))
                lines.append(f"{lo} <= P({v} | {cond}) <= {hi}")
            else:
                lines.append(f"{lo} <= P({v}) <= {hi}")
    return "\n".join(lines) + "\n"


def random_credal_polytree(rng: np.random.Generator, max_nodes: int = 6) -> str:
    n = int(rng.integers(2, max_nodes + 1))
    return cpt_program(random_polytree(rng, n), rng)


def random_point_network(rng: np.random.Generator, max_nodes: int = 8, max_in: int = 2) -> str:
    """Point-probability Bayesian network over a random DAG."""
    n = int(rng.integers(2, max_nodes + 1))
    names = [f"x{i}" for i in range(n)]
    parents = {}
    for i, v in enumerate(names):
        k = int(rng.integers(0, min(i, max_in) + 1))
        parents[v] = tuple(sorted(rng.choice(names[:i], size=k, replace=False).tolist(),
                                  key=names.index)) if k else ()
    return cpt_program(parents, rng, point=True)


_SHAPES = ("{a} and {b}", "{a} or {b}", "{a} xor {b}", "{a} -> {b}", "not {a} and {b}",
           "{a} and ({b} or {c})", "{a} or ({b} and not {c})")


def random_product_lcn(rng: np.random.Generator, max_atoms: int = 8,
                       sentences: Tuple[int, int] = (2, 7)) -> str:
    """A feasible LCN: every bound contains the value under a random product distribution."""
    n = int(rng.integers(2, max_atoms + 1))
    names = [f"v{i}" for i in range(n)]
    m = rng.uniform(0.1, 0.9, n)
    lines = []
    for _ in range(int(rng.integers(*sentences))):
        shape = _SHAPES[int(rng.integers(len(_SHAPES)))]
        picks = rng.choice(n, size=min(3, n), replace=False)
        fill = {k: names[i] for k, i in zip("abc", picks)}
        if "{c}" in shape and n < 3:
            shape = "{a} and {b}"
        text = shape.format(**fill)
        used = [i for k, i in zip("abc", picks) if "{" + k + "}" in shape]
        cond = None
        if rng.random() < 0.3:
            rest = [i for i in range(n) if i not in used]
            if rest:
                c = int(rng.choice(rest))
                cond = (names[c], bool(rng.random() < 0.5))
        val = _product_prob(text, names, m, cond)
        w1, w2 = rng.uniform(0.0, 0.15, 2)
        lo, hi = round(max(0.0, val - w1), 4), round(min(1.0, val + w2), 4)
        lo = min(lo, np.floor(val * 1e4) / 1e4)
        hi = max(hi, np.ceil(val * 1e4) / 1e4)
        tau = "" if rng.random() < 0.7 else " ; tau=false"
        if cond is None:
            lines.append(f"{lo} <= P({text}) <= {hi}{tau}")
        else:
            lines.append(f"{lo} <= P({text} | {_lit(*cond)}) <= {hi}{tau}")
    return "\n".join(lines) + "\n"


def _product_prob(text, names, m, cond):
    from .model import truth_table
    from .parser import parse_formula

    f = parse_formula(text)
    n = len(names)
    idx = {a: i for i, a in enumerate(names)}
    tt = truth_table(f, idx, n)
    w = np.arange(2**n)
    bits = ((w[:, None] >> np.arange(n)) & 1).astype(bool)
    p = np.prod(np.where(bits, m, 1 - m), axis=1)
    if cond is None:
        return float(p[tt].sum())
    c = bits[:, idx[cond[0]]] if cond[1] else ~bits[:, idx[cond[0]]]
    return float(p[tt & c].sum() / p[c].sum())
