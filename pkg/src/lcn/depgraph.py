"""Dependency graph, parent/descendant sets and the implied independences.

Each ground sentence adds a stamp of directed edges between atom nodes and
formula nodes.  Parents of an atom are atoms that reach it through formula
nodes only; descendants are atoms reachable without passing through a
parent.  Every atom is independent of its non-descendant non-parents given
its parents.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Tuple

from .model import Formula, GroundProgram, atoms_in_order, canonical, canonical_key


@dataclass(frozen=True)
class IndependenceStatement:
    x: str
    given: FrozenSet[str]
    independent_of: FrozenSet[str]

    def __str__(self) -> str:
        given = ", ".join(sorted(self.given))
        return f"{self.x} _||_ {{{', '.join(sorted(self.independent_of))}}} | {{{given}}}"


@dataclass
class DependencyGraph:
    """Directed graph over atom keys and canonical formula keys.

    ``edges`` maps ``(source, target)`` to the labels of the sentences whose
    stamps produced it; duplicate stamp edges collapse to one entry.
    """

    atoms: Tuple[str, ...]
    formulas: Dict[str, Formula] = field(default_factory=dict)
    edges: Dict[Tuple[str, str], Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        self._succ: Dict[str, List[str]] = {}
        self._pred: Dict[str, List[str]] = {}
        for u, v in self.edges:
            self._succ.setdefault(u, []).append(v)
            self._pred.setdefault(v, []).append(u)
        self._atom_set = frozenset(self.atoms)
        self._parents: Dict[str, FrozenSet[str]] = {}

    @property
    def nodes(self) -> List[str]:
        return list(self.atoms) + list(self.formulas)

    def is_atom(self, node: str) -> bool:
        return node in self._atom_set

    def successors(self, node: str) -> List[str]:
        return self._succ.get(node, [])

    def predecessors(self, node: str) -> List[str]:
        return self._pred.get(node, [])

    def edge_list(self) -> List[Tuple[str, str]]:
        return sorted(self.edges)

    def parents(self, x: str) -> FrozenSet[str]:
        if x not in self._parents:
            self._parents[x] = _parents(self, x)
        return self._parents[x]

    def descendants(self, x: str) -> FrozenSet[str]:
        return _descendants(self, x, self.parents(x))

    def ndnp(self, x: str) -> FrozenSet[str]:
        return frozenset(self.atoms) - self.parents(x) - self.descendants(x) - {x}

    def has_edges(self) -> bool:
        return bool(self.edges)


def _node(f: Formula) -> Tuple[str, Formula]:
    c = canonical(f)
    if c.op == "atom":
        return c.key, c
    return canonical_key(c), c


def build_dependency_graph(gp: GroundProgram) -> DependencyGraph:
    """Union of the stamps of all ground sentences."""
    formulas: Dict[str, Formula] = {}
    edges: Dict[Tuple[str, str], List[str]] = {}

    def add(u, v, label):
        if u == v:
            return
        lst = edges.setdefault((u, v), [])
        if label not in lst:
            lst.append(label)

    for s in gp.sentences:
        qn, qf = _node(s.q)
        q_atomic = qf.op == "atom"
        if not q_atomic:
            formulas.setdefault(qn, qf)
        xs = atoms_in_order(qf)
        if s.r is None:
            if s.tau and not q_atomic:
                for x in xs:
                    add(qn, x, s.label)
                    add(x, qn, s.label)
            continue
        rn, rf = _node(s.r)
        if rf.op != "atom":
            formulas.setdefault(rn, rf)
        add(rn, qn, s.label)
        for a in atoms_in_order(rf):
            add(a, rn, s.label)
        if not q_atomic:
            for x in xs:
                add(qn, x, s.label)
                if s.tau:
                    add(x, qn, s.label)
    atoms = tuple(gp.atom_names)
    return DependencyGraph(atoms, formulas, {k: tuple(v) for k, v in edges.items()})


def _parents(g: DependencyGraph, x: str) -> FrozenSet[str]:
    """Atoms with a path to ``x`` whose intermediate nodes are all formulas."""
    out = set()
    seen = {x}
    queue = deque([x])
    while queue:
        v = queue.popleft()
        for u in g.predecessors(v):
            if u in seen:
                continue
            seen.add(u)
            if g.is_atom(u):
                out.add(u)
            else:
                queue.append(u)
    out.discard(x)
    return frozenset(out)


def _descendants(g: DependencyGraph, x: str, blocked: FrozenSet[str]) -> FrozenSet[str]:
    """Atoms reachable from ``x`` where members of ``blocked`` end a path.

    A blocked atom may still be reached as an endpoint; it just cannot be
    passed through.
    """
    out = set()
    seen = {x}
    queue = deque([x])
    while queue:
        v = queue.popleft()
        for w in g.successors(v):
            if w in seen:
                continue
            seen.add(w)
            if g.is_atom(w):
                out.add(w)
            if w not in blocked:
                queue.append(w)
    out.discard(x)
    return frozenset(out)


def parents(g: DependencyGraph, x: str) -> FrozenSet[str]:
    return g.parents(x)


def descendants(g: DependencyGraph, x: str) -> FrozenSet[str]:
    return g.descendants(x)


def ndnp(g: DependencyGraph, x: str) -> FrozenSet[str]:
    return g.ndnp(x)


def markov_statements(g: DependencyGraph) -> List[IndependenceStatement]:
    """One statement per atom whose non-descendant non-parent set is non-empty."""
    out = []
    for x in g.atoms:
        nd = g.ndnp(x)
        if nd:
            out.append(IndependenceStatement(x, g.parents(x), nd))
    return out


# -- DOT ----------------------------------------------------------------------

def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: DependencyGraph) -> str:
    """Graphviz text: atoms shaded, formula nodes plain, edges labelled by sentence."""
    from .model import format_formula

    lines = ["digraph lcn {"]
    for a in g.atoms:
        lines.append(f"  {_q(a)} [shape=box, style=filled, fillcolor=lightgray];")
    for key, f in g.formulas.items():
        lines.append(f"  {_q(key)} [shape=ellipse, label={_q(format_formula(f))}];")
    for (u, v), labels in sorted(g.edges.items()):
        lines.append(f"  {_q(u)} -> {_q(v)} [label={_q(';'.join(labels))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


_STR = r'"((?:[^"\\]|\\.)*)"'
_NODE = re.compile(rf"^\s*{_STR}\s*\[(.*)\];\s*$")
_EDGE = re.compile(rf"^\s*{_STR}\s*->\s*{_STR}\s*\[label={_STR}\];\s*$")
_LABEL = re.compile(rf"label={_STR}")


def _unq(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s)


def from_dot(text: str) -> DependencyGraph:
    """Rebuild a graph from :func:`to_dot` output."""
    from .parser import parse_formula

    atoms, formulas, edges = [], {}, {}
    for line in text.splitlines():
        m = _EDGE.match(line)
        if m:
            u, v, lab = (_unq(x) for x in m.groups())
            edges[(u, v)] = tuple(lab.split(";")) if lab else ()
            continue
        m = _NODE.match(line)
        if m:
            name, attrs = _unq(m.group(1)), m.group(2)
            if "filled" in attrs:
                atoms.append(name)
            else:
                lab = _LABEL.search(attrs)
                formulas[name] = canonical(parse_formula(_unq(lab.group(1))))
    return DependencyGraph(tuple(atoms), formulas, edges)
