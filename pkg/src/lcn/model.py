"""Core LCN types, grounding, and truth evaluation over worlds.

A world is an integer bitmask over the ground atoms: bit ``i`` holds the truth
value of the atom with index ``i`` (bit 0 least significant).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import CapacityError, GroundingError

MAX_ATOMS = 25

NARY = ("and", "or", "xor")
CONNECTIVES = ("not", "and", "or", "xor", "implies", "iff")
QUANTIFIERS = ("forall", "exists")


@dataclass(frozen=True)
class Formula:
    """Logic formula node.

    For ``op == "atom"`` the ``name`` is the predicate (or proposition) and
    ``terms`` its arguments.  For quantifiers ``name`` is the domain and
    ``terms`` are the bound variables.
    """

    op: str
    args: Tuple["Formula", ...] = ()
    name: str = ""
    terms: Tuple[str, ...] = ()
    distinct: bool = False

    @property
    def is_atom(self) -> bool:
        return self.op == "atom"

    @property
    def key(self) -> str:
        """Atom identity string, e.g. ``Fr(Tim,Tom)`` or ``x``."""
        if self.terms:
            return f"{self.name}({','.join(self.terms)})"
        return self.name

    def __str__(self) -> str:
        return format_formula(self)


def atom(name: str, *terms: str) -> Formula:
    return Formula("atom", name=name, terms=tuple(terms))


def neg(f: Formula) -> Formula:
    return Formula("not", (f,))


def conj(*fs: Formula) -> Formula:
    return fs[0] if len(fs) == 1 else Formula("and", tuple(fs))


def disj(*fs: Formula) -> Formula:
    return fs[0] if len(fs) == 1 else Formula("or", tuple(fs))


def xor(*fs: Formula) -> Formula:
    return Formula("xor", tuple(fs))


def implies(a: Formula, b: Formula) -> Formula:
    return Formula("implies", (a, b))


def iff(a: Formula, b: Formula) -> Formula:
    return Formula("iff", (a, b))


def literal(f: Formula, value: bool) -> Formula:
    return f if value else neg(f)


# -- printing ---------------------------------------------------------------

_PREC = {"iff": 1, "implies": 2, "or": 3, "xor": 4, "and": 5, "not": 6, "atom": 7}
_SYM = {"and": "and", "or": "or", "xor": "xor", "implies": "->", "iff": "<->"}


def format_formula(f: Formula) -> str:
    """Render in the LCN surface syntax with minimal parentheses."""
    if f.op == "atom":
        return f.key
    if f.op in QUANTIFIERS:
        d = "distinct " if f.distinct else ""
        return f"({f.op} {d}{', '.join(f.terms)} : {f.name} . {format_formula(f.args[0])})"
    if f.op == "not":
        return "not " + _wrap(f.args[0], _PREC["not"], strict=False)
    p = _PREC[f.op]
    # implies is right-associative and iff is left-folded; parenthesize same-op children
    parts = [_wrap(a, p, strict=f.op in ("implies", "iff")) for a in f.args]
    return f" {_SYM[f.op]} ".join(parts)


def _wrap(child: Formula, prec: int, strict: bool) -> str:
    s = format_formula(child)
    cp = _PREC.get(child.op, 0)
    if child.op in QUANTIFIERS:
        return s
    if cp < prec or (strict and cp == prec) or (cp == prec and child.op in NARY):
        return f"({s})"
    return s


# -- structure --------------------------------------------------------------

def atoms_in_order(f: Formula) -> List[str]:
    """Atom keys in first-appearance (left-to-right) order, without repeats."""
    seen: Dict[str, None] = {}

    def walk(g):
        if g.op == "atom":
            seen.setdefault(g.key, None)
        for a in g.args:
            walk(a)

    walk(f)
    return list(seen)


def canonical(f: Formula) -> Formula:
    """Canonical form: flattened and sorted n-ary operands.

    Duplicate operands are removed for ``and``/``or`` (idempotent) but kept
    for ``xor``.  Used for node identity and sentence deduplication.
    """
    if f.op == "atom":
        return f
    args = tuple(canonical(a) for a in f.args)
    if f.op in NARY:
        flat: List[Formula] = []
        for a in args:
            if a.op == f.op:
                flat.extend(a.args)
            else:
                flat.append(a)
        if f.op != "xor":
            flat = list(dict.fromkeys(flat))
        flat.sort(key=canonical_key)
        if len(flat) == 1:
            return flat[0]
        return Formula(f.op, tuple(flat))
    if f.op == "iff":
        return Formula("iff", tuple(sorted(args, key=canonical_key)))
    return Formula(f.op, args, f.name, f.terms, f.distinct)


def canonical_key(f: Formula) -> str:
    if f.op == "atom":
        return f.key
    if f.op in QUANTIFIERS:
        return f"{f.op}[{f.name}|{','.join(f.terms)}|{int(f.distinct)}]({canonical_key(f.args[0])})"
    return f"{f.op}(" + ",".join(canonical_key(a) for a in f.args) + ")"


def desugar(f: Formula) -> Formula:
    """Rewrite implies/iff into not/or/and form."""
    if f.op == "atom":
        return f
    args = tuple(desugar(a) for a in f.args)
    if f.op == "implies":
        return Formula("or", (Formula("not", (args[0],)), args[1]))
    if f.op == "iff":
        a, b = args
        return Formula("or", (Formula("and", (a, b)),
                              Formula("and", (Formula("not", (a,)), Formula("not", (b,))))))
    return Formula(f.op, args, f.name, f.terms, f.distinct)


def evaluate(f: Formula, world: int, index: Mapping[str, int]) -> bool:
    """Truth value of ``f`` in ``world``; xor of k arguments is odd parity."""
    op = f.op
    if op == "atom":
        return bool((world >> index[f.key]) & 1)
    if op == "not":
        return not evaluate(f.args[0], world, index)
    if op == "and":
        return all(evaluate(a, world, index) for a in f.args)
    if op == "or":
        return any(evaluate(a, world, index) for a in f.args)
    if op == "xor":
        return sum(evaluate(a, world, index) for a in f.args) % 2 == 1
    if op == "implies":
        return (not evaluate(f.args[0], world, index)) or evaluate(f.args[1], world, index)
    if op == "iff":
        return evaluate(f.args[0], world, index) == evaluate(f.args[1], world, index)
    raise GroundingError(f"cannot evaluate unground formula node {op!r}")


def truth_table(f: Formula, index: Mapping[str, int], n: int) -> np.ndarray:
    """Boolean vector of length ``2**n``: entry ``w`` is ``f`` evaluated in world ``w``."""
    if n > MAX_ATOMS:
        raise CapacityError(f"{n} atoms exceeds the world-enumeration cap of {MAX_ATOMS}")
    worlds = np.arange(2**n, dtype=np.int64)
    return _table(desugar(f), index, worlds)


def _table(f, index, worlds):
    op = f.op
    if op == "atom":
        return ((worlds >> index[f.key]) & 1).astype(bool)
    if op == "not":
        return ~_table(f.args[0], index, worlds)
    parts = [_table(a, index, worlds) for a in f.args]
    if op == "and":
        return np.logical_and.reduce(parts)
    if op == "or":
        return np.logical_or.reduce(parts)
    if op == "xor":
        return np.logical_xor.reduce(parts)
    raise GroundingError(f"cannot evaluate unground formula node {op!r}")


def satisfying_worlds(f: Formula, index: Mapping[str, int], n: int) -> np.ndarray:
    """Sorted array of the worlds (bitmasks) in which ``f`` holds."""
    return np.flatnonzero(truth_table(f, index, n))


# -- programs ---------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    name: str
    args: Tuple[str, ...]
    index: int

    @property
    def key(self) -> str:
        return f"{self.name}({','.join(self.args)})" if self.args else self.name


@dataclass(frozen=True)
class Quantifier:
    variables: Tuple[str, ...]
    domain: str
    distinct: bool = False


@dataclass(frozen=True)
class Sentence:
    label: str
    q: Formula
    lower: float
    upper: float
    r: Optional[Formula] = None
    tau: bool = True
    quantifiers: Tuple[Quantifier, ...] = ()
    line: int = 0

    @property
    def kind(self) -> str:
        return "unconditional" if self.r is None else "conditional"

    @property
    def conditional(self) -> bool:
        return self.r is not None


@dataclass(frozen=True)
class Predicate:
    name: str
    domains: Tuple[str, ...]
    symmetric: bool = False

    @property
    def arity(self) -> int:
        return len(self.domains)


@dataclass
class LCNProgram:
    domains: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    predicates: Dict[str, Predicate] = field(default_factory=dict)
    sentences: List[Sentence] = field(default_factory=list)
    queries: list = field(default_factory=list)


@dataclass
class GroundProgram:
    atoms: List[Atom]
    sentences: List[Sentence]
    provenance: List[Tuple[str, Tuple[Tuple[str, str], ...]]]
    domains: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    predicates: Dict[str, Predicate] = field(default_factory=dict)

    @property
    def index(self) -> Dict[str, int]:
        return {a.key: a.index for a in self.atoms}

    @property
    def atom_names(self) -> List[str]:
        return [a.key for a in self.atoms]

    def __len__(self):
        return len(self.atoms)

    def to_program(self) -> LCNProgram:
        """The ground sentences as a quantifier-free program."""
        return LCNProgram(dict(self.domains), dict(self.predicates), list(self.sentences))

    def ground_formula(self, f: Formula) -> Formula:
        """Ground a query formula against this program's declarations and atoms."""
        g = ground_formula(f, self.domains, self.predicates, {})
        known = self.index
        for k in atoms_in_order(g):
            if k not in known:
                raise GroundingError(f"unknown atom {k!r} in query")
        return g


def program_from_sentences(sentences: Iterable[Sentence]) -> LCNProgram:
    return LCNProgram(sentences=list(sentences))


def bindings(quantifiers: Sequence[Quantifier], domains: Mapping[str, Sequence[str]]):
    """All variable bindings for a sequence of quantifier groups."""
    groups = []
    for qf in quantifiers:
        if qf.domain not in domains:
            raise GroundingError(f"unknown domain {qf.domain!r}")
        consts = domains[qf.domain]
        if not consts:
            raise GroundingError(f"empty domain {qf.domain!r}")
        k = len(qf.variables)
        if qf.distinct:
            tuples = list(itertools.permutations(consts, k))
        else:
            tuples = list(itertools.product(consts, repeat=k))
        groups.append([tuple(zip(qf.variables, t)) for t in tuples])
    for combo in itertools.product(*groups):
        yield tuple(pair for grp in combo for pair in grp)


def ground_formula(f: Formula, domains, predicates, env: Mapping[str, str]) -> Formula:
    """Substitute ``env``, expand inner quantifiers, canonicalize symmetric atoms."""
    if f.op == "atom":
        terms = tuple(env.get(t, t) for t in f.terms)
        pred = predicates.get(f.name)
        if pred is None:
            if terms:
                raise GroundingError(f"unknown predicate {f.name!r}")
            return Formula("atom", name=f.name)
        if len(terms) != pred.arity:
            raise GroundingError(
                f"predicate {f.name} expects {pred.arity} arguments, got {len(terms)}")
        for t, d in zip(terms, pred.domains):
            if t not in domains.get(d, ()):
                raise GroundingError(f"unknown constant {t!r} for domain {d!r} in {f.name}")
        if pred.symmetric:
            terms = tuple(sorted(terms))
        return Formula("atom", name=f.name, terms=terms)
    if f.op in QUANTIFIERS:
        qf = Quantifier(f.terms, f.name, f.distinct)
        parts = []
        for b in bindings([qf], domains):
            inner = dict(env)
            inner.update(b)
            parts.append(ground_formula(f.args[0], domains, predicates, inner))
        if not parts:
            raise GroundingError(f"quantifier over {f.name!r} has no admissible binding")
        if len(parts) == 1:
            return parts[0]
        return Formula("and" if f.op == "forall" else "or", tuple(parts))
    return Formula(f.op, tuple(ground_formula(a, domains, predicates, env) for a in f.args))


def instantiate(s: Sentence, binding, domains, predicates) -> Sentence:
    """Ground one quantified sentence under ``binding`` (a tuple of (var, const))."""
    env = dict(binding)
    q = ground_formula(s.q, domains, predicates, env)
    r = ground_formula(s.r, domains, predicates, env) if s.r is not None else None
    label = s.label
    if binding:
        label = f"{s.label}[{','.join(f'{v}={c}' for v, c in binding)}]"
    return Sentence(label, q, s.lower, s.upper, r, s.tau, (), s.line)


def sentence_key(s: Sentence):
    return (canonical_key(canonical(s.q)),
            None if s.r is None else canonical_key(canonical(s.r)),
            s.lower, s.upper, s.tau)


def ground(program: LCNProgram) -> GroundProgram:
    """Expand quantified sentences over their bindings into a ground program."""
    validate_program(program)
    out: List[Sentence] = []
    prov = []
    seen = set()
    for s in program.sentences:
        for b in bindings(s.quantifiers, program.domains):
            g = instantiate(s, b, program.domains, program.predicates)
            key = sentence_key(g)
            if key in seen:
                continue
            seen.add(key)
            out.append(g)
            prov.append((s.label, b))
    order: Dict[str, Tuple[str, Tuple[str, ...]]] = {}
    for s in out:
        for f in (s.q, s.r):
            if f is None:
                continue
            _collect_atoms(f, order)
    if len(order) > MAX_ATOMS:
        raise CapacityError(f"{len(order)} ground atoms exceeds the cap of {MAX_ATOMS}")
    atoms = [Atom(name, args, i) for i, (name, args) in enumerate(order.values())]
    return GroundProgram(atoms, out, prov, dict(program.domains), dict(program.predicates))


def _collect_atoms(f: Formula, order):
    if f.op == "atom":
        order.setdefault(f.key, (f.name, f.terms))
    for a in f.args:
        _collect_atoms(a, order)


def validate_program(program: LCNProgram) -> None:
    """Check declarations, bounds and variable binding; raise GroundingError."""
    for p in program.predicates.values():
        for d in p.domains:
            if d not in program.domains:
                raise GroundingError(f"predicate {p.name} uses undeclared domain {d!r}")
    for name, consts in program.domains.items():
        if not consts:
            raise GroundingError(f"empty domain {name!r}")
    labels = set()
    for s in program.sentences:
        if s.label in labels:
            raise GroundingError(f"duplicate sentence label {s.label!r}")
        labels.add(s.label)
        if not (0.0 <= s.lower <= s.upper <= 1.0):
            raise GroundingError(f"{s.label}: bounds [{s.lower}, {s.upper}] are not a sub-interval of [0,1]")
        bound = set()
        for qf in s.quantifiers:
            if qf.domain not in program.domains:
                raise GroundingError(f"{s.label}: unknown domain {qf.domain!r}")
            bound.update(qf.variables)
        for f in (s.q, s.r):
            if f is not None:
                _check_vars(f, frozenset(bound), program, s.label)


def _check_vars(f: Formula, bound: frozenset, program: LCNProgram, label: str):
    if f.op == "atom":
        pred = program.predicates.get(f.name)
        if pred is None:
            if f.terms:
                raise GroundingError(f"{label}: unknown predicate {f.name!r}")
            return
        if len(f.terms) != pred.arity:
            raise GroundingError(
                f"{label}: predicate {f.name} expects {pred.arity} arguments, got {len(f.terms)}")
        for t, d in zip(f.terms, pred.domains):
            if t not in bound and t not in program.domains[d]:
                raise GroundingError(f"{label}: {t!r} is neither a bound variable nor a constant of {d}")
        return
    if f.op in QUANTIFIERS:
        if f.name not in program.domains:
            raise GroundingError(f"{label}: unknown domain {f.name!r}")
        bound = bound | set(f.terms)
    for a in f.args:
        _check_vars(a, bound, program, label)


def formula_atoms(f: Formula) -> frozenset:
    return frozenset(atoms_in_order(f))


def sentence_atoms(s: Sentence) -> frozenset:
    out = set(atoms_in_order(s.q))
    if s.r is not None:
        out.update(atoms_in_order(s.r))
    return frozenset(out)


def world_probability_vector(f: Formula, gp: GroundProgram) -> np.ndarray:
    """0/1 float indicator over worlds of ``gp``: the row summing P(f)."""
    return truth_table(f, gp.index, len(gp.atoms)).astype(float)
