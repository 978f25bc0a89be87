"""Line-oriented LCN text format.

::

    # comment
    domain People = {Tim, Tom, Tam}
    predicate Fr(People, People) symmetric
    predicate Sm(People)
    s1: 0.5 <= P(Fr(x,y) -> (Sm(x) <-> Sm(y))) <= 1 forall distinct x, y : People
    0.6 <= P(b | a) <= 0.7 ; tau=false
    P(c) = 0.25
    query P(a | b)

Formula operators from tightest to loosest: ``not``/``!``, ``and``/``&``,
``xor``, ``or``, ``->``/``implies`` (right associative), ``<->``/``iff``.
The bar ``|`` only separates the conditioning formula inside ``P(...)``.
Parsing never raises anything but :class:`ParseError`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import Diagnostic, ParseError
from .model import (
    QUANTIFIERS, Formula, LCNProgram, Predicate, Quantifier, Sentence,
    format_formula,
)

KEYWORDS = {
    "not", "and", "or", "xor", "implies", "iff", "forall", "exists",
    "distinct", "domain", "predicate", "symmetric", "tau", "true", "false",
    "query",
}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym><->|->|<=|>=|[()!&|,:;={}.])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, ident, sym, end
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Query:
    kind: str  # marginal | conditional
    q: Formula
    e: Optional[Formula] = None

    def __str__(self) -> str:
        if self.e is None:
            return f"P({format_formula(self.q)})"
        return f"P({format_formula(self.q)} | {format_formula(self.e)})"


class _Fail(Exception):
    def __init__(self, tok: Token, msg: str):
        self.diag = Diagnostic(tok.line, tok.col, msg)


def tokenize(line: str, lineno: int) -> List[Token]:
    toks = []
    pos = 0
    n = len(line)
    while pos < n:
        if line[pos] == "#":
            break
        m = _TOKEN.match(line, pos)
        if m is None:
            raise _Fail(Token("sym", line[pos], lineno, pos + 1),
                        f"unexpected character {line[pos]!r}")
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    toks.append(Token("end", "", lineno, len(line.split("#", 1)[0].rstrip()) + 1))
    return toks


class _Cursor:
    def __init__(self, toks: List[Token]):
        self.toks = toks
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "ident") and t.text == text

    def take(self) -> Token:
        t = self.tok
        if t.kind != "end":
            self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.take()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _Fail(self.tok, f"expected {text!r}, found {_describe(self.tok)}")
        return self.take()

    def ident(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise _Fail(t, f"expected {what}, found {_describe(t)}")
        return self.take()

    def number(self) -> float:
        t = self.tok
        if t.kind != "num":
            raise _Fail(t, f"expected a number, found {_describe(t)}")
        self.take()
        return float(t.text)

    def end(self):
        if self.tok.kind != "end":
            raise _Fail(self.tok, f"unexpected {_describe(self.tok)}")


def _describe(t: Token) -> str:
    return "end of line" if t.kind == "end" else repr(t.text)


# -- formulas -----------------------------------------------------------------

def _formula(c: _Cursor) -> Formula:
    return _iff(c)


def _iff(c):
    left = _implies(c)
    while c.at("<->") or c.at("iff"):
        c.take()
        left = Formula("iff", (left, _implies(c)))
    return left


def _implies(c):
    left = _nary(c, 0)
    if c.at("->") or c.at("implies"):
        c.take()
        return Formula("implies", (left, _implies(c)))
    return left


_LEVELS = (("or", ("or",)), ("xor", ("xor",)), ("and", ("and", "&")))


def _nary(c, level):
    if level == len(_LEVELS):
        return _unary(c)
    op, spellings = _LEVELS[level]
    parts = [_nary(c, level + 1)]
    while any(c.at(s) for s in spellings):
        c.take()
        parts.append(_nary(c, level + 1))
    return parts[0] if len(parts) == 1 else Formula(op, tuple(parts))


def _unary(c):
    if c.at("not") or c.at("!"):
        c.take()
        return Formula("not", (_unary(c),))
    return _primary(c)


def _primary(c):
    t = c.tok
    if c.accept("("):
        if c.at("forall") or c.at("exists"):
            f = _quantified(c)
        else:
            f = _formula(c)
        c.expect(")")
        return f
    if t.kind == "ident" and t.text not in KEYWORDS:
        c.take()
        terms: Tuple[str, ...] = ()
        if c.accept("("):
            names = [c.ident("argument").text]
            while c.accept(","):
                names.append(c.ident("argument").text)
            c.expect(")")
            terms = tuple(names)
        return Formula("atom", name=t.text, terms=terms)
    raise _Fail(t, f"expected a formula, found {_describe(t)}")


def _quantified(c):
    op = c.take().text
    distinct = c.accept("distinct")
    names = [c.ident("variable").text]
    while c.accept(","):
        names.append(c.ident("variable").text)
    c.expect(":")
    dom = c.ident("domain").text
    c.expect(".")
    body = _formula(c)
    return Formula(op, (body,), name=dom, terms=tuple(names), distinct=distinct)


def _prob(c) -> Tuple[Formula, Optional[Formula]]:
    t = c.tok
    if not (t.kind == "ident" and t.text == "P"):
        raise _Fail(t, f"expected 'P(', found {_describe(t)}")
    c.take()
    c.expect("(")
    q = _formula(c)
    r = _formula(c) if c.accept("|") else None
    c.expect(")")
    return q, r


def _quantifier_groups(c) -> Tuple[Quantifier, ...]:
    groups = []
    while c.accept("forall"):
        distinct = c.accept("distinct")
        names = [c.ident("variable").text]
        while c.accept(","):
            names.append(c.ident("variable").text)
        c.expect(":")
        dom = c.ident("domain").text
        groups.append(Quantifier(tuple(names), dom, distinct))
    return tuple(groups)


# -- lines --------------------------------------------------------------------

@dataclass
class _Raw:
    label: Optional[Token]
    lower: float
    upper: float
    q: Formula
    r: Optional[Formula]
    tau: bool
    quantifiers: Tuple[Quantifier, ...]
    start: Token
    bound_tok: Token


def _sentence(c: _Cursor) -> _Raw:
    start = c.tok
    label = None
    if c.tok.kind == "ident" and c.tok.text not in KEYWORDS and c.peek().text == ":":
        label = c.take()
        c.take()
    bound_tok = c.tok
    if c.tok.kind == "num":
        lower = c.number()
        c.expect("<=")
        q, r = _prob(c)
        upper = 1.0
        if c.accept("<="):
            upper = c.number()
    else:
        q, r = _prob(c)
        if c.accept("="):
            lower = upper = c.number()
        elif c.accept("<="):
            lower, upper = 0.0, c.number()
        elif c.accept(">="):
            lower, upper = c.number(), 1.0
        else:
            raise _Fail(c.tok, f"expected a bound after P(...), found {_describe(c.tok)}")
    quants = _quantifier_groups(c)
    tau = True
    if c.accept(";"):
        c.expect("tau")
        c.expect("=")
        if c.accept("true"):
            tau = True
        elif c.accept("false"):
            tau = False
        else:
            raise _Fail(c.tok, f"expected true or false, found {_describe(c.tok)}")
    c.end()
    return _Raw(label, lower, upper, q, r, tau, quants, start, bound_tok)


def _domain(c: _Cursor, prog: LCNProgram):
    name = c.ident("domain name")
    c.expect("=")
    c.expect("{")
    consts = []
    if not c.at("}"):
        consts.append(c.ident("constant").text)
        while c.accept(","):
            consts.append(c.ident("constant").text)
    c.expect("}")
    c.end()
    if name.text in prog.domains:
        raise _Fail(name, f"duplicate domain {name.text!r}")
    if not consts:
        raise _Fail(name, f"empty domain {name.text!r}")
    if len(set(consts)) != len(consts):
        raise _Fail(name, f"repeated constant in domain {name.text!r}")
    prog.domains[name.text] = tuple(consts)


def _predicate(c: _Cursor, prog: LCNProgram):
    name = c.ident("predicate name")
    c.expect("(")
    doms = [c.ident("domain")]
    while c.accept(","):
        doms.append(c.ident("domain"))
    c.expect(")")
    symmetric = c.accept("symmetric")
    c.end()
    for d in doms:
        if d.text not in prog.domains:
            raise _Fail(d, f"undeclared domain {d.text!r}")
    if name.text in prog.predicates:
        raise _Fail(name, f"duplicate predicate {name.text!r}")
    if symmetric and len({d.text for d in doms}) != 1:
        raise _Fail(name, "a symmetric predicate needs all arguments in one domain")
    prog.predicates[name.text] = Predicate(name.text, tuple(d.text for d in doms), symmetric)


def _check_formula(f: Formula, prog: LCNProgram, bound: dict, tok: Token, errs: list):
    """Report undeclared identifiers, arity mismatches and unbound variables."""
    if f.op == "atom":
        pred = prog.predicates.get(f.name)
        if pred is None:
            if f.terms:
                errs.append(Diagnostic(tok.line, tok.col, f"undeclared predicate {f.name!r}"))
            return
        if len(f.terms) != pred.arity:
            errs.append(Diagnostic(tok.line, tok.col,
                                   f"{f.name} expects {pred.arity} arguments, got {len(f.terms)}"))
            return
        for t, d in zip(f.terms, pred.domains):
            if t in bound:
                if bound[t] != d:
                    errs.append(Diagnostic(tok.line, tok.col,
                                           f"variable {t!r} ranges over {bound[t]}, "
                                           f"but {f.name} expects {d}"))
            elif t not in prog.domains[d]:
                errs.append(Diagnostic(tok.line, tok.col,
                                       f"undeclared identifier {t!r} in {f.name}"))
        return
    if f.op in QUANTIFIERS:
        if f.name not in prog.domains:
            errs.append(Diagnostic(tok.line, tok.col, f"undeclared domain {f.name!r}"))
            return
        bound = dict(bound)
        bound.update({v: f.name for v in f.terms})
    for a in f.args:
        _check_formula(a, prog, bound, tok, errs)


def _validate(raw: _Raw, prog: LCNProgram, labels: set, errs: list) -> Optional[Sentence]:
    before = len(errs)
    bt = raw.bound_tok
    for v in (raw.lower, raw.upper):
        if not 0.0 <= v <= 1.0:
            errs.append(Diagnostic(bt.line, bt.col, f"bound {v:g} is outside [0, 1]"))
    if raw.lower > raw.upper:
        errs.append(Diagnostic(bt.line, bt.col,
                               f"lower bound {raw.lower:g} exceeds upper bound {raw.upper:g}"))
    if raw.label is not None:
        label = raw.label.text
        if label in labels:
            errs.append(Diagnostic(raw.label.line, raw.label.col, f"duplicate sentence label {label!r}"))
    else:
        k = len(prog.sentences) + 1
        while f"s{k}" in labels:
            k += 1
        label = f"s{k}"
    bound = {}
    for qf in raw.quantifiers:
        if qf.domain not in prog.domains:
            errs.append(Diagnostic(raw.start.line, raw.start.col, f"undeclared domain {qf.domain!r}"))
        for v in qf.variables:
            bound[v] = qf.domain
    for f in (raw.q, raw.r):
        if f is not None:
            _check_formula(f, prog, bound, raw.bound_tok, errs)
    if len(errs) > before:
        return None
    labels.add(label)
    return Sentence(label, raw.q, raw.lower, raw.upper, raw.r, raw.tau,
                    raw.quantifiers, raw.start.line)


def parse_program(text: str) -> LCNProgram:
    """Parse LCN source text; raise ParseError listing every problem found."""
    prog = LCNProgram()
    errs: List[Diagnostic] = []
    labels: set = set()
    try:
        lines = str(text).replace("\r\n", "\n").replace("\r", "\n").split("\n")
    except Exception:  # pragma: no cover - str() of exotic objects
        raise ParseError([Diagnostic(1, 1, "input is not text")])
    for lineno, line in enumerate(lines, 1):
        try:
            toks = tokenize(line, lineno)
            if toks[0].kind == "end":
                continue
            c = _Cursor(toks)
            if c.at("domain") and c.peek().kind == "ident":
                c.take()
                _domain(c, prog)
            elif c.at("predicate") and c.peek().kind == "ident":
                c.take()
                _predicate(c, prog)
            elif c.at("query"):
                c.take()
                q, r = _prob(c)
                c.end()
                pending = len(errs)
                for f in (q, r):
                    if f is not None:
                        _check_formula(f, prog, {}, toks[0], errs)
                if len(errs) == pending:
                    prog.queries.append(
                        Query("marginal" if r is None else "conditional", q, r))
            else:
                s = _validate(_sentence(c), prog, labels, errs)
                if s is not None:
                    prog.sentences.append(s)
        except _Fail as e:
            errs.append(e.diag)
        except RecursionError:
            errs.append(Diagnostic(lineno, 1, "formula nested too deeply"))
    if errs:
        raise ParseError(errs)
    return prog


def parse_formula(text: str) -> Formula:
    """Parse a bare formula such as ``a and not b``."""
    try:
        c = _Cursor(tokenize(str(text).strip(), 1))
        if c.at("forall") or c.at("exists"):
            f = _quantified(c)
        else:
            f = _formula(c)
        c.end()
        return f
    except _Fail as e:
        raise ParseError([e.diag])
    except RecursionError:
        raise ParseError([Diagnostic(1, 1, "formula nested too deeply")])


def parse_query(text: str, program: Optional[LCNProgram] = None, atoms=None) -> Query:
    """Parse ``P(q)`` or ``P(q | e)``.

    When ``program`` is given, identifiers are checked against its
    declarations.  When ``atoms`` (ground atom keys) is given, every
    propositional atom must be one of them.
    """
    try:
        toks = tokenize(str(text).strip(), 1)
        c = _Cursor(toks)
        q, r = _prob(c)
        c.end()
    except _Fail as e:
        raise ParseError([e.diag])
    except RecursionError:
        raise ParseError([Diagnostic(1, 1, "formula nested too deeply")])
    errs: List[Diagnostic] = []
    if program is not None:
        for f in (q, r):
            if f is not None:
                _check_formula(f, program, {}, toks[0], errs)
    if atoms is not None and not errs:
        known = set(atoms)
        for f in (q, r):
            if f is None:
                continue
            for k in _prop_atoms(f, program):
                if k not in known:
                    errs.append(Diagnostic(1, 1, f"unknown atom {k!r}"))
    if errs:
        raise ParseError(errs)
    return Query("marginal" if r is None else "conditional", q, r)


def _prop_atoms(f: Formula, program):
    if f.op == "atom":
        preds = program.predicates if program is not None else {}
        if not f.terms and f.name not in preds:
            yield f.name
        return
    for a in f.args:
        yield from _prop_atoms(a, program)


# -- printing -----------------------------------------------------------------

def _fmt_num(v: float) -> str:
    return repr(float(v)) if v != int(v) else str(int(v))


def format_sentence(s: Sentence) -> str:
    body = format_formula(s.q)
    if s.r is not None:
        body += " | " + format_formula(s.r)
    out = f"{s.label}: {_fmt_num(s.lower)} <= P({body}) <= {_fmt_num(s.upper)}"
    for qf in s.quantifiers:
        d = "distinct " if qf.distinct else ""
        out += f" forall {d}{', '.join(qf.variables)} : {qf.domain}"
    if not s.tau:
        out += " ; tau=false"
    return out


def format_program(prog: LCNProgram) -> str:
    """Render a program so that ``parse_program`` reproduces it."""
    lines = []
    for name, consts in prog.domains.items():
        lines.append(f"domain {name} = {{{', '.join(consts)}}}")
    for p in prog.predicates.values():
        sym = " symmetric" if p.symmetric else ""
        lines.append(f"predicate {p.name}({', '.join(p.domains)}){sym}")
    lines.extend(format_sentence(s) for s in prog.sentences)
    lines.extend(f"query {q}" for q in prog.queries)
    return "\n".join(lines) + "\n"


def strip_positions(prog: LCNProgram):
    """Structural view of a program that ignores source line numbers."""
    return (
        dict(prog.domains),
        dict(prog.predicates),
        [(s.label, s.q, s.r, s.lower, s.upper, s.tau, s.quantifiers) for s in prog.sentences],
        list(prog.queries),
    )


def load(path) -> LCNProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
