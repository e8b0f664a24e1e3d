"""Syntax of co-safe truncated LTL: predicates, formula AST, parser, printer.

Concrete grammar (ASCII)::

    formula := impl
    impl    := disj ('->' disj)?
    disj    := conj ('|' conj)*
    conj    := temp ('&' temp)*
    temp    := unary (('U' | 'T') unary)*
    unary   := ('!' | 'F' | 'X') unary | atom
    atom    := identifier | 'true' | 'false' | '(' formula ')'

``F`` is *eventually*, ``X`` is *next*, ``U`` is *until* and ``T`` is *then*.
``false`` is sugar for ``!true``. There is no *always* operator; ``G`` and
``always`` are rejected by the lexer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np
import yaml

AFFINE = "affine-threshold"
BALL = "norm-ball"


class SpecificationError(ValueError):
    """Base class for every error caused by a bad task specification."""


class FormulaSyntaxError(SpecificationError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class UnknownPredicateError(SpecificationError):
    pass


class ForbiddenOperatorError(FormulaSyntaxError):
    pass


class NotCoSafeError(SpecificationError):
    pass


# ---------------------------------------------------------------------------
# predicates


@dataclass(frozen=True)
class Predicate:
    """Atomic predicate over a state vector.

    ``affine-threshold`` predicates hold when every row satisfies
    ``coeffs . s < threshold``; robustness is the smallest slack
    ``threshold - coeffs . s``. A single row is the plain ``f(s) < c`` form.
    ``norm-ball`` predicates hold when ``|s[dims]| < radius``; robustness is
    ``radius - |s[dims]|``.
    """

    name: str
    kind: str
    coeffs: tuple[tuple[float, ...], ...] = ()
    thresholds: tuple[float, ...] = ()
    dims: tuple[int, ...] = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == AFFINE:
            if not self.coeffs or len(self.coeffs) != len(self.thresholds):
                raise SpecificationError(f"predicate {self.name!r}: need one threshold per coefficient row")
            for row in self.coeffs:
                if not any(c != 0 for c in row):
                    raise SpecificationError(f"predicate {self.name!r}: coefficients are all zero")
        elif self.kind == BALL:
            if not self.dims:
                raise SpecificationError(f"predicate {self.name!r}: norm-ball needs at least one dimension")
            if not self.radius > 0:
                raise SpecificationError(f"predicate {self.name!r}: radius must be positive")
        else:
            raise SpecificationError(f"predicate {self.name!r}: unknown kind {self.kind!r}")

    @classmethod
    def affine(cls, name, coeffs, threshold):
        """Single-row ``coeffs . s < threshold``."""
        return cls(name, AFFINE, (tuple(float(c) for c in coeffs),), (float(threshold),))

    @classmethod
    def affine_rows(cls, name, rows):
        """Conjunction of ``(coeffs, threshold)`` rows."""
        return cls(
            name,
            AFFINE,
            tuple(tuple(float(c) for c in r) for r, _ in rows),
            tuple(float(t) for _, t in rows),
        )

    @classmethod
    def ball(cls, name, dims, radius):
        return cls(name, BALL, dims=tuple(int(d) for d in dims), radius=float(radius))

    @property
    def max_dim(self) -> int:
        if self.kind == BALL:
            return max(self.dims) + 1
        return max(len(r) for r in self.coeffs)

    def robustness(self, s) -> np.ndarray:
        """Robustness at a state (shape ``(n,)``) or a batch (``(..., n)``)."""
        s = np.asarray(s, dtype=float)
        if self.kind == BALL:
            return self.radius - np.linalg.norm(s[..., list(self.dims)], axis=-1)
        out = None
        for row, c in zip(self.coeffs, self.thresholds):
            v = c - s[..., : len(row)] @ np.asarray(row)
            out = v if out is None else np.minimum(out, v)
        return out

    def holds(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.kind == BALL:
            return np.linalg.norm(s[..., list(self.dims)], axis=-1) < self.radius
        out = None
        for row, c in zip(self.coeffs, self.thresholds):
            v = s[..., : len(row)] @ np.asarray(row) < c
            out = v if out is None else out & v
        return out


def symbol_predicates(names) -> dict[str, Predicate]:
    """Predicates reading truth values from 0/1 state components.

    Atom ``names[i]`` holds iff ``s[i] > 0.5``, which lets a sequence of truth
    assignments be evaluated as a numeric trajectory.
    """
    table = {}
    n = len(names)
    for i, name in enumerate(names):
        row = [0.0] * n
        row[i] = -1.0
        table[name] = Predicate.affine(name, row, -0.5)
    return table


def check_dimensions(table: Mapping[str, Predicate], state_dim: int) -> None:
    for p in table.values():
        if p.max_dim > state_dim:
            raise SpecificationError(
                f"predicate {p.name!r} reads dimension {p.max_dim - 1} but the state has {state_dim}"
            )


def load_predicate_table(path) -> dict[str, Predicate]:
    """Read a predicate table from YAML.

    Schema::

        predicates:
          a:
            kind: affine-threshold
            constraints:          # conjunction; each row is coeffs . s < threshold
              - {coeffs: [-1.0], threshold: -3.0}
              - {coeffs: [1.0], threshold: 5.0}
          red:
            kind: norm-ball
            dims: [0, 1]
            radius: 0.05
    """
    with open(path) as fh:
        doc = yaml.safe_load(fh) or {}
    return predicate_table_from_dict(doc)


def predicate_table_from_dict(doc) -> dict[str, Predicate]:
    entries = doc.get("predicates", doc)
    if not isinstance(entries, Mapping):
        raise SpecificationError("predicate table must map names to definitions")
    table = {}
    for name, spec in entries.items():
        if not _IDENT.fullmatch(str(name)) or name in _KEYWORDS or name in _FORBIDDEN:
            raise SpecificationError(f"invalid predicate name {name!r}")
        kind = spec.get("kind")
        try:
            if kind == AFFINE:
                rows = spec.get("constraints")
                if rows is None:
                    rows = [{"coeffs": spec["coeffs"], "threshold": spec["threshold"]}]
                table[name] = Predicate.affine_rows(name, [(r["coeffs"], r["threshold"]) for r in rows])
            elif kind == BALL:
                table[name] = Predicate.ball(name, spec["dims"], spec["radius"])
            else:
                raise SpecificationError(f"predicate {name!r}: unknown kind {kind!r}")
        except KeyError as exc:
            raise SpecificationError(f"predicate {name!r}: missing field {exc}") from None
    return table


def predicate_table_to_dict(table: Mapping[str, Predicate]) -> dict:
    out = {}
    for name, p in table.items():
        if p.kind == BALL:
            out[name] = {"kind": BALL, "dims": list(p.dims), "radius": p.radius}
        else:
            out[name] = {
                "kind": AFFINE,
                "constraints": [
                    {"coeffs": list(r), "threshold": c} for r, c in zip(p.coeffs, p.thresholds)
                ],
            }
    return {"predicates": out}


# ---------------------------------------------------------------------------
# abstract syntax


class Formula:
    __slots__ = ()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, repr=False)
class Top(Formula):
    def __repr__(self):
        return "Top()"


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    predicate: Predicate

    @property
    def name(self) -> str:
        return self.predicate.name

    def __repr__(self):
        return f"Atom({self.name})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def __repr__(self):
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Eventually(Formula):
    arg: Formula

    def __repr__(self):
        return f"Eventually({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Next(Formula):
    arg: Formula

    def __repr__(self):
        return f"Next({self.arg!r})"


@dataclass(frozen=True, repr=False)
class _Binary(Formula):
    left: Formula
    right: Formula

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    pass


class Until(_Binary):
    pass


class Then(_Binary):
    pass


TRUE = Top()
FALSE = Not(TRUE)

UNARY = (Not, Eventually, Next)
BINARY = (And, Or, Implies, Until, Then)
TEMPORAL = (Eventually, Next, Until, Then)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, UNARY):
        return (f.arg,)
    if isinstance(f, _Binary):
        return (f.left, f.right)
    return ()


def subformulas(f: Formula) -> Iterator[Formula]:
    """Pre-order, left to right."""
    yield f
    for c in children(f):
        yield from subformulas(c)


def is_propositional(f: Formula) -> bool:
    return not any(isinstance(g, TEMPORAL) for g in subformulas(f))


def is_nnf(f: Formula) -> bool:
    for g in subformulas(f):
        if isinstance(g, Implies):
            return False
        if isinstance(g, Not) and not isinstance(g.arg, (Atom, Top)):
            return False
    return True


def depth(f: Formula) -> int:
    cs = children(f)
    return 0 if not cs else 1 + max(depth(c) for c in cs)


def atoms(f: Formula) -> list[Predicate]:
    """Predicates in order of first syntactic occurrence."""
    seen = {}
    for g in subformulas(f):
        if isinstance(g, Atom) and g.name not in seen:
            seen[g.name] = g.predicate
    return list(seen.values())


def conjoin(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def disjoin(parts) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[0]
    for p in parts[1:]:
        out = Or(out, p)
    return out


# ---------------------------------------------------------------------------
# printing

_PREC = {Implies: 1, Or: 2, And: 3, Until: 4, Then: 4}
_UNARY_PREC = 5
_ATOM_PREC = 6
_SYMBOL = {Implies: "->", Or: "|", And: "&", Until: "U", Then: "T"}


def _prec(f: Formula) -> int:
    if isinstance(f, _Binary):
        return _PREC[type(f)]
    if isinstance(f, Not) and isinstance(f.arg, Top):
        return _ATOM_PREC
    if isinstance(f, UNARY):
        return _UNARY_PREC
    return _ATOM_PREC


def to_string(f: Formula) -> str:
    """Print in the ASCII grammar with the fewest parentheses that reparse identically."""
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, UNARY):
        inner = to_string(f.arg)
        if _prec(f.arg) < _UNARY_PREC:
            inner = f"({inner})"
        if isinstance(f, Not):
            return "!" + inner
        op = "F" if isinstance(f, Eventually) else "X"
        return f"{op} {inner}" if not inner.startswith("(") else op + inner
    p = _PREC[type(f)]
    left, right = to_string(f.left), to_string(f.right)
    # left-associative chains; '->' takes no chain at all
    if _prec(f.left) < p or (isinstance(f, Implies) and _prec(f.left) <= p):
        left = f"({left})"
    if _prec(f.right) <= p:
        right = f"({right})"
    return f"{left} {_SYMBOL[type(f)]} {right}"


# ---------------------------------------------------------------------------
# parsing

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_KEYWORDS = {"F", "X", "U", "T", "true", "false"}
_FORBIDDEN = {"G", "always"}
_TOKEN = re.compile(r"\s*(?:(->)|([()!&|])|([A-Za-z_][A-Za-z0-9_]*))")


def tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        tok = m.group(1) or m.group(2) or m.group(3)
        start = m.end() - len(tok)
        if tok in _FORBIDDEN:
            raise ForbiddenOperatorError(f"operator {tok!r} (always) is not part of the co-safe fragment", start)
        tokens.append((tok, start))
        pos = m.end()
    tokens.append(("<end>", n))
    return tokens


class _Parser:
    def __init__(self, text, table):
        self.tokens = tokenize(text)
        self.i = 0
        self.table = table

    def peek(self):
        return self.tokens[self.i][0]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, tok):
        got, pos = self.take()
        if got != tok:
            if tok == ")":
                raise FormulaSyntaxError("unbalanced parentheses: expected ')'", pos)
            raise FormulaSyntaxError(f"expected {tok!r}, got {got!r}", pos)

    def formula(self):
        left = self.disj()
        if self.peek() == "->":
            self.take()
            left = Implies(left, self.disj())
            if self.peek() == "->":
                raise FormulaSyntaxError("'->' does not chain; add parentheses", self.tokens[self.i][1])
        return left

    def disj(self):
        left = self.conj()
        while self.peek() == "|":
            self.take()
            left = Or(left, self.conj())
        return left

    def conj(self):
        left = self.temp()
        while self.peek() == "&":
            self.take()
            left = And(left, self.temp())
        return left

    def temp(self):
        left = self.unary()
        while self.peek() in ("U", "T"):
            op, _ = self.take()
            right = self.unary()
            left = Until(left, right) if op == "U" else Then(left, right)
        return left

    def unary(self):
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "F":
            self.take()
            return Eventually(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        return self.atom()

    def atom(self):
        tok, pos = self.take()
        if tok == "(":
            f = self.formula()
            self.expect(")")
            return f
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok == ")":
            raise FormulaSyntaxError("unbalanced parentheses: unexpected ')'", pos)
        if tok == "<end>":
            raise FormulaSyntaxError("unexpected end of formula", pos)
        if tok in _KEYWORDS or not _IDENT.fullmatch(tok):
            raise FormulaSyntaxError(f"unexpected token {tok!r}", pos)
        if tok not in self.table:
            raise UnknownPredicateError(f"unknown predicate {tok!r} at position {pos}")
        return Atom(self.table[tok])


def parse(text: str, predicates: Mapping[str, Predicate]) -> Formula:
    p = _Parser(text, predicates)
    f = p.formula()
    tok, pos = p.take()
    if tok != "<end>":
        if tok == ")":
            raise FormulaSyntaxError("unbalanced parentheses: unexpected ')'", pos)
        raise FormulaSyntaxError(f"unexpected token {tok!r}", pos)
    return f


# ---------------------------------------------------------------------------
# normalization


def normalize(f: Formula) -> Formula:
    """Negation normal form with implications removed.

    Negations are pushed onto atoms (and the ``true`` constant). A negation
    that would have to cross a temporal operator leaves the co-safe fragment
    and is rejected.
    """
    return _nnf(f, False)


def _nnf(f: Formula, neg: bool) -> Formula:
    if isinstance(f, (Top, Atom)):
        return Not(f) if neg else f
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        a, b = _nnf(f.left, neg), _nnf(f.right, neg)
        return Or(a, b) if neg else And(a, b)
    if isinstance(f, Or):
        a, b = _nnf(f.left, neg), _nnf(f.right, neg)
        return And(a, b) if neg else Or(a, b)
    if isinstance(f, Implies):
        if neg:
            return And(_nnf(f.left, False), _nnf(f.right, True))
        return Or(_nnf(f.left, True), _nnf(f.right, False))
    if neg:
        raise NotCoSafeError(
            f"negation of temporal formula '{to_string(f)}' has no co-safe equivalent"
        )
    if isinstance(f, (Eventually, Next)):
        return type(f)(_nnf(f.arg, False))
    return type(f)(_nnf(f.left, False), _nnf(f.right, False))

