"""Deterministic finite automata compiled from co-safe formulas by progression.

A state is the residual obligation left after reading a prefix of the trace.
Residuals are kept in a canonical disjunctive normal form whose literals are
atoms, negated atoms and temporal subformulas; two prefixes lead to the same
state exactly when their normalised residuals coincide. The residual ``true``
is the accepting state and the residual ``false`` is the reject sink.
"""

from __future__ import annotations

import itertools
import json
import logging
from functools import lru_cache

import numpy as np
from sympy import Symbol
from sympy import And as SAnd
from sympy import Not as SNot
from sympy import Or as SOr
from sympy.logic import SOPform

from .formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Eventually,
    Formula,
    Next,
    Not,
    Or,
    SpecificationError,
    Then,
    Top,
    Until,
    atoms,
    conjoin,
    disjoin,
    is_nnf,
    is_propositional,
    parse,
    subformulas,
    to_string,
)
from .semantics import RHO_MAX

log = logging.getLogger(__name__)

MAX_ATOMS = 10
MAX_STATES = 4096


class UnsupportedFragmentError(SpecificationError):
    pass


class StateExplosionError(SpecificationError):
    pass


# ---------------------------------------------------------------------------
# residuals: frozenset of clauses, clause = frozenset of literals

DNF_TRUE = frozenset([frozenset()])
DNF_FALSE = frozenset()
_NONEMPTY = frozenset([frozenset([Eventually(TRUE)])])


def _neg_of(lit):
    return lit.arg if isinstance(lit, Not) else Not(lit)


def _or(*dnfs):
    return frozenset().union(*dnfs)


def _and(x, y):
    return frozenset(a | b for a in x for b in y)


def to_dnf(f: Formula) -> frozenset:
    """DNF of an NNF formula, treating temporal subformulas as literals."""
    if isinstance(f, Top):
        return DNF_TRUE
    if isinstance(f, Not) and isinstance(f.arg, Top):
        return DNF_FALSE
    if isinstance(f, And):
        return _and(to_dnf(f.left), to_dnf(f.right))
    if isinstance(f, Or):
        return _or(to_dnf(f.left), to_dnf(f.right))
    return frozenset([frozenset([f])])


def progress(f: Formula, true_atoms) -> frozenset:
    """Residual of ``f`` after reading one symbol (set of true atom names)."""
    if isinstance(f, Top):
        return DNF_TRUE
    if isinstance(f, Atom):
        return DNF_TRUE if f.name in true_atoms else DNF_FALSE
    if isinstance(f, Not):
        if isinstance(f.arg, Top):
            return DNF_FALSE
        return DNF_FALSE if f.arg.name in true_atoms else DNF_TRUE
    if isinstance(f, And):
        return _and(progress(f.left, true_atoms), progress(f.right, true_atoms))
    if isinstance(f, Or):
        return _or(progress(f.left, true_atoms), progress(f.right, true_atoms))
    if isinstance(f, Next):
        # the argument needs a non-empty remainder, which is exactly F true
        return _and(to_dnf(f.arg), _NONEMPTY)
    if isinstance(f, Eventually):
        return _or(progress(f.arg, true_atoms), frozenset([frozenset([f])]))
    if isinstance(f, Until):
        keep = _and(progress(f.left, true_atoms), frozenset([frozenset([f])]))
        return _or(progress(f.right, true_atoms), keep)
    if isinstance(f, Then):
        armed = _and(progress(f.left, true_atoms), frozenset([frozenset([Eventually(f.right)])]))
        return _or(armed, frozenset([frozenset([f])]))
    raise TypeError(f"not a formula: {f!r}")


def progress_dnf(residual: frozenset, true_atoms) -> frozenset:
    out = set()
    for clause in residual:
        acc = DNF_TRUE
        for lit in clause:
            acc = _and(acc, progress(lit, true_atoms))
            if not acc:
                break
        out |= acc
    return simplify(frozenset(out))


@lru_cache(maxsize=None)
def entails(x: Formula, y: Formula) -> bool:
    """Sound, incomplete syntactic check that ``x`` implies ``y`` on every trace."""
    if x == y or isinstance(y, Top) or x == FALSE:
        return True
    if isinstance(x, Or):
        return entails(x.left, y) and entails(x.right, y)
    if isinstance(y, And):
        return entails(x, y.left) and entails(x, y.right)
    if isinstance(x, And) and (entails(x.left, y) or entails(x.right, y)):
        return True
    if isinstance(y, Or) and (entails(x, y.left) or entails(x, y.right)):
        return True
    if isinstance(y, Eventually):
        # the obligation can be met now, or a later witness of x carries y
        if entails(x, y.arg):
            return True
        if isinstance(x, (Eventually, Next)):
            return entails(x.arg, y)
        if isinstance(x, (Until, Then)):
            return entails(x.right, y)
        return False
    if isinstance(y, Until):
        if entails(x, y.right):
            return True
        return isinstance(x, Until) and entails(x.left, y.left) and entails(x.right, y.right)
    if isinstance(y, Then):
        return isinstance(x, Then) and entails(x.left, y.left) and entails(x.right, y.right)
    if isinstance(y, Next):
        return isinstance(x, Next) and entails(x.arg, y.arg)
    return False


def _key(obj) -> str:
    if isinstance(obj, Formula):
        return to_string(obj)
    return " & ".join(sorted(_key(x) for x in obj))


def simplify(residual: frozenset) -> frozenset:
    """Drop contradictory clauses, implied literals and stronger clauses."""
    clauses = []
    for clause in residual:
        if any(_neg_of(l) in clause for l in clause if isinstance(l, (Atom, Not))):
            continue
        lits = sorted(clause, key=_key)
        kept = list(lits)
        for l in lits:
            if any(o is not l and entails(o, l) for o in kept):
                kept.remove(l)
        clauses.append(frozenset(kept))
    clauses = sorted(set(clauses), key=lambda c: (len(c), _key(c)))
    kept = list(clauses)
    for c in clauses:
        for o in kept:
            if o is not c and all(any(entails(l, m) for l in c) for m in o):
                kept.remove(c)
                break
    return frozenset(kept)


def dnf_to_formula(residual: frozenset) -> Formula:
    clauses = sorted(residual, key=lambda c: (len(c), _key(c)))
    return disjoin(conjoin(sorted(c, key=_key)) for c in clauses)


# ---------------------------------------------------------------------------
# automaton


class Automaton:
    """Deterministic FSA with propositional guards.

    ``delta[i, sym]`` is the successor index of state ``i`` under the truth
    assignment ``sym`` (bit ``k`` set when ``atoms[k]`` holds).
    """

    def __init__(self, formula, atoms, names, residuals, delta, initial, finals, reject, rho_max=RHO_MAX):
        self.formula = formula
        self.atoms = list(atoms)
        self.states = list(names)
        self.residuals = dict(zip(names, residuals))
        self.delta = delta
        self.initial = initial
        self.finals = frozenset(finals)
        self.reject = reject
        self.rho_max = rho_max
        self.index = {q: i for i, q in enumerate(self.states)}
        self._build_guards()

    # -- construction helpers

    def _build_guards(self):
        n = len(self.atoms)
        symbols = [Symbol(f"x{k}") for k in range(n)]
        self.edges = {}
        self._edge_clauses = {}
        for i, q in enumerate(self.states):
            groups = {}
            for sym in range(2 ** n):
                groups.setdefault(int(self.delta[i, sym]), []).append(sym)
            for j in sorted(groups):
                clauses = _minimise(groups[j], n, symbols)
                dst = self.states[j]
                self._edge_clauses[(q, dst)] = clauses
                self.edges[(q, dst)] = self._clauses_to_formula(clauses)
        self._disjunction = {}
        for q in self.states:
            if q in self.finals:
                clauses = [()]
            else:
                syms = [
                    sym
                    for sym in range(2 ** n)
                    if self.states[int(self.delta[self.index[q], sym])] not in (q, self.reject)
                ]
                clauses = _minimise(syms, n, symbols)
            self._disjunction[q] = clauses

    def _clauses_to_formula(self, clauses) -> Formula:
        parts = []
        for clause in clauses:
            lits = [Atom(self.atoms[k]) if pos else Not(Atom(self.atoms[k])) for k, pos in clause]
            parts.append(conjoin(lits))
        return disjoin(parts)

    # -- queries

    @property
    def alphabet(self) -> list[Formula]:
        """Every truth assignment over the atoms, as a conjunction of literals."""
        n = len(self.atoms)
        out = []
        for sym in range(2 ** n):
            lits = [Atom(p) if sym >> k & 1 else Not(Atom(p)) for k, p in enumerate(self.atoms)]
            out.append(conjoin(lits))
        return out

    def successors(self, q) -> list:
        return [dst for (src, dst) in self.edges if src == q]

    def guard(self, q, q2) -> Formula:
        return self.edges[(q, q2)]

    def is_final(self, q) -> bool:
        return q in self.finals

    def atom_robustness(self, s) -> np.ndarray:
        """``(k,)`` robustness of every atom at state ``s`` (or ``(..., k)`` for a batch)."""
        s = np.asarray(s, dtype=float)
        if not self.atoms:
            return np.zeros(s.shape[:-1] + (0,))
        return np.stack([np.asarray(p.robustness(s), dtype=float) for p in self.atoms], axis=-1)

    def symbol(self, s) -> np.ndarray | int:
        """Truth-assignment index of a state or batch of states."""
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape[:-1], dtype=np.int64)
        for k, p in enumerate(self.atoms):
            out |= np.asarray(p.holds(s), dtype=np.int64) << k
        return int(out) if out.ndim == 0 else out

    def clause_robustness(self, clauses, rob) -> np.ndarray:
        """Robustness of a DNF guard given atom robustness ``rob`` (``(..., k)``)."""
        rob = np.asarray(rob, dtype=float)
        shape = rob.shape[:-1]
        if not clauses:
            return np.full(shape, -self.rho_max)
        best = None
        for clause in clauses:
            if not clause:
                v = np.full(shape, self.rho_max)
            else:
                v = None
                for k, pos in clause:
                    x = rob[..., k] if pos else -rob[..., k]
                    v = x if v is None else np.minimum(v, x)
            best = v if best is None else np.maximum(best, v)
        return best

    def guard_robustness(self, q, q2, s) -> float:
        return float(self.clause_robustness(self._edge_clauses[(q, q2)], self.atom_robustness(s)))

    def guard_disjunction(self, q) -> Formula:
        """Disjunction of guards leaving ``q`` for a different, non-reject state."""
        clauses = self._disjunction[q]
        if clauses == [()]:
            return TRUE
        return self._clauses_to_formula(clauses)

    def disjunction_robustness(self, q, s):
        """Robustness of :meth:`guard_disjunction` at a state or batch of states."""
        return self.clause_robustness(self._disjunction[q], self.atom_robustness(s))

    def step(self, q, s):
        """Successor of ``q`` after observing MDP state ``s``.

        The transition fires when its guard has strictly positive robustness.
        When the only satisfied guard sits exactly on the boundary
        (robustness 0) the automaton stays put and a warning is logged.
        """
        i = self.index[q]
        dst = self.states[int(self.delta[i, self.symbol(s)])]
        if dst == q:
            return q
        if self.guard_robustness(q, dst, s) > 0:
            return dst
        log.warning("guard %s -> %s has zero robustness at %s; staying in %s", q, dst, np.asarray(s).tolist(), q)
        return q

    def step_indices(self, qi, states):
        """Vectorised :meth:`step` over parallel episodes.

        ``qi`` holds state indices ``(N,)`` and ``states`` is ``(N, n)``.
        Returns the successor indices and the atom robustness ``(N, k)``.
        """
        qi = np.asarray(qi, dtype=np.int64)
        rob = self.atom_robustness(states)
        syms = ((rob > 0).astype(np.int64) << np.arange(len(self.atoms))).sum(axis=-1)
        nxt = self.delta[qi, syms]
        for i in np.flatnonzero(nxt != qi):
            src, dst = self.states[qi[i]], self.states[nxt[i]]
            if self.clause_robustness(self._edge_clauses[(src, dst)], rob[i]) <= 0:
                log.warning("guard %s -> %s has zero robustness; staying in %s", src, dst, src)
                nxt[i] = qi[i]
        return nxt, rob

    def disjunction_robustness_indices(self, qi, rob) -> np.ndarray:
        """Robustness of each episode's guard disjunction given atom robustness ``rob``."""
        qi = np.asarray(qi, dtype=np.int64)
        out = np.empty(len(qi))
        for j in np.unique(qi):
            mask = qi == j
            out[mask] = self.clause_robustness(self._disjunction[self.states[j]], rob[mask])
        return out

    def run(self, traj) -> list:
        """Automaton states after reading each state of ``traj``."""
        from .semantics import as_states

        q = self.initial
        out = []
        for s in as_states(traj):
            q = self.step(q, s)
            out.append(q)
        return out

    def accepts(self, traj) -> bool:
        if self.initial in self.finals:
            return True
        return any(q in self.finals for q in self.run(traj))

    def accepts_batch(self, states) -> np.ndarray:
        """Acceptance for a batch ``(N, L, n)`` using the symbol-level transition table."""
        states = np.asarray(states, dtype=float)
        syms = self.symbol(states)
        finals = np.array([q in self.finals for q in self.states])
        cur = np.full(states.shape[0], self.index[self.initial])
        acc = finals[cur].copy()
        for t in range(states.shape[1]):
            cur = self.delta[cur, syms[:, t]]
            acc |= finals[cur]
        return acc

    # -- output

    def to_dict(self) -> dict:
        return {
            "formula": to_string(self.formula),
            "atoms": [p.name for p in self.atoms],
            "states": [{"name": q, "residual": to_string(self.residuals[q])} for q in self.states],
            "initial": self.initial,
            "finals": sorted(self.finals, key=self.index.get),
            "reject": self.reject,
            "edges": [
                {"from": src, "to": dst, "guard": to_string(g)} for (src, dst), g in self.edges.items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_dot(self) -> str:
        return export_dot(self)

    def __repr__(self):
        return f"Automaton({to_string(self.formula)!r}, states={self.states})"


def _minimise(syms, n, symbols):
    """Minimal sum-of-products cover of the given assignments, as sorted clause tuples."""
    if not syms:
        return []
    if len(syms) == 2 ** n:
        return [()]
    minterms = [[sym >> k & 1 for k in range(n)] for sym in syms]
    expr = SOPform(symbols, minterms)
    terms = expr.args if isinstance(expr, SOr) else (expr,)
    clauses = []
    for term in terms:
        lits = term.args if isinstance(term, SAnd) else (term,)
        clause = []
        for lit in lits:
            if isinstance(lit, SNot):
                clause.append((int(lit.args[0].name[1:]), False))
            else:
                clause.append((int(lit.name[1:]), True))
        clauses.append(tuple(sorted(clause)))
    return sorted(clauses, key=lambda c: (len(c), [(k, not pos) for k, pos in c]))


def compile(f: Formula, max_states: int = MAX_STATES, rho_max: float = RHO_MAX) -> Automaton:  # noqa: A001
    """Build the automaton of a normalised co-safe formula by progression."""
    if not is_nnf(f):
        raise SpecificationError("compile expects a normalised formula; call normalize() first")
    for g in subformulas(f):
        if isinstance(g, (Until, Then)) and not is_propositional(g.left):
            raise UnsupportedFragmentError(
                f"left operand of '{to_string(g)}' must be propositional for automaton construction"
            )
    preds = atoms(f)
    if len(preds) > MAX_ATOMS:
        raise StateExplosionError(f"{len(preds)} atoms exceed the limit of {MAX_ATOMS}")
    n = len(preds)
    letters = [frozenset(p.name for k, p in enumerate(preds) if sym >> k & 1) for sym in range(2 ** n)]

    start = simplify(to_dnf(f))
    found = {start: 0}
    order = [start]
    rows = []
    i = 0
    while i < len(order):
        res = order[i]
        row = []
        for letter in letters:
            nxt = progress_dnf(res, letter)
            if nxt not in found:
                if len(order) >= max_states:
                    raise StateExplosionError(f"automaton exceeds {max_states} states")
                found[nxt] = len(order)
                order.append(nxt)
            row.append(found[nxt])
        rows.append(row)
        i += 1

    names = []
    counter = itertools.count()
    for res in order:
        if res == DNF_TRUE:
            names.append("qf")
        elif res == DNF_FALSE:
            names.append("qr")
        else:
            names.append(f"q{next(counter)}")
    delta = np.asarray(rows, dtype=np.int64).reshape(len(order), 2 ** n)
    finals = [q for q, r in zip(names, order) if r == DNF_TRUE]
    reject = next((q for q, r in zip(names, order) if r == DNF_FALSE), None)
    residuals = [dnf_to_formula(r) for r in order]
    return Automaton(f, preds, names, residuals, delta, names[0], finals, reject, rho_max)


def from_dict(doc: dict, predicates) -> Automaton:
    """Rebuild an automaton from :meth:`Automaton.to_dict` output."""
    f = parse(doc["formula"], predicates)
    preds = [predicates[name] for name in doc["atoms"]]
    names = [s["name"] for s in doc["states"]]
    residuals = [parse(s["residual"], predicates) for s in doc["states"]]
    n = len(preds)
    index = {q: i for i, q in enumerate(names)}
    delta = np.full((len(names), 2 ** n), -1, dtype=np.int64)
    for e in doc["edges"]:
        g = parse(e["guard"], predicates)
        for sym in range(2 ** n):
            # progression of a propositional guard is exactly true or false
            if progress(g, {p.name for k, p in enumerate(preds) if sym >> k & 1}) == DNF_TRUE:
                if delta[index[e["from"]], sym] != -1:
                    raise SpecificationError(f"guards leaving {e['from']} overlap")
                delta[index[e["from"]], sym] = index[e["to"]]
    if (delta < 0).any():
        raise SpecificationError("guards are not exhaustive")
    return Automaton(f, preds, names, residuals, delta, doc["initial"], doc["finals"], doc["reject"])


# ---------------------------------------------------------------------------
# graphviz


def _quote(s: str) -> str:
    return '"{}"'.format(s.replace("\\", "\\\\").replace('"', '\\"'))


def export_dot(aut: Automaton) -> str:
    lines = ["digraph fsa {", "  rankdir=LR;", '  __start [shape=point, label=""];']
    for q in aut.states:
        shape = "doublecircle" if q in aut.finals else "circle"
        extra = ", style=dashed" if q == aut.reject else ""
        tip = to_string(aut.residuals[q])
        lines.append(f"  {_quote(q)} [shape={shape}{extra}, tooltip={_quote(tip)}];")
    lines.append(f"  __start -> {_quote(aut.initial)};")
    for (src, dst), g in aut.edges.items():
        lines.append(f"  {_quote(src)} -> {_quote(dst)} [label={_quote(to_string(g))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
