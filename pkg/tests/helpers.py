"""Shared generators for property tests."""

import itertools

import numpy as np

from fsarl.formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Eventually,
    Implies,
    Next,
    Not,
    Or,
    Predicate,
    Then,
    Until,
    symbol_predicates,
)

ATOM_NAMES = ("p", "q", "r")
SYMBOLS = symbol_predicates(ATOM_NAMES)


def random_propositional(rng, table, depth):
    names = sorted(table)
    if depth == 0 or rng.random() < 0.3:
        roll = rng.random()
        if roll < 0.05:
            return TRUE
        if roll < 0.08:
            return FALSE
        a = Atom(table[names[rng.integers(len(names))]])
        return Not(a) if rng.random() < 0.3 else a
    op = rng.integers(4)
    left = random_propositional(rng, table, depth - 1)
    right = random_propositional(rng, table, depth - 1)
    if op == 0:
        return And(left, right)
    if op == 1:
        return Or(left, right)
    if op == 2:
        return Implies(left, right)
    return Not(And(left, right))


def random_cosafe(rng, table, depth, restricted=True):
    """Random formula that normalises into the co-safe fragment.

    With ``restricted`` the left operands of until/then are propositional,
    which is what the automaton construction accepts.
    """
    if depth == 0 or rng.random() < 0.15:
        return random_propositional(rng, table, 0)
    op = rng.integers(8)
    sub = lambda: random_cosafe(rng, table, depth - 1, restricted)  # noqa: E731
    if op == 0:
        return And(sub(), sub())
    if op == 1:
        return Or(sub(), sub())
    if op == 2:
        return Eventually(sub())
    if op == 3:
        return Next(sub())
    if op in (4, 5):
        left = random_propositional(rng, table, depth - 1) if restricted else sub()
        cls = Until if op == 4 else Then
        return cls(left, sub())
    if op == 6:
        # implication with propositional premise stays co-safe after normalisation
        return Implies(random_propositional(rng, table, depth - 1), sub())
    return random_propositional(rng, table, depth)


def all_symbol_traces(n_atoms, length):
    """Every trace of the given length as 0/1 states, shape ``(2**(n*L), L, n)``."""
    k = 2 ** n_atoms
    idx = np.array(list(itertools.product(range(k), repeat=length)), dtype=np.int64)
    bits = (idx[..., None] >> np.arange(n_atoms)) & 1
    return bits.astype(float)


def random_numeric_trajectory(rng, length, dim=1, low=-1.0, high=11.0):
    return rng.uniform(low, high, size=(length, dim))


def interval(name, lo, hi, dim=0, n=1):
    lo_row = [0.0] * n
    hi_row = [0.0] * n
    lo_row[dim] = -1.0
    hi_row[dim] = 1.0
    return Predicate.affine_rows(name, [(lo_row, -lo), (hi_row, hi)])


FIG2 = {"a": interval("a", 3, 5), "b": interval("b", 8, 10)}
