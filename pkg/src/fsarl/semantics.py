"""Boolean and quantitative (robustness) semantics over finite trajectories.

Both evaluators work on windows ``s[start:end+1]`` exactly as the recursive
clauses are written: *eventually* scans ``t' in [start, end]``, the left
operand of *until*/*then* is judged on the window ``s[t'':t'+1]``, and *next*
needs at least two states in its window. Evaluation is vectorised over a
batch of equal-length trajectories, which is what the brute-force trace
enumeration in the test suite relies on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .formula import (
    And,
    Atom,
    Eventually,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Then,
    Top,
    Until,
    is_propositional,
)

RHO_MAX = 1e6


class EvaluationError(ValueError):
    pass


@dataclass
class Trajectory:
    """States ``(T+1, n)`` and optional actions ``(T, m)``."""

    states: np.ndarray
    actions: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = as_states(self.states)
        if self.actions is not None:
            self.actions = np.asarray(self.actions, dtype=float)
            if self.actions.ndim == 1:
                self.actions = self.actions.reshape(-1, 1)
            if len(self.actions) != len(self.states) - 1:
                raise ValueError("need exactly one action per transition")

    def __len__(self):
        return len(self.states)


def as_states(traj) -> np.ndarray:
    """Coerce to ``(L, n)``; a flat sequence is read as a 1-D state per step."""
    if isinstance(traj, Trajectory):
        return traj.states
    s = np.asarray(traj, dtype=float)
    if s.ndim == 1:
        s = s.reshape(-1, 1)
    if s.ndim not in (2, 3) or s.shape[-2] < 1:
        raise ValueError("a trajectory needs at least one state")
    return s


def _batched(traj):
    s = as_states(traj)
    single = s.ndim == 2
    return (s[None] if single else s), single


# ---------------------------------------------------------------------------
# Boolean semantics


def sat(traj, f: Formula):
    """Whether the trajectory (or each trajectory of a batch) satisfies ``f``."""
    s, single = _batched(traj)
    out = _Sat(s).eval(f, 0, s.shape[1] - 1)
    return bool(out[0]) if single else out


class _Sat:
    def __init__(self, states):
        self.s = states
        self.n = states.shape[0]
        self.memo = {}

    def eval(self, f, start, end):
        key = (id(f), start, end)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = self._eval(f, start, end)
        return hit

    def _eval(self, f, start, end):
        if isinstance(f, Top):
            return np.ones(self.n, dtype=bool)
        if isinstance(f, Atom):
            return f.predicate.holds(self.s[:, start])
        if isinstance(f, Not):
            return ~self.eval(f.arg, start, end)
        if isinstance(f, And):
            return self.eval(f.left, start, end) & self.eval(f.right, start, end)
        if isinstance(f, Or):
            return self.eval(f.left, start, end) | self.eval(f.right, start, end)
        if isinstance(f, Implies):
            return ~self.eval(f.left, start, end) | self.eval(f.right, start, end)
        if isinstance(f, Next):
            if end == start:
                return np.zeros(self.n, dtype=bool)
            return self.eval(f.arg, start + 1, end)
        if isinstance(f, Eventually):
            out = np.zeros(self.n, dtype=bool)
            for t in range(start, end + 1):
                out |= self.eval(f.arg, t, end)
            return out
        if isinstance(f, (Until, Then)):
            out = np.zeros(self.n, dtype=bool)
            for t in range(start, end + 1):
                psi = self.eval(f.right, t, end)
                if isinstance(f, Until):
                    prefix = np.ones(self.n, dtype=bool)
                    for u in range(start, t):
                        prefix &= self.eval(f.left, u, t)
                else:
                    prefix = np.zeros(self.n, dtype=bool)
                    for u in range(start, t):
                        prefix |= self.eval(f.left, u, t)
                out |= psi & prefix
            return out
        raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# robustness


def robustness(traj, f: Formula, rho_max: float = RHO_MAX, strict: bool = False):
    """Robustness degree of ``f`` on the trajectory from its first state.

    Returns a float for a single trajectory and an array for a batch. A *next*
    on a single-state window has no defined value: with ``strict`` it raises
    :class:`EvaluationError`, otherwise it evaluates to ``-rho_max`` in line
    with the Boolean clause, which requires ``k > 0``.
    """
    s, single = _batched(traj)
    out = _Robustness(s, rho_max, strict).eval(f, 0, s.shape[1] - 1)
    return float(out[0]) if single else out


def robustness_state(s, g: Formula, rho_max: float = RHO_MAX) -> float:
    """Robustness of a propositional formula at one state."""
    if not is_propositional(g):
        raise ValueError(f"'{g}' has temporal operators; state robustness needs a propositional formula")
    s = np.asarray(s, dtype=float).reshape(1, 1, -1)
    return float(_Robustness(s, rho_max, True).eval(g, 0, 0)[0])


class _Robustness:
    def __init__(self, states, rho_max, strict):
        self.s = states
        self.n = states.shape[0]
        self.rho_max = float(rho_max)
        self.strict = strict
        self.memo = {}

    def full(self, v):
        return np.full(self.n, v, dtype=float)

    def eval(self, f, start, end):
        key = (id(f), start, end)
        hit = self.memo.get(key)
        if hit is None:
            hit = self.memo[key] = self._eval(f, start, end)
        return hit

    def _eval(self, f, start, end):
        if isinstance(f, Top):
            return self.full(self.rho_max)
        if isinstance(f, Atom):
            return np.asarray(f.predicate.robustness(self.s[:, start]), dtype=float)
        if isinstance(f, Not):
            return -self.eval(f.arg, start, end)
        if isinstance(f, And):
            return np.minimum(self.eval(f.left, start, end), self.eval(f.right, start, end))
        if isinstance(f, Or):
            return np.maximum(self.eval(f.left, start, end), self.eval(f.right, start, end))
        if isinstance(f, Implies):
            return np.maximum(-self.eval(f.left, start, end), self.eval(f.right, start, end))
        if isinstance(f, Next):
            if end == start:
                if self.strict:
                    raise EvaluationError(f"'{f}' evaluated on a single-state window")
                return self.full(-self.rho_max)
            return self.eval(f.arg, start + 1, end)
        if isinstance(f, Eventually):
            out = self.full(-np.inf)
            for t in range(start, end + 1):
                out = np.maximum(out, self.eval(f.arg, t, end))
            return out
        if isinstance(f, (Until, Then)):
            until = isinstance(f, Until)
            out = self.full(-np.inf)
            for t in range(start, end + 1):
                # empty prefix: identity of min / max, bounded by rho_max
                prefix = self.full(self.rho_max if until else -self.rho_max)
                for u in range(start, t):
                    v = self.eval(f.left, u, t)
                    prefix = np.minimum(prefix, v) if until else np.maximum(prefix, v)
                out = np.maximum(out, np.minimum(self.eval(f.right, t, end), prefix))
            return out
        raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# trajectory files


def write_trajectory_csv(path, traj: Trajectory, metadata: dict | None = None) -> None:
    """CSV with a mandatory header ``t,s_0..s_{n-1}[,a_0..a_{m-1}]``.

    Optional metadata is written first as ``# key: value`` lines. The last row
    has empty action cells because a trajectory has one fewer action than
    states.
    """
    states = traj.states
    n = states.shape[1]
    m = 0 if traj.actions is None else traj.actions.shape[1]
    meta = dict(traj.metadata)
    meta.update(metadata or {})
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"s_{i}" for i in range(n)] + [f"a_{j}" for j in range(m)])
        for t, s in enumerate(states):
            row = [t] + [repr(float(x)) for x in s]
            if m:
                row += [repr(float(x)) for x in traj.actions[t]] if t < len(traj.actions) else [""] * m
            w.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    meta = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    if not body:
        raise ValueError(f"{path}: no header row")
    reader = csv.reader(body)
    header = next(reader)
    if not header or header[0] != "t":
        raise ValueError(f"{path}: header must start with 't'")
    s_cols = [i for i, h in enumerate(header) if h.startswith("s_")]
    a_cols = [i for i, h in enumerate(header) if h.startswith("a_")]
    if not s_cols:
        raise ValueError(f"{path}: no state columns")
    states, actions = [], []
    for row in reader:
        states.append([float(row[i]) for i in s_cols])
        if a_cols and row[a_cols[0]] != "":
            actions.append([float(row[i]) for i in a_cols])
    acts = np.asarray(actions, dtype=float).reshape(len(actions), len(a_cols)) if a_cols else None
    return Trajectory(np.asarray(states, dtype=float), acts, meta)
