"""Demonstrations: scripted expert, automaton labelling and file I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..automaton import Automaton
from ..formula import to_string
from ..semantics import Trajectory, read_trajectory_csv, robustness, write_trajectory_csv

log = logging.getLogger(__name__)


@dataclass
class QAppendedDemo:
    """A demonstration with the automaton state at every time step."""

    states: np.ndarray
    actions: np.ndarray
    qs: list

    def __len__(self):
        return len(self.states)


def q_labels(aut: Automaton, states) -> list:
    """``q_0`` is the initial state; ``q_{t+1} = step(q_t, s_{t+1})``."""
    qs = [aut.initial]
    for s in np.asarray(states)[1:]:
        qs.append(aut.step(qs[-1], s))
    return qs


def construct_q_appended_batch(aut: Automaton, demos) -> tuple[list, int]:
    """Label each demo with automaton states; demos never reaching a final state are dropped.

    Returns ``(labelled, n_rejected)``.
    """
    out, rejected = [], 0
    for i, demo in enumerate(demos):
        qs = q_labels(aut, demo.states)
        if qs[-1] not in aut.finals:
            rejected += 1
            log.warning("demonstration %d does not satisfy the task (ends in %s); rejected", i, qs[-1])
            continue
        actions = demo.actions if demo.actions is not None else np.zeros((len(demo.states) - 1, 0))
        out.append(QAppendedDemo(np.asarray(demo.states), np.asarray(actions), qs))
    if rejected:
        log.warning("rejected %d of %d demonstrations", rejected, len(demos))
    return out, rejected


def expert_action(env, aut: Automaton, q: str, s, rng, noise: float):
    """Head for the closest region that satisfies some clause of the outgoing guard disjunction."""
    best, best_d = None, np.inf
    for clause in aut._disjunction[q]:
        pos = [k for k, p in clause if p]
        if len(pos) != 1:
            continue
        name = aut.atoms[pos[0]].name
        d = float(env.distance(name, s))
        if d < best_d:
            best, best_d = name, d
    if best is None:
        a = rng.uniform(-env.v_max, env.v_max, size=env.action_dim)
    else:
        a = env.clip_action(env.displacement(best, s))
    if noise > 0:
        sigma = noise * env.v_max
        a = a + np.clip(rng.normal(scale=sigma, size=env.action_dim), -2 * sigma, 2 * sigma)
    return env.clip_action(a)


def generate_scripted_demos(env, aut: Automaton, n: int, seed: int, horizon=100, noise=0.2, max_attempts=None):
    """``n`` expert trajectories, each verified to satisfy the task formula.

    Failed attempts are discarded; gives up after ``max_attempts`` (default ``10 n + 10``).
    """
    rng = np.random.default_rng(seed)
    max_attempts = 10 * n + 10 if max_attempts is None else max_attempts
    task = to_string(aut.formula)
    demos, attempts = [], 0
    while len(demos) < n:
        if attempts >= max_attempts:
            raise RuntimeError(f"expert produced only {len(demos)} of {n} demonstrations in {attempts} attempts")
        attempts += 1
        s = np.asarray(env.reset(rng), dtype=float)
        q = aut.initial
        states, actions = [s], []
        for _ in range(horizon):
            if q in aut.finals:
                break
            a = expert_action(env, aut, q, s, rng, noise)
            s = np.asarray(env.step(s, a), dtype=float)
            q = aut.step(q, s)
            states.append(s)
            actions.append(a)
        states = np.array(states)
        if q not in aut.finals or robustness(states, aut.formula) <= 0:
            continue
        actions = np.array(actions).reshape(len(states) - 1, env.action_dim)
        meta = {"task": task, "seed": seed, "index": len(demos)}
        demos.append(Trajectory(states, actions, meta))
    return demos


def save_demos(directory, demos) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, demo in enumerate(demos):
        path = directory / f"demo_{i:03d}.csv"
        write_trajectory_csv(path, demo, demo.metadata)
        paths.append(path)
    return paths


def load_demos(directory) -> list:
    paths = sorted(Path(directory).glob("demo_*.csv"))
    return [read_trajectory_csv(p) for p in paths]


def visit_order(env, states) -> str:
    """Regions in the order they were first entered, e.g. ``"gbr"``."""
    order = []
    for s in np.asarray(states):
        for name in env.regions:
            if name not in order and env.distance(name, s) < env.eps:
                order.append(name)
    return "".join(order)
