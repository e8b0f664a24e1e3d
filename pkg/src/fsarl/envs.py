"""Point-mass environments, region-visiting tasks and hand-shaped baseline rewards.

Environments are pure: ``reset(rng, n)`` draws initial states and
``step(states, actions)`` applies deterministic kinematics, both batched over
a leading axis. Mutable episode bookkeeping lives in the product runners.
"""

from __future__ import annotations

import numpy as np

from .formula import Predicate
from .product import ProductConfig, VecEpisodes

TASKS = {
    "task1": "F(r & F(g & F b))",
    "task2": "F r & F g & F b",
}


class Point1D:
    """Scalar position with velocity control; the running example's intervals."""

    name = "point1d"
    state_dim = 1
    action_dim = 1
    centers = {"a": 4.0, "b": 9.0}

    def __init__(self, v_max=1.0, low=-2.0, high=12.0, reset_low=-2.0, reset_high=2.0):
        self.v_max = float(v_max)
        self.low, self.high = float(low), float(high)
        self.reset_low, self.reset_high = float(reset_low), float(reset_high)

    def predicates(self) -> dict:
        return {
            "a": Predicate.affine_rows("a", [([-1.0], -3.0), ([1.0], 5.0)]),
            "b": Predicate.affine_rows("b", [([-1.0], -8.0), ([1.0], 10.0)]),
        }

    def reset(self, rng, n=None):
        size = (1,) if n is None else (n, 1)
        return rng.uniform(self.reset_low, self.reset_high, size=size)

    def clip_action(self, a):
        return np.clip(np.asarray(a, dtype=float), -self.v_max, self.v_max)

    def step(self, state, action):
        s = np.asarray(state, dtype=float)
        return np.clip(s + self.clip_action(action), self.low, self.high)

    def displacement(self, name, states):
        """Vector from each state to the centre of region ``name``."""
        return self.centers[name] - np.asarray(states, dtype=float)

    def distance(self, name, states):
        return np.abs(self.displacement(name, states))[..., 0]


class RegionVisit2D:
    """Point agent in the unit square with three disk regions (red, green, blue).

    State layout: ``[p_r, p_g, p_b, agent]`` where ``p_i = centre_i - agent``.
    A region is reached when ``|p_i| < eps``.
    """

    name = "region2d"
    state_dim = 8
    action_dim = 2
    regions = ("r", "g", "b")

    def __init__(self, eps=0.05, v_max=0.05, center_margin=0.1, separation=3.0, start_clearance=2.0):
        self.eps = float(eps)
        self.v_max = float(v_max)
        self.center_margin = float(center_margin)
        self.min_separation = separation * self.eps
        self.start_clearance = start_clearance * self.eps

    def predicates(self) -> dict:
        return {n: Predicate.ball(n, [2 * i, 2 * i + 1], self.eps) for i, n in enumerate(self.regions)}

    @staticmethod
    def centers(states):
        s = np.asarray(states, dtype=float)
        agent = s[..., 6:8]
        return np.stack([s[..., 2 * i : 2 * i + 2] + agent for i in range(3)], axis=-2)

    @staticmethod
    def distances(states):
        s = np.asarray(states, dtype=float)
        return np.stack([np.linalg.norm(s[..., 2 * i : 2 * i + 2], axis=-1) for i in range(3)], axis=-1)

    def _valid(self, centers, agent):
        pair = [(0, 1), (0, 2), (1, 2)]
        ok = np.ones(len(centers), dtype=bool)
        for i, j in pair:
            ok &= np.linalg.norm(centers[:, i] - centers[:, j], axis=-1) >= self.min_separation
        ok &= np.all(np.linalg.norm(centers - agent[:, None], axis=-1) >= self.start_clearance, axis=-1)
        return ok

    def reset(self, rng, n=None):
        """Random centres pairwise separated and an agent clear of every region."""
        m = 1 if n is None else n
        lo, hi = self.center_margin, 1.0 - self.center_margin
        centers = rng.uniform(lo, hi, size=(m, 3, 2))
        agent = rng.uniform(0.0, 1.0, size=(m, 2))
        bad = ~self._valid(centers, agent)
        while bad.any():
            k = int(bad.sum())
            centers[bad] = rng.uniform(lo, hi, size=(k, 3, 2))
            agent[bad] = rng.uniform(0.0, 1.0, size=(k, 2))
            bad = ~self._valid(centers, agent)
        states = np.concatenate([(centers - agent[:, None]).reshape(m, 6), agent], axis=1)
        return states[0] if n is None else states

    def clip_action(self, a):
        a = np.asarray(a, dtype=float)
        norm = np.linalg.norm(a, axis=-1, keepdims=True)
        scale = np.minimum(1.0, self.v_max / np.maximum(norm, 1e-12))
        return a * scale

    def step(self, state, action):
        s = np.asarray(state, dtype=float)
        agent = s[..., 6:8]
        moved = np.clip(agent + self.clip_action(action), 0.0, 1.0)
        delta = moved - agent
        out = s.copy()
        for i in range(3):
            out[..., 2 * i : 2 * i + 2] -= delta
        out[..., 6:8] = moved
        return out

    def displacement(self, name, states):
        i = self.regions.index(name)
        return np.asarray(states, dtype=float)[..., 2 * i : 2 * i + 2]

    def distance(self, name, states):
        return np.linalg.norm(self.displacement(name, states), axis=-1)


def make_env(name: str, **params):
    envs = {Point1D.name: Point1D, RegionVisit2D.name: RegionVisit2D}
    if name not in envs:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(envs)}")
    return envs[name](**params)


# ---------------------------------------------------------------------------
# progress vector and shaped rewards


def as_progress(b) -> np.ndarray:
    """Progress digits as a boolean array; accepts strings such as ``"110"``."""
    if isinstance(b, str):
        if len(b) != 3 or set(b) - {"0", "1"}:
            raise ValueError(f"progress vector must be three binary digits, got {b!r}")
        return np.array([c == "1" for c in b])
    return np.asarray(b, dtype=bool)


def progress_string(b) -> str:
    return "".join("1" if x else "0" for x in as_progress(b))


def update_progress(b, state, eps=0.05) -> np.ndarray:
    """Digit ``i`` is set once region ``i`` has been reached."""
    return as_progress(b) | (RegionVisit2D.distances(state) < eps)


def _table_reward(table, state, b, eps):
    b = as_progress(b)
    dist = RegionVisit2D.distances(state)
    codes = (b.astype(np.int64) * np.array([4, 2, 1])).sum(axis=-1)
    out = np.full(np.broadcast_shapes(codes.shape, dist.shape[:-1]), -2.0)
    for key, regions in table.items():
        code = int(key, 2)
        mask = codes == code
        if np.any(mask):
            vals = np.max(eps - dist[..., list(regions)], axis=-1)
            out = np.where(mask, vals, out)
    return out[()] if out.ndim == 0 else out


# digit order is (red, green, blue); the value is the max over the listed regions
TASK1_TABLE = {"000": (0,), "100": (1,), "110": (2,)}
TASK2_TABLE = {
    "000": (0, 1, 2),
    "100": (1, 2),
    "010": (0, 2),
    "001": (0, 1),
    "110": (2,),
    "101": (1,),
    "011": (0,),
}


def shaped_reward_task1(state, b, eps=0.05):
    """``eps - |p|`` to the next region in red, green, blue order; -2 off that path."""
    return _table_reward(TASK1_TABLE, state, b, eps)


def shaped_reward_task2(state, b, eps=0.05):
    """``eps - |p|`` to the closest unvisited region; -2 once all are visited."""
    return _table_reward(TASK2_TABLE, state, b, eps)


SHAPED_REWARDS = {"task1": shaped_reward_task1, "task2": shaped_reward_task2}


class ShapedRewardMDP(VecEpisodes):
    """Batched baseline: hand-shaped reward on the raw state, no automaton input.

    The automaton still runs alongside to decide termination and success, so
    episodes are scored exactly like the product runner.
    """

    def __init__(self, env: RegionVisit2D, aut, cfg: ProductConfig, n: int, task: str):
        super().__init__(env, aut, cfg, n)
        if task not in SHAPED_REWARDS:
            raise ValueError(f"no shaped reward for task {task!r}")
        self.reward_fn = SHAPED_REWARDS[task]

    @property
    def obs_dim(self) -> int:
        return self.env.state_dim

    def _reset_extra(self):
        self.b = np.zeros((len(self.states), 3), dtype=bool)

    def observe(self):
        return self.states.copy()

    def _reward(self, q_before, rob, states_next):
        r = self.reward_fn(states_next, self.b, self.env.eps)
        self.b = update_progress(self.b, states_next, self.env.eps)
        return np.asarray(r, dtype=float)
