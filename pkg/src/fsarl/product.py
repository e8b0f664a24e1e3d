"""FSA-augmented MDP: an environment run in lockstep with a task automaton.

The product state is ``(s, q)``. After each action the environment moves to
``s'``, the automaton reads ``s'`` and the reward is the robustness of the
disjunction of guards leaving the *pre-transition* automaton state,
evaluated at ``s'``. The initial environment state is not fed to the
automaton; the environments reset outside every predicate region.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .automaton import Automaton


@dataclass
class ProductConfig:
    horizon: int = 100
    gamma: float = 0.99
    randomize_q_on_reset: bool = False
    terminate_on_final: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("discount must lie in (0, 1)")


@dataclass(frozen=True)
class ProductState:
    s: np.ndarray
    q: str


def discounted_return(rewards, gamma: float) -> float:
    """``sum_t gamma**(t+1) * r_t``; the first reward is already discounted once."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("discount must lie in (0, 1)")
    total = 0.0
    for t, r in enumerate(rewards):
        total += gamma ** (t + 1) * r
    return total


def one_hot(aut: Automaton, qi) -> np.ndarray:
    qi = np.asarray(qi, dtype=np.int64)
    out = np.zeros(qi.shape + (len(aut.states),))
    np.put_along_axis(out, qi[..., None], 1.0, axis=-1)
    return out


def initial_q_choices(aut: Automaton) -> list[str]:
    """States a randomised reset may start from: neither final nor the reject sink."""
    live = [q for q in aut.states if q not in aut.finals and q != aut.reject]
    return live or [aut.initial]


class ProductMDP:
    """Single-episode product process.

    >>> ps = mdp.reset()
    >>> ps, r, done = mdp.step(action)
    """

    def __init__(self, env, aut: Automaton, cfg: ProductConfig | None = None, rng=None):
        self.env = env
        self.aut = aut
        self.cfg = cfg or ProductConfig()
        self.rng = rng if rng is not None else np.random.default_rng()
        self.state = None
        self.done = True
        self.t = 0
        self.log = []

    @property
    def obs_dim(self) -> int:
        return self.env.state_dim + len(self.aut.states)

    def observation(self, ps: ProductState | None = None) -> np.ndarray:
        ps = ps or self.state
        return np.concatenate([ps.s, one_hot(self.aut, self.aut.index[ps.q])])

    def reset(self) -> ProductState:
        s = np.asarray(self.env.reset(self.rng), dtype=float)
        if self.cfg.randomize_q_on_reset:
            choices = initial_q_choices(self.aut)
            q = choices[int(self.rng.integers(len(choices)))]
        else:
            q = self.aut.initial
        self.state = ProductState(s, q)
        self.t = 0
        self.done = self.cfg.terminate_on_final and q in self.aut.finals
        self.states = [s]
        self.log = []
        return self.state

    def reward(self, q: str, s_next) -> float:
        return float(self.aut.disjunction_robustness(q, s_next))

    def step(self, action):
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        ps = self.state
        a = np.asarray(action, dtype=float)
        s2 = np.asarray(self.env.step(ps.s, a), dtype=float)
        q2 = self.aut.step(ps.q, s2)
        if q2 == self.aut.reject:
            r = -self.aut.rho_max
        else:
            r = self.reward(ps.q, s2)
        self.t += 1
        self.done = (
            (self.cfg.terminate_on_final and q2 in self.aut.finals)
            or q2 == self.aut.reject
            or self.t >= self.cfg.horizon
        )
        self.log.append((self.t - 1, ps.q, ps.s, self.env.clip_action(a), r, self.done))
        self.state = ProductState(s2, q2)
        self.states.append(s2)
        return self.state, r, self.done

    def write_rollout_log(self, path) -> None:
        """CSV ``t,q,s_0..,a_0..,r,done``; one row per transition plus the terminal state."""
        n, m = self.env.state_dim, self.env.action_dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "q"] + [f"s_{i}" for i in range(n)] + [f"a_{j}" for j in range(m)] + ["r", "done"])
            for t, q, s, a, r, done in self.log:
                w.writerow([t, q] + [repr(float(x)) for x in s] + [repr(float(x)) for x in a] + [repr(r), int(done)])
            if self.state is not None:
                w.writerow([self.t, self.state.q] + [repr(float(x)) for x in self.state.s] + [""] * m + ["", int(self.done)])


class VecEpisodes:
    """Parallel episodes of one task; subclasses choose observation and reward.

    Every episode tracks the task automaton so success and steps-to-finish
    are measured the same way for every reward scheme.
    """

    def __init__(self, env, aut: Automaton, cfg: ProductConfig, n: int):
        self.env = env
        self.aut = aut
        self.cfg = cfg
        self.n = n
        self.final_mask = np.array([q in aut.finals for q in aut.states])
        self.reject_index = aut.index.get(aut.reject, -1) if aut.reject else -1

    def reset(self, rng, randomize_q=None):
        randomize = self.cfg.randomize_q_on_reset if randomize_q is None else randomize_q
        self.states = np.asarray(self.env.reset(rng, self.n), dtype=float)
        if randomize:
            choices = np.array([self.aut.index[q] for q in initial_q_choices(self.aut)])
            self.qi = choices[rng.integers(len(choices), size=self.n)]
        else:
            self.qi = np.full(self.n, self.aut.index[self.aut.initial])
        self.t = 0
        self.active = ~(self.final_mask[self.qi] & self.cfg.terminate_on_final)
        self.finish_step = np.where(self.active, self.cfg.horizon, 0)
        self.success = ~self.active.copy()
        self.history = [self.states.copy()]
        self._reset_extra()
        return self.observe()

    def _reset_extra(self):
        pass

    def observe(self) -> np.ndarray:
        raise NotImplementedError

    def _reward(self, q_before, rob, states_next) -> np.ndarray:
        raise NotImplementedError

    def step(self, actions):
        """Advance active episodes; finished ones hold their state.

        Returns ``(obs, rewards, done, terminal, valid)`` where ``valid`` marks
        the episodes that were active before the step and ``terminal`` marks
        episodes that reached a final or reject state (no bootstrapping).
        """
        nxt = np.asarray(self.env.step(self.states, actions), dtype=float)
        return self._advance(nxt)

    def _advance(self, nxt):
        valid = self.active.copy()
        q_before = self.qi.copy()
        nxt = nxt.copy()
        nxt[~valid] = self.states[~valid]
        q_next, rob = self.aut.step_indices(self.qi, nxt)
        q_next[~valid] = self.qi[~valid]
        rewards = self._reward(q_before, rob, nxt)
        rewards[~valid] = 0.0
        self.states = nxt
        self.qi = q_next
        self.t += 1
        reached = self.final_mask[q_next] & valid
        rejected = (q_next == self.reject_index) & valid
        terminal = ((reached & self.cfg.terminate_on_final) | rejected) & valid
        newly_done = valid & (terminal | (self.t >= self.cfg.horizon))
        self.success |= reached
        self.finish_step = np.where(reached & (self.finish_step == self.cfg.horizon), self.t, self.finish_step)
        self.active = valid & ~newly_done
        self.history.append(self.states.copy())
        return self.observe(), rewards, newly_done, terminal, valid

    def replay(self, states):
        """Observations, rewards and terminal flags along a fixed single-episode
        state sequence (e.g. a demonstration), starting from the initial
        automaton state. Stops early if the episode finishes.

        Returns ``(obs (L, d), rewards (L-1,), terminal (L-1,))`` where ``L``
        is the number of states consumed.
        """
        states = np.asarray(states, dtype=float)
        if self.n != 1:
            raise ValueError("replay needs a single-episode instance")
        self.states = states[:1].copy()
        self.qi = np.full(1, self.aut.index[self.aut.initial])
        self.t = 0
        self.active = ~(self.final_mask[self.qi] & self.cfg.terminate_on_final)
        self.finish_step = np.where(self.active, self.cfg.horizon, 0)
        self.success = ~self.active.copy()
        self.history = [self.states.copy()]
        self._reset_extra()
        obs, rewards, terminal = [self.observe()[0]], [], []
        for s2 in states[1:]:
            if not self.active[0]:
                break
            o, r, _, term, _ = self._advance(s2[None])
            obs.append(o[0])
            rewards.append(r[0])
            terminal.append(term[0])
        return np.array(obs), np.array(rewards), np.array(terminal, dtype=bool)

    def trajectories(self) -> list[np.ndarray]:
        """Per-episode state sequence ``s_0..s_end`` (end = finishing step or horizon)."""
        hist = np.stack(self.history)
        ends = np.where(self.success, self.finish_step, len(self.history) - 1)
        return [hist[: ends[i] + 1, i] for i in range(self.n)]


class VecProductMDP(VecEpisodes):
    """Batched FSA-augmented MDP; observation is ``s`` joined with one-hot ``q``."""

    @property
    def obs_dim(self) -> int:
        return self.env.state_dim + len(self.aut.states)

    def observe(self):
        return np.concatenate([self.states, one_hot(self.aut, self.qi)], axis=1)

    def _reward(self, q_before, rob, states_next):
        r = self.aut.disjunction_robustness_indices(q_before, rob)
        return r

    def _advance(self, nxt):
        obs, r, done, terminal, valid = super()._advance(nxt)
        r[(self.qi == self.reject_index) & valid] = -self.aut.rho_max
        return obs, r, done, terminal, valid
