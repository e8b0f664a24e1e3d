"""Replay buffers: uniform ring buffer and proportional prioritised replay."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Fixed-capacity ring buffer of ``(obs, act, rew, obs2, terminal)``."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.act = np.zeros((self.capacity, act_dim))
        self.rew = np.zeros(self.capacity)
        self.obs2 = np.zeros((self.capacity, obs_dim))
        self.term = np.zeros(self.capacity, dtype=bool)
        self.size = 0
        self.ptr = 0

    def __len__(self):
        return self.size

    def add(self, obs, act, rew, obs2, term) -> np.ndarray:
        """Append a batch of transitions; returns the slots written."""
        obs = np.atleast_2d(obs)
        n = len(obs)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        if n > self.capacity:
            raise ValueError("batch larger than buffer capacity")
        idx = (self.ptr + np.arange(n)) % self.capacity
        self.obs[idx] = obs
        self.act[idx] = np.atleast_2d(act)
        self.rew[idx] = rew
        self.obs2[idx] = np.atleast_2d(obs2)
        self.term[idx] = term
        self.ptr = int((self.ptr + n) % self.capacity)
        self.size = min(self.capacity, self.size + n)
        return idx

    def get(self, idx):
        return self.obs[idx], self.act[idx], self.rew[idx], self.obs2[idx], self.term[idx]

    def sample(self, n: int, rng):
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(self.size, size=n)
        return idx, self.get(idx)


class SumTree:
    """Binary tree of priority sums over ``capacity`` leaves, updated in batches."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.depth = max(1, int(np.ceil(np.log2(self.capacity))))
        self.n_leaves = 2 ** self.depth
        self.tree = np.zeros(2 * self.n_leaves)

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def leaves(self, idx):
        return self.tree[self.n_leaves + np.asarray(idx)]

    def update(self, idx, values):
        node = self.n_leaves + np.asarray(idx, dtype=np.int64)
        self.tree[node] = values
        node = np.unique(node // 2)
        while node[0] >= 1:
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1]
            if node[0] == 1:
                break
            node = np.unique(node // 2)

    def find(self, mass):
        """Leaf index whose cumulative interval contains each value in ``mass``."""
        mass = np.array(mass, dtype=float)
        node = np.ones(len(mass), dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * node
            go_right = mass >= self.tree[left]
            mass = np.where(go_right, mass - self.tree[left], mass)
            node = np.where(go_right, left + 1, left)
        return node - self.n_leaves


class PrioritizedReplayBuffer(ReplayBuffer):
    """Proportional prioritised replay: ``P(i) ~ (|delta_i| + eps) ** alpha``.

    New transitions enter with the largest priority seen so far, so each is
    replayed at least once with high probability.
    """

    def __init__(self, capacity, obs_dim, act_dim, alpha=0.6, eps=1e-6):
        super().__init__(capacity, obs_dim, act_dim)
        self.alpha = alpha
        self.eps = eps
        self.tree = SumTree(self.capacity)
        self.max_priority = 1.0

    def add(self, obs, act, rew, obs2, term):
        idx = super().add(obs, act, rew, obs2, term)
        if len(idx):
            self.tree.update(idx, np.full(len(idx), self.max_priority ** self.alpha))
        return idx

    def sample(self, n, rng, beta=0.4):
        """Stratified proportional sample; returns ``(idx, batch, weights)``."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        total = self.tree.total
        bounds = np.linspace(0.0, total, n + 1)
        mass = rng.uniform(bounds[:-1], bounds[1:])
        idx = self.tree.find(np.minimum(mass, np.nextafter(total, 0.0)))
        idx = np.minimum(idx, self.size - 1)
        probs = self.tree.leaves(idx) / total
        weights = (self.size * probs) ** (-beta)
        weights /= weights.max()
        return idx, self.get(idx), weights

    def update_priorities(self, idx, td_errors):
        prio = np.abs(np.asarray(td_errors, dtype=float)) + self.eps
        self.max_priority = max(self.max_priority, float(prio.max()))
        self.tree.update(idx, prio ** self.alpha)

    def priorities(self) -> np.ndarray:
        return self.tree.leaves(np.arange(self.size))
