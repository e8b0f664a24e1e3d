"""Deterministic actor-critic with an optional behaviour-cloning term."""

from __future__ import annotations

import logging

import numpy as np

from ..nn import Adam, Mlp, polyak_update

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


class DDPGAgent:
    """Actor ``pi(obs)`` bounded to ``[-action_scale, action_scale]`` per
    component, critic ``Q(obs, a / action_scale)`` with the action joined at
    the input, plus target copies of both.
    """

    def __init__(self, obs_dim, act_dim, action_scale, cfg, rng):
        self.obs_dim, self.act_dim = obs_dim, act_dim
        self.action_scale = float(action_scale)
        self.cfg = cfg
        self.actor = Mlp((obs_dim, *cfg.hidden, act_dim), self.action_scale, rng, final_init=1e-3)
        self.critic = Mlp((obs_dim + act_dim, *cfg.hidden, 1), None, rng, final_init=3e-3)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.n_params, lr=cfg.lr)
        self.critic_opt = Adam(self.critic.n_params, lr=cfg.lr)
        self.n_updates = 0

    def _project(self, raw):
        """Scale actions whose norm exceeds ``action_scale`` back onto the ball."""
        if self.act_dim == 1:
            return raw
        norm = np.linalg.norm(raw, axis=-1, keepdims=True)
        return raw * np.minimum(1.0, self.action_scale / np.maximum(norm, 1e-12))

    def _project_grad(self, raw, g):
        if self.act_dim == 1:
            return g
        norm = np.linalg.norm(raw, axis=-1, keepdims=True)
        u = raw / np.maximum(norm, 1e-12)
        inside = norm <= self.action_scale
        radial = self.action_scale / np.maximum(norm, 1e-12) * (g - u * np.sum(u * g, axis=-1, keepdims=True))
        return np.where(inside, g, radial)

    def act(self, obs):
        return self._project(self.actor(obs))

    def _q_input(self, obs, act):
        return np.concatenate([obs, act / self.action_scale], axis=-1)

    def q_values(self, obs, act):
        return self.critic(self._q_input(obs, act))[:, 0]

    def update(self, batch, weights, bc_weight, n_demo):
        """One critic and one actor step on a combined batch.

        The last ``n_demo`` rows come from demonstrations and also enter the
        cloning loss. Returns ``(td_errors, mean_abs_q, stats)``.
        """
        obs, act, rew, obs2, term = batch
        n = len(obs)
        gamma = self.cfg.gamma

        a2 = self._project(self.actor_target(obs2))
        q2 = self.critic_target(self._q_input(obs2, a2))[:, 0]
        y = rew + gamma * (~term) * q2
        x = self._q_input(obs, act)
        q = self.critic(x)[:, 0]
        td = q - y
        mean_abs_q = float(np.mean(np.abs(q)))
        if not np.isfinite(mean_abs_q) or mean_abs_q > self.cfg.divergence_threshold:
            raise DivergenceError(f"critic diverged: mean |Q| = {mean_abs_q:.3g} after {self.n_updates} updates")
        grads, _ = self.critic.backward(x, (2.0 * weights * td / n)[:, None])
        self.critic_opt.step(self.critic.params, grads)

        raw = self.actor(obs)
        pi = self._project(raw)
        xp = self._q_input(obs, pi)
        _, g_in = self.critic.backward(xp, np.full((n, 1), -1.0 / n))
        g_pi = g_in[:, self.obs_dim :] / self.action_scale
        bc_loss = 0.0
        if n_demo and bc_weight > 0:
            # squared error in normalised action units, like the critic's input
            diff = (pi[n - n_demo :] - act[n - n_demo :]) / self.action_scale
            bc_loss = float(np.mean(np.sum(diff * diff, axis=1)))
            g_pi[n - n_demo :] += bc_weight * 2.0 * diff / (n_demo * self.action_scale)
        grads, _ = self.actor.backward(obs, self._project_grad(raw, g_pi))
        self.actor_opt.step(self.actor.params, grads)

        polyak_update(self.actor_target, self.actor, self.cfg.tau)
        polyak_update(self.critic_target, self.critic, self.cfg.tau)
        self.n_updates += 1
        return td, mean_abs_q, {"critic_loss": float(np.mean(weights * td * td)), "bc_loss": bc_loss}


def behavior_cloning(policy: Mlp, obs, actions, epochs, rng, lr=3e-4, batch_size=32, action_scale=None):
    """Minibatch regression of ``policy(obs)`` onto ``actions`` (mean squared error).

    Returns the full-dataset loss before training followed by the loss after
    each epoch. An empty dataset is skipped with a warning.
    """
    obs = np.asarray(obs, dtype=float)
    actions = np.asarray(actions, dtype=float)
    if len(obs) == 0:
        log.warning("no demonstration pairs; skipping behaviour cloning")
        return []
    scale = policy.out_scale if action_scale is None else action_scale
    scale = 1.0 if scale is None else scale
    opt = Adam(policy.n_params, lr=lr)

    def loss():
        d = (policy(obs) - actions) / scale
        return float(np.mean(np.sum(d * d, axis=1)))

    history = [loss()]
    n = len(obs)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            d = (policy(obs[idx]) - actions[idx]) / scale
            grads, _ = policy.backward(obs[idx], 2.0 * d / (len(idx) * scale))
            opt.step(policy.params, grads)
        history.append(loss())
    return history
