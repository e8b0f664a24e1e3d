"""Training loop, evaluation and learning-curve output."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from ..automaton import Automaton
from ..automaton import compile as compile_automaton
from ..envs import ShapedRewardMDP
from ..formula import normalize, parse
from ..product import ProductConfig, VecProductMDP
from ..semantics import robustness
from .agent import DDPGAgent, behavior_cloning
from .config import ARMS, TrainConfig
from .demos import construct_q_appended_batch
from .replay import PrioritizedReplayBuffer, ReplayBuffer

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("env_steps", "robustness_mean", "robustness_std", "success_rate")


def parse_arm(arm: str) -> tuple[str, bool]:
    """``"fsa+demo"`` -> ``("fsa", True)``."""
    if arm not in ARMS:
        raise ValueError(f"unknown arm {arm!r}; choose from {', '.join(ARMS)}")
    mode, _, demo = arm.partition("+")
    return mode, bool(demo)


@dataclass
class TaskSetup:
    """An environment, its task automaton and the reward scheme to train with."""

    env: object
    aut: Automaton
    mode: str = "fsa"
    task: str = "task1"

    def product_config(self, cfg: TrainConfig, randomize=False, training=False) -> ProductConfig:
        # shaped episodes always stop at success: their reward table has no
        # value for a finished task
        terminate = True if (not training or self.mode == "shaped") else cfg.terminate_on_final
        return ProductConfig(cfg.horizon, cfg.gamma, randomize, terminate)

    def make_runner(self, n, cfg: TrainConfig, randomize=False, training=False):
        pcfg = self.product_config(cfg, randomize, training)
        if self.mode == "fsa":
            return VecProductMDP(self.env, self.aut, pcfg, n)
        if self.mode == "shaped":
            return ShapedRewardMDP(self.env, self.aut, pcfg, n, self.task)
        raise ValueError(f"unknown reward mode {self.mode!r}")

    def obs_dim(self) -> int:
        return self.env.state_dim + (len(self.aut.states) if self.mode == "fsa" else 0)

    @classmethod
    def build(cls, env, formula, mode="fsa", task="task1", predicates=None, rho_max=None):
        """Parse and compile ``formula`` (text or AST) against the env's predicates.

        ``rho_max`` sets the value of satisfied guards, which is the reward paid
        on final automaton states when training does not stop there.
        """
        if isinstance(formula, str):
            formula = normalize(parse(formula, predicates or env.predicates()))
        kwargs = {} if rho_max is None else {"rho_max": rho_max}
        return cls(env, compile_automaton(formula, **kwargs), mode, task)


@dataclass
class TrainResult:
    agent: DDPGAgent
    curve: list = field(default_factory=list)
    bc_losses: list = field(default_factory=list)
    env_steps: int = 0
    updates: int = 0
    final_eval: dict = field(default_factory=dict)
    n_demo_transitions: int = 0

    def steps_to_solve(self, window: int = 3):
        return steps_to_solve(self.curve, window)


def steps_to_solve(curve, window=3):
    """Env steps at the first of ``window`` consecutive evaluations with mean robustness > 0."""
    pos = [row["robustness_mean"] > 0 for row in curve]
    for i in range(len(pos) - window + 1):
        if all(pos[i : i + window]):
            return curve[i]["env_steps"]
    return None


def demo_transitions(setup: TaskSetup, qdemos, cfg: TrainConfig):
    """Replay labelled demos through a one-episode runner to get the same
    observations and rewards the agent sees online."""
    runner = setup.make_runner(1, cfg, training=True)
    parts = [[], [], [], [], []]
    for demo in qdemos:
        obs, rew, term = runner.replay(demo.states)
        k = len(rew)
        parts[0].append(obs[:-1])
        parts[1].append(demo.actions[:k])
        parts[2].append(rew)
        parts[3].append(obs[1:])
        parts[4].append(term)
    if not parts[0]:
        return None
    return tuple(np.concatenate(p) for p in parts)


def evaluate(agent, setup: TaskSetup, trials: int, rng, cfg: TrainConfig) -> dict:
    """Noise-free rollouts from the initial automaton state.

    Success means reaching a final automaton state within the horizon;
    steps count to that point (the horizon otherwise); robustness is taken
    over each episode's full state sequence.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    runner = setup.make_runner(trials, cfg)
    obs = runner.reset(rng, randomize_q=False)
    while runner.active.any():
        obs, *_ = runner.step(agent.act(obs))
    rob = np.array([robustness(t, setup.aut.formula) for t in runner.trajectories()])
    return {
        "success_rate": float(runner.success.mean()),
        "avg_steps": float(runner.finish_step.mean()),
        "mean_robustness": float(rob.mean()),
        "robustness_std": float(rob.std()),
        "robustness": rob,
    }


def rlfd_train(setup: TaskSetup, demos, cfg: TrainConfig, curve_path=None, agent=None) -> TrainResult:
    """Behaviour-cloning warm start (if demos) followed by DDPG with a decaying cloning term.

    ``demos`` is a list of trajectories (may be empty); they are labelled with
    the automaton and non-satisfying ones are dropped.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    init_rng, explore_rng, eval_rng, sample_rng = (np.random.default_rng(s) for s in seeds)
    env = setup.env
    if agent is None:
        agent = DDPGAgent(setup.obs_dim(), env.action_dim, env.v_max, cfg, init_rng)
    result = TrainResult(agent)

    demo_buf = None
    qdemos, _ = construct_q_appended_batch(setup.aut, demos or [])
    trans = demo_transitions(setup, qdemos, cfg) if qdemos else None
    if trans is not None and len(trans[0]):
        demo_buf = ReplayBuffer(len(trans[0]), setup.obs_dim(), env.action_dim)
        demo_buf.add(*trans)
        result.n_demo_transitions = len(demo_buf)
        result.bc_losses = behavior_cloning(
            agent.actor, trans[0], trans[1], cfg.bc_epochs, sample_rng, cfg.lr, cfg.bc_batch_size
        )
    elif demos:
        log.warning("no usable demonstrations; training without cloning")

    buf = PrioritizedReplayBuffer(
        min(cfg.buffer_capacity, max(cfg.total_steps, 1)), setup.obs_dim(), env.action_dim, cfg.per_alpha, cfg.per_eps
    )
    runner = setup.make_runner(cfg.episodes_per_round, cfg, randomize=cfg.randomize_q_on_reset, training=True)
    sigma = cfg.noise_scale * env.v_max

    def log_eval():
        ev = evaluate(agent, setup, cfg.eval_trials, eval_rng, cfg)
        row = {
            "env_steps": result.env_steps,
            "robustness_mean": ev["mean_robustness"],
            "robustness_std": ev["robustness_std"],
            "success_rate": ev["success_rate"],
            "avg_steps": ev["avg_steps"],
        }
        result.curve.append(row)
        result.final_eval = ev
        log.info(
            "steps %d  robustness %.4f +- %.4f  success %.2f  avg steps %.1f",
            row["env_steps"], row["robustness_mean"], row["robustness_std"], row["success_rate"], row["avg_steps"],
        )
        if curve_path is not None:
            write_curve(curve_path, result.curve)

    log_eval()
    next_eval = cfg.eval_interval
    while result.env_steps < cfg.total_steps:
        obs = runner.reset(explore_rng)
        while runner.active.any():
            noise = np.clip(explore_rng.normal(scale=sigma, size=(runner.n, env.action_dim)), -2 * sigma, 2 * sigma)
            act = env.clip_action(agent.act(obs) + noise)
            obs2, rew, _, term, valid = runner.step(act)
            buf.add(obs[valid], act[valid], rew[valid], obs2[valid], term[valid])
            result.env_steps += int(valid.sum())
            obs = obs2
        if len(buf):
            for _ in range(cfg.updates_per_round):
                beta = cfg.per_beta0 + (1.0 - cfg.per_beta0) * min(1.0, result.env_steps / max(cfg.total_steps, 1))
                idx, batch, weights = buf.sample(cfg.batch_size, sample_rng, beta)
                n_demo = 0
                if demo_buf is not None:
                    _, dbatch = demo_buf.sample(cfg.batch_size, sample_rng)
                    batch = tuple(np.concatenate([a, b]) for a, b in zip(batch, dbatch))
                    weights = np.concatenate([weights, np.ones(cfg.batch_size)])
                    n_demo = cfg.batch_size
                td, _, _ = agent.update(batch, weights, cfg.bc_weight(result.updates), n_demo)
                buf.update_priorities(idx, td[: len(idx)])
                result.updates += 1
        if result.env_steps >= next_eval:
            log_eval()
            while next_eval <= result.env_steps:
                next_eval += cfg.eval_interval
            if cfg.stop_when_solved and steps_to_solve(result.curve, cfg.solved_window) is not None:
                break
    return result


def write_curve(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for row in curve:
            w.writerow([row["env_steps"]] + [repr(float(row[c])) for c in CURVE_COLUMNS[1:]])


def read_curve(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: (int(v) if k == "env_steps" else float(v)) for k, v in r.items()} for r in rows]
