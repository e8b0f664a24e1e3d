"""Command-line entry point: ``fsarl <command> ...``.

Commands
--------
compile      formula -> automaton JSON + DOT
export-dot   formula -> DOT on stdout (or a file)
robustness   formula + trajectory CSV -> robustness value and SAT/UNSAT
demo-gen     scripted demonstrations as CSV files
train        one or more comparison arms; curve CSV and checkpoints per arm
eval         noise-free evaluation of a trained arm

Run configuration (YAML, every key optional)::

    task: task1                 # a named task, or any formula via `formula`
    formula: null
    predicates: null            # predicate table file; default: the env's own
    env: {name: region2d}       # plus constructor parameters, e.g. eps, v_max
    arms: [fsa+demo, fsa, shaped+demo, shaped]
    demos: null                 # directory of demo_*.csv; generated when null
    output: runs/task1
    train: {...}                # any TrainConfig field

Command-line flags override the file; ``--set train.noise_scale=1.0`` reaches
any nested key. Exit codes: 0 success, 2 specification error, 3 I/O error,
4 training divergence.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .automaton import compile as compile_automaton
from .envs import SHAPED_REWARDS, TASKS, make_env
from .formula import SpecificationError, check_dimensions, load_predicate_table, normalize, parse
from .learning import (
    ARMS,
    DDPGAgent,
    DivergenceError,
    TaskSetup,
    TrainConfig,
    evaluate,
    generate_scripted_demos,
    load_demos,
    parse_arm,
    rlfd_train,
    save_demos,
)
from .nn import Mlp
from .semantics import RHO_MAX, EvaluationError, read_trajectory_csv, robustness, sat

log = logging.getLogger("fsarl")

EXIT_OK, EXIT_SPEC, EXIT_IO, EXIT_DIVERGED = 0, 2, 3, 4

DEMO_SEED_OFFSET = 1000


@dataclass
class RunConfig:
    task: str = "task1"
    formula: str | None = None
    predicates: str | None = None
    env: dict = field(default_factory=lambda: {"name": "region2d"})
    arms: list = field(default_factory=lambda: list(ARMS))
    demos: str | None = None
    output: str = "runs"
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig.from_dict(self.train)
        if isinstance(self.arms, str):
            self.arms = [self.arms]
        for arm in self.arms:
            parse_arm(arm)
        if "name" not in self.env:
            raise SpecificationError("env needs a 'name'")
        if self.formula is None and self.task not in TASKS:
            raise SpecificationError(f"unknown task {self.task!r}; give a formula or one of {sorted(TASKS)}")
        if self.predicates is not None and not Path(self.predicates).exists():
            raise FileNotFoundError(f"predicate table not found: {self.predicates}")

    @property
    def formula_text(self) -> str:
        return self.formula if self.formula is not None else TASKS[self.task]

    def make_env(self):
        params = {k: v for k, v in self.env.items() if k != "name"}
        try:
            return make_env(self.env["name"], **params)
        except (TypeError, ValueError) as exc:
            raise SpecificationError(str(exc)) from None

    def predicate_table(self, env):
        table = load_predicate_table(self.predicates) if self.predicates else env.predicates()
        check_dimensions(table, env.state_dim)
        return table

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "formula": self.formula,
            "predicates": self.predicates,
            "env": dict(self.env),
            "arms": list(self.arms),
            "demos": self.demos,
            "output": self.output,
            "train": self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {"task", "formula", "predicates", "env", "arms", "demos", "output", "train"}
        unknown = set(doc) - known
        if unknown:
            raise SpecificationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def _set_path(doc: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise SpecificationError(f"cannot set {dotted!r}: {k!r} is not a mapping")
    node[keys[-1]] = value


def load_run_config(path=None, overrides=()) -> RunConfig:
    """File values first, then ``key=value`` overrides (values parsed as YAML)."""
    doc = {}
    if path is not None:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise SpecificationError(f"{path}: config must be a mapping")
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise SpecificationError(f"override {item!r} is not key=value")
        _set_path(doc, key.strip(), yaml.safe_load(raw))
    try:
        return RunConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, SpecificationError):
            raise
        raise SpecificationError(f"invalid config: {exc}") from None


# ---------------------------------------------------------------------------
# helpers shared by the formula commands


def _formula_env(args):
    env = make_env(args.env)
    table = load_predicate_table(args.predicates) if args.predicates else env.predicates()
    return env, table


def _compile(args):
    env, table = _formula_env(args)
    check_dimensions(table, env.state_dim)
    f = normalize(parse(args.formula, table))
    return compile_automaton(f, rho_max=args.rho_max)


def _write(path, text) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ---------------------------------------------------------------------------
# commands


def cmd_compile(args) -> int:
    aut = _compile(args)
    out = Path(args.out)
    _write(out / "automaton.json", aut.to_json())
    _write(out / "automaton.dot", aut.to_dot())
    print(f"{len(aut.states)} states, {len(aut.edges)} edges; initial {aut.initial}, finals {sorted(aut.finals)}")
    print(f"wrote {out / 'automaton.json'} and {out / 'automaton.dot'}")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    dot = _compile(args).to_dot()
    if args.out:
        _write(args.out, dot)
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def cmd_robustness(args) -> int:
    env, table = _formula_env(args)
    f = normalize(parse(args.formula, table))
    traj = read_trajectory_csv(args.trajectory)
    check_dimensions(table, traj.states.shape[1])
    rho = robustness(traj, f, rho_max=args.rho_max, strict=args.strict)
    verdict = bool(sat(traj, f))
    print(f"rho = {rho!r}")
    print("SAT" if verdict else "UNSAT")
    return EXIT_OK


def _run_config(args) -> RunConfig:
    overrides = list(args.set or [])
    for key, value in (
        ("task", args.task),
        ("formula", getattr(args, "formula", None)),
        ("output", args.out),
        ("demos", getattr(args, "demos", None)),
        ("train.seed", args.seed),
    ):
        if value is not None:
            overrides.append(f"{key}={json.dumps(value)}")
    if getattr(args, "arms", None):
        overrides.append(f"arms={json.dumps(args.arms)}")
    if getattr(args, "total_steps", None) is not None:
        overrides.append(f"train.total_steps={args.total_steps}")
    return load_run_config(args.config, overrides)


def _demos_for(run: RunConfig, env, aut):
    if run.demos is not None:
        if not Path(run.demos).is_dir():
            raise FileNotFoundError(f"demo directory not found: {run.demos}")
        demos = load_demos(run.demos)
        if not demos:
            raise FileNotFoundError(f"no demo_*.csv files in {run.demos}")
        return demos
    return generate_scripted_demos(env, aut, run.train.n_demos, run.train.seed + DEMO_SEED_OFFSET, run.train.horizon)


def cmd_demo_gen(args) -> int:
    run = _run_config(args)
    env = run.make_env()
    aut = compile_automaton(normalize(parse(run.formula_text, run.predicate_table(env))))
    n = run.train.n_demos if args.n is None else args.n
    demos = generate_scripted_demos(env, aut, n, run.train.seed + DEMO_SEED_OFFSET, run.train.horizon)
    paths = save_demos(run.output, demos)
    print(f"wrote {len(paths)} demonstrations to {run.output}")
    return EXIT_OK


def _setup(run: RunConfig, arm: str) -> TaskSetup:
    env = run.make_env()
    mode, _ = parse_arm(arm)
    if mode == "shaped" and run.task not in SHAPED_REWARDS:
        raise SpecificationError(f"no shaped reward for task {run.task!r}")
    if mode == "shaped" and run.formula is not None and run.formula != TASKS[run.task]:
        raise SpecificationError("shaped arms only exist for the built-in task formulas")
    return TaskSetup.build(env, run.formula_text, mode, run.task, run.predicate_table(env), run.train.reward_rho_max)


def cmd_train(args) -> int:
    run = _run_config(args)
    root = Path(run.output)
    summary = []
    for arm in run.arms:
        setup = _setup(run, arm)
        _, use_demos = parse_arm(arm)
        demos = _demos_for(run, setup.env, setup.aut) if use_demos else []
        out = root / arm
        out.mkdir(parents=True, exist_ok=True)
        arm_run = RunConfig.from_dict({**run.to_dict(), "arms": [arm], "output": str(out)})
        _write(out / "run.yaml", yaml.safe_dump(arm_run.to_dict(), sort_keys=True))
        log.info("training arm %s", arm)
        result = rlfd_train(setup, demos, run.train, curve_path=out / "curve.csv")
        result.agent.actor.save(out / "actor.npz")
        result.agent.critic.save(out / "critic.npz")
        solved = result.steps_to_solve(run.train.solved_window)
        ev = result.final_eval
        summary.append((arm, solved, ev["success_rate"], ev["avg_steps"], ev["mean_robustness"]))
    print("arm            solved_at   success  avg_steps  robustness")
    for arm, solved, succ, steps, rob in summary:
        print(f"{arm:<14} {str(solved):>9}   {succ:7.2f}  {steps:9.1f}  {rob:10.4f}")
    return EXIT_OK


def load_agent(checkpoint_dir):
    """Rebuild the run configuration, task setup and agent saved by ``train``."""
    ckpt = Path(checkpoint_dir)
    for name in ("run.yaml", "actor.npz"):
        if not (ckpt / name).exists():
            raise FileNotFoundError(f"missing {name} in checkpoint directory {ckpt}")
    with open(ckpt / "run.yaml") as fh:
        run = RunConfig.from_dict(yaml.safe_load(fh))
    setup = _setup(run, run.arms[0])
    actor = Mlp.load(ckpt / "actor.npz")
    if actor.sizes[0] != setup.obs_dim() or actor.sizes[-1] != setup.env.action_dim:
        raise SpecificationError(f"checkpoint shape {actor.sizes} does not fit the task")
    agent = DDPGAgent(setup.obs_dim(), setup.env.action_dim, setup.env.v_max, run.train, np.random.default_rng(0))
    agent.actor = actor
    if (ckpt / "critic.npz").exists():
        agent.critic = Mlp.load(ckpt / "critic.npz")
    return run, setup, agent


def cmd_eval(args) -> int:
    run, setup, agent = load_agent(args.checkpoint)
    seed = run.train.seed if args.seed is None else args.seed
    ev = evaluate(agent, setup, args.trials, np.random.default_rng(seed), run.train)
    metrics = {
        "arm": run.arms[0],
        "trials": args.trials,
        "success_rate": ev["success_rate"],
        "avg_steps": ev["avg_steps"],
        "robustness_mean": ev["mean_robustness"],
        "robustness_std": ev["robustness_std"],
    }
    for k, v in metrics.items():
        print(f"{k}: {v}")
    if args.out:
        _write(args.out, json.dumps(metrics, indent=2) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fsarl", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def formula_args(sp):
        sp.add_argument("formula", help='formula text, e.g. "F(r & F(g & F b))"')
        sp.add_argument("--env", default="region2d", help="environment whose predicates are bound (default region2d)")
        sp.add_argument("--predicates", help="predicate table file (overrides the env's table)")
        sp.add_argument("--rho-max", type=float, default=RHO_MAX, help="robustness of true")

    sp = sub.add_parser("compile", help="compile a formula to an automaton")
    formula_args(sp)
    sp.add_argument("--out", default=".", help="directory for automaton.json and automaton.dot")
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("export-dot", help="print the automaton of a formula as DOT")
    formula_args(sp)
    sp.add_argument("--out", help="write to this file instead of stdout")
    sp.set_defaults(func=cmd_export_dot)

    sp = sub.add_parser("robustness", help="robustness of a trajectory CSV")
    formula_args(sp)
    sp.add_argument("trajectory", help="CSV with header t,s_0,...")
    sp.add_argument("--strict", action="store_true", help="error on X over a single state")
    sp.set_defaults(func=cmd_robustness)

    def run_args(sp):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--task", help="task name (task1, task2)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")

    sp = sub.add_parser("demo-gen", help="generate scripted demonstrations")
    run_args(sp)
    sp.add_argument("--formula")
    sp.add_argument("-n", type=int, help="number of demonstrations (default train.n_demos)")
    sp.set_defaults(func=cmd_demo_gen)

    sp = sub.add_parser("train", help="train comparison arms")
    run_args(sp)
    sp.add_argument("--formula")
    sp.add_argument("--arms", nargs="+", choices=ARMS)
    sp.add_argument("--demos", help="directory of demonstration CSVs")
    sp.add_argument("--total-steps", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a trained arm")
    sp.add_argument("checkpoint", help="arm directory written by train")
    sp.add_argument("--trials", type=int, default=10)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="also write metrics as JSON")
    sp.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SpecificationError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # configuration values rejected by the library (bad arm, schedule, ...)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
