import csv

import numpy as np
import pytest

from fsarl.automaton import compile
from fsarl.envs import TASKS, Point1D, RegionVisit2D
from fsarl.formula import TRUE, normalize, parse
from fsarl.product import (
    ProductConfig,
    ProductMDP,
    VecProductMDP,
    discounted_return,
    initial_q_choices,
)
from fsarl.semantics import robustness


@pytest.fixture(scope="module")
def fig2_setup():
    env = Point1D()
    aut = compile(normalize(parse("F a & F b", env.predicates())))
    return env, aut


def test_discounted_return_examples():
    assert discounted_return([1], 0.99) == pytest.approx(0.99)
    assert discounted_return([1, 1], 0.5) == pytest.approx(0.75)
    assert discounted_return([], 0.9) == 0.0
    with pytest.raises(ValueError):
        discounted_return([1], 1.0)


def test_shorter_success_has_higher_return():
    # identical per-step rewards, episode ends on reaching the final state
    for k in range(1, 20):
        short = discounted_return([-0.3] * k + [0.02], 0.99)
        long = discounted_return([-0.3] * (k + 3) + [0.02], 0.99)
        assert short > long


def test_config_validation():
    with pytest.raises(ValueError):
        ProductConfig(horizon=0)
    with pytest.raises(ValueError):
        ProductConfig(gamma=1.0)


def test_step_examples(fig2_setup):
    env, aut = fig2_setup
    mdp = ProductMDP(env, aut, rng=np.random.default_rng(0))
    mdp.reset()
    assert mdp.state.q == "q0"
    # drive from the reset position to s' = 4 and then s' = 0 by hand
    mdp.state = mdp.state.__class__(np.array([3.5]), "q0")
    ps, r, done = mdp.step([0.5])
    assert ps.q == "q1" and r == pytest.approx(1.0) and not done
    mdp.state = mdp.state.__class__(np.array([0.5]), "q0")
    ps, r, done = mdp.step([-0.5])
    assert ps.q == "q0" and r == pytest.approx(-3.0)


def test_reaching_final_ends_episode(fig2_setup):
    env, aut = fig2_setup
    mdp = ProductMDP(env, aut, rng=np.random.default_rng(1))
    mdp.reset()
    done = False
    while not done:
        target = 4.0 if mdp.state.q == "q0" else 9.0
        _, _, done = mdp.step([target - mdp.state.s[0]])
    assert mdp.state.q == "qf"
    with pytest.raises(RuntimeError):
        mdp.step([0.0])


def test_randomized_reset_frequencies(fig2_setup):
    env, aut = fig2_setup
    mdp = ProductMDP(env, aut, ProductConfig(randomize_q_on_reset=True), np.random.default_rng(2))
    counts = {}
    for _ in range(10_000):
        q = mdp.reset().q
        counts[q] = counts.get(q, 0) + 1
    assert set(counts) == {"q0", "q1", "q2"}
    for c in counts.values():
        assert abs(c / 10_000 - 1 / 3) < 0.02
    assert initial_q_choices(aut) == ["q0", "q1", "q2"]


def test_top_formula_terminates_at_reset():
    env = Point1D()
    aut = compile(TRUE)
    mdp = ProductMDP(env, aut, ProductConfig(randomize_q_on_reset=True), np.random.default_rng(0))
    ps = mdp.reset()
    assert ps.q == "qf" and mdp.done and mdp.t == 0
    vec = VecProductMDP(env, aut, ProductConfig(), 4)
    vec.reset(np.random.default_rng(0))
    assert not vec.active.any() and vec.success.all()


def _random_episode(mdp, rng, scale):
    mdp.reset()
    rewards, qs = [], [mdp.state.q]
    while not mdp.done:
        _, r, _ = mdp.step(rng.normal(scale=scale, size=mdp.env.action_dim))
        rewards.append(r)
        qs.append(mdp.state.q)
    return np.array(mdp.states), rewards, qs


def test_alignment_and_reward_sign():
    rng = np.random.default_rng(3)
    env = RegionVisit2D()
    setups = [(Point1D(), "F a & F b", 1.5), (Point1D(), "F(a & F b)", 1.5), (env, TASKS["task1"], 0.05), (env, TASKS["task2"], 0.05)]
    reached = 0
    for e, text, scale in setups:
        aut = compile(normalize(parse(text, e.predicates())))
        mdp = ProductMDP(e, aut, ProductConfig(horizon=60), rng)
        for _ in range(150):
            states, rewards, qs = _random_episode(mdp, rng, scale)
            rho = robustness(states, aut.formula)
            if abs(rho) > 1e-9:
                assert (qs[-1] in aut.finals) == (rho > 0)
            reached += qs[-1] in aut.finals
            for t in range(len(rewards)):
                if qs[t + 1] != qs[t] and qs[t + 1] != aut.reject:
                    assert rewards[t] > 0
    assert reached > 20


def test_reject_sink_reward():
    env = Point1D()
    aut = compile(normalize(parse("!a U b", env.predicates())))
    mdp = ProductMDP(env, aut, rng=np.random.default_rng(0))
    mdp.reset()
    mdp.state = mdp.state.__class__(np.array([3.5]), aut.initial)
    ps, r, done = mdp.step([0.5])
    assert ps.q == aut.reject and r == -aut.rho_max and done


def test_vec_matches_single(fig2_setup):
    env, aut = fig2_setup
    cfg = ProductConfig(horizon=15)
    vec = VecProductMDP(env, aut, cfg, 6)
    obs = vec.reset(np.random.default_rng(4))
    assert obs.shape == (6, 1 + len(aut.states))
    rng = np.random.default_rng(5)
    actions = rng.uniform(-1, 1, size=(15, 6, 1))
    start = vec.states.copy()
    total = np.zeros(6)
    for a in actions:
        _, r, _, _, _ = vec.step(a)
        total += r
    for i in range(6):
        mdp = ProductMDP(env, aut, cfg)
        mdp.reset()
        mdp.state = mdp.state.__class__(start[i].copy(), aut.initial)
        mdp.states = [start[i].copy()]
        acc = 0.0
        for a in actions:
            if mdp.done:
                break
            _, r, _ = mdp.step(a[i])
            acc += r
        assert acc == pytest.approx(total[i])
        assert (mdp.state.q in aut.finals) == vec.success[i]
        assert len(vec.trajectories()[i]) == len(mdp.states)


def test_replay_matches_stepping(fig2_setup):
    env, aut = fig2_setup
    vec = VecProductMDP(env, aut, ProductConfig(), 1)
    obs, rewards, terminal = vec.replay(np.array([[0.0], [4.0], [6.0], [9.0], [1.0]]))
    assert len(obs) == 4
    np.testing.assert_allclose(rewards, [1.0, -2.0, 1.0])
    assert terminal.tolist() == [False, False, True]
    assert obs[1, 1 + aut.index["q1"]] == 1.0


def test_rollout_log(tmp_path, fig2_setup):
    env, aut = fig2_setup
    mdp = ProductMDP(env, aut, ProductConfig(horizon=5), np.random.default_rng(0))
    mdp.reset()
    while not mdp.done:
        mdp.step([1.0])
    path = tmp_path / "rollout.csv"
    mdp.write_rollout_log(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "q", "s_0", "a_0", "r", "done"]
    assert len(rows) == 1 + 5 + 1
    assert rows[-1][3] == "" and rows[-1][-1] == "1"
