import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsarl.formula import TRUE, And, Atom, Eventually, Next, Not, Or, Then, Top, Until, normalize, parse
from fsarl.semantics import (
    RHO_MAX,
    EvaluationError,
    Trajectory,
    read_trajectory_csv,
    robustness,
    robustness_state,
    sat,
    write_trajectory_csv,
)
from helpers import FIG2, SYMBOLS, random_cosafe


def P(text):
    return parse(text, FIG2)


def brute_sat(states, f, t, end):
    """Scalar reference: enumerate every window exactly as the clauses read."""
    if isinstance(f, Top):
        return True
    if isinstance(f, Atom):
        return bool(f.predicate.holds(states[t]))
    if isinstance(f, Not):
        return not brute_sat(states, f.arg, t, end)
    if isinstance(f, And):
        return brute_sat(states, f.left, t, end) and brute_sat(states, f.right, t, end)
    if isinstance(f, Or):
        return brute_sat(states, f.left, t, end) or brute_sat(states, f.right, t, end)
    if isinstance(f, Next):
        return end > t and brute_sat(states, f.arg, t + 1, end)
    if isinstance(f, Eventually):
        return any(brute_sat(states, f.arg, u, end) for u in range(t, end + 1))
    if isinstance(f, Until):
        return any(
            brute_sat(states, f.right, u, end) and all(brute_sat(states, f.left, v, u) for v in range(t, u))
            for u in range(t, end + 1)
        )
    if isinstance(f, Then):
        return any(
            brute_sat(states, f.right, u, end) and any(brute_sat(states, f.left, v, u) for v in range(t, u))
            for u in range(t, end + 1)
        )
    raise TypeError(f)


def test_sat_examples():
    assert sat([4], P("a"))
    assert sat([0, 4, 9], P("F a & F b"))
    assert brute_sat(np.array([[0.0], [4.0], [9.0]]), P("F a & F b"), 0, 2)


def test_until_window_cases():
    # 9 satisfies b at the first step, so the until holds with an empty prefix
    assert brute_sat(np.array([[9.0], [4.0]]), P("a U b"), 0, 1)
    assert sat([9, 4], P("a U b"))
    # b first holds at t=1 and a fails at t=0: violated
    assert not brute_sat(np.array([[0.0], [9.0]]), P("a U b"), 0, 1)
    assert not sat([0, 9], P("a U b"))
    assert sat([4, 9], P("a U b"))
    # then: b must come strictly after some a
    assert not sat([9, 4], P("a T b"))
    assert sat([4, 0, 9], P("a T b"))


def test_next_needs_a_successor():
    assert not sat([4], P("X a"))
    assert sat([0, 4], P("X a"))
    assert robustness([4], P("X a")) == -RHO_MAX
    with pytest.raises(EvaluationError):
        robustness([4], P("X a"), strict=True)


def test_robustness_examples():
    assert robustness([4], P("a")) == pytest.approx(1.0)
    # max(min(0-8, 10-0), min(9-8, 10-9))
    assert robustness([0, 9], P("F b")) == pytest.approx(max(min(0 - 8, 10 - 0), min(9 - 8, 10 - 9)))
    assert robustness([3.3, 7.0], TRUE) == RHO_MAX
    assert robustness([3.3], TRUE, rho_max=5.0) == 5.0
    assert robustness([3.3], Not(TRUE)) == -RHO_MAX


def test_robustness_state_examples():
    # rho(!b) = -min(4-8, 10-4) = 4, rho(a) = 1
    assert robustness_state([4], P("a & !b")) == pytest.approx(min(1.0, 4.0))
    assert robustness_state([4], TRUE) == RHO_MAX
    # max(min(3, -1), min(-2, 4))
    assert robustness_state([6], P("a | b")) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        robustness_state([6], P("F a"))


def test_batch_matches_single():
    rng = np.random.default_rng(3)
    trajs = rng.uniform(-1, 11, size=(20, 5, 1))
    f = P("F(a & F b) | (a U b)")
    rob = robustness(trajs, f)
    ok = sat(trajs, f)
    for i in range(20):
        assert rob[i] == robustness(trajs[i], f)
        assert ok[i] == sat(trajs[i], f)


@st.composite
def formula_and_traces(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    f = normalize(random_cosafe(rng, SYMBOLS, 3, restricted=draw(st.booleans())))
    length = int(rng.integers(1, 6))
    trajs = rng.integers(0, 2, size=(16, length, 3)).astype(float)
    return f, trajs


@given(formula_and_traces())
@settings(max_examples=150, deadline=None)
def test_sat_matches_brute_force(case):
    f, trajs = case
    got = sat(trajs, f)
    for i, tr in enumerate(trajs):
        assert got[i] == brute_sat(tr, f, 0, len(tr) - 1)


def _numeric_case(rng):
    f = normalize(random_cosafe(rng, SYMBOLS, 3, restricted=bool(rng.integers(2))))
    length = int(rng.integers(1, 7))
    trajs = rng.uniform(-1.0, 2.0, size=(32, length, 3))
    return f, trajs


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=150, deadline=None)
def test_robustness_sign_soundness(seed):
    f, trajs = _numeric_case(np.random.default_rng(seed))
    rob = robustness(trajs, f)
    ok = sat(trajs, f)
    assert not np.any((rob > 1e-9) & ~ok)
    assert not np.any((rob < -1e-9) & ok)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_and_or_are_min_max(seed):
    rng = np.random.default_rng(seed)
    f, trajs = _numeric_case(rng)
    g, _ = _numeric_case(rng)
    np.testing.assert_array_equal(robustness(trajs, And(f, g)), np.minimum(robustness(trajs, f), robustness(trajs, g)))
    np.testing.assert_array_equal(robustness(trajs, Or(f, g)), np.maximum(robustness(trajs, f), robustness(trajs, g)))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_negation_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    from helpers import random_propositional

    g = random_propositional(rng, SYMBOLS, 3)
    trajs = rng.uniform(-1.0, 2.0, size=(32, 4, 3))
    # for propositional g the negation is NNF-expressible
    np.testing.assert_array_equal(robustness(trajs, normalize(Not(g))), -robustness(trajs, g))
    np.testing.assert_array_equal(robustness(trajs, Not(g)), -robustness(trajs, g))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_eventually_monotone_under_extension(seed):
    rng = np.random.default_rng(seed)
    from helpers import random_propositional

    f = Eventually(random_propositional(rng, SYMBOLS, 2))
    traj = rng.uniform(-1.0, 2.0, size=(int(rng.integers(1, 6)), 3))
    longer = np.vstack([traj, rng.uniform(-1.0, 2.0, size=(3, 3))])
    assert robustness(longer, f) >= robustness(traj, f)


def test_trajectory_csv_roundtrip(tmp_path):
    tr = Trajectory(np.array([[0.0, 1.5], [0.25, 1.0], [0.5, 0.5]]), np.array([[0.1], [-0.2]]))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, tr, {"formula": "F a & F b", "seed": 7})
    text = path.read_text().splitlines()
    assert text[0] == "# formula: F a & F b"
    assert text[2] == "t,s_0,s_1,a_0"
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.actions, tr.actions)
    assert back.metadata == {"formula": "F a & F b", "seed": "7"}


def test_trajectory_requires_one_action_per_transition():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((3, 1)), np.zeros((3, 1)))
