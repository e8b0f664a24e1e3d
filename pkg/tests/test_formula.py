import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsarl.formula import (
    FALSE,
    TRUE,
    And,
    Atom,
    Eventually,
    ForbiddenOperatorError,
    FormulaSyntaxError,
    Implies,
    Next,
    Not,
    NotCoSafeError,
    Or,
    Predicate,
    SpecificationError,
    Then,
    UnknownPredicateError,
    Until,
    atoms,
    check_dimensions,
    is_nnf,
    load_predicate_table,
    normalize,
    parse,
    predicate_table_from_dict,
    predicate_table_to_dict,
    to_string,
)
from fsarl.semantics import sat
from helpers import FIG2, SYMBOLS, random_cosafe

RGB = {n: Predicate.ball(n, [2 * i, 2 * i + 1], 0.05) for i, n in enumerate(["r", "g", "b"])}
a, b = Atom(FIG2["a"]), Atom(FIG2["b"])


def test_parse_task1():
    r, g, bl = (Atom(RGB[n]) for n in "rgb")
    f = parse("F(r & F(g & F b))", RGB)
    assert f == Eventually(And(r, Eventually(And(g, Eventually(bl)))))


def test_parse_fig2():
    assert parse("F a & F b", FIG2) == And(Eventually(a), Eventually(b))


def test_parse_constants():
    assert parse("true", {}) == TRUE
    assert parse("false", {}) == FALSE


@pytest.mark.parametrize(
    "text, expected",
    [
        ("a U b U a", Until(Until(a, b), a)),
        ("a T b U a", Until(Then(a, b), a)),
        ("!a U b", Until(Not(a), b)),
        ("F a U b", Until(Eventually(a), b)),
        ("a & b | a", Or(And(a, b), a)),
        ("a | b & a", Or(a, And(b, a))),
        ("a & b -> a | b", Implies(And(a, b), Or(a, b))),
        ("a U b & a", And(Until(a, b), a)),
        ("X X a", Next(Next(a))),
        ("a & b & a", And(And(a, b), a)),
    ],
)
def test_precedence_and_associativity(text, expected):
    assert parse(text, FIG2) == expected


def test_forbidden_always():
    with pytest.raises(ForbiddenOperatorError):
        parse("G a", FIG2)
    with pytest.raises(ForbiddenOperatorError):
        parse("F always", FIG2)


@pytest.mark.parametrize(
    "text, exc",
    [
        ("F (a & b", FormulaSyntaxError),
        ("a & b)", FormulaSyntaxError),
        ("a $ b", FormulaSyntaxError),
        ("a &", FormulaSyntaxError),
        ("a -> b -> a", FormulaSyntaxError),
        ("zz", UnknownPredicateError),
    ],
)
def test_errors(text, exc):
    with pytest.raises(exc):
        parse(text, FIG2)


def test_lexical_error_position():
    with pytest.raises(FormulaSyntaxError) as info:
        parse("a & $", FIG2)
    assert info.value.position == 4


def test_all_errors_are_specification_errors():
    for text in ["G a", "(a", "nope"]:
        with pytest.raises(SpecificationError):
            parse(text, FIG2)


def test_normalize_examples():
    assert normalize(Not(And(a, b))) == Or(Not(a), Not(b))
    assert normalize(Implies(a, b)) == Or(Not(a), b)
    with pytest.raises(NotCoSafeError):
        normalize(Not(Eventually(a)))
    with pytest.raises(NotCoSafeError):
        normalize(Not(Until(a, b)))
    assert normalize(Not(Not(Eventually(a)))) == Eventually(a)
    assert normalize(Not(Implies(a, b))) == And(a, Not(b))


def test_atoms_order():
    assert [p.name for p in atoms(parse("F a & F b", FIG2))] == ["a", "b"]
    assert atoms(TRUE) == []
    assert [p.name for p in atoms(parse("F(r & F(g & F b))", RGB))] == ["r", "g", "b"]
    assert [p.name for p in atoms(parse("F b & (a U b)", FIG2))] == ["b", "a"]


def test_predicate_invariants():
    with pytest.raises(SpecificationError):
        Predicate.ball("x", [0], 0.0)
    with pytest.raises(SpecificationError):
        Predicate.affine("x", [0.0, 0.0], 1.0)
    check_dimensions(RGB, 6)
    with pytest.raises(SpecificationError):
        check_dimensions(RGB, 5)


def test_predicate_robustness_values():
    assert FIG2["a"].robustness([4.0]) == pytest.approx(1.0)
    assert RGB["r"].robustness([0.3, 0.4, 0, 0, 0, 0]) == pytest.approx(0.05 - 0.5)
    batch = np.array([[4.0], [9.0]])
    np.testing.assert_allclose(FIG2["b"].robustness(batch), [-4.0, 1.0])


def test_predicate_table_roundtrip(tmp_path):
    path = tmp_path / "preds.yaml"
    import yaml

    path.write_text(yaml.safe_dump(predicate_table_to_dict({**FIG2, **RGB})))
    table = load_predicate_table(path)
    assert table == {**FIG2, **RGB}


def test_predicate_table_single_row_shorthand():
    table = predicate_table_from_dict(
        {"predicates": {"low": {"kind": "affine-threshold", "coeffs": [1.0], "threshold": 2.0}}}
    )
    assert table["low"] == Predicate.affine("low", [1.0], 2.0)
    with pytest.raises(SpecificationError):
        predicate_table_from_dict({"predicates": {"G": {"kind": "norm-ball", "dims": [0], "radius": 1}}})
    with pytest.raises(SpecificationError):
        predicate_table_from_dict({"predicates": {"x": {"kind": "norm-ball", "dims": [0]}}})


@st.composite
def formulas(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    restricted = draw(st.booleans())
    return random_cosafe(np.random.default_rng(seed), SYMBOLS, 3, restricted)


@given(formulas())
@settings(max_examples=300, deadline=None)
def test_print_parse_roundtrip(f):
    assert parse(to_string(f), SYMBOLS) == f


@given(formulas())
@settings(max_examples=200, deadline=None)
def test_normalize_idempotent_and_nnf(f):
    g = normalize(f)
    assert is_nnf(g)
    assert normalize(g) == g


@given(formulas(), st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_normalize_preserves_satisfaction(f, seed):
    rng = np.random.default_rng(seed)
    length = int(rng.integers(1, 6))
    trajs = rng.integers(0, 2, size=(64, length, 3)).astype(float)
    np.testing.assert_array_equal(sat(trajs, f), sat(trajs, normalize(f)))
