"""Formula algebra: canonical atoms, connective helpers, evaluation."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from cgmlab.formula import (
    FALSE,
    TRUE,
    And,
    Iff,
    Implies,
    LinearAtom,
    Not,
    Or,
    PropAtom,
    as_rational,
    conj,
    disj,
    evaluate,
    format_formula,
    format_rational,
    linear_atoms,
    neg,
    negate_linear,
    numeric_names,
    prop,
    prop_names,
)
from generators import random_formula


def test_rational_helpers():
    assert as_rational(3) == 3
    assert as_rational("3/2") == Fraction(3, 2)
    assert as_rational(Fraction(-1, 4)) == Fraction(-1, 4)
    assert format_rational(Fraction(6, 3)) == "2"
    assert format_rational(Fraction(7, 2)) == "7/2"
    assert format_rational(Fraction(-65)) == "-65"


def test_linear_atoms_are_canonical():
    a = LinearAtom.make([(Fraction(1), "y"), (Fraction(2), "x")], "<=", 5)
    b = LinearAtom.make({"x": Fraction(2), "y": Fraction(1)}, "<=", "5")
    assert a == b
    assert a.terms == ((Fraction(2), "x"), (Fraction(1), "y"))

    merged = LinearAtom.make([(Fraction(1), "x"), (Fraction(-1), "x")], "<", 0)
    assert merged.terms == ()

    with pytest.raises(ValueError):
        LinearAtom.make({"x": Fraction(1)}, "!=", 0)


def test_linear_atom_holds():
    atom = LinearAtom.make({"x": Fraction(2), "y": Fraction(-1)}, ">=", 3)
    assert atom.holds({"x": Fraction(2), "y": Fraction(1)})
    assert not atom.holds({"x": Fraction(1), "y": Fraction(0)})


def test_negate_linear_covers_every_operator():
    base = {"x": Fraction(1)}
    pairs = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}
    for op, flipped in pairs.items():
        negated = negate_linear(LinearAtom.make(base, op, 2))
        assert negated is not None and negated.op == flipped
    assert negate_linear(LinearAtom.make(base, "=", 2)) is None


def test_negation_is_involutive_on_strict_atoms():
    rng = random.Random(11)
    for _ in range(100):
        op = rng.choice(["<", "<=", ">", ">="])
        atom = LinearAtom.make({"x": Fraction(rng.randint(-5, 5) or 1)}, op, rng.randint(-9, 9))
        twice = negate_linear(negate_linear(atom))
        assert twice == atom
        value = {"x": Fraction(rng.randint(-20, 20))}
        assert atom.holds(value) != negate_linear(atom).holds(value)


def test_connective_helpers_flatten_and_collapse():
    p, q, r = prop("p"), prop("q"), prop("r")
    assert conj() == TRUE
    assert disj() == FALSE
    assert conj(p) == p
    assert disj(q) == q
    assert conj(conj(p, q), r) == And((p, q, r))
    assert disj(disj(p, q), r) == Or((p, q, r))
    assert neg(p) == Not(p)


def test_constants_evaluate_as_expected():
    assert evaluate(TRUE, {}, {})
    assert not evaluate(FALSE, {}, {})


def test_evaluate_full_connective_table():
    p, q = prop("p"), prop("q")
    for pv in (False, True):
        for qv in (False, True):
            env = {"p": pv, "q": qv}
            assert evaluate(And((p, q)), env) == (pv and qv)
            assert evaluate(Or((p, q)), env) == (pv or qv)
            assert evaluate(Implies(p, q), env) == ((not pv) or qv)
            assert evaluate(Iff(p, q), env) == (pv == qv)
            assert evaluate(Not(p), env) == (not pv)


def test_evaluate_raises_on_missing_variables():
    with pytest.raises(KeyError):
        evaluate(prop("ghost"), {}, {})
    with pytest.raises(KeyError):
        evaluate(LinearAtom.make({"x": Fraction(1)}, "<", 0), {}, {})


def test_name_collectors():
    f = Implies(
        And((prop("a"), LinearAtom.make({"x": Fraction(1), "y": Fraction(2)}, "<", 9))),
        Or((prop("b"), Not(prop("a")))),
    )
    assert prop_names(f) == {"a", "b"}
    assert numeric_names(f) == {"x", "y"}
    assert len(linear_atoms(f)) == 1


def test_linear_atoms_deduplicate():
    atom = LinearAtom.make({"x": Fraction(1)}, "<", 1)
    f = And((atom, Or((atom, atom))))
    assert linear_atoms(f) == [atom]


def test_formatting_uses_minimal_parentheses():
    p, q, r = prop("p"), prop("q"), prop("r")
    assert format_formula(And((p, Or((q, r))))) == "p & (q | r)"
    assert format_formula(Or((And((p, q)), r))) == "p & q | r"
    assert format_formula(Not(And((p, q)))) == "!(p & q)"
    assert format_formula(Implies(p, Implies(q, r))) == "p -> q -> r"
    assert format_formula(Implies(Implies(p, q), r)) == "(p -> q) -> r"
    atom = LinearAtom.make({"x": Fraction(3, 2)}, "<=", Fraction(7, 2))
    assert format_formula(atom) == "3/2*x <= 7/2"


def test_random_formula_evaluation_is_stable_under_formatting():
    rng = random.Random(5)
    props = ["p", "q", "r"]
    nums = ["x", "y"]
    from cgmlab.dsl import parse_formula_text

    for _ in range(200):
        f = random_formula(rng, props, nums, depth=3)
        env_b = {name: rng.random() < 0.5 for name in props}
        env_n = {name: Fraction(rng.randint(-10, 10)) for name in nums}
        reparsed = parse_formula_text(format_formula(f))
        assert evaluate(reparsed, env_b, env_n) == evaluate(f, env_b, env_n)
