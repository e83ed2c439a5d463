"""Propositional + linear-rational formula AST.

Formulas mix boolean atoms (goal-model propositions) with linear
arithmetic atoms over rational-valued variables.  All numbers are
``fractions.Fraction``; nothing in this package ever rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Union

Rational = Fraction

#: Comparison operators allowed in linear atoms, in source syntax.
COMPARISON_OPS = ("<", "<=", "=", ">=", ">")

_NEGATED_OP = {"<": ">=", "<=": ">", "=": None, ">=": "<", ">": "<="}


def as_rational(value: int | str | Fraction) -> Fraction:
    """Coerce ints, 'p/q' / decimal strings, and Fractions to Fraction."""
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def format_rational(value: Fraction) -> str:
    """Render a Fraction the way the surface syntax writes it."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class PropAtom:
    """A boolean variable (element, refinement, or auxiliary)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class LinearAtom:
    """A comparison ``sum(coeff_i * var_i) op constant``.

    Terms are stored sorted by variable name with merged, nonzero
    coefficients so structurally equal atoms compare equal.
    """

    terms: tuple[tuple[Fraction, str], ...]
    op: str
    const: Fraction

    def __post_init__(self) -> None:
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")

    @staticmethod
    def make(
        terms: Mapping[str, Fraction] | list[tuple[Fraction, str]],
        op: str,
        const: int | str | Fraction,
    ) -> "LinearAtom":
        if isinstance(terms, Mapping):
            items = [(as_rational(c), v) for v, c in terms.items()]
        else:
            items = [(as_rational(c), v) for c, v in terms]
        merged: dict[str, Fraction] = {}
        for coeff, var in items:
            merged[var] = merged.get(var, Fraction(0)) + coeff
        canon = tuple(
            (coeff, var) for var, coeff in sorted(merged.items()) if coeff != 0
        )
        return LinearAtom(canon, op, as_rational(const))

    def holds(self, values: Mapping[str, Fraction]) -> bool:
        lhs = sum((c * values[v] for c, v in self.terms), Fraction(0))
        if self.op == "<":
            return lhs < self.const
        if self.op == "<=":
            return lhs <= self.const
        if self.op == "=":
            return lhs == self.const
        if self.op == ">=":
            return lhs >= self.const
        return lhs > self.const

    def __str__(self) -> str:
        if not self.terms:
            lhs = "0"
        else:
            parts: list[str] = []
            for i, (coeff, var) in enumerate(self.terms):
                mag = abs(coeff)
                body = var if mag == 1 else f"{format_rational(mag)}*{var}"
                if i == 0:
                    parts.append(body if coeff > 0 else f"-{body}")
                else:
                    parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
            lhs = " ".join(parts)
        return f"{lhs} {self.op} {format_rational(self.const)}"


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"


Formula = Union[PropAtom, LinearAtom, Not, And, Or, Implies, Iff]

TRUE: Formula = And(())
FALSE: Formula = Or(())


def conj(*parts: Formula) -> Formula:
    """N-ary conjunction, flattening nested Ands and dropping TRUE."""
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, And):
            flat.extend(p.children)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*parts: Formula) -> Formula:
    flat: list[Formula] = []
    for p in parts:
        if isinstance(p, Or):
            flat.extend(p.children)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.child
    return Not(f)


def prop(name: str) -> PropAtom:
    return PropAtom(name)


def negate_linear(atom: LinearAtom) -> LinearAtom | None:
    """The complementary linear atom, or None for '=' (not convex)."""
    flipped = _NEGATED_OP[atom.op]
    if flipped is None:
        return None
    return LinearAtom(atom.terms, flipped, atom.const)


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    """Depth-first traversal including ``f`` itself."""
    stack: list[Formula] = [f]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Not):
            stack.append(node.child)
        elif isinstance(node, (And, Or)):
            stack.extend(node.children)
        elif isinstance(node, (Implies, Iff)):
            stack.append(node.left)
            stack.append(node.right)


def prop_names(f: Formula) -> set[str]:
    return {
        node.name for node in iter_subformulas(f) if isinstance(node, PropAtom)
    }


def numeric_names(f: Formula) -> set[str]:
    names: set[str] = set()
    for node in iter_subformulas(f):
        if isinstance(node, LinearAtom):
            names.update(v for _, v in node.terms)
    return names


def linear_atoms(f: Formula) -> list[LinearAtom]:
    seen: set[LinearAtom] = set()
    out: list[LinearAtom] = []
    for node in iter_subformulas(f):
        if isinstance(node, LinearAtom) and node not in seen:
            seen.add(node)
            out.append(node)
    return out


def evaluate(
    f: Formula,
    bools: Mapping[str, bool],
    nums: Mapping[str, Fraction] | None = None,
) -> bool:
    """Evaluate under a total assignment; raises KeyError on a gap."""
    nums = nums or {}
    if isinstance(f, PropAtom):
        return bools[f.name]
    if isinstance(f, LinearAtom):
        return f.holds(nums)
    if isinstance(f, Not):
        return not evaluate(f.child, bools, nums)
    if isinstance(f, And):
        return all(evaluate(c, bools, nums) for c in f.children)
    if isinstance(f, Or):
        return any(evaluate(c, bools, nums) for c in f.children)
    if isinstance(f, Implies):
        return (not evaluate(f.left, bools, nums)) or evaluate(f.right, bools, nums)
    if isinstance(f, Iff):
        return evaluate(f.left, bools, nums) == evaluate(f.right, bools, nums)
    raise TypeError(f"not a formula: {f!r}")


_PREC_IFF = 1
_PREC_IMPLIES = 2
_PREC_OR = 3
_PREC_AND = 4
_PREC_NOT = 5
_PREC_ATOM = 6


def format_formula(f: Formula) -> str:
    """Render in the surface syntax (parsable back by the DSL parser)."""
    return _fmt(f, 0)


def _fmt(f: Formula, parent_prec: int) -> str:
    if isinstance(f, PropAtom):
        return f.name
    if isinstance(f, LinearAtom):
        # Comparisons always take parens inside compound formulas so the
        # boolean connectives never capture an arithmetic operand.
        text = str(f)
        return f"({text})" if parent_prec > 0 else text
    if isinstance(f, Not):
        return _wrap(f"!{_fmt(f.child, _PREC_NOT)}", _PREC_NOT, parent_prec)
    if isinstance(f, And):
        if not f.children:
            return "true"
        # children render at one level tighter so a nested And keeps its
        # own parentheses and reparses to the same tree, not a flat one
        body = " & ".join(_fmt(c, _PREC_AND + 1) for c in f.children)
        return _wrap(body, _PREC_AND, parent_prec)
    if isinstance(f, Or):
        if not f.children:
            return "false"
        body = " | ".join(_fmt(c, _PREC_OR + 1) for c in f.children)
        return _wrap(body, _PREC_OR, parent_prec)
    if isinstance(f, Implies):
        body = f"{_fmt(f.left, _PREC_IMPLIES + 1)} -> {_fmt(f.right, _PREC_IMPLIES)}"
        return _wrap(body, _PREC_IMPLIES, parent_prec)
    if isinstance(f, Iff):
        body = f"{_fmt(f.left, _PREC_IFF + 1)} <-> {_fmt(f.right, _PREC_IFF)}"
        return _wrap(body, _PREC_IFF, parent_prec)
    raise TypeError(f"not a formula: {f!r}")


def _wrap(body: str, prec: int, parent_prec: int) -> str:
    return f"({body})" if prec < parent_prec else body
