"""SMT-LIB2 export of a model's constraints and objectives.

The emitted script targets logic QF_LRA plus the optimization commands
shared by common optimizing solvers (``minimize`` / ``maximize`` and the
``:opt.priority`` option).  Output is deterministic: the same model,
objectives, and options always produce the same bytes, so exports can
be diffed and checksummed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .encoder import Objective, encode
from .formula import (
    And,
    Formula,
    Iff,
    Implies,
    LinearAtom,
    Not,
    Or,
    PropAtom,
    numeric_names,
    prop_names,
)
from .model import CgmModel, ObjectiveRef
from .reason import resolve_objectives, with_support

__all__ = ["ExportOptions", "export_smt2"]

_SIMPLE_SYMBOL = re.compile(r"[A-Za-z~!@$%^&*_+=<>.?/-][0-9A-Za-z~!@$%^&*_+=<>.?/-]*\Z")


@dataclass(frozen=True)
class ExportOptions:
    """Knobs for the emitted script.

    ``name_prefix`` is prepended to every declared symbol (handy when
    concatenating several exports into one script); it must consist of
    characters legal in a plain SMT-LIB symbol and not start a symbol
    with a digit.
    """

    include_objectives: bool = True
    lexicographic: bool = True
    name_prefix: str = ""


def _check_prefix(prefix: str) -> None:
    if prefix and not _SIMPLE_SYMBOL.fullmatch(prefix):
        raise ValueError(
            f"name_prefix {prefix!r} would not form legal SMT-LIB symbols"
        )


def _symbol(prefix: str, name: str) -> str:
    s = prefix + name
    if _SIMPLE_SYMBOL.fullmatch(s):
        return s
    if "|" in s or "\\" in s:
        raise ValueError(f"name {s!r} cannot be written as an SMT-LIB symbol")
    return f"|{s}|"


def _number(q: Fraction) -> str:
    if q < 0:
        return f"(- {_number(-q)})"
    if q.denominator == 1:
        return str(q.numerator)
    return f"(/ {q.numerator} {q.denominator})"


def _linear_lhs(atom: LinearAtom, prefix: str) -> str:
    parts = [
        _symbol(prefix, var) if coeff == 1 else f"(* {_number(coeff)} {_symbol(prefix, var)})"
        for coeff, var in atom.terms
    ]
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return f"(+ {' '.join(parts)})"


def _sexpr(f: Formula, prefix: str) -> str:
    if isinstance(f, PropAtom):
        return _symbol(prefix, f.name)
    if isinstance(f, LinearAtom):
        return f"({f.op} {_linear_lhs(f, prefix)} {_number(f.const)})"
    if isinstance(f, Not):
        return f"(not {_sexpr(f.child, prefix)})"
    if isinstance(f, (And, Or)):
        if not f.children:
            return "true" if isinstance(f, And) else "false"
        if len(f.children) == 1:
            return _sexpr(f.children[0], prefix)
        head = "and" if isinstance(f, And) else "or"
        return f"({head} {' '.join(_sexpr(c, prefix) for c in f.children)})"
    if isinstance(f, Implies):
        return f"(=> {_sexpr(f.left, prefix)} {_sexpr(f.right, prefix)})"
    if isinstance(f, Iff):
        return f"(= {_sexpr(f.left, prefix)} {_sexpr(f.right, prefix)})"
    raise TypeError(f"unknown formula node {f!r}")


def _objective_term(obj: Objective, prefix: str) -> str:
    spec = obj.spec
    parts: list[str] = []
    if spec.offset != 0:
        parts.append(_number(spec.offset))
    for name, coeff in spec.num_terms:
        sym = _symbol(prefix, name)
        parts.append(sym if coeff == 1 else f"(* {_number(coeff)} {sym})")
    for name, coeff in spec.bool_terms:
        ite = f"(ite {_symbol(prefix, name)} 1 0)"
        parts.append(ite if coeff == 1 else f"(* {_number(coeff)} {ite})")
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return f"(+ {' '.join(parts)})"


def export_smt2(
    model: CgmModel,
    objectives: Sequence[ObjectiveRef | str] | None = None,
    options: ExportOptions = ExportOptions(),
) -> str:
    """Render the model as an SMT-LIB2 script.

    One ``(assert …)`` per conjunct of the encoding, boolean variables
    coerced to reals via ``(ite b 1 0)`` inside objective terms, one
    ``(minimize …)`` or ``(maximize …)`` per objective in order.  With
    several objectives and ``lexicographic`` set, the priority option is
    emitted and the intended order is documented in a comment.  Raises
    InvalidModel for a model that does not encode, ValueError for a
    prefix or name no SMT-LIB symbol can spell.
    """
    _check_prefix(options.name_prefix)
    p = options.name_prefix
    objs = (
        resolve_objectives(model, objectives) if options.include_objectives else []
    )
    full = with_support(encode(model), objs)

    props = list(model.prop_variables)
    seen = set(props)
    extra = prop_names(full) | {n for o in objs for n, _ in o.spec.bool_terms}
    props.extend(sorted(extra - seen))
    nums = list(model.numeric_variables)
    seen_n = set(nums)
    extra_n = numeric_names(full) | {n for o in objs for n, _ in o.spec.num_terms}
    nums.extend(sorted(extra_n - seen_n))

    conjuncts = list(full.children) if isinstance(full, And) else [full]

    lines: list[str] = []
    lines.append(
        f"; constrained goal model: {len(model.elements)} elements, "
        f"{len(model.refinements)} refinements, {len(conjuncts)} assertions"
    )
    lines.append("(set-option :produce-models true)")
    lines.append("(set-logic QF_LRA)")
    lines.append("")
    for name in props:
        lines.append(f"(declare-const {_symbol(p, name)} Bool)")
    for name in nums:
        lines.append(f"(declare-const {_symbol(p, name)} Real)")
    lines.append("")
    for c in conjuncts:
        lines.append(f"(assert {_sexpr(c, p)})")
    if objs:
        lines.append("")
        if options.lexicographic and len(objs) > 1:
            order = ", ".join(o.name for o in objs)
            lines.append(f"; objective priority, first decides first: {order}")
            lines.append("(set-option :opt.priority lex)")
        for o in objs:
            verb = "maximize" if o.spec.maximize else "minimize"
            lines.append(f"; {o.name}")
            lines.append(f"({verb} {_objective_term(o, p)})")
    lines.append("(check-sat)")
    if objs:
        lines.append("(get-objectives)")
    lines.append("")
    return "\n".join(lines)
