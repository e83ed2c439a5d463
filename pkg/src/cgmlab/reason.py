"""Model-level reasoning: realize, enumerate, and diagnose goal models.

This is the bridge between the model layer and the constraint engine:
it encodes a model, runs the engine, and maps engine assignments back
to realizations over the model's own variables.  The engine is always
given the model's canonical variable order (elements, then
refinements), so returned realizations are reproducible and ties among
co-optimal realizations break toward denying earlier-declared
elements.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .encoder import Objective, assertion_literal, build_objective, encode
from .formula import And, Formula
from .model import Assertion, CgmModel, ObjectiveRef, Realization
from .omt import (
    Assignment,
    Budget,
    Stats,
    Unsatisfiable,
    diagnose,
    enumerate_models,
    optimize,
    solve,
)

DEFAULT_OBJECTIVES = (ObjectiveRef("penaltyMinusReward"),)


@dataclass(frozen=True)
class RealizeResult:
    status: str  # "sat" | "unsat"
    realization: Realization | None
    objective_names: tuple[str, ...]
    values: tuple[Fraction, ...]
    stats: Stats


def resolve_objectives(
    model: CgmModel, objectives: Sequence[ObjectiveRef | str] | None = None
) -> list[Objective]:
    """The objective terms to optimize: the caller's list, else the
    model's declared list, else minimizing penalty minus reward."""
    refs = objectives if objectives is not None else (model.objectives or DEFAULT_OBJECTIVES)
    out: list[Objective] = []
    for ref in refs:
        if isinstance(ref, str):
            ref = ObjectiveRef(ref)
        out.append(build_objective(model, ref.name, maximize=ref.maximize))
    return out


def with_support(formula: Formula, objectives: Iterable[Objective]) -> Formula:
    """Conjoin the helper definitions that the given objectives need."""
    extra = [d for ob in objectives for d in ob.support]
    if not extra:
        return formula
    return And((formula, *extra))


def to_realization(model: CgmModel, assignment: Assignment) -> Realization:
    """Complete an engine assignment over the model's own variables.
    Variables the engine never saw default to false / zero."""
    bools = {v: assignment.bools.get(v, False) for v in model.prop_variables}
    nums = {v: assignment.nums.get(v, Fraction(0)) for v in model.numeric_variables}
    return Realization(bools, nums)


def check(model: CgmModel, *, budget: Budget | None = None) -> RealizeResult:
    """Satisfiability of the model under its assertions; no objectives."""
    res = solve(encode(model), order=model.prop_variables, budget=budget)
    realization = to_realization(model, res.model) if res.model else None
    return RealizeResult(res.status, realization, (), (), res.stats)


def realize(
    model: CgmModel,
    objectives: Sequence[ObjectiveRef | str] | None = None,
    *,
    budget: Budget | None = None,
    certify: bool = False,
) -> RealizeResult:
    """Lexicographically optimal realization under the given (or the
    model's declared) objectives."""
    built = resolve_objectives(model, objectives)
    formula = with_support(encode(model), built)
    names = tuple(ob.name for ob in built)
    try:
        opt = optimize(
            formula,
            [ob.spec for ob in built],
            order=model.prop_variables,
            budget=budget,
            certify=certify,
        )
    except Unsatisfiable:
        return RealizeResult("unsat", None, names, (), Stats(0, 0, 0, 0.0))
    return RealizeResult(
        "sat", to_realization(model, opt.model), names, opt.values, opt.stats
    )


def enumerate_realizations(
    model: CgmModel,
    *,
    projection: Sequence[str] | None = None,
    limit: int | None = None,
    budget: Budget | None = None,
) -> Iterator[Realization]:
    """Stream realizations distinct on the projection (default: every
    element and refinement proposition)."""
    proj = list(projection) if projection is not None else list(model.prop_variables)
    stream = enumerate_models(
        encode(model),
        projection=proj,
        limit=limit,
        order=model.prop_variables,
        budget=budget,
    )
    for assignment in stream:
        yield to_realization(model, assignment)


def diagnose_assertions(
    model: CgmModel, *, budget: Budget | None = None
) -> list[Assertion]:
    """Deletion-minimal subset of the user assertions that makes the
    model unrealizable.  Raises NotUnsat when the model is realizable
    with every assertion in force."""
    base = encode(model, with_assertions=False)
    suspects = [(a.subject, assertion_literal(a)) for a in model.assertions]
    core = diagnose(base, suspects, order=model.prop_variables, budget=budget)
    by_subject = {a.subject: a for a in model.assertions}
    return [by_subject[label] for label in core]
