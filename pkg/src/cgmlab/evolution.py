"""Evolving a realized model: diff two versions, score how far a new
realization strays from the old one, and re-solve the new model so the
chosen distance is minimal.

Two distance families, both counted over "elements of interest":

* familiarity counts every disagreement with the old realization on
  elements both versions share, plus every new element switched on;
* change effort counts only new work (tasks newly switched on),
  deliberately ignoring tasks that get dropped.

Both have weighted variants, and a third counter (previously satisfied
tasks that the candidate drops) is kept for comparison with prior work
on re-configuration.  Every distance is affine in the candidate's
propositions once the old realization is fixed, so minimizing one is
just another objective for the optimizer, lexicographically followed
by caller-chosen tie-breakers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .encoder import (
    BUILTIN_OBJECTIVES,
    Objective,
    build_objective,
    encode,
    objective_value,
)
from .model import Assertion, CgmModel, ObjectiveRef, Realization
from .omt import Budget, ObjectiveSpec, Stats, Unsatisfiable, optimize
from .reason import diagnose_assertions, resolve_objectives, to_realization, with_support

CRITERION_KINDS = (
    "familiarity",
    "weightedFamiliarity",
    "changeEffort",
    "weightedChangeEffort",
    "ernstFamiliarity",
)

_TASK_KINDS = {"changeEffort", "weightedChangeEffort", "ernstFamiliarity"}
_WEIGHTED_KINDS = {"weightedFamiliarity", "weightedChangeEffort"}


class MissingWeight(KeyError):
    """A weighted criterion found an interest element with no weight."""


class NonTaskInterest(ValueError):
    """An effort criterion was given interest elements that are not tasks."""


class Unrealizable(RuntimeError):
    """The new model admits no realization under its assertions.

    ``core`` holds a deletion-minimal conflicting subset of the new
    model's assertions (empty when the conflict does not involve them).
    """

    def __init__(self, core: tuple[Assertion, ...]):
        subjects = ", ".join(a.subject for a in core) or "none"
        super().__init__(f"new model is unrealizable (conflicting assertions: {subjects})")
        self.core = core


@dataclass(frozen=True)
class EvolutionContext:
    """A diff of two model versions, seen from a set of elements of
    interest, optionally anchored to the old model's realization."""

    old_model: CgmModel
    new_model: CgmModel
    interest: frozenset[str]
    common: tuple[str, ...]
    new: tuple[str, ...]
    removed: tuple[str, ...]
    old_realization: Realization | None = None
    weights: Mapping[str, Fraction] | None = None


@dataclass(frozen=True)
class SimilarityCriterion:
    """Which distance to minimize, then which objectives break ties.

    ``tie_breakers`` entries may be objective names, ObjectiveRef, or
    ready ObjectiveSpec values; None means the new model's declared
    objective list.  ``count_denied_new`` switches the familiarity
    kinds to counting new elements left denied instead of new elements
    satisfied (a variant kept for comparison, not the default).
    """

    kind: str
    tie_breakers: Sequence[object] | None = None
    count_denied_new: bool = False

    def __post_init__(self) -> None:
        if self.kind not in CRITERION_KINDS:
            raise ValueError(f"unknown criterion kind: {self.kind!r}")


def default_interest(old_model: CgmModel, new_model: CgmModel, *, tasks_only: bool) -> frozenset[str]:
    """All elements of both versions; for the effort criteria, only
    ids that are tasks in every version containing them."""
    ids = {e.id for e in old_model.elements} | {e.id for e in new_model.elements}
    if not tasks_only:
        return frozenset(ids)
    keep = set()
    for eid in ids:
        in_old = eid in old_model.element_by_id
        in_new = eid in new_model.element_by_id
        if in_old and not old_model.is_task(eid):
            continue
        if in_new and not new_model.is_task(eid):
            continue
        keep.add(eid)
    return frozenset(keep)


def diff(
    old_model: CgmModel,
    new_model: CgmModel,
    interest: Sequence[str] | None = None,
) -> EvolutionContext:
    """Partition the elements of interest by version membership.
    Identity is id equality; a renamed element counts as removed plus
    new.  Interest ids in neither version fall out of all three parts."""
    chosen = (
        frozenset(interest)
        if interest is not None
        else default_interest(old_model, new_model, tasks_only=False)
    )
    old_ids = set(old_model.element_by_id)
    new_ids = set(new_model.element_by_id)
    return EvolutionContext(
        old_model=old_model,
        new_model=new_model,
        interest=chosen,
        common=tuple(sorted(chosen & old_ids & new_ids)),
        new=tuple(sorted((chosen & new_ids) - old_ids)),
        removed=tuple(sorted((chosen & old_ids) - new_ids)),
    )


def _anchor(ctx: EvolutionContext) -> Realization:
    if ctx.old_realization is None:
        raise ValueError("context has no old realization to compare against")
    return ctx.old_realization


def _weight(ctx: EvolutionContext, eid: str) -> Fraction:
    """Explicit weights are mandatory once given; otherwise the task's
    penalty in the newest version defining it serves, defaulting to 1."""
    if ctx.weights is not None:
        try:
            return Fraction(ctx.weights[eid])
        except KeyError:
            raise MissingWeight(eid) from None
    element = ctx.new_model.element_by_id.get(eid) or ctx.old_model.element_by_id.get(eid)
    if element is not None and element.penalty is not None:
        return element.penalty
    return Fraction(1)


def _require_tasks(ctx: EvolutionContext) -> None:
    for eid in sorted(ctx.interest):
        for model in (ctx.old_model, ctx.new_model):
            if eid in model.element_by_id and not model.is_task(eid):
                raise NonTaskInterest(eid)


def familiarity_cost(
    ctx: EvolutionContext, candidate: Realization, *, count_denied_new: bool = False
) -> Fraction:
    """Disagreements with the old realization on common elements, plus
    new elements satisfied (or denied, under the variant flag)."""
    old = _anchor(ctx)
    total = 0
    for eid in ctx.common:
        total += candidate.bool_assign[eid] != old.bool_assign[eid]
    for eid in ctx.new:
        if count_denied_new:
            total += not candidate.bool_assign[eid]
        else:
            total += bool(candidate.bool_assign[eid])
    return Fraction(total)


def weighted_familiarity_cost(
    ctx: EvolutionContext, candidate: Realization, *, count_denied_new: bool = False
) -> Fraction:
    old = _anchor(ctx)
    total = Fraction(0)
    for eid in ctx.common:
        if candidate.bool_assign[eid] != old.bool_assign[eid]:
            total += _weight(ctx, eid)
    for eid in ctx.new:
        hit = not candidate.bool_assign[eid] if count_denied_new else candidate.bool_assign[eid]
        if hit:
            total += _weight(ctx, eid)
    return total


def change_effort(ctx: EvolutionContext, candidate: Realization) -> Fraction:
    """Tasks newly taken on: common tasks the old realization left
    denied but the candidate satisfies, plus new tasks satisfied.
    Dropping previously satisfied tasks costs nothing here."""
    _require_tasks(ctx)
    old = _anchor(ctx)
    total = 0
    for eid in ctx.common:
        total += candidate.bool_assign[eid] and not old.bool_assign[eid]
    for eid in ctx.new:
        total += bool(candidate.bool_assign[eid])
    return Fraction(total)


def weighted_change_effort(ctx: EvolutionContext, candidate: Realization) -> Fraction:
    _require_tasks(ctx)
    old = _anchor(ctx)
    total = Fraction(0)
    for eid in ctx.common:
        if candidate.bool_assign[eid] and not old.bool_assign[eid]:
            total += _weight(ctx, eid)
    for eid in ctx.new:
        if candidate.bool_assign[eid]:
            total += _weight(ctx, eid)
    return total


def ernst_familiarity_cost(ctx: EvolutionContext, candidate: Realization) -> Fraction:
    """Previously satisfied common tasks the candidate drops; the
    re-configuration distance used by earlier work, kept comparable."""
    _require_tasks(ctx)
    old = _anchor(ctx)
    total = 0
    for eid in ctx.common:
        total += old.bool_assign[eid] and not candidate.bool_assign[eid]
    return Fraction(total)


COST_FUNCTIONS = {
    "familiarity": familiarity_cost,
    "weightedFamiliarity": weighted_familiarity_cost,
    "changeEffort": change_effort,
    "weightedChangeEffort": weighted_change_effort,
    "ernstFamiliarity": ernst_familiarity_cost,
}


def criterion_objective(ctx: EvolutionContext, criterion: SimilarityCriterion) -> ObjectiveSpec:
    """The chosen distance as an affine objective over the new model's
    propositions, old-realization values folded into the constants."""
    old = _anchor(ctx)
    kind = criterion.kind
    weighted = kind in _WEIGHTED_KINDS
    if kind in _TASK_KINDS:
        _require_tasks(ctx)

    bools: dict[str, Fraction] = {}
    offset = Fraction(0)

    def add(eid: str, coeff: Fraction) -> None:
        if coeff:
            bools[eid] = bools.get(eid, Fraction(0)) + coeff

    for eid in ctx.common:
        w = _weight(ctx, eid) if weighted else Fraction(1)
        if kind in ("familiarity", "weightedFamiliarity"):
            if old.bool_assign[eid]:
                offset += w
                add(eid, -w)
            else:
                add(eid, w)
        elif kind in ("changeEffort", "weightedChangeEffort"):
            if not old.bool_assign[eid]:
                add(eid, w)
        else:  # ernstFamiliarity
            if old.bool_assign[eid]:
                offset += 1
                add(eid, Fraction(-1))

    for eid in ctx.new:
        w = _weight(ctx, eid) if weighted else Fraction(1)
        if kind in ("familiarity", "weightedFamiliarity") and criterion.count_denied_new:
            offset += w
            add(eid, -w)
        elif kind == "ernstFamiliarity":
            pass
        else:
            add(eid, w)

    return ObjectiveSpec.make(bools=bools, offset=offset, label=kind)


@dataclass(frozen=True)
class EvolveResult:
    realization: Realization
    criterion: str
    value: Fraction
    tie_names: tuple[str, ...]
    tie_values: tuple[Fraction, ...]
    objective_values: dict[str, Fraction]
    stats: Stats


def _tie_stack(
    model: CgmModel, tie_breakers: Sequence[object] | None
) -> tuple[tuple[str, ...], list[ObjectiveSpec], list[Objective]]:
    if tie_breakers is None:
        built = resolve_objectives(model, None)
        return tuple(ob.name for ob in built), [ob.spec for ob in built], built
    names: list[str] = []
    specs: list[ObjectiveSpec] = []
    built: list[Objective] = []
    for entry in tie_breakers:
        if isinstance(entry, ObjectiveSpec):
            names.append(entry.label or f"objective{len(names)}")
            specs.append(entry)
        else:
            if isinstance(entry, str):
                entry = ObjectiveRef(entry)
            ob = build_objective(model, entry.name, maximize=entry.maximize)
            names.append(ob.name)
            specs.append(ob.spec)
            built.append(ob)
    return tuple(names), specs, built


def evolve(
    old_model: CgmModel,
    old_realization: Realization,
    new_model: CgmModel,
    criterion: SimilarityCriterion,
    *,
    interest: Sequence[str] | None = None,
    weights: Mapping[str, Fraction] | None = None,
    budget: Budget | None = None,
    certify: bool = False,
) -> EvolveResult:
    """Re-solve the new model, minimizing the criterion's distance from
    the old realization first and the tie-breaker objectives after it.

    Raises Unrealizable when the new model has no realization at all;
    the exception carries the conflicting assertion core."""
    tasks_only = criterion.kind in _TASK_KINDS
    if interest is None:
        interest = sorted(default_interest(old_model, new_model, tasks_only=tasks_only))
    ctx = replace(
        diff(old_model, new_model, interest),
        old_realization=old_realization,
        weights=weights,
    )
    head = criterion_objective(ctx, criterion)
    tie_names, tie_specs, tie_built = _tie_stack(new_model, criterion.tie_breakers)
    formula = with_support(encode(new_model), tie_built)
    try:
        opt = optimize(
            formula,
            [head, *tie_specs],
            order=new_model.prop_variables,
            budget=budget,
            certify=certify,
        )
    except Unsatisfiable:
        core = tuple(diagnose_assertions(new_model, budget=budget))
        raise Unrealizable(core) from None

    realization = to_realization(new_model, opt.model)
    values = {
        name: objective_value(new_model, name, realization) for name in BUILTIN_OBJECTIVES
    }
    for attr in new_model.attributes:
        values[attr] = realization.num_assign[attr]
    return EvolveResult(
        realization=realization,
        criterion=criterion.kind,
        value=opt.values[0],
        tie_names=tie_names,
        tie_values=tuple(opt.values[1:]),
        objective_values=values,
        stats=opt.stats,
    )
