"""Core goal-model data structures and structural operations.

An and/or model: elements (goals and domain assumptions) connected by
refinements, plus relation edges, rational-valued attributes, boolean
and linear constraints, and user assertions.  Element roles are purely
structural: a requirement is a root goal, a task is a non-root leaf
goal, everything else among goals is intermediate; domain assumptions
are always leaves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

from .formula import (
    Formula,
    LinearAtom,
    as_rational,
    evaluate,
    format_formula,
    numeric_names,
    prop_names,
)


class ElementKind(enum.Enum):
    GOAL = "goal"
    DOMAIN_ASSUMPTION = "domain-assumption"


class Mark(enum.Enum):
    SATISFIED = "satisfied"
    DENIED = "denied"


@dataclass(frozen=True)
class Element:
    id: str
    kind: ElementKind = ElementKind.GOAL
    label: str = ""
    reward: Fraction | None = None
    penalty: Fraction | None = None
    attr_values: tuple[tuple[str, Fraction, Fraction], ...] = ()
    """Per-attribute (name, value when satisfied, value when denied)."""

    def attr_value(self, name: str) -> tuple[Fraction, Fraction] | None:
        for attr, sat, den in self.attr_values:
            if attr == name:
                return sat, den
        return None

    def with_attr(self, name: str, sat: Fraction, den: Fraction = Fraction(0)) -> "Element":
        kept = tuple(t for t in self.attr_values if t[0] != name)
        return replace(self, attr_values=kept + ((name, sat, den),))


def goal(
    id: str,
    *,
    label: str = "",
    reward: int | str | Fraction | None = None,
    penalty: int | str | Fraction | None = None,
) -> Element:
    return Element(
        id,
        ElementKind.GOAL,
        label,
        None if reward is None else as_rational(reward),
        None if penalty is None else as_rational(penalty),
    )


def assumption(id: str, *, label: str = "") -> Element:
    return Element(id, ElementKind.DOMAIN_ASSUMPTION, label)


@dataclass(frozen=True)
class Refinement:
    """One way to achieve ``target``: the conjunction of ``sources``."""

    id: str
    target: str
    sources: tuple[str, ...]


@dataclass(frozen=True)
class Contribution:
    """Satisfying ``source`` forces ``target`` to be satisfied."""

    source: str
    target: str


@dataclass(frozen=True)
class Conflict:
    """``a`` and ``b`` cannot both be satisfied; stored in id order."""

    a: str
    b: str

    @staticmethod
    def make(x: str, y: str) -> "Conflict":
        return Conflict(*sorted((x, y)))


@dataclass(frozen=True)
class Binding:
    """Two refinements representing one choice made in two places.

    When both targets are satisfied, either both refinements apply or
    neither does.  Stored in id order.
    """

    r1: str
    r2: str

    @staticmethod
    def make(x: str, y: str) -> "Binding":
        return Binding(*sorted((x, y)))


@dataclass(frozen=True)
class Preference:
    """Soft statement that ``preferred`` should hold rather than ``other``."""

    preferred: str
    other: str


Edge = Union[Contribution, Conflict, Binding, Preference]


@dataclass(frozen=True)
class Assertion:
    subject: str
    mark: Mark


@dataclass(frozen=True)
class ObjectiveRef:
    """A named objective with a direction, as declared in model text."""

    name: str
    maximize: bool = False


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    rule: str
    subject: str | None
    message: str

    def __str__(self) -> str:
        where = f" [{self.subject}]" if self.subject else ""
        return f"{self.severity}: {self.rule}{where}: {self.message}"


class UnknownId(KeyError):
    """A mutation referenced an id the model does not contain."""


class StructureBroken(ValueError):
    """A mutation would leave a dangling reference behind."""


class MissingAssignment(ValueError):
    """A realization check needs a total assignment and did not get one."""

    def __init__(self, missing: Sequence[str]):
        super().__init__(f"assignment missing variables: {', '.join(sorted(missing))}")
        self.missing = tuple(sorted(missing))


def attr_var(attr: str, element_id: str) -> str:
    """Name of the per-element contribution variable of an attribute."""
    return f"{attr}__{element_id}"


@dataclass(frozen=True)
class CgmModel:
    elements: tuple[Element, ...] = ()
    refinements: tuple[Refinement, ...] = ()
    edges: tuple[Edge, ...] = ()
    attributes: tuple[str, ...] = ()
    constraints: tuple[Formula, ...] = ()
    assertions: tuple[Assertion, ...] = ()
    objectives: tuple[ObjectiveRef, ...] = ()

    # ------------------------------------------------------------------
    # derived structure (cached; the model itself is immutable)
    # ------------------------------------------------------------------

    @cached_property
    def element_by_id(self) -> dict[str, Element]:
        return {e.id: e for e in self.elements}

    @cached_property
    def refinement_by_id(self) -> dict[str, Refinement]:
        return {r.id: r for r in self.refinements}

    @cached_property
    def refinements_of(self) -> dict[str, tuple[Refinement, ...]]:
        """Target element id -> its refinements, in declaration order."""
        out: dict[str, list[Refinement]] = {e.id: [] for e in self.elements}
        for r in self.refinements:
            out.setdefault(r.target, []).append(r)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def source_of(self) -> dict[str, tuple[str, ...]]:
        """Element id -> ids of refinements it feeds."""
        out: dict[str, list[str]] = {e.id: [] for e in self.elements}
        for r in self.refinements:
            for s in r.sources:
                out.setdefault(s, []).append(r.id)
        return {k: tuple(v) for k, v in out.items()}

    def is_root(self, element_id: str) -> bool:
        return not self.source_of.get(element_id, ())

    def is_leaf(self, element_id: str) -> bool:
        return not self.refinements_of.get(element_id, ())

    def is_requirement(self, element_id: str) -> bool:
        e = self.element_by_id.get(element_id)
        return e is not None and e.kind is ElementKind.GOAL and self.is_root(element_id)

    def is_task(self, element_id: str) -> bool:
        e = self.element_by_id.get(element_id)
        return (
            e is not None
            and e.kind is ElementKind.GOAL
            and not self.is_root(element_id)
            and self.is_leaf(element_id)
        )

    def is_intermediate(self, element_id: str) -> bool:
        e = self.element_by_id.get(element_id)
        return (
            e is not None
            and e.kind is ElementKind.GOAL
            and not self.is_root(element_id)
            and not self.is_leaf(element_id)
        )

    @cached_property
    def requirements(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.elements if self.is_requirement(e.id))

    @cached_property
    def tasks(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.elements if self.is_task(e.id))

    @cached_property
    def mandatory_requirements(self) -> tuple[str, ...]:
        marked = {a.subject for a in self.assertions if a.mark is Mark.SATISFIED}
        return tuple(r for r in self.requirements if r in marked)

    @cached_property
    def nice_to_have_requirements(self) -> tuple[str, ...]:
        asserted = {a.subject for a in self.assertions}
        return tuple(r for r in self.requirements if r not in asserted)

    @cached_property
    def prop_variables(self) -> tuple[str, ...]:
        """Canonical proposition order: elements then refinements."""
        return tuple(e.id for e in self.elements) + tuple(r.id for r in self.refinements)

    @cached_property
    def numeric_variables(self) -> tuple[str, ...]:
        """Per-element contribution variables, then attribute totals."""
        out: list[str] = []
        for attr in self.attributes:
            for e in self.elements:
                if e.attr_value(attr) is not None:
                    out.append(attr_var(attr, e.id))
        out.extend(self.attributes)
        return tuple(out)

    def assertion_for(self, subject: str) -> Mark | None:
        for a in self.assertions:
            if a.subject == subject:
                return a.mark
        return None

    def sorted(self) -> "CgmModel":
        """Id-ordered copy, for order-insensitive comparison."""
        return CgmModel(
            elements=tuple(sorted(self.elements, key=lambda e: e.id)),
            refinements=tuple(sorted(self.refinements, key=lambda r: r.id)),
            edges=tuple(sorted(self.edges, key=repr)),
            attributes=tuple(sorted(self.attributes)),
            constraints=tuple(sorted(self.constraints, key=format_formula)),
            assertions=tuple(sorted(self.assertions, key=lambda a: a.subject)),
            objectives=self.objectives,
        )


# ----------------------------------------------------------------------
# realizations
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Realization:
    """A total assignment to a model's propositions and numeric variables."""

    bool_assign: Mapping[str, bool]
    num_assign: Mapping[str, Fraction] = field(default_factory=dict)

    def satisfied(self, ids: Iterable[str]) -> tuple[str, ...]:
        return tuple(i for i in ids if self.bool_assign.get(i, False))


@dataclass(frozen=True)
class PartialAssignment:
    """An assignment over a subset of a model's variables."""

    bool_assign: Mapping[str, bool]
    num_assign: Mapping[str, Fraction] = field(default_factory=dict)

    def complete(self, model: CgmModel) -> Realization:
        """Extend to a total assignment on ``model``.

        Missing propositions become False.  Missing numeric variables
        take their attribute-implied value under the completed booleans
        (denied elements contribute their denied value); anything else
        defaults to zero.
        """
        bools = {v: False for v in model.prop_variables}
        for k, v in self.bool_assign.items():
            if k in bools:
                bools[k] = v
        nums: dict[str, Fraction] = {}
        for attr in model.attributes:
            total = Fraction(0)
            for e in model.elements:
                pair = e.attr_value(attr)
                if pair is None:
                    continue
                var = attr_var(attr, e.id)
                if var in self.num_assign:
                    nums[var] = self.num_assign[var]
                else:
                    nums[var] = pair[0] if bools.get(e.id, False) else pair[1]
                total += nums[var]
            nums[attr] = self.num_assign.get(attr, total)
        for var in model.numeric_variables:
            if var not in nums:
                nums[var] = self.num_assign.get(var, Fraction(0))
        return Realization(bools, nums)


@dataclass(frozen=True)
class Violation:
    clause: str  # "element-refinements" | "refinement-sources" | "edge" | "constraint" | "assertion" | "attribute"
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.clause} [{self.subject}]: {self.message}"


@dataclass(frozen=True)
class CheckResult:
    violations: tuple[Violation, ...]

    @property
    def valid(self) -> bool:
        return not self.violations


# ----------------------------------------------------------------------
# structural validation
# ----------------------------------------------------------------------


def validate_structure(model: CgmModel) -> list[Diagnostic]:
    """All structural diagnostics; an empty list means well formed."""
    diags: list[Diagnostic] = []
    err = lambda rule, subject, msg: diags.append(Diagnostic("error", rule, subject, msg))
    warn = lambda rule, subject, msg: diags.append(Diagnostic("warning", rule, subject, msg))

    seen: set[str] = set()
    for e in model.elements:
        if e.id in seen:
            err("duplicate-id", e.id, "id declared more than once")
        seen.add(e.id)
    for r in model.refinements:
        if r.id in seen:
            err("duplicate-id", r.id, "id declared more than once")
        seen.add(r.id)

    ids = model.element_by_id
    rids = model.refinement_by_id

    for e in model.elements:
        if e.reward is not None:
            if e.reward < 0:
                err("negative-reward", e.id, "reward must be nonnegative")
            if not model.is_requirement(e.id):
                err("reward-on-non-requirement", e.id, "only requirements carry rewards")
        if e.penalty is not None:
            if e.penalty < 0:
                err("negative-penalty", e.id, "penalty must be nonnegative")
            if not model.is_task(e.id):
                err("penalty-on-non-task", e.id, "only tasks carry penalties")
        for attr, _, _ in e.attr_values:
            if attr not in model.attributes:
                err("undeclared-attribute", e.id, f"attribute {attr} is not declared")

    for r in model.refinements:
        if not r.sources:
            err("empty-refinement", r.id, "a refinement needs at least one source")
        tgt = ids.get(r.target)
        if tgt is None:
            err("unknown-id", r.id, f"refinement target {r.target} does not exist")
        elif tgt.kind is not ElementKind.GOAL:
            err("refined-assumption", r.id, f"{r.target} is a domain assumption and cannot be refined")
        for s in r.sources:
            if s not in ids:
                err("unknown-id", r.id, f"refinement source {s} does not exist")
        if len(set(r.sources)) != len(r.sources):
            warn("duplicate-source", r.id, "a source appears more than once")

    for cyc in _refinement_cycles(model):
        err("refinement-cycle", cyc[0], "refinement structure contains a cycle: " + " -> ".join(cyc))

    for edge in model.edges:
        if isinstance(edge, (Contribution,)):
            pts, kind = (edge.source, edge.target), "contribution"
        elif isinstance(edge, Conflict):
            pts, kind = (edge.a, edge.b), "conflict"
        elif isinstance(edge, Binding):
            pts, kind = (edge.r1, edge.r2), "binding"
        else:
            pts, kind = (edge.preferred, edge.other), "preference"
        if isinstance(edge, Binding):
            for p in pts:
                if p not in rids:
                    err("unknown-id", p, f"{kind} endpoint {p} is not a refinement")
            if edge.r1 == edge.r2:
                err("self-edge", edge.r1, "a binding needs two distinct refinements")
        elif isinstance(edge, Preference):
            both_elems = all(p in ids for p in pts)
            both_refs = all(p in rids for p in pts)
            if not (both_elems or both_refs):
                err("preference-kind-mismatch", pts[0], "preference endpoints must both be elements or both refinements")
            if pts[0] == pts[1]:
                err("self-edge", pts[0], "a preference needs two distinct endpoints")
        else:
            for p in pts:
                if p not in ids:
                    err("unknown-id", p, f"{kind} endpoint {p} does not exist")
            if pts[0] == pts[1]:
                err("self-edge", pts[0], f"a {kind} needs two distinct endpoints")

    for a in model.assertions:
        if a.subject not in ids:
            err("unknown-id", a.subject, "assertion subject does not exist")

    known_props = set(model.prop_variables)
    known_nums = set(model.numeric_variables)
    for c in model.constraints:
        for name in prop_names(c):
            if name not in known_props:
                err("unknown-id", name, f"constraint references unknown proposition {name}")
        for name in numeric_names(c):
            if name not in known_nums:
                err("unknown-id", name, f"constraint references unknown numeric variable {name}")

    return diags


def _refinement_cycles(model: CgmModel) -> list[list[str]]:
    """Cycles in the source -> target reachability graph over elements."""
    graph: dict[str, list[str]] = {e.id: [] for e in model.elements}
    for r in model.refinements:
        for s in r.sources:
            if s in graph and r.target in graph:
                graph[s].append(r.target)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {v: WHITE for v in graph}
    stack: list[str] = []
    cycles: list[list[str]] = []

    def visit(v: str) -> None:
        color[v] = GRAY
        stack.append(v)
        for w in graph[v]:
            if color[w] == GRAY:
                i = stack.index(w)
                cycles.append(stack[i:] + [w])
            elif color[w] == WHITE:
                visit(w)
        stack.pop()
        color[v] = BLACK

    for v in graph:
        if color[v] == WHITE:
            visit(v)
    return cycles


# ----------------------------------------------------------------------
# realization checking
# ----------------------------------------------------------------------


def check_realization(model: CgmModel, candidate: Realization) -> CheckResult:
    """Check a total assignment against the realization conditions.

    Raises MissingAssignment when the candidate does not cover every
    proposition and numeric variable of the model.
    """
    bools = candidate.bool_assign
    nums = candidate.num_assign
    missing = [v for v in model.prop_variables if v not in bools]
    missing += [v for v in model.numeric_variables if v not in nums]
    if missing:
        raise MissingAssignment(missing)

    violations: list[Violation] = []

    for e in model.elements:
        refs = model.refinements_of.get(e.id, ())
        if not refs:
            continue
        expected = any(bools[r.id] for r in refs)
        if bools[e.id] != expected:
            state = "satisfied" if bools[e.id] else "denied"
            detail = (
                "at least one of its refinements is satisfied"
                if expected
                else "none of its refinements is satisfied"
            )
            violations.append(
                Violation("element-refinements", e.id, f"{e.id} is {state} yet {detail}")
            )

    for r in model.refinements:
        expected = all(bools[s] for s in r.sources)
        if bools[r.id] != expected:
            unmet = [s for s in r.sources if not bools[s]]
            if bools[r.id]:
                msg = f"{r.id} is marked applied but its source conjunction fails ({', '.join(unmet)} not satisfied)"
            else:
                msg = f"{r.id} is marked unapplied although every source is satisfied"
            violations.append(Violation("refinement-sources", r.id, msg))

    for edge in model.edges:
        if isinstance(edge, Contribution):
            if bools[edge.source] and not bools[edge.target]:
                violations.append(
                    Violation("edge", f"{edge.source}->{edge.target}",
                              f"contribution broken: {edge.source} satisfied without {edge.target}")
                )
        elif isinstance(edge, Conflict):
            if bools[edge.a] and bools[edge.b]:
                violations.append(
                    Violation("edge", f"{edge.a}><{edge.b}",
                              f"conflict broken: {edge.a} and {edge.b} are both satisfied")
                )
        elif isinstance(edge, Binding):
            t1 = model.refinement_by_id[edge.r1].target
            t2 = model.refinement_by_id[edge.r2].target
            if bools[t1] and bools[t2] and bools[edge.r1] != bools[edge.r2]:
                violations.append(
                    Violation("edge", f"{edge.r1}={edge.r2}",
                              f"binding broken: {edge.r1} and {edge.r2} disagree while both targets are satisfied")
                )
        # preferences are soft: never checked here

    for a in model.assertions:
        want = a.mark is Mark.SATISFIED
        if bools[a.subject] != want:
            violations.append(
                Violation("assertion", a.subject,
                          f"{a.subject} is asserted {a.mark.value} but assigned otherwise")
            )

    for attr in model.attributes:
        total = Fraction(0)
        for e in model.elements:
            pair = e.attr_value(attr)
            if pair is None:
                continue
            var = attr_var(attr, e.id)
            expected = pair[0] if bools[e.id] else pair[1]
            if nums[var] != expected:
                violations.append(
                    Violation("attribute", var,
                              f"{var} should be {expected} for {'satisfied' if bools[e.id] else 'denied'} {e.id}")
                )
            total += nums[var]
        if nums[attr] != total:
            violations.append(
                Violation("attribute", attr, f"{attr} total is {nums[attr]} but contributions sum to {total}")
            )

    for c in model.constraints:
        if not evaluate(c, bools, nums):
            violations.append(
                Violation("constraint", format_formula(c), "constraint violated")
            )

    return CheckResult(tuple(violations))


def restrict(
    realization: Realization, old_model: CgmModel, new_model: CgmModel
) -> PartialAssignment:
    """Project a realization of ``old_model`` onto the variables shared
    with ``new_model``.  The result is partial on the new model whenever
    the new model introduced variables."""
    shared_props = set(old_model.prop_variables) & set(new_model.prop_variables)
    shared_nums = set(old_model.numeric_variables) & set(new_model.numeric_variables)
    return PartialAssignment(
        {v: realization.bool_assign[v] for v in sorted(shared_props)},
        {v: realization.num_assign[v] for v in sorted(shared_nums) if v in realization.num_assign},
    )


# ----------------------------------------------------------------------
# deltas
# ----------------------------------------------------------------------

_UNSET = object()


@dataclass(frozen=True)
class AddElement:
    element: Element


@dataclass(frozen=True)
class RemoveElement:
    id: str


@dataclass(frozen=True)
class UpdateElement:
    id: str
    label: object = _UNSET
    reward: object = _UNSET
    penalty: object = _UNSET


@dataclass(frozen=True)
class AddRefinement:
    refinement: Refinement


@dataclass(frozen=True)
class RemoveRefinement:
    id: str


@dataclass(frozen=True)
class SetRefinementSources:
    id: str
    sources: tuple[str, ...]


@dataclass(frozen=True)
class AddEdge:
    edge: Edge


@dataclass(frozen=True)
class RemoveEdge:
    edge: Edge


@dataclass(frozen=True)
class AddConstraint:
    constraint: Formula


@dataclass(frozen=True)
class RemoveConstraint:
    constraint: Formula


@dataclass(frozen=True)
class SetAssertion:
    subject: str
    mark: Mark


@dataclass(frozen=True)
class ClearAssertion:
    subject: str


@dataclass(frozen=True)
class SetAttrValue:
    attr: str
    element_id: str
    satisfied: Fraction
    denied: Fraction = Fraction(0)


@dataclass(frozen=True)
class ClearAttrValue:
    attr: str
    element_id: str


MutationStep = Union[
    AddElement, RemoveElement, UpdateElement,
    AddRefinement, RemoveRefinement, SetRefinementSources,
    AddEdge, RemoveEdge, AddConstraint, RemoveConstraint,
    SetAssertion, ClearAssertion, SetAttrValue, ClearAttrValue,
]


def apply_delta(model: CgmModel, steps: Sequence[MutationStep]) -> CgmModel:
    """Apply mutation steps in order, returning a new model.

    Raises UnknownId for references to absent ids and StructureBroken
    when a removal would orphan a reference (remove the referencing
    part first).
    """
    for step in steps:
        model = _apply_step(model, step)
    return model


def invert_delta(model: CgmModel, steps: Sequence[MutationStep]) -> list[MutationStep]:
    """The inverse delta, valid against ``apply_delta(model, steps)``."""
    inverses: list[MutationStep] = []
    current = model
    for step in steps:
        inverses.append(_invert_step(current, step))
        current = _apply_step(current, step)
    inverses.reverse()
    return inverses


def _require_element(model: CgmModel, id: str) -> Element:
    e = model.element_by_id.get(id)
    if e is None:
        raise UnknownId(id)
    return e


def _require_refinement(model: CgmModel, id: str) -> Refinement:
    r = model.refinement_by_id.get(id)
    if r is None:
        raise UnknownId(id)
    return r


def _apply_step(model: CgmModel, step: MutationStep) -> CgmModel:
    if isinstance(step, AddElement):
        if step.element.id in model.element_by_id or step.element.id in model.refinement_by_id:
            raise StructureBroken(f"id {step.element.id} already exists")
        new_attrs = model.attributes
        for attr, _, _ in step.element.attr_values:
            if attr not in new_attrs:
                new_attrs = new_attrs + (attr,)
        return replace(model, elements=model.elements + (step.element,), attributes=new_attrs)

    if isinstance(step, RemoveElement):
        _require_element(model, step.id)
        for r in model.refinements:
            if r.target == step.id or step.id in r.sources:
                raise StructureBroken(f"removing {step.id} would orphan refinement {r.id}")
        for edge in model.edges:
            if step.id in _edge_endpoints(edge):
                raise StructureBroken(f"removing {step.id} would orphan an edge")
        for a in model.assertions:
            if a.subject == step.id:
                raise StructureBroken(f"removing {step.id} would orphan an assertion")
        for c in model.constraints:
            if step.id in prop_names(c):
                raise StructureBroken(f"removing {step.id} would orphan a constraint")
        return replace(model, elements=tuple(e for e in model.elements if e.id != step.id))

    if isinstance(step, UpdateElement):
        old = _require_element(model, step.id)
        updated = old
        if step.label is not _UNSET:
            updated = replace(updated, label=step.label)  # type: ignore[arg-type]
        if step.reward is not _UNSET:
            updated = replace(updated, reward=step.reward)  # type: ignore[arg-type]
        if step.penalty is not _UNSET:
            updated = replace(updated, penalty=step.penalty)  # type: ignore[arg-type]
        return replace(
            model, elements=tuple(updated if e.id == step.id else e for e in model.elements)
        )

    if isinstance(step, AddRefinement):
        r = step.refinement
        if r.id in model.refinement_by_id or r.id in model.element_by_id:
            raise StructureBroken(f"id {r.id} already exists")
        _require_element(model, r.target)
        for s in r.sources:
            _require_element(model, s)
        return replace(model, refinements=model.refinements + (r,))

    if isinstance(step, RemoveRefinement):
        _require_refinement(model, step.id)
        for edge in model.edges:
            if isinstance(edge, Binding) and step.id in (edge.r1, edge.r2):
                raise StructureBroken(f"removing {step.id} would orphan a binding")
            if isinstance(edge, Preference) and step.id in (edge.preferred, edge.other):
                raise StructureBroken(f"removing {step.id} would orphan a preference")
        for c in model.constraints:
            if step.id in prop_names(c):
                raise StructureBroken(f"removing {step.id} would orphan a constraint")
        return replace(model, refinements=tuple(r for r in model.refinements if r.id != step.id))

    if isinstance(step, SetRefinementSources):
        old = _require_refinement(model, step.id)
        for s in step.sources:
            _require_element(model, s)
        updated = replace(old, sources=tuple(step.sources))
        return replace(
            model,
            refinements=tuple(updated if r.id == step.id else r for r in model.refinements),
        )

    if isinstance(step, AddEdge):
        for p in _edge_endpoints(step.edge):
            if isinstance(step.edge, Binding):
                _require_refinement(model, p)
            elif isinstance(step.edge, Preference):
                if p not in model.element_by_id and p not in model.refinement_by_id:
                    raise UnknownId(p)
            else:
                _require_element(model, p)
        if step.edge in model.edges:
            raise StructureBroken(f"edge {step.edge} already present")
        return replace(model, edges=model.edges + (step.edge,))

    if isinstance(step, RemoveEdge):
        if step.edge not in model.edges:
            raise UnknownId(repr(step.edge))
        return replace(model, edges=tuple(e for e in model.edges if e != step.edge))

    if isinstance(step, AddConstraint):
        return replace(model, constraints=model.constraints + (step.constraint,))

    if isinstance(step, RemoveConstraint):
        if step.constraint not in model.constraints:
            raise UnknownId(format_formula(step.constraint))
        kept = list(model.constraints)
        kept.remove(step.constraint)
        return replace(model, constraints=tuple(kept))

    if isinstance(step, SetAssertion):
        _require_element(model, step.subject)
        kept = tuple(a for a in model.assertions if a.subject != step.subject)
        return replace(model, assertions=kept + (Assertion(step.subject, step.mark),))

    if isinstance(step, ClearAssertion):
        _require_element(model, step.subject)
        return replace(
            model, assertions=tuple(a for a in model.assertions if a.subject != step.subject)
        )

    if isinstance(step, SetAttrValue):
        e = _require_element(model, step.element_id)
        updated = e.with_attr(step.attr, step.satisfied, step.denied)
        attrs = model.attributes if step.attr in model.attributes else model.attributes + (step.attr,)
        return replace(
            model,
            elements=tuple(updated if x.id == e.id else x for x in model.elements),
            attributes=attrs,
        )

    if isinstance(step, ClearAttrValue):
        e = _require_element(model, step.element_id)
        if e.attr_value(step.attr) is None:
            raise UnknownId(f"{step.attr} on {step.element_id}")
        updated = replace(
            e, attr_values=tuple(t for t in e.attr_values if t[0] != step.attr)
        )
        return replace(
            model, elements=tuple(updated if x.id == e.id else x for x in model.elements)
        )

    raise TypeError(f"not a mutation step: {step!r}")


def _invert_step(model: CgmModel, step: MutationStep) -> MutationStep:
    if isinstance(step, AddElement):
        return RemoveElement(step.element.id)
    if isinstance(step, RemoveElement):
        return AddElement(_require_element(model, step.id))
    if isinstance(step, UpdateElement):
        old = _require_element(model, step.id)
        return UpdateElement(
            step.id,
            label=old.label if step.label is not _UNSET else _UNSET,
            reward=old.reward if step.reward is not _UNSET else _UNSET,
            penalty=old.penalty if step.penalty is not _UNSET else _UNSET,
        )
    if isinstance(step, AddRefinement):
        return RemoveRefinement(step.refinement.id)
    if isinstance(step, RemoveRefinement):
        return AddRefinement(_require_refinement(model, step.id))
    if isinstance(step, SetRefinementSources):
        return SetRefinementSources(step.id, _require_refinement(model, step.id).sources)
    if isinstance(step, AddEdge):
        return RemoveEdge(step.edge)
    if isinstance(step, RemoveEdge):
        return AddEdge(step.edge)
    if isinstance(step, AddConstraint):
        return RemoveConstraint(step.constraint)
    if isinstance(step, RemoveConstraint):
        return AddConstraint(step.constraint)
    if isinstance(step, SetAssertion):
        mark = model.assertion_for(step.subject)
        if mark is None:
            return ClearAssertion(step.subject)
        return SetAssertion(step.subject, mark)
    if isinstance(step, ClearAssertion):
        mark = model.assertion_for(step.subject)
        if mark is None:
            return ClearAssertion(step.subject)
        return SetAssertion(step.subject, mark)
    if isinstance(step, SetAttrValue):
        e = _require_element(model, step.element_id)
        pair = e.attr_value(step.attr)
        if pair is None:
            return ClearAttrValue(step.attr, step.element_id)
        return SetAttrValue(step.attr, step.element_id, pair[0], pair[1])
    if isinstance(step, ClearAttrValue):
        e = _require_element(model, step.element_id)
        pair = e.attr_value(step.attr)
        if pair is None:
            raise UnknownId(f"{step.attr} on {step.element_id}")
        return SetAttrValue(step.attr, step.element_id, pair[0], pair[1])
    raise TypeError(f"not a mutation step: {step!r}")


def _edge_endpoints(edge: Edge) -> tuple[str, str]:
    if isinstance(edge, Contribution):
        return edge.source, edge.target
    if isinstance(edge, Conflict):
        return edge.a, edge.b
    if isinstance(edge, Binding):
        return edge.r1, edge.r2
    return edge.preferred, edge.other
