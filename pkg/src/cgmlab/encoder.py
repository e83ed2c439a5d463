"""Translation of a goal model into one constraint formula plus
named objective terms.

``encode`` produces the conjunction a realization must satisfy:
refinement equivalences, relation edges, user constraints, assertion
literals, and the attribute bookkeeping (per-element contribution
equalities plus the total sum).  ``build_objective`` produces the
builtin objective terms over the same variables.

Preference edges never constrain ``encode``'s output; they only feed
the numUnsatPrefs objective.  That objective counts "preferred one
denied while the other is satisfied" pairs, which is not linear in the
endpoint propositions alone, so it introduces one helper proposition
per preference together with the defining equivalence.  The helper
definitions ride along in ``Objective.support`` and must be conjoined
with the encoded formula whenever that objective is active.  Helper
names start with a double underscore; model identifiers should avoid
that prefix.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .formula import And, Formula, Iff, Implies, LinearAtom, Not, Or, PropAtom
from .model import (
    Assertion,
    Binding,
    CgmModel,
    Conflict,
    Contribution,
    Diagnostic,
    Mark,
    Preference,
    attr_var,
    validate_structure,
)
from .omt import ObjectiveSpec


class InvalidModel(ValueError):
    """The model fails structural validation."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class UnknownAttribute(KeyError):
    """An objective names an attribute the model does not declare."""


BUILTIN_OBJECTIVES = (
    "penaltyMinusReward",
    "numUnsatRequirements",
    "numSatTasks",
    "numUnsatPrefs",
)


@dataclass(frozen=True)
class Objective:
    """A named objective term plus any helper definitions it needs."""

    name: str
    spec: ObjectiveSpec
    support: tuple[Formula, ...] = ()


def _conj(parts: list[Formula]) -> Formula:
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


def _disj(parts: list[Formula]) -> Formula:
    if len(parts) == 1:
        return parts[0]
    return Or(tuple(parts))


def assertion_literal(assertion: Assertion) -> Formula:
    lit: Formula = PropAtom(assertion.subject)
    return lit if assertion.mark is Mark.SATISFIED else Not(lit)


def encode(model: CgmModel, *, with_assertions: bool = True) -> Formula:
    """The single formula every realization of ``model`` satisfies.

    With ``with_assertions=False`` the user assertions are left out so
    callers can treat them as removable suspects (diagnosis needs the
    rest of the model satisfiable on its own).

    Raises InvalidModel when structural validation reports errors.
    """
    problems = [d for d in validate_structure(model) if d.severity == "error"]
    if problems:
        raise InvalidModel(problems)

    parts: list[Formula] = []

    for e in model.elements:
        refs = model.refinements_of.get(e.id, ())
        if refs:
            parts.append(Iff(PropAtom(e.id), _disj([PropAtom(r.id) for r in refs])))
    for r in model.refinements:
        parts.append(Iff(PropAtom(r.id), _conj([PropAtom(s) for s in r.sources])))

    for edge in model.edges:
        if isinstance(edge, Contribution):
            parts.append(Implies(PropAtom(edge.source), PropAtom(edge.target)))
        elif isinstance(edge, Conflict):
            parts.append(Not(And((PropAtom(edge.a), PropAtom(edge.b)))))
        elif isinstance(edge, Binding):
            t1 = model.refinement_by_id[edge.r1].target
            t2 = model.refinement_by_id[edge.r2].target
            parts.append(
                Implies(
                    And((PropAtom(t1), PropAtom(t2))),
                    Iff(PropAtom(edge.r1), PropAtom(edge.r2)),
                )
            )
        # Preference edges are soft; see build_objective("numUnsatPrefs").

    parts.extend(model.constraints)

    if with_assertions:
        for a in model.assertions:
            parts.append(assertion_literal(a))

    for attr in model.attributes:
        contrib_vars: list[str] = []
        for e in model.elements:
            pair = e.attr_value(attr)
            if pair is None:
                continue
            var = attr_var(attr, e.id)
            contrib_vars.append(var)
            parts.append(
                Implies(PropAtom(e.id), LinearAtom.make({var: 1}, "=", pair[0]))
            )
            parts.append(
                Implies(Not(PropAtom(e.id)), LinearAtom.make({var: 1}, "=", pair[1]))
            )
        total = {attr: Fraction(1)}
        for var in contrib_vars:
            total[var] = Fraction(-1)
        parts.append(LinearAtom.make(total, "=", 0))

    return _conj(parts) if parts else And(())


def build_objective(model: CgmModel, name: str, *, maximize: bool = False) -> Objective:
    """One of the builtin objective terms, or a declared attribute's
    total (accepted both bare and in ``attribute(NAME)`` form).

    Raises UnknownAttribute when the name matches neither.
    """
    if name == "penaltyMinusReward":
        weights: dict[str, Fraction] = {}
        for t in model.tasks:
            penalty = model.element_by_id[t].penalty
            if penalty is not None:
                weights[t] = penalty
        for r in model.requirements:
            reward = model.element_by_id[r].reward
            if reward is not None:
                weights[r] = -reward
        spec = ObjectiveSpec.make(bools=weights, maximize=maximize, label=name)
        return Objective(name, spec)

    if name == "numUnsatRequirements":
        nice = model.nice_to_have_requirements
        spec = ObjectiveSpec.make(
            bools={r: -1 for r in nice},
            offset=len(nice),
            maximize=maximize,
            label=name,
        )
        return Objective(name, spec)

    if name == "numSatTasks":
        spec = ObjectiveSpec.make(
            bools={t: 1 for t in model.tasks}, maximize=maximize, label=name
        )
        return Objective(name, spec)

    if name == "numUnsatPrefs":
        support: list[Formula] = []
        counters: dict[str, Fraction] = {}
        broken = 0
        for edge in model.edges:
            if not isinstance(edge, Preference):
                continue
            helper = f"__pref{broken}"
            broken += 1
            support.append(
                Iff(
                    PropAtom(helper),
                    And((Not(PropAtom(edge.preferred)), PropAtom(edge.other))),
                )
            )
            counters[helper] = Fraction(1)
        spec = ObjectiveSpec.make(bools=counters, maximize=maximize, label=name)
        return Objective(name, spec, tuple(support))

    attr = name
    if name.startswith("attribute(") and name.endswith(")"):
        attr = name[len("attribute(") : -1]
    if attr not in model.attributes:
        raise UnknownAttribute(attr)
    spec = ObjectiveSpec.make(nums={attr: 1}, maximize=maximize, label=name)
    return Objective(name, spec)


def objective_value(model: CgmModel, name: str, realization) -> Fraction:
    """Evaluate a builtin objective (or attribute total) directly on a
    realization, without touching the solver.  Mirrors build_objective
    term for term; tests hold the two routes equal."""
    bools = realization.bool_assign
    if name == "penaltyMinusReward":
        total = Fraction(0)
        for t in model.tasks:
            penalty = model.element_by_id[t].penalty
            if penalty is not None and bools[t]:
                total += penalty
        for r in model.requirements:
            reward = model.element_by_id[r].reward
            if reward is not None and bools[r]:
                total -= reward
        return total
    if name == "numUnsatRequirements":
        return Fraction(sum(1 for r in model.nice_to_have_requirements if not bools[r]))
    if name == "numSatTasks":
        return Fraction(sum(1 for t in model.tasks if bools[t]))
    if name == "numUnsatPrefs":
        return Fraction(
            sum(
                1
                for edge in model.edges
                if isinstance(edge, Preference)
                and not bools[edge.preferred]
                and bools[edge.other]
            )
        )
    attr = name
    if name.startswith("attribute(") and name.endswith(")"):
        attr = name[len("attribute(") : -1]
    if attr not in model.attributes:
        raise UnknownAttribute(attr)
    return realization.num_assign[attr]
