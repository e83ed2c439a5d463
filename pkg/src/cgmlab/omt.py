"""Satisfiability, lexicographic optimization, model enumeration, and
minimal conflict cores for boolean structure over linear rational
comparisons.

The search couples the clause-level solver with the exact simplex: each
comparison gets a boolean variable whose phases assert bounds, bound
conflicts come back as learned clauses, and equality comparisons are
split into a pair of strict comparisons linked by clauses so that a
false equality still pins the solution to one side.

Optimization minimizes each objective in turn.  For one objective the
loop alternates "find any model under the current best-so-far bound"
with "minimize over that model's comparison skeleton"; each round either
strictly improves the bound or rules out one skeleton, so it terminates,
and the final failed search is itself the proof that no better value
exists.  Settled objectives are pinned by equality bounds while later
ones are minimized.  The model returned at the end is the first one the
canonical false-before-true search order reaches, which makes it the
lexicographically least co-optimal assignment.

Strict comparisons are handled symbolically: values carry an
infinitesimal component, and a reported optimum with a nonzero
infinitesimal part means the exact infimum is approached but not
attained; the concrete witness sits within an arbitrarily small positive
offset of it.  ``Optimum.attained`` records this per objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .formula import (
    And,
    Formula,
    LinearAtom,
    PropAtom,
    as_rational,
    evaluate,
    numeric_names,
    prop_names,
)
from .sat import Cnf, Search, tseitin
from .simplex import QDelta, Simplex
from .simplex import Unbounded as SimplexRay

__all__ = [
    "Assignment",
    "Budget",
    "NotUnsat",
    "ObjectiveSpec",
    "Optimum",
    "ResourceLimit",
    "SolveResult",
    "Stats",
    "UnboundedObjective",
    "Unsatisfiable",
    "diagnose",
    "enumerate_models",
    "optimize",
    "solve",
]


class ResourceLimit(RuntimeError):
    """A time or step budget ran out before the call finished."""


class UnboundedObjective(RuntimeError):
    """An objective can be improved without limit on the feasible set."""

    def __init__(self, index: int) -> None:
        super().__init__(f"objective {index} is unbounded")
        self.index = index


class Unsatisfiable(RuntimeError):
    """Optimization was asked for on a formula with no models."""


class NotUnsat(RuntimeError):
    """Diagnosis was asked for, but the suspects do not conflict."""


class Budget:
    """Call ``tick`` from inner loops; it raises once limits are hit."""

    def __init__(self, seconds: float | None = None, steps: int | None = None) -> None:
        self.deadline = None if seconds is None else time.monotonic() + seconds
        self.steps = steps
        self.count = 0

    def tick(self) -> None:
        self.count += 1
        if self.steps is not None and self.count > self.steps:
            raise ResourceLimit("step budget exhausted")
        if (
            self.deadline is not None
            and self.count % 64 == 0
            and time.monotonic() > self.deadline
        ):
            raise ResourceLimit("time budget exhausted")


@dataclass
class Assignment:
    """A model: truth values for propositions, rationals for numerics."""

    bools: dict[str, bool]
    nums: dict[str, Fraction]


@dataclass(frozen=True)
class Stats:
    decisions: int
    conflicts: int
    theory_checks: int
    elapsed: float


@dataclass(frozen=True)
class SolveResult:
    status: str  # "sat" | "unsat"
    model: Assignment | None
    stats: Stats


@dataclass(frozen=True)
class ObjectiveSpec:
    """A linear objective: rational terms over numeric variables plus
    0/1 coercions of propositions, an additive offset, and a sense."""

    num_terms: tuple[tuple[str, Fraction], ...] = ()
    bool_terms: tuple[tuple[str, Fraction], ...] = ()
    offset: Fraction = Fraction(0)
    maximize: bool = False
    label: str = ""

    @staticmethod
    def make(
        nums: Mapping[str, int | str | Fraction] | None = None,
        bools: Mapping[str, int | str | Fraction] | None = None,
        offset: int | str | Fraction = 0,
        maximize: bool = False,
        label: str = "",
    ) -> "ObjectiveSpec":
        def canon(m: Mapping[str, int | str | Fraction] | None):
            items = [(n, as_rational(c)) for n, c in (m or {}).items()]
            return tuple(sorted((n, c) for n, c in items if c != 0))

        return ObjectiveSpec(canon(nums), canon(bools), as_rational(offset), maximize, label)

    def evaluate_on(self, model: Assignment) -> Fraction:
        total = self.offset
        for name, coeff in self.num_terms:
            total += coeff * model.nums[name]
        for name, coeff in self.bool_terms:
            if model.bools.get(name, False):
                total += coeff
        return total


@dataclass(frozen=True)
class Optimum:
    model: Assignment
    values: tuple[Fraction, ...]
    attained: tuple[bool, ...]
    stats: Stats


_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "="}


def _canonical(atom: LinearAtom) -> LinearAtom:
    """Scale so the leading coefficient is 1, flipping the comparison
    when the scale is negative; multiples of one comparison then share a
    boolean variable and a simplex variable."""
    lead = atom.terms[0][0]
    if lead == 1:
        return atom
    op = atom.op if lead > 0 else _FLIP[atom.op]
    scale = Fraction(1) / lead
    terms = tuple((c * scale, v) for c, v in atom.terms)
    return LinearAtom(terms, op, atom.const * scale)


def _phase_bounds(op: str, const: Fraction) -> tuple[list[tuple[bool, QDelta]], list[tuple[bool, QDelta]]]:
    """Bounds asserted when the comparison's variable is true / false,
    each as (is_upper, value)."""
    if op == "<=":
        return [(True, QDelta.of(const))], [(False, QDelta.just_above(const))]
    if op == "<":
        return [(True, QDelta.just_below(const))], [(False, QDelta.of(const))]
    if op == ">=":
        return [(False, QDelta.of(const))], [(True, QDelta.just_below(const))]
    if op == ">":
        return [(False, QDelta.just_above(const))], [(True, QDelta.of(const))]
    if op == "=":
        return [(True, QDelta.of(const)), (False, QDelta.of(const))], []
    raise ValueError(f"bad comparison operator {op!r}")


class _LraBridge:
    """Feeds assigned comparison literals to a simplex as bounds."""

    def __init__(
        self,
        spx: Simplex,
        bounds_of: Mapping[int, list[tuple[int, bool, QDelta]]],
        budget: Budget,
    ) -> None:
        self.spx = spx
        self.bounds_of = bounds_of
        self.budget = budget
        self.checks = 0

    def on_push(self) -> None:
        self.spx.push()

    def on_pop(self, n: int) -> None:
        for _ in range(n):
            self.spx.pop()

    def on_assert(self, lits: list[int]) -> tuple[int, ...] | None:
        self.budget.tick()
        self.checks += 1
        dirty = False
        for lit in lits:
            for var, is_upper, value in self.bounds_of.get(lit, ()):
                claim = self.spx.assert_upper if is_upper else self.spx.assert_lower
                conflict = claim(var, value, lit)
                if conflict is not None:
                    return conflict
                dirty = True
        if dirty:
            conflict = self.spx.check()
            if conflict is not None:
                return conflict
        return None


class _Problem:
    """Shared boolean encoding for one engine call.

    Conflict clauses the theory teaches the search are only valid under
    the background bounds in force when they were learned.  Within one
    objective's descent the background only tightens, so a descent keeps
    one growing clause set; any change of background (next objective,
    final canonical pass, certificate) starts over from a copy of the
    base encoding.  The simplex is rebuilt per restart either way."""

    def __init__(
        self,
        formula: Formula,
        objectives: Sequence[ObjectiveSpec],
        order: Sequence[str] | None,
        budget: Budget | None,
    ) -> None:
        self.budget = budget or Budget()
        self.objectives = list(objectives)
        self.cnf = Cnf()

        names = prop_names(formula)
        if order is None:
            self.props = sorted(names)
        else:
            listed = list(order)
            self.props = listed + sorted(names - set(listed))
        self.prop_var = {n: self.cnf.new_var() for n in self.props}

        self.base_nums = sorted(
            numeric_names(formula)
            | {n for ob in self.objectives for n, _ in ob.num_terms}
        )
        self.num_names = list(self.base_nums)

        self.atom_var: dict[LinearAtom, int] = {}
        self.atom_decisions: list[int] = []
        self._const_var: int | None = None

        root = tseitin(formula, self._leaf, self.cnf)
        self.cnf.add([root])

        # 0/1 companions for propositions coerced into objectives
        self.indicator: dict[str, str] = {}
        coerced = sorted({n for ob in self.objectives for n, _ in ob.bool_terms})
        for name in coerced:
            if name not in self.prop_var:
                self.prop_var[name] = self.cnf.new_var()
                self.props.append(name)
            ind = f"__ind_{name}"
            self.indicator[name] = ind
            self.num_names.append(ind)
            b = self.prop_var[name]
            one, zero = Fraction(1), Fraction(0)
            self.cnf.add([-b, self._atom_lit(LinearAtom.make({ind: 1}, ">=", one))])
            self.cnf.add([-b, self._atom_lit(LinearAtom.make({ind: 1}, "<=", one))])
            self.cnf.add([b, self._atom_lit(LinearAtom.make({ind: 1}, "<=", zero))])
            self.cnf.add([b, self._atom_lit(LinearAtom.make({ind: 1}, ">=", zero))])

        self.decision_order = [self.prop_var[p] for p in self.props] + self.atom_decisions
        self.base_clauses = len(self.cnf.clauses)

    # -- encoding ------------------------------------------------------

    def _const_lit(self, value: bool) -> int:
        if self._const_var is None:
            self._const_var = self.cnf.new_var()
            self.cnf.add([self._const_var])
        return self._const_var if value else -self._const_var

    def _leaf(self, f: PropAtom | LinearAtom) -> int:
        if isinstance(f, PropAtom):
            return self.prop_var[f.name]
        return self._atom_lit(f)

    def _atom_lit(self, atom: LinearAtom) -> int:
        if not atom.terms:
            return self._const_lit(atom.holds({}))
        canon = _canonical(atom)
        got = self.atom_var.get(canon)
        if got is not None:
            return got
        var = self.cnf.new_var()
        self.atom_var[canon] = var
        self.atom_decisions.append(var)
        if canon.op == "=":
            below = self._atom_lit(LinearAtom(canon.terms, "<", canon.const))
            above = self._atom_lit(LinearAtom(canon.terms, ">", canon.const))
            # a false equality commits to one strict side
            self.cnf.add([var, below, above])
            self.cnf.add([-var, -below])
            self.cnf.add([-var, -above])
            self.cnf.add([-below, -above])
        return var

    # -- per-restart theory state -------------------------------------

    def cnf_copy(self) -> Cnf:
        """The base encoding, free of anything learned elsewhere."""
        fresh = Cnf()
        fresh.nvars = self.cnf.nvars
        for clause in self.cnf.clauses[: self.base_clauses]:
            fresh.add(clause)
        return fresh

    def fresh(
        self,
        settled: Sequence[QDelta] = (),
        prune: tuple[int, QDelta] | None = None,
        cnf: Cnf | None = None,
        dynamic: bool = False,
    ):
        """A new search over ``cnf`` (default: the base encoding) with a
        fresh simplex.  ``settled`` pins earlier objectives by equality;
        ``prune`` demands the indexed objective beat the given value.
        ``dynamic`` picks the conflict-driven decision order (no
        lexicographic guarantee).  Returns None when the background
        alone is infeasible."""
        spx = Simplex()
        num_idx = {n: spx.fresh(n) for n in self.num_names}
        slack_idx: dict[tuple[tuple[Fraction, str], ...], int] = {}
        bounds_of: dict[int, list[tuple[int, bool, QDelta]]] = {}

        def target_of(terms: tuple[tuple[Fraction, str], ...]) -> int:
            if len(terms) == 1 and terms[0][0] == 1:
                return num_idx[terms[0][1]]
            got = slack_idx.get(terms)
            if got is None:
                combo = {num_idx[v]: c for c, v in terms}
                got = spx.define(f"__row{len(slack_idx)}", combo)
                slack_idx[terms] = got
            return got

        for atom, bvar in self.atom_var.items():
            target = target_of(atom.terms)
            when_true, when_false = _phase_bounds(atom.op, atom.const)
            if when_true:
                bounds_of[bvar] = [(target, up, val) for up, val in when_true]
            if when_false:
                bounds_of[-bvar] = [(target, up, val) for up, val in when_false]

        z_vars: list[int] = []
        for k, ob in enumerate(self.objectives):
            combo: dict[int, Fraction] = {}
            for name, coeff in ob.num_terms:
                idx = num_idx[name]
                combo[idx] = combo.get(idx, Fraction(0)) + coeff
            for name, coeff in ob.bool_terms:
                idx = num_idx[self.indicator[name]]
                combo[idx] = combo.get(idx, Fraction(0)) + coeff
            if ob.maximize:
                combo = {i: -c for i, c in combo.items()}
            z_vars.append(spx.define(f"__obj{k}", combo))

        feasible = True
        for k, value in enumerate(settled):
            if spx.assert_lower(z_vars[k], value, None) is not None:
                feasible = False
            if spx.assert_upper(z_vars[k], value, None) is not None:
                feasible = False
        if prune is not None:
            k, best = prune
            if best.delta_coeff == 0:
                cap = QDelta(best.real, Fraction(-1))  # strictly below
            else:
                cap = best  # ties rejected per skeleton instead
            if spx.assert_upper(z_vars[k], cap, None) is not None:
                feasible = False
        if not feasible or spx.check() is not None:
            return None

        bridge = _LraBridge(spx, bounds_of, self.budget)
        search = Search(
            cnf if cnf is not None else self.cnf,
            self.decision_order,
            theory=bridge,
            tick=self.budget.tick,
            dynamic=dynamic,
        )
        return search, bridge, z_vars

    # -- extraction ----------------------------------------------------

    def assignment(self, model: dict[int, bool], spx: Simplex) -> Assignment:
        bools = {p: model[self.prop_var[p]] for p in self.props}
        concrete = spx.concrete_model()
        nums = {n: concrete.get(n, Fraction(0)) for n in self.base_nums}
        return Assignment(bools, nums)

    def skeleton_block(self, model: dict[int, bool]) -> list[int]:
        vars_ = [self.prop_var[p] for p in self.props] + self.atom_decisions
        return [-v if model[v] else v for v in vars_]


def _first_model(search: Search):
    return next(search.models(), None)


def solve(
    formula: Formula,
    *,
    order: Sequence[str] | None = None,
    budget: Budget | None = None,
) -> SolveResult:
    """Satisfiability with a canonical witness: the first model in
    false-before-true order over the propositions, then comparisons."""
    started = time.perf_counter()
    prob = _Problem(formula, (), order, budget)
    got = prob.fresh()
    if got is None:  # cannot happen without backgrounds; kept for shape
        return SolveResult("unsat", None, Stats(0, 0, 0, time.perf_counter() - started))
    search, bridge, _ = got
    model = _first_model(search)
    stats = Stats(search.decisions, search.conflicts, bridge.checks, time.perf_counter() - started)
    if model is None:
        return SolveResult("unsat", None, stats)
    out = prob.assignment(model, bridge.spx)
    if not evaluate(formula, out.bools, out.nums):
        raise AssertionError("search produced a non-model")
    return SolveResult("sat", out, stats)


def enumerate_models(
    formula: Formula,
    projection: Sequence[str] | None = None,
    limit: int | None = None,
    *,
    order: Sequence[str] | None = None,
    budget: Budget | None = None,
) -> Iterator[Assignment]:
    """Stream models distinct on ``projection`` (default: all
    propositions), in false-before-true order, via blocking clauses."""
    prob = _Problem(formula, (), order, budget)
    got = prob.fresh()
    if got is None:
        return
    search, bridge, _ = got
    if projection is None:
        proj_vars = [prob.prop_var[p] for p in prob.props]
    else:
        proj_vars = [prob.prop_var[p] for p in projection if p in prob.prop_var]
    produced = 0
    # The projection clause added below is falsified by the model it
    # follows, so the search's own one-model blocking clause would be
    # subsumed; block=False leaves all the blocking to us.
    for model in search.models(block=False):
        if limit is not None and produced >= limit:
            return
        yield prob.assignment(model, bridge.spx)
        produced += 1
        if not proj_vars:
            return  # projection is empty: one representative
        search.add_clause([-v if model[v] else v for v in proj_vars])


def optimize(
    formula: Formula,
    objectives: Sequence[ObjectiveSpec],
    *,
    order: Sequence[str] | None = None,
    budget: Budget | None = None,
    certify: bool = False,
) -> Optimum:
    """Lexicographic minimization (or maximization, per objective).

    Raises Unsatisfiable when the formula has no models,
    UnboundedObjective when some objective admits no best value, and
    ResourceLimit when the budget runs out.  With certify=True, after the
    descent finishes a separate search re-proves that beating the first
    objective's value is impossible; it costs one extra unsat proof and
    exists for test rigs that want the cross-check."""
    started = time.perf_counter()
    prob = _Problem(formula, objectives, order, budget)
    decisions = conflicts = checks = 0

    def run(
        settled: Sequence[QDelta],
        prune: tuple[int, QDelta] | None,
        cnf: Cnf,
        dynamic: bool = False,
    ):
        nonlocal decisions, conflicts, checks
        got = prob.fresh(settled, prune, cnf, dynamic)
        if got is None:
            return None
        search, bridge, z_vars = got
        try:
            model = _first_model(search)
        finally:
            decisions += search.decisions
            conflicts += search.conflicts
            checks += bridge.checks
        if model is None:
            return None
        return model, bridge, z_vars

    settled: list[QDelta] = []
    for k in range(len(prob.objectives)):
        descent_cnf = prob.cnf_copy()
        incumbent: QDelta | None = None
        while True:
            prune = None if incumbent is None else (k, incumbent)
            # Descent models are throwaway witnesses (the canonical pass
            # below recomputes the returned one), so the faster
            # conflict-driven order is safe here.
            found = run(settled, prune, descent_cnf, dynamic=True)
            if found is None:
                break
            model, bridge, z_vars = found
            outcome = bridge.spx.minimize({z_vars[k]: Fraction(1)})
            if isinstance(outcome, SimplexRay):
                raise UnboundedObjective(k)
            if incumbent is None or outcome < incumbent:
                incumbent = outcome
            else:
                # this skeleton only ties the incumbent: rule it out
                descent_cnf.add(prob.skeleton_block(model))
        if incumbent is None:
            if k == 0:
                raise Unsatisfiable("formula has no models")
            raise AssertionError("settled objective values became infeasible")
        settled.append(incumbent)

    final = run(settled, None, prob.cnf_copy())
    if final is None:
        if prob.objectives:
            raise AssertionError("optimal values admit no model")
        raise Unsatisfiable("formula has no models")
    model, bridge, _ = final

    if certify and settled and settled[0].delta_coeff == 0:
        # Independent re-check: nothing beats the first settled value.
        if run((), (0, settled[0]), prob.cnf_copy(), dynamic=True) is not None:
            raise AssertionError("optimality certificate failed for objective 0")

    assignment = prob.assignment(model, bridge.spx)
    if not evaluate(formula, assignment.bools, assignment.nums):
        raise AssertionError("search produced a non-model")
    values = tuple(ob.evaluate_on(assignment) for ob in prob.objectives)
    attained = tuple(v.delta_coeff == 0 for v in settled)
    stats = Stats(decisions, conflicts, checks, time.perf_counter() - started)
    return Optimum(assignment, values, attained, stats)


def diagnose(
    formula: Formula,
    suspects: Sequence[tuple[str, Formula]],
    *,
    order: Sequence[str] | None = None,
    budget: Budget | None = None,
) -> list[str]:
    """Deletion-minimal subset of the suspects that still conflicts
    with the formula.  Raises NotUnsat when all suspects together are
    consistent with it."""

    def is_unsat(chosen: Sequence[tuple[str, Formula]]) -> bool:
        conj = And((formula, *(f for _, f in chosen)))
        return solve(conj, order=order, budget=budget).status == "unsat"

    if not is_unsat(suspects):
        raise NotUnsat("formula plus all suspects is satisfiable")
    core = list(suspects)
    for item in list(core):
        trial = [x for x in core if x is not item]
        if is_unsat(trial):
            core = trial
    return [label for label, _ in core]
