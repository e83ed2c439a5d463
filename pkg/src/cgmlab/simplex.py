"""Exact bounded-variable simplex over the rationals.

The theory backend for satisfiability and optimization: maintains a
tableau of linear equalities plus per-variable bounds, decides
feasibility incrementally, explains conflicts as small sets of caller
tags, and minimizes linear expressions over the feasible region.

Strict inequalities are handled symbolically: every value is a
``QDelta`` pair ``a + b*delta`` for an infinitesimal positive delta, so
``x < c`` becomes the weak bound ``x <= c - delta``.  ``concrete_model``
substitutes a small enough rational for delta at the end.

Pivot selection uses Bland's rule (smallest index first), which makes
every loop here terminating and every run deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

__all__ = [
    "QDelta",
    "Bound",
    "PivotBudgetExceeded",
    "Simplex",
    "Unbounded",
]

_ZERO = Fraction(0)


@dataclass(frozen=True, order=True)
class QDelta:
    """A rational plus a multiple of an infinitesimal positive delta.

    Ordering is lexicographic, which is exactly the order of
    ``real + delta_coeff * delta`` for sufficiently small delta > 0.
    """

    real: Fraction
    delta_coeff: Fraction = _ZERO

    @staticmethod
    def of(value: int | Fraction) -> "QDelta":
        return QDelta(Fraction(value))

    @staticmethod
    def just_below(value: int | Fraction) -> "QDelta":
        return QDelta(Fraction(value), Fraction(-1))

    @staticmethod
    def just_above(value: int | Fraction) -> "QDelta":
        return QDelta(Fraction(value), Fraction(1))

    def __add__(self, other: "QDelta") -> "QDelta":
        return QDelta(self.real + other.real, self.delta_coeff + other.delta_coeff)

    def __sub__(self, other: "QDelta") -> "QDelta":
        return QDelta(self.real - other.real, self.delta_coeff - other.delta_coeff)

    def __neg__(self) -> "QDelta":
        return QDelta(-self.real, -self.delta_coeff)

    def scaled(self, factor: Fraction) -> "QDelta":
        return QDelta(self.real * factor, self.delta_coeff * factor)

    def __str__(self) -> str:
        if self.delta_coeff == 0:
            return str(self.real)
        return f"{self.real}{self.delta_coeff:+}d"


class Bound(NamedTuple):
    value: QDelta
    tag: int | None  # None marks a background bound, omitted from explanations


class PivotBudgetExceeded(Exception):
    """The pivot budget ran out mid-operation; state is unusable."""


class Unbounded(NamedTuple):
    """Witness that an expression decreases without limit: moving
    ``var`` in ``direction`` (+1 or -1) never leaves the feasible set."""

    var: int
    direction: int


Explanation = tuple[int, ...]


class Simplex:
    """Incremental feasibility and minimization.

    Usage: create variables with ``fresh`` / ``define``, assert bounds
    (each with a caller tag), call ``check`` after a batch of
    assertions.  ``push``/``pop`` checkpoint the bound state; the
    tableau and the current assignment are left as they are, which is
    sound because pivoting never changes the solution set and popping
    only loosens bounds.
    """

    def __init__(self, pivot_budget: int | None = None) -> None:
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        self._rows: dict[int, dict[int, Fraction]] = {}
        self._lower: list[Bound | None] = []
        self._upper: list[Bound | None] = []
        self._beta: list[QDelta] = []
        self._trail: list[tuple[str, int, Bound | None]] = []
        self._frames: list[int] = []
        self.pivots = 0
        self.pivot_budget = pivot_budget

    # ------------------------------------------------------------------
    # variables
    # ------------------------------------------------------------------

    def fresh(self, name: str) -> int:
        if name in self._index:
            raise ValueError(f"variable {name!r} already exists")
        idx = len(self._names)
        self._names.append(name)
        self._index[name] = idx
        self._lower.append(None)
        self._upper.append(None)
        self._beta.append(QDelta.of(0))
        return idx

    def index_of(self, name: str) -> int:
        return self._index[name]

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def define(self, name: str, combo: Mapping[int, Fraction]) -> int:
        """A new variable equal to a linear combination of existing ones."""
        row: dict[int, Fraction] = {}
        for var, coeff in sorted(combo.items()):
            if coeff == 0:
                continue
            if var in self._rows:
                for k, c in self._rows[var].items():
                    row[k] = row.get(k, _ZERO) + coeff * c
            else:
                row[var] = row.get(var, _ZERO) + coeff
        row = {k: c for k, c in row.items() if c != 0}
        idx = self.fresh(name)
        self._rows[idx] = row
        self._beta[idx] = self._row_value(row)
        return idx

    def _row_value(self, row: Mapping[int, Fraction]) -> QDelta:
        total = QDelta.of(0)
        for var, coeff in row.items():
            total = total + self._beta[var].scaled(coeff)
        return total

    # ------------------------------------------------------------------
    # bounds and checkpoints
    # ------------------------------------------------------------------

    def push(self) -> None:
        self._frames.append(len(self._trail))

    def pop(self) -> None:
        mark = self._frames.pop()
        while len(self._trail) > mark:
            kind, var, old = self._trail.pop()
            if kind == "lb":
                self._lower[var] = old
            else:
                self._upper[var] = old

    def assert_lower(self, var: int, value: QDelta, tag: int | None) -> Explanation | None:
        upper = self._upper[var]
        if upper is not None and upper.value < value:
            return self._explain((upper.tag, tag))
        lower = self._lower[var]
        if lower is not None and value <= lower.value:
            return None
        self._trail.append(("lb", var, lower))
        self._lower[var] = Bound(value, tag)
        if var not in self._rows and self._beta[var] < value:
            self._shift_nonbasic(var, value)
        return None

    def assert_upper(self, var: int, value: QDelta, tag: int | None) -> Explanation | None:
        lower = self._lower[var]
        if lower is not None and value < lower.value:
            return self._explain((lower.tag, tag))
        upper = self._upper[var]
        if upper is not None and upper.value <= value:
            return None
        self._trail.append(("ub", var, upper))
        self._upper[var] = Bound(value, tag)
        if var not in self._rows and self._beta[var] > value:
            self._shift_nonbasic(var, value)
        return None

    @staticmethod
    def _explain(tags: Iterable[int | None]) -> Explanation:
        return tuple(sorted({t for t in tags if t is not None}))

    def _shift_nonbasic(self, var: int, value: QDelta) -> None:
        diff = value - self._beta[var]
        for basic, row in self._rows.items():
            coeff = row.get(var)
            if coeff:
                self._beta[basic] = self._beta[basic] + diff.scaled(coeff)
        self._beta[var] = value

    # ------------------------------------------------------------------
    # feasibility
    # ------------------------------------------------------------------

    def check(self) -> Explanation | None:
        """Repair the assignment to satisfy all bounds, or explain why
        that is impossible.  Returns None when feasible."""
        while True:
            broken = None
            for var in sorted(self._rows):
                lo, up = self._lower[var], self._upper[var]
                if lo is not None and self._beta[var] < lo.value:
                    broken, need_raise = var, True
                    break
                if up is not None and self._beta[var] > up.value:
                    broken, need_raise = var, False
                    break
            if broken is None:
                return None
            row = self._rows[broken]
            pivot_var = None
            for var in sorted(row):
                coeff = row[var]
                grows = (coeff > 0) == need_raise
                if grows:
                    limit = self._upper[var]
                    if limit is None or self._beta[var] < limit.value:
                        pivot_var = var
                        break
                else:
                    limit = self._lower[var]
                    if limit is None or self._beta[var] > limit.value:
                        pivot_var = var
                        break
            if pivot_var is None:
                tags: list[int | None] = []
                if need_raise:
                    bound = self._lower[broken]
                    assert bound is not None
                    tags.append(bound.tag)
                    for var in row:
                        side = self._upper[var] if row[var] > 0 else self._lower[var]
                        assert side is not None
                        tags.append(side.tag)
                else:
                    bound = self._upper[broken]
                    assert bound is not None
                    tags.append(bound.tag)
                    for var in row:
                        side = self._lower[var] if row[var] > 0 else self._upper[var]
                        assert side is not None
                        tags.append(side.tag)
                return self._explain(tags)
            target = (self._lower[broken] if need_raise else self._upper[broken])
            assert target is not None
            self._pivot_to(broken, pivot_var, target.value)

    def _pivot_to(self, basic: int, entering: int, value: QDelta) -> None:
        """Set ``basic`` to ``value`` by moving ``entering``, then swap
        their roles."""
        row = self._rows[basic]
        coeff = row[entering]
        theta = (value - self._beta[basic]).scaled(Fraction(1) / coeff)
        self._beta[basic] = value
        self._beta[entering] = self._beta[entering] + theta
        for other, other_row in self._rows.items():
            if other != basic:
                c = other_row.get(entering)
                if c:
                    self._beta[other] = self._beta[other] + theta.scaled(c)
        self._pivot(basic, entering)

    def _pivot(self, basic: int, entering: int) -> None:
        self.pivots += 1
        if self.pivot_budget is not None and self.pivots > self.pivot_budget:
            raise PivotBudgetExceeded
        old_row = self._rows.pop(basic)
        coeff = old_row[entering]
        inv = Fraction(1) / coeff
        new_row = {basic: inv}
        for var, c in old_row.items():
            if var != entering:
                new_row[var] = -c * inv
        self._rows[entering] = {k: v for k, v in new_row.items() if v != 0}
        for other in list(self._rows):
            if other == entering:
                continue
            other_row = self._rows[other]
            c = other_row.pop(entering, None)
            if c:
                for var, cc in self._rows[entering].items():
                    merged = other_row.get(var, _ZERO) + c * cc
                    if merged == 0:
                        other_row.pop(var, None)
                    else:
                        other_row[var] = merged

    # ------------------------------------------------------------------
    # minimization
    # ------------------------------------------------------------------

    def minimize(self, expr: Mapping[int, Fraction]) -> QDelta | Unbounded:
        """Minimize a linear expression from the current feasible state.

        Requires a preceding successful ``check``.  On success the
        assignment is left at an optimum and the optimal value is
        returned; if the expression is unbounded below, a ray witness is
        returned and the assignment stays feasible.
        """
        while True:
            reduced = self._reduced_costs(expr)
            move = None
            for var in sorted(reduced):
                coeff = reduced[var]
                if coeff == 0 or var in self._rows:
                    continue
                if coeff < 0:
                    limit = self._upper[var]
                    if limit is None or self._beta[var] < limit.value:
                        move = (var, 1)
                        break
                else:
                    limit = self._lower[var]
                    if limit is None or self._beta[var] > limit.value:
                        move = (var, -1)
                        break
            if move is None:
                return self.value_of(expr)
            var, direction = move
            step = self._ratio_test(var, direction)
            if step is None:
                return Unbounded(var, direction)
            amount, limiter = step
            if limiter is None:
                self._shift_nonbasic(var, self._beta[var] + amount.scaled(Fraction(direction)))
            else:
                bound = self._limiting_bound(limiter, var, direction)
                self._pivot_to(limiter, var, bound)

    def _reduced_costs(self, expr: Mapping[int, Fraction]) -> dict[int, Fraction]:
        """The expression rewritten over nonbasic variables only."""
        out: dict[int, Fraction] = {}
        for var, coeff in sorted(expr.items()):
            if coeff == 0:
                continue
            if var in self._rows:
                for k, c in self._rows[var].items():
                    out[k] = out.get(k, _ZERO) + coeff * c
            else:
                out[var] = out.get(var, _ZERO) + coeff
        return {k: c for k, c in out.items() if c != 0}

    def _ratio_test(
        self, entering: int, direction: int
    ) -> tuple[QDelta, int | None] | None:
        """Largest step the entering variable can move; returns
        (amount, limiting basic or None for its own bound), or None when
        nothing limits the move."""
        best: QDelta | None = None
        limiter: int | None = None
        own = self._upper[entering] if direction > 0 else self._lower[entering]
        if own is not None:
            best = (
                own.value - self._beta[entering]
                if direction > 0
                else self._beta[entering] - own.value
            )
            limiter = None
        found_own = best is not None
        for basic in sorted(self._rows):
            coeff = self._rows[basic].get(entering)
            if not coeff:
                continue
            effect = coeff * direction
            if effect > 0:
                side = self._upper[basic]
                if side is None:
                    continue
                room = side.value - self._beta[basic]
            else:
                side = self._lower[basic]
                if side is None:
                    continue
                room = self._beta[basic] - side.value
            amount = room.scaled(Fraction(1) / abs(effect))
            if best is None or amount < best:
                best = amount
                limiter = basic
        if best is None and not found_own:
            return None
        assert best is not None
        return best, limiter

    def _limiting_bound(self, basic: int, entering: int, direction: int) -> QDelta:
        effect = self._rows[basic][entering] * direction
        side = self._upper[basic] if effect > 0 else self._lower[basic]
        assert side is not None
        return side.value

    # ------------------------------------------------------------------
    # models
    # ------------------------------------------------------------------

    def value_of(self, expr: Mapping[int, Fraction]) -> QDelta:
        total = QDelta.of(0)
        for var, coeff in expr.items():
            total = total + self._beta[var].scaled(coeff)
        return total

    def concrete_model(self) -> dict[str, Fraction]:
        """Substitute a concrete rational for delta, small enough that
        every asserted bound still holds."""
        delta = Fraction(1)
        for var in range(len(self._names)):
            beta = self._beta[var]
            lo = self._lower[var]
            if lo is not None:
                gap_real = beta.real - lo.value.real
                gap_delta = lo.value.delta_coeff - beta.delta_coeff
                if gap_real > 0 and gap_delta > 0:
                    delta = min(delta, gap_real / gap_delta)
            up = self._upper[var]
            if up is not None:
                gap_real = up.value.real - beta.real
                gap_delta = beta.delta_coeff - up.value.delta_coeff
                if gap_real > 0 and gap_delta > 0:
                    delta = min(delta, gap_real / gap_delta)
        return {
            self._names[var]: self._beta[var].real + self._beta[var].delta_coeff * delta
            for var in range(len(self._names))
        }
