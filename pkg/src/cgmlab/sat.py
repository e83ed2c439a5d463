"""Clause-level search: CNF construction plus a conflict-driven solver.

The solver enumerates satisfying assignments of a CNF in lexicographic
order of a caller-supplied static variable order, assigning false
before true.  A theory object may veto partial assignments; its
conflict explanations become learned clauses.  Clauses can be added
mid-search (blocking clauses, theory conflicts), which is how model
enumeration and optimization restarts are driven.

Everything here is deterministic: same clauses, same order, same theory
answers, same traversal.
"""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Protocol

from .formula import And, Formula, Iff, Implies, LinearAtom, Not, Or, PropAtom

__all__ = ["Cnf", "Search", "Theory", "tseitin"]

Lit = int  # +var / -var, variables numbered from 1


class Cnf:
    """A growing clause set over numbered boolean variables."""

    def __init__(self) -> None:
        self.nvars = 0
        self.clauses: list[list[Lit]] = []
        self._index: dict[frozenset[Lit], int] = {}

    def new_var(self) -> int:
        self.nvars += 1
        return self.nvars

    def add(self, lits: Iterable[Lit]) -> tuple[int, bool] | None:
        """Add a clause; duplicate literals collapse, tautologies are
        dropped (returning None), repeats are not stored twice.  Returns
        the clause index and whether it is newly stored."""
        seen: dict[int, Lit] = {}
        for lit in lits:
            if not lit or abs(lit) > self.nvars:
                raise ValueError(f"literal {lit} out of range")
            other = seen.get(abs(lit))
            if other is not None and other != lit:
                return None  # l and not-l together: tautology
            seen[abs(lit)] = lit
        clause = [seen[v] for v in sorted(seen)]
        key = frozenset(clause)
        got = self._index.get(key)
        if got is not None:
            return got, False
        idx = len(self.clauses)
        self._index[key] = idx
        self.clauses.append(clause)
        return idx, True


def tseitin(formula: Formula, leaf: Callable[[PropAtom | LinearAtom], Lit], cnf: Cnf) -> Lit:
    """Encode a formula, returning a literal equivalent to it.

    ``leaf`` maps atoms to literals.  Internal nodes get auxiliary
    variables constrained to equal their operator applied to the
    children, so total models of the CNF correspond one-to-one with
    assignments over the leaf variables that the formula allows.
    """
    memo: dict[Formula, Lit] = {}
    true_lit: list[Lit] = []

    def constant(value: bool) -> Lit:
        if not true_lit:
            v = cnf.new_var()
            cnf.add([v])
            true_lit.append(v)
        return true_lit[0] if value else -true_lit[0]

    def gate_and(parts: list[Lit]) -> Lit:
        if not parts:
            return constant(True)
        if len(parts) == 1:
            return parts[0]
        g = cnf.new_var()
        for p in parts:
            cnf.add([-g, p])
        cnf.add([g] + [-p for p in parts])
        return g

    def gate_or(parts: list[Lit]) -> Lit:
        return -gate_and([-p for p in parts])

    def walk(f: Formula) -> Lit:
        got = memo.get(f)
        if got is not None:
            return got
        if isinstance(f, (PropAtom, LinearAtom)):
            lit = leaf(f)
        elif isinstance(f, Not):
            lit = -walk(f.child)
        elif isinstance(f, And):
            lit = gate_and([walk(c) for c in f.children])
        elif isinstance(f, Or):
            lit = gate_or([walk(c) for c in f.children])
        elif isinstance(f, Implies):
            lit = gate_or([-walk(f.left), walk(f.right)])
        elif isinstance(f, Iff):
            left, right = walk(f.left), walk(f.right)
            g = cnf.new_var()
            cnf.add([-g, -left, right])
            cnf.add([-g, left, -right])
            cnf.add([g, left, right])
            cnf.add([g, -left, -right])
            lit = g
        else:
            raise TypeError(f"not a formula node: {f!r}")
        memo[f] = lit
        return lit

    return walk(formula)


class Theory(Protocol):
    """Veto power over partial assignments.

    ``on_assert`` receives every newly assigned literal (in assignment
    order) and returns None, or a conflict: a subset of previously
    asserted literals whose conjunction is untenable.  ``on_push`` marks
    a decision point; ``on_pop`` undoes the most recent ``n`` of them,
    retracting every literal asserted after them."""

    def on_push(self) -> None: ...

    def on_pop(self, n: int) -> None: ...

    def on_assert(self, lits: list[Lit]) -> tuple[Lit, ...] | None: ...


class _NullTheory:
    def on_push(self) -> None:
        pass

    def on_pop(self, n: int) -> None:
        pass

    def on_assert(self, lits: list[Lit]) -> tuple[Lit, ...] | None:
        return None


class Search:
    """Conflict-driven traversal of the models of a CNF.

    ``order`` lists the variables to branch on, most significant first;
    variables not listed are still assigned (after the listed ones, in
    index order).  Decisions assign false before true.  Each conflict
    is resolved back to a clause with a single literal at its deepest
    level (first unique implication point); the search learns that
    clause and jumps directly to the level where it propagates.

    Every learned clause is implied by the clause set it was derived
    from, and a decision only ever deviates from a remaining model by
    assigning false where that model has true, which puts the search
    below the model and therefore inside a region it can only leave by
    conflict.  Hence the first yield is the least model in
    false-before-true order, and after each yield (which retires
    exactly one model by blocking its decision cube) the next yield is
    the least of the models that remain.

    With ``dynamic=True`` the static order (and with it the
    lexicographic guarantee) is traded away: decisions branch on the
    variable most active in recent conflicts, and the search restarts
    on a Luby schedule.  Models found are still models and exhaustion
    is still exhaustion, so this mode suits phases that only need an
    arbitrary witness or a refutation, which is where it is much
    faster.

    ``tick`` is called once per decision and once per conflict and may
    raise to abort the search.
    """

    def __init__(
        self,
        cnf: Cnf,
        order: list[int] | None = None,
        theory: Theory | None = None,
        tick: Callable[[], None] | None = None,
        dynamic: bool = False,
    ) -> None:
        self.cnf = cnf
        listed = list(order or [])
        listed_set = set(listed)
        rest = [v for v in range(1, cnf.nvars + 1) if v not in listed_set]
        self.order = listed + rest
        self.theory = theory if theory is not None else _NullTheory()
        self.tick = tick or (lambda: None)
        self.dynamic = dynamic
        self.activity: list[float] = [0.0] * (cnf.nvars + 1)
        self.activity_inc = 1.0
        self._restart_unit = 128
        self._luby_index = 1
        self._restart_cap = self._restart_unit
        self._conflicts_since_restart = 0

        n = cnf.nvars
        self.assign: list[int] = [0] * (n + 1)  # 0 / +1 / -1
        self.level: list[int] = [0] * (n + 1)
        self.reason: list[int | None] = [None] * (n + 1)  # implying clause
        self.trail: list[Lit] = []
        self.trail_lim: list[int] = []
        self.order_marks: list[int] = []  # per level: order index of its decision
        self.qhead = 0
        self.theory_head = 0
        self.watches: dict[Lit, list[int]] = {}
        self.decisions = 0
        self.conflicts = 0
        self._conflicts: list[int] = []  # indices of clauses seen falsified
        self._failed = False
        for idx, clause in enumerate(cnf.clauses):
            self._install(idx, clause)

    # ------------------------------------------------------------------
    # clause plumbing
    # ------------------------------------------------------------------

    def _watch(self, lit: Lit, idx: int) -> None:
        self.watches.setdefault(lit, []).append(idx)

    def _value(self, lit: Lit) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def _install(self, idx: int, clause: list[Lit]) -> None:
        """Set up watches for a clause under the current assignment."""
        if not clause:
            self._failed = True
            return
        if len(clause) == 1:
            lit = clause[0]
            val = self._value(lit)
            if val == 0:
                self._enqueue(lit, idx)
            elif val < 0:
                self._conflicts.append(idx)
            # watch it twice so propagation revisits it after backtracking
            clause.append(lit)
            self._watch(lit, idx)
            self._watch(lit, idx)
            return

        def rank(lit: Lit) -> tuple[int, int]:
            val = self._value(lit)
            if val >= 0:
                return (2, 0)  # true or unassigned: ideal watch
            return (1, self.level[abs(lit)])  # false: prefer deepest

        best = sorted(range(len(clause)), key=lambda i: rank(clause[i]), reverse=True)
        i0, i1 = best[0], best[1]
        clause[0], clause[i0] = clause[i0], clause[0]
        if i1 == 0:
            i1 = i0
        clause[1], clause[i1] = clause[i1], clause[1]
        self._watch(clause[0], idx)
        self._watch(clause[1], idx)
        v0, v1 = self._value(clause[0]), self._value(clause[1])
        if v0 < 0:
            self._conflicts.append(idx)
        elif v1 < 0 and v0 == 0:
            self._enqueue(clause[0], idx)

    def add_clause(self, lits: Iterable[Lit]) -> None:
        """Add a clause mid-search (blocking clause, theory conflict)."""
        added = self.cnf.add(lits)
        if added is None:
            return
        idx, is_new = added
        if is_new:
            self._install(idx, self.cnf.clauses[idx])
        else:
            clause = self.cnf.clauses[idx]
            if not clause:
                self._failed = True
            elif all(self._value(l) < 0 for l in clause):
                self._conflicts.append(idx)

    # ------------------------------------------------------------------
    # assignment stack
    # ------------------------------------------------------------------

    def _enqueue(self, lit: Lit, reason: int | None = None) -> None:
        var = abs(lit)
        self.assign[var] = 1 if lit > 0 else -1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def _propagate(self) -> int | None:
        """Unit propagation to fixpoint; the falsified clause's index on
        conflict, else None."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = -lit
            watchers = self.watches.get(falsified, [])
            kept: list[int] = []
            i = 0
            while i < len(watchers):
                idx = watchers[i]
                i += 1
                clause = self.cnf.clauses[idx]
                if clause[0] == falsified:
                    clause[0], clause[1] = clause[1], clause[0]
                if self._value(clause[0]) > 0:
                    kept.append(idx)
                    continue
                moved = False
                for k in range(2, len(clause)):
                    if self._value(clause[k]) >= 0:
                        clause[1], clause[k] = clause[k], clause[1]
                        self._watch(clause[1], idx)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(idx)
                if self._value(clause[0]) == 0:
                    self._enqueue(clause[0], idx)
                else:
                    kept.extend(watchers[i:])
                    self.watches[falsified] = kept
                    return idx
            self.watches[falsified] = kept
        return None

    def _theory_sync(self) -> bool:
        """Hand newly assigned literals to the theory; on veto, learn
        the explanation clause and report the conflict."""
        if self.theory_head == len(self.trail):
            return True
        batch = self.trail[self.theory_head:]
        self.theory_head = len(self.trail)
        conflict = self.theory.on_assert(batch)
        if conflict is None:
            return True
        self.add_clause([-l for l in conflict])
        return False

    def _backtrack_to(self, lvl: int) -> None:
        """Discard every level deeper than ``lvl``."""
        levels = len(self.trail_lim) - lvl
        if levels <= 0:
            return
        mark = self.trail_lim[lvl]
        for lit in reversed(self.trail[mark:]):
            var = abs(lit)
            self.assign[var] = 0
            self.reason[var] = None
        del self.trail[mark:]
        del self.trail_lim[lvl:]
        del self.order_marks[lvl:]
        self.qhead = min(self.qhead, len(self.trail))
        self.theory_head = min(self.theory_head, len(self.trail))
        self.theory.on_pop(levels)

    # ------------------------------------------------------------------
    # conflict analysis
    # ------------------------------------------------------------------

    def _analyze(self, idx: int, lvl: int) -> tuple[list[Lit], int, Lit]:
        """Resolve a clause falsified with deepest level ``lvl`` into an
        asserting clause: the negated first unique implication point
        plus the false literals it inherits from shallower levels.
        Returns (clause, level to jump back to, literal to assert)."""
        seen: set[int] = set()
        out: list[Lit] = []
        on_level = 0
        skip_var = 0
        pos = len(self.trail) - 1
        clause_lits = self.cnf.clauses[idx]
        while True:
            for lit in clause_lits:
                var = abs(lit)
                if var == skip_var or var in seen:
                    continue
                depth = self.level[var]
                if depth == 0:
                    continue  # false at the root: drops out of the clause
                seen.add(var)
                self._bump(var)
                if depth == lvl:
                    on_level += 1
                else:
                    out.append(lit)
            while abs(self.trail[pos]) not in seen:
                pos -= 1
            uip = self.trail[pos]
            pos -= 1
            on_level -= 1
            if on_level == 0:
                break
            skip_var = abs(uip)
            reason = self.reason[skip_var]
            assert reason is not None, "non-decision literal lacks a reason"
            clause_lits = self.cnf.clauses[reason]
        jump = 0
        for lit in out:
            depth = self.level[abs(lit)]
            if depth > jump:
                jump = depth
        return [-uip] + out, jump, -uip

    def _bump(self, var: int) -> None:
        self.activity[var] += self.activity_inc
        if self.activity[var] > 1e100:
            scale = 1e-100
            self.activity = [a * scale for a in self.activity]
            self.activity_inc *= scale

    def _handle_conflict(self, idx: int) -> bool:
        """Learn from a falsified clause and jump back; False when the
        clause set has become unsatisfiable."""
        lvl = 0
        for lit in self.cnf.clauses[idx]:
            if self._value(lit) >= 0:
                return True  # no longer falsified: an earlier jump unmade it
            depth = self.level[abs(lit)]
            if depth > lvl:
                lvl = depth
        self.conflicts += 1
        self._conflicts_since_restart += 1
        self.activity_inc /= 0.95
        self.tick()
        if lvl == 0:
            self._failed = True
            return False
        self._backtrack_to(lvl)
        learned, jump, assert_lit = self._analyze(idx, lvl)
        added = self.cnf.add(learned)
        assert added is not None, "asserting clause cannot be a tautology"
        learned_idx, is_new = added
        self._backtrack_to(jump)
        if is_new:
            self._install(learned_idx, self.cnf.clauses[learned_idx])
        elif self._value(assert_lit) == 0:
            self._enqueue(assert_lit, learned_idx)
        return True

    # ------------------------------------------------------------------
    # search
    # ------------------------------------------------------------------

    def _decide(self) -> bool:
        """Pick the next unassigned variable; False when none is left."""
        if self.dynamic:
            var = 0
            best = -1.0
            for v in self.order:
                if self.assign[v] == 0 and self.activity[v] > best:
                    var = v
                    best = self.activity[v]
            if not var:
                return False
            pos = 0  # marks are meaningless without the static scan
        else:
            pos = self.order_marks[-1] + 1 if self.order_marks else 0
            while pos < len(self.order) and self.assign[self.order[pos]] != 0:
                pos += 1
            if pos == len(self.order):
                return False
            var = self.order[pos]
        self.decisions += 1
        self.tick()
        self.theory.on_push()
        self.trail_lim.append(len(self.trail))
        self.order_marks.append(pos)
        self._enqueue(-var)  # false first
        return True

    @staticmethod
    def _luby(i: int) -> int:
        """The i-th reluctant-doubling value (1 1 2 1 1 2 4 ...)."""
        k = 1
        while (1 << k) - 1 < i:
            k += 1
        while (1 << k) - 1 != i:
            k -= 1
            i -= (1 << k) - 1
        return 1 << (k - 1)

    def _maybe_restart(self) -> None:
        if not self.dynamic or self._conflicts_since_restart < self._restart_cap:
            return
        self._backtrack_to(0)
        self._conflicts_since_restart = 0
        self._luby_index += 1
        self._restart_cap = self._restart_unit * self._luby(self._luby_index)

    def models(self, block: bool = True) -> Iterator[dict[int, bool]]:
        """Yield satisfying assignments in lexicographic order.

        The caller may ``add_clause`` between yields; the search resumes
        correctly either way.  When the generator is exhausted, no
        further model exists.

        With ``block=False`` the search does not rule out a yielded
        model itself; the caller must install a clause the model
        falsifies before resuming, or the same model comes back forever.
        Use it when the caller blocks a whole projection class per
        yield, where the internal clause would only duplicate work."""
        while True:
            if self._failed:
                return
            if self._conflicts:
                if not self._handle_conflict(self._conflicts.pop()):
                    return
                self._maybe_restart()
                continue
            conflict = self._propagate()
            if conflict is not None:
                if not self._handle_conflict(conflict):
                    return
                self._maybe_restart()
                continue
            if not self._theory_sync():
                continue
            if self._decide():
                continue
            yield {v: self.assign[v] > 0 for v in range(1, self.cnf.nvars + 1)}
            if not self.trail_lim:
                return  # no decisions: that was the only model
            if block:
                self.add_clause([-self.trail[mark] for mark in self.trail_lim])
