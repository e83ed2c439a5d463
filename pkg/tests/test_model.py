"""Model layer: classification, validation, checking, mutation algebra."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from cgmlab.corpus import load_m1, load_mu1, m1_to_m2_delta
from cgmlab.dsl import parse_dsl
from cgmlab.model import (
    AddElement,
    CgmModel,
    ClearAssertion,
    Conflict,
    Mark,
    MissingAssignment,
    Realization,
    RemoveElement,
    RemoveRefinement,
    SetAssertion,
    StructureBroken,
    UnknownId,
    apply_delta,
    attr_var,
    check_realization,
    goal,
    invert_delta,
    restrict,
    validate_structure,
)
from generators import random_model


def build(text: str) -> CgmModel:
    result = parse_dsl(text)
    assert result.model is not None, [str(d) for d in result.diagnostics]
    return result.model


DIAMOND = """\
goal Top { root; assert satisfied; }
goal Mid {}
goal Side { root; reward 5; }
task T1 { penalty 1; }
task T2 { penalty 2; }
refinement RA: Top <- Mid;
refinement RB: Top <- T2;
refinement RC: Mid <- T1;
refinement RD: Side <- T1;
"""


def test_element_classification():
    m = build(DIAMOND)
    assert m.requirements == ("Top", "Side")
    assert m.mandatory_requirements == ("Top",)
    assert m.nice_to_have_requirements == ("Side",)
    assert m.tasks == ("T1", "T2")
    assert m.is_intermediate("Mid")
    assert not m.is_task("Mid")
    assert not m.is_requirement("Mid")


def test_prop_variables_cover_elements_and_refinements():
    m = build(DIAMOND)
    assert set(m.prop_variables) == {"Top", "Mid", "Side", "T1", "T2",
                                     "RA", "RB", "RC", "RD"}


def test_numeric_variables_use_the_guarded_naming_scheme():
    m = load_m1()
    assert "cost" in m.numeric_variables
    assert attr_var("cost", "UsePartnerInstitutions") in m.numeric_variables


def test_sorted_is_idempotent_and_order_insensitive():
    rng = random.Random(4)
    for _ in range(50):
        m = random_model(rng)
        s = m.sorted()
        assert s.sorted() == s
    a = build("goal A { root; }\ntask T {}\nrefinement R: A <- T;")
    b = build("task T {}\ngoal A { root; }\nrefinement R: A <- T;")
    assert a.sorted() == b.sorted()


def test_validate_structure_is_quiet_on_the_corpus():
    assert validate_structure(load_m1()) == []


def test_validate_structure_flags_dangling_edges():
    m = build(DIAMOND)
    broken = CgmModel(
        elements=m.elements,
        refinements=m.refinements,
        edges=m.edges + (Conflict.make("Top", "Ghost"),),
        attributes=m.attributes,
        constraints=m.constraints,
        assertions=m.assertions,
        objectives=m.objectives,
    )
    diags = validate_structure(broken)
    assert any(d.severity == "error" and "Ghost" in d.message for d in diags)


def test_check_realization_accepts_the_packaged_optimum():
    assert check_realization(load_m1(), load_mu1()).valid


def test_check_realization_requires_total_assignments():
    m = build(DIAMOND)
    with pytest.raises(MissingAssignment) as exc:
        check_realization(m, Realization(bool_assign={"Top": True}, num_assign={}))
    assert "Mid" in exc.value.missing


def test_check_realization_names_the_broken_clause():
    m = build(DIAMOND)
    bools = {v: False for v in m.prop_variables}
    bools.update({"Top": True, "RA": False, "RB": False})
    result = check_realization(m, Realization(bool_assign=bools, num_assign={}))
    assert not result.valid
    kinds = {v.clause for v in result.violations}
    assert "element-refinements" in kinds
    subjects = {v.subject for v in result.violations}
    assert "Top" in subjects


def test_check_realization_flags_refinement_source_gaps():
    m = build(DIAMOND)
    bools = {v: False for v in m.prop_variables}
    bools.update({"Top": True, "RB": True, "T2": False})
    result = check_realization(m, Realization(bool_assign=bools, num_assign={}))
    assert any(
        v.clause == "refinement-sources" and v.subject == "RB"
        for v in result.violations
    )


def test_check_realization_flags_assertion_breaks():
    m = build(DIAMOND)
    bools = {v: False for v in m.prop_variables}
    result = check_realization(m, Realization(bool_assign=bools, num_assign={}))
    assert any(v.subject == "Top" for v in result.violations)


def test_apply_delta_reaches_m2_and_inverts():
    m1 = load_m1()
    steps = m1_to_m2_delta()
    m2 = apply_delta(m1, steps)
    assert m2.sorted() != m1.sorted()
    back = apply_delta(m2, invert_delta(m1, steps))
    assert back.sorted() == m1.sorted()


def test_apply_delta_rejects_unknown_ids():
    m = build(DIAMOND)
    with pytest.raises(UnknownId):
        apply_delta(m, [RemoveElement("Ghost")])
    with pytest.raises(UnknownId):
        apply_delta(m, [SetAssertion("Ghost", Mark.SATISFIED)])


def test_apply_delta_refuses_to_orphan_refinements():
    m = build(DIAMOND)
    with pytest.raises(StructureBroken):
        apply_delta(m, [RemoveElement("T1")])


def test_apply_delta_add_then_remove_is_identity():
    m = build(DIAMOND)
    extra = goal("Extra", reward=Fraction(1))
    there = apply_delta(m, [AddElement(extra)])
    assert "Extra" in there.element_by_id
    back = apply_delta(there, [RemoveElement("Extra")])
    assert back.sorted() == m.sorted()


def test_assertion_set_and_clear_round_trip():
    m = build(DIAMOND)
    marked = apply_delta(m, [SetAssertion("Side", Mark.SATISFIED)])
    assert marked.assertion_for("Side") == Mark.SATISFIED
    cleared = apply_delta(marked, [ClearAssertion("Side")])
    assert cleared.sorted() == m.sorted()


def test_restrict_keeps_shared_variables_and_drops_the_rest():
    m = build(DIAMOND)
    bools = {v: False for v in m.prop_variables}
    bools.update({"Top": True, "RB": True, "T2": True})
    old = Realization(bool_assign=bools, num_assign={})
    assert check_realization(m, old).valid

    changed = apply_delta(
        m,
        [
            RemoveRefinement("RC"),
            RemoveRefinement("RD"),
            RemoveElement("T1"),
            AddElement(goal("T3", penalty=Fraction(1))),
        ],
    )
    partial = restrict(old, m, changed)
    assert "T1" not in partial.bool_assign
    assert "T3" not in partial.bool_assign
    assert partial.bool_assign["T2"] is True

    completed = partial.complete(changed)
    assert completed.bool_assign["T3"] is False
