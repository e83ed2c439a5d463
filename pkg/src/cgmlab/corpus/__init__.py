"""Bundled meeting-scheduler models and their pinned artifacts.

See README.md next to this file for how the numbers were fixed.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from importlib import resources

from ..dsl import parse_dsl
from ..jsonio import JsonFormatError, content_hash, realization_from_json
from ..model import (
    AddElement,
    AddRefinement,
    Binding,
    CgmModel,
    MutationStep,
    Realization,
    Refinement,
    RemoveEdge,
    RemoveElement,
    RemoveRefinement,
    SetRefinementSources,
    goal,
)

__all__ = ["load_m1", "load_m2", "load_mu1", "m1_to_m2_delta", "read_text"]


def read_text(name: str) -> str:
    """Raw text of a bundled corpus file, e.g. ``meeting_m1.cgm``."""
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def _load(name: str) -> CgmModel:
    result = parse_dsl(read_text(name), file=name)
    if result.errors():
        raise AssertionError(f"bundled model {name} failed to parse: {result.errors()[0]}")
    assert result.model is not None
    return result.model


def load_m1() -> CgmModel:
    """The initial meeting scheduler."""
    return _load("meeting_m1.cgm")


def load_m2() -> CgmModel:
    """The meeting scheduler after the change round."""
    return _load("meeting_m2.cgm")


def load_mu1() -> Realization:
    """The pinned optimum of M1 under its declared objective list."""
    stored_hash, partial = realization_from_json(read_text("mu1.json"))
    m1 = load_m1()
    if stored_hash != content_hash(m1):
        raise JsonFormatError(
            "mu1.json was generated for a different version of meeting_m1.cgm; "
            "run demos/regenerate_corpus_artifacts.py"
        )
    return partial.complete(m1)


def m1_to_m2_delta() -> list[MutationStep]:
    """The M1-to-M2 change round as explicit mutation steps.

    Applying these to ``load_m1()`` yields a model equal to ``load_m2()``
    up to declaration order (compare the ``sorted()`` forms).
    """
    half = Fraction(1, 2)
    return [
        # Collecting by system now needs the calendar set up and filled.
        AddElement(
            goal("SetSystemCalendar", label="Set System Calendar", penalty=8).with_attr(
                "workTime", half
            )
        ),
        AddElement(
            goal(
                "ParticipantsFillSystemCalendar",
                label="Participants Fill System Calendar",
                penalty=7,
            ).with_attr("workTime", Fraction(1))
        ),
        SetRefinementSources(
            "R13",
            (
                "ParticipantsUseSystemCalendar",
                "CollectFromSystemCalendar",
                "SetSystemCalendar",
                "ParticipantsFillSystemCalendar",
            ),
        ),
        # Booking a room now requires registering it; the fallback of
        # cancelling another meeting is gone, and with it the binding
        # that tied the two local-room routes together.
        AddElement(goal("RegisterMeetingRoom", label="Register Meeting Room", penalty=10)),
        SetRefinementSources("R17", ("UseAvailableRoom", "RegisterMeetingRoom")),
        RemoveEdge(Binding.make("R16", "R17")),
        RemoveRefinement("R18"),
        RemoveElement("CancelLessImportantMeeting"),
        # Meeting management splits between the user and an agent.
        AddElement(goal("ByUser", label="By User")),
        AddElement(goal("ByAgent", label="By Agent")),
        AddElement(goal("SendDecision", label="Send Decision", penalty=9)),
        SetRefinementSources("R8", ("ByUser",)),
        SetRefinementSources("R9", ("ByAgent",)),
        AddRefinement(Refinement("R21", "ByUser", ("ConfirmOccurrence",))),
        AddRefinement(Refinement("R22", "ByUser", ("CancelMeeting",))),
        AddRefinement(Refinement("R23", "ByAgent", ("SendDecision",))),
    ]
