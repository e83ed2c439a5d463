"""Goal-model workbench: and/or models with constraints, optimizing
solver, realization enumeration, diagnosis, evolution, and exports."""

from .formula import (
    And,
    Formula,
    Iff,
    Implies,
    LinearAtom,
    Not,
    Or,
    PropAtom,
    as_rational,
)
from .model import (
    Assertion,
    Binding,
    CgmModel,
    Conflict,
    Contribution,
    Element,
    ElementKind,
    Mark,
    PartialAssignment,
    Preference,
    Realization,
    Refinement,
    apply_delta,
    assumption,
    check_realization,
    goal,
    invert_delta,
    restrict,
    validate_structure,
)

__version__ = "0.1.0"
