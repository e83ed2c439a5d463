"""JSON interchange for models and realizations, plus content hashing.

Rationals travel as "p/q" strings (plain integers accepted on input).
Constraints travel in the same formula syntax the DSL uses, so both
formats share one parser.  Model files carry a schema version;
realization files carry the content hash of the model they satisfy so
stale realizations are detectable.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from typing import Any

from .dsl import ParseDiagnostic, ParseResult, SourceSpan, parse_formula_text
from .formula import format_formula
from .model import (
    Assertion,
    Binding,
    CgmModel,
    Conflict,
    Contribution,
    Element,
    ElementKind,
    Mark,
    ObjectiveRef,
    PartialAssignment,
    Preference,
    Realization,
    Refinement,
    validate_structure,
)

SCHEMA_VERSION = 1


class JsonFormatError(ValueError):
    pass


def rational_to_json(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def rational_from_json(value: Any, where: str) -> Fraction:
    if isinstance(value, bool):
        raise JsonFormatError(f"{where}: booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        if "/" in value:
            num_s, _, den_s = value.partition("/")
            try:
                num, den = int(num_s), int(den_s)
            except ValueError:
                raise JsonFormatError(f"{where}: malformed rational {value!r}") from None
            if den == 0:
                raise JsonFormatError(f"{where}: zero denominator in {value!r}")
            return Fraction(num, den)
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError):
            raise JsonFormatError(f"{where}: malformed rational {value!r}") from None
    raise JsonFormatError(f"{where}: expected a rational, got {type(value).__name__}")


# ----------------------------------------------------------------------
# model -> JSON
# ----------------------------------------------------------------------


def model_to_dict(model: CgmModel) -> dict[str, Any]:
    elements = []
    for e in model.elements:
        entry: dict[str, Any] = {"id": e.id, "kind": e.kind.value}
        if e.label:
            entry["label"] = e.label
        if e.reward is not None:
            entry["reward"] = rational_to_json(e.reward)
        if e.penalty is not None:
            entry["penalty"] = rational_to_json(e.penalty)
        if e.attr_values:
            entry["attrValues"] = {
                attr: {
                    "satisfied": rational_to_json(sat),
                    "denied": rational_to_json(den),
                }
                for attr, sat, den in e.attr_values
            }
        elements.append(entry)
    edges = []
    for edge in model.edges:
        if isinstance(edge, Contribution):
            edges.append({"type": "contribution", "source": edge.source, "target": edge.target})
        elif isinstance(edge, Conflict):
            edges.append({"type": "conflict", "a": edge.a, "b": edge.b})
        elif isinstance(edge, Binding):
            edges.append({"type": "binding", "r1": edge.r1, "r2": edge.r2})
        elif isinstance(edge, Preference):
            edges.append({"type": "preference", "preferred": edge.preferred, "other": edge.other})
    doc: dict[str, Any] = {
        "version": SCHEMA_VERSION,
        "elements": elements,
        "refinements": [
            {"id": r.id, "target": r.target, "sources": list(r.sources)}
            for r in model.refinements
        ],
        "edges": edges,
        "attributes": list(model.attributes),
        "constraints": [format_formula(c) for c in model.constraints],
        "assertions": [{"subject": a.subject, "mark": a.mark.value} for a in model.assertions],
    }
    if model.objectives:
        doc["objectives"] = [
            {"name": o.name, "direction": "maximize" if o.maximize else "minimize"}
            for o in model.objectives
        ]
    return doc


def to_json(model: CgmModel, indent: int | None = 2) -> str:
    return json.dumps(model_to_dict(model), indent=indent) + "\n"


def content_hash(model: CgmModel) -> str:
    """Order-insensitive sha256 over the model's canonical content."""
    canon = json.dumps(
        model_to_dict(model.sorted()), sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# JSON -> model
# ----------------------------------------------------------------------


def _span(file: str) -> SourceSpan:
    return SourceSpan(file, 1, 1, 1, 1)


def parse_json(text: str, file: str = "<json>") -> ParseResult:
    diags: list[ParseDiagnostic] = []

    def fail(message: str) -> ParseResult:
        diags.append(ParseDiagnostic("error", _span(file), message))
        return ParseResult(None, diags)

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        span = SourceSpan(file, exc.lineno, exc.colno, exc.lineno, exc.colno)
        diags.append(ParseDiagnostic("error", span, f"invalid JSON: {exc.msg}"))
        return ParseResult(None, diags)
    if not isinstance(doc, dict):
        return fail("top level must be an object")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        return fail(f"unsupported schema version {version!r}")
    try:
        model = model_from_dict(doc)
    except JsonFormatError as exc:
        return fail(str(exc))
    for diag in validate_structure(model):
        diags.append(ParseDiagnostic(diag.severity, _span(file), str(diag)))
    if any(d.severity == "error" for d in diags):
        return ParseResult(None, diags)
    return ParseResult(model, diags)


def model_from_dict(doc: dict[str, Any]) -> CgmModel:
    def need_list(key: str) -> list:
        value = doc.get(key, [])
        if not isinstance(value, list):
            raise JsonFormatError(f"{key} must be an array")
        return value

    elements: list[Element] = []
    for i, entry in enumerate(need_list("elements")):
        if not isinstance(entry, dict) or "id" not in entry:
            raise JsonFormatError(f"elements[{i}]: expected an object with an id")
        eid = entry["id"]
        if not isinstance(eid, str) or not eid:
            raise JsonFormatError(f"elements[{i}]: id must be a nonempty string")
        kind_s = entry.get("kind", "goal")
        try:
            kind = ElementKind(kind_s)
        except ValueError:
            raise JsonFormatError(f"elements[{i}]: unknown kind {kind_s!r}") from None
        reward = entry.get("reward")
        penalty = entry.get("penalty")
        attr_values: list[tuple[str, Fraction, Fraction]] = []
        raw_attrs = entry.get("attrValues", {})
        if not isinstance(raw_attrs, dict):
            raise JsonFormatError(f"elements[{i}]: attrValues must be an object")
        for attr, pair in raw_attrs.items():
            if not isinstance(pair, dict):
                raise JsonFormatError(f"elements[{i}].attrValues.{attr}: expected an object")
            sat = rational_from_json(pair.get("satisfied", 0), f"{eid}.{attr}.satisfied")
            den = rational_from_json(pair.get("denied", 0), f"{eid}.{attr}.denied")
            attr_values.append((attr, sat, den))
        elements.append(
            Element(
                eid,
                kind,
                entry.get("label", ""),
                None if reward is None else rational_from_json(reward, f"{eid}.reward"),
                None if penalty is None else rational_from_json(penalty, f"{eid}.penalty"),
                tuple(attr_values),
            )
        )

    refinements: list[Refinement] = []
    for i, entry in enumerate(need_list("refinements")):
        if not isinstance(entry, dict):
            raise JsonFormatError(f"refinements[{i}]: expected an object")
        sources = entry.get("sources", [])
        if not isinstance(sources, list) or not all(isinstance(s, str) for s in sources):
            raise JsonFormatError(f"refinements[{i}]: sources must be an array of ids")
        refinements.append(
            Refinement(str(entry.get("id", "")), str(entry.get("target", "")), tuple(sources))
        )

    edges: list[Any] = []
    for i, entry in enumerate(need_list("edges")):
        if not isinstance(entry, dict):
            raise JsonFormatError(f"edges[{i}]: expected an object")
        etype = entry.get("type")
        try:
            if etype == "contribution":
                edges.append(Contribution(entry["source"], entry["target"]))
            elif etype == "conflict":
                edges.append(Conflict.make(entry["a"], entry["b"]))
            elif etype == "binding":
                edges.append(Binding.make(entry["r1"], entry["r2"]))
            elif etype == "preference":
                edges.append(Preference(entry["preferred"], entry["other"]))
            else:
                raise JsonFormatError(f"edges[{i}]: unknown type {etype!r}")
        except KeyError as exc:
            raise JsonFormatError(f"edges[{i}]: missing field {exc.args[0]!r}") from None

    attributes = need_list("attributes")
    if not all(isinstance(a, str) for a in attributes):
        raise JsonFormatError("attributes must be an array of names")

    constraints = []
    for i, entry in enumerate(need_list("constraints")):
        if not isinstance(entry, str):
            raise JsonFormatError(f"constraints[{i}]: expected a formula string")
        try:
            constraints.append(parse_formula_text(entry))
        except ValueError as exc:
            raise JsonFormatError(f"constraints[{i}]: {exc}") from None

    assertions = []
    for i, entry in enumerate(need_list("assertions")):
        if not isinstance(entry, dict):
            raise JsonFormatError(f"assertions[{i}]: expected an object")
        try:
            mark = Mark(entry.get("mark"))
        except ValueError:
            raise JsonFormatError(f"assertions[{i}]: unknown mark {entry.get('mark')!r}") from None
        assertions.append(Assertion(str(entry.get("subject", "")), mark))

    objectives = []
    for i, entry in enumerate(need_list("objectives")):
        if not isinstance(entry, dict) or "name" not in entry:
            raise JsonFormatError(f"objectives[{i}]: expected an object with a name")
        direction = entry.get("direction", "minimize")
        if direction not in ("minimize", "maximize"):
            raise JsonFormatError(f"objectives[{i}]: unknown direction {direction!r}")
        objectives.append(ObjectiveRef(entry["name"], direction == "maximize"))

    return CgmModel(
        elements=tuple(elements),
        refinements=tuple(refinements),
        edges=tuple(edges),
        attributes=tuple(attributes),
        constraints=tuple(constraints),
        assertions=tuple(assertions),
        objectives=tuple(objectives),
    )


# ----------------------------------------------------------------------
# realizations
# ----------------------------------------------------------------------


def realization_to_dict(model: CgmModel, realization: Realization) -> dict[str, Any]:
    return {
        "modelHash": content_hash(model),
        "boolAssign": {k: bool(v) for k, v in sorted(realization.bool_assign.items())},
        "numAssign": {
            k: rational_to_json(v) for k, v in sorted(realization.num_assign.items())
        },
    }


def realization_to_json(model: CgmModel, realization: Realization, indent: int | None = 2) -> str:
    return json.dumps(realization_to_dict(model, realization), indent=indent) + "\n"


def realization_from_dict(doc: dict[str, Any]) -> tuple[str | None, PartialAssignment]:
    """Returns (modelHash or None, assignment).  The caller decides how
    strictly to treat a hash mismatch."""
    if not isinstance(doc, dict):
        raise JsonFormatError("realization must be an object")
    model_hash = doc.get("modelHash")
    if model_hash is not None and not isinstance(model_hash, str):
        raise JsonFormatError("modelHash must be a string")
    bools_raw = doc.get("boolAssign", {})
    nums_raw = doc.get("numAssign", {})
    if not isinstance(bools_raw, dict) or not isinstance(nums_raw, dict):
        raise JsonFormatError("boolAssign and numAssign must be objects")
    bools: dict[str, bool] = {}
    for k, v in bools_raw.items():
        if not isinstance(v, bool):
            raise JsonFormatError(f"boolAssign.{k}: expected true or false")
        bools[k] = v
    nums = {k: rational_from_json(v, f"numAssign.{k}") for k, v in nums_raw.items()}
    return model_hash, PartialAssignment(bools, nums)


def realization_from_json(text: str) -> tuple[str | None, PartialAssignment]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JsonFormatError(f"invalid JSON: {exc.msg}") from None
    return realization_from_dict(doc)
