"""Command-line front end.

Exit codes are part of the contract: 0 for ok/sat, 1 for
unsat/unrealizable, 2 for usage, parse, or validation errors, 3 when a
resource budget ran out.  Machine-readable output goes to stdout under
``--json``; diagnostics always go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .dsl import parse_dsl
from .formula import format_rational
from .encoder import InvalidModel, UnknownAttribute
from .evolution import (
    MissingWeight,
    NonTaskInterest,
    SimilarityCriterion,
    Unrealizable,
    default_interest,
    evolve,
)
from .jsonio import (
    JsonFormatError,
    content_hash,
    parse_json,
    rational_to_json,
    realization_from_json,
    realization_to_dict,
    realization_to_json,
)
from .model import CgmModel, check_realization, validate_structure
from .omt import Budget, NotUnsat, ResourceLimit
from .reason import diagnose_assertions, enumerate_realizations, realize
from .smtlib import ExportOptions, export_smt2

EXIT_OK = 0
EXIT_UNSAT = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

_CRITERION_NAMES = {
    "familiarity": "familiarity",
    "weighted-familiarity": "weightedFamiliarity",
    "effort": "changeEffort",
    "weighted-effort": "weightedChangeEffort",
    "ernst": "ernstFamiliarity",
}


class _Usage(Exception):
    pass


def _fail(message: str) -> _Usage:
    print(f"error: {message}", file=sys.stderr)
    return _Usage()


def _load_model(path: str) -> CgmModel:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc.strerror or exc}")
    result = parse_json(text, path) if p.suffix == ".json" else parse_dsl(text, path)
    for d in result.diagnostics:
        print(str(d), file=sys.stderr)
    if result.model is None:
        raise _fail(f"{path} did not parse")
    errors = [d for d in validate_structure(result.model) if d.severity == "error"]
    for d in errors:
        print(str(d), file=sys.stderr)
    if errors:
        raise _fail(f"{path} is not a well-formed model")
    return result.model


def _budget() -> Budget | None:
    raw = os.environ.get("CGM_BUDGET_SECONDS")
    if not raw:
        return None
    try:
        seconds = float(raw)
    except ValueError:
        raise _fail(f"CGM_BUDGET_SECONDS={raw!r} is not a number")
    return Budget(seconds=seconds)


def _parse_objectives(spec: str | None) -> list[str] | None:
    if spec is None:
        return None
    body = spec[4:] if spec.startswith("lex:") else spec
    names = [n.strip() for n in body.split(",") if n.strip()]
    if not names:
        raise _fail(f"--objective {spec!r} names no objectives")
    return names


def _values_out(names, values) -> list[dict]:
    return [
        {"name": n, "value": rational_to_json(v)} for n, v in zip(names, values)
    ]


def _print_values(names, values) -> None:
    width = max((len(n) for n in names), default=0)
    for n, v in zip(names, values):
        print(f"  {n:<{width}}  {format_rational(v)}")


# ---------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------


def _cmd_check(args) -> int:
    model = _load_model(args.model)
    warnings = validate_structure(model)
    for d in warnings:
        print(str(d), file=sys.stderr)
    if args.json:
        print(
            json.dumps(
                {
                    "ok": True,
                    "modelId": content_hash(model),
                    "elements": len(model.elements),
                    "refinements": len(model.refinements),
                    "warnings": [str(d) for d in warnings],
                }
            )
        )
    else:
        print(
            f"ok: {len(model.elements)} elements, "
            f"{len(model.refinements)} refinements, "
            f"{len(model.assertions)} assertions"
        )
    return EXIT_OK


def _cmd_realize(args) -> int:
    model = _load_model(args.model)
    names = _parse_objectives(args.objective)
    try:
        result = realize(model, names, budget=_budget())
    except UnknownAttribute as exc:
        raise _fail(str(exc))
    if result.status == "unsat":
        if args.json:
            print(json.dumps({"status": "unsat"}))
        print("unsat: the asserted model has no realization", file=sys.stderr)
        return EXIT_UNSAT
    assert result.realization is not None
    if args.out:
        Path(args.out).write_text(realization_to_json(model, result.realization))
    if args.json:
        print(
            json.dumps(
                {
                    "status": "sat",
                    "objectiveValues": _values_out(result.objective_names, result.values),
                    "realization": realization_to_dict(model, result.realization),
                    "stats": asdict(result.stats),
                }
            )
        )
    else:
        print("sat")
        _print_values(result.objective_names, result.values)
        satisfied = sorted(
            e.id for e in model.elements if result.realization.bool_assign[e.id]
        )
        print(f"  satisfied: {', '.join(satisfied)}")
    return EXIT_OK


def _cmd_enumerate(args) -> int:
    model = _load_model(args.model)
    out = []
    for r in enumerate_realizations(model, limit=args.limit, budget=_budget()):
        out.append(r)
        if not args.json:
            satisfied = sorted(k for k, v in r.bool_assign.items() if v)
            print(f"{len(out):4d}: {', '.join(satisfied)}")
    if args.json:
        print(
            json.dumps(
                {"realizations": [realization_to_dict(model, r) for r in out]}
            )
        )
    else:
        print(f"{len(out)} realizations", file=sys.stderr)
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    model = _load_model(args.model)
    try:
        core = diagnose_assertions(model, budget=_budget())
    except NotUnsat:
        if args.json:
            print(json.dumps({"realizable": True, "core": []}))
        else:
            print("model is realizable; nothing to diagnose")
        return EXIT_OK
    subjects = sorted(a.subject for a in core)
    if args.json:
        print(json.dumps({"realizable": False, "core": subjects}))
    else:
        print("unrealizable; conflicting assertions:")
        for s in subjects:
            print(f"  {s}")
    return EXIT_UNSAT


def _cmd_evolve(args) -> int:
    old_model = _load_model(args.old)
    new_model = _load_model(args.new)
    try:
        text = Path(args.prev).read_text()
    except OSError as exc:
        raise _fail(f"cannot read {args.prev}: {exc.strerror or exc}")
    try:
        claimed_hash, partial = realization_from_json(text)
    except JsonFormatError as exc:
        raise _fail(f"{args.prev}: {exc}")
    if claimed_hash is not None and claimed_hash != content_hash(old_model):
        raise _fail(
            f"{args.prev} was computed against different model content "
            f"(hash {claimed_hash}, expected {content_hash(old_model)})"
        )
    old_realization = partial.complete(old_model)
    bad = check_realization(old_model, old_realization).violations
    if bad:
        for v in bad:
            print(str(v.message), file=sys.stderr)
        raise _fail(f"{args.prev} is not a realization of {args.old}")

    kind = _CRITERION_NAMES[args.criterion]
    criterion = SimilarityCriterion(kind, tie_breakers=_parse_objectives(args.tie_break))
    interest = None
    if args.interest == "all":
        interest = sorted(default_interest(old_model, new_model, tasks_only=False))
    elif args.interest == "tasks":
        interest = sorted(default_interest(old_model, new_model, tasks_only=True))
    elif args.interest is not None:
        interest = [n.strip() for n in args.interest.split(",") if n.strip()]
    try:
        result = evolve(
            old_model,
            old_realization,
            new_model,
            criterion,
            interest=interest,
            budget=_budget(),
        )
    except Unrealizable as exc:
        subjects = sorted(a.subject for a in exc.core)
        if args.json:
            print(json.dumps({"status": "unrealizable", "core": subjects}))
        print(
            "unrealizable new model; conflicting assertions: " + ", ".join(subjects),
            file=sys.stderr,
        )
        return EXIT_UNSAT
    except (MissingWeight, NonTaskInterest) as exc:
        raise _fail(str(exc))

    newly_satisfied = sorted(
        t
        for t in new_model.tasks
        if result.realization.bool_assign[t]
        and not old_realization.bool_assign.get(t, False)
    )
    dropped = sorted(
        t
        for t in new_model.tasks
        if not result.realization.bool_assign[t]
        and old_realization.bool_assign.get(t, False)
    )
    if args.out:
        Path(args.out).write_text(realization_to_json(new_model, result.realization))
    if args.json:
        print(
            json.dumps(
                {
                    "status": "sat",
                    "criterion": kind,
                    "criterionValue": rational_to_json(result.value),
                    "newlySatisfiedTasks": len(newly_satisfied),
                    "newlySatisfied": newly_satisfied,
                    "droppedTasks": dropped,
                    "tieBreakers": _values_out(result.tie_names, result.tie_values),
                    "objectiveValues": [
                        {"name": n, "value": rational_to_json(v)}
                        for n, v in result.objective_values.items()
                    ],
                    "realization": realization_to_dict(new_model, result.realization),
                }
            )
        )
    else:
        print(f"{kind} = {format_rational(result.value)}")
        print(f"  newly satisfied tasks ({len(newly_satisfied)}): {', '.join(newly_satisfied) or '-'}")
        print(f"  dropped tasks ({len(dropped)}): {', '.join(dropped) or '-'}")
        _print_values(result.tie_names, result.tie_values)
    return EXIT_OK


def _cmd_export_smt2(args) -> int:
    model = _load_model(args.model)
    options = ExportOptions(
        include_objectives=not args.no_objectives,
        lexicographic=not args.flat,
        name_prefix=args.prefix,
    )
    try:
        text = export_smt2(model, _parse_objectives(args.objective), options)
    except (UnknownAttribute, ValueError) as exc:
        raise _fail(str(exc))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(budget_seconds=args.budget)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cgm", description="Constrained goal model workbench"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def with_json(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        return p

    p = with_json(sub.add_parser("check", help="parse and validate a model"))
    p.add_argument("model")
    p.set_defaults(fn=_cmd_check)

    p = with_json(sub.add_parser("realize", help="optimal realization"))
    p.add_argument("model")
    p.add_argument("--objective", help="lex:o1,o2,... (default: the model's declared list)")
    p.add_argument("--out", help="write the realization as JSON to this file")
    p.set_defaults(fn=_cmd_realize)

    p = with_json(sub.add_parser("enumerate", help="stream distinct realizations"))
    p.add_argument("model")
    p.add_argument("--limit", type=int, help="stop after N realizations")
    p.set_defaults(fn=_cmd_enumerate)

    p = with_json(sub.add_parser("diagnose", help="minimal conflicting assertion set"))
    p.add_argument("model")
    p.set_defaults(fn=_cmd_diagnose)

    p = with_json(sub.add_parser("evolve", help="closest realization of a changed model"))
    p.add_argument("--old", required=True, help="previous model file")
    p.add_argument("--prev", required=True, help="realization JSON of the previous model")
    p.add_argument("--new", required=True, help="changed model file")
    p.add_argument(
        "--criterion",
        required=True,
        choices=sorted(_CRITERION_NAMES),
        help="similarity criterion",
    )
    p.add_argument("--tie-break", dest="tie_break", help="lex:o1,o2,... tie breakers")
    p.add_argument("--interest", help="all | tasks | comma-separated element ids")
    p.add_argument("--out", help="write the new realization as JSON to this file")
    p.set_defaults(fn=_cmd_evolve)

    p = sub.add_parser("export-smt2", help="emit the model as SMT-LIB2 text")
    p.add_argument("model")
    p.add_argument("--objective", help="lex:o1,o2,... (default: the model's declared list)")
    p.add_argument("--no-objectives", action="store_true", help="constraints only")
    p.add_argument("--flat", action="store_true", help="omit the lexicographic priority option")
    p.add_argument("--prefix", default="", help="symbol name prefix")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(fn=_cmd_export_smt2)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8123)
    p.add_argument("--budget", type=float, default=10.0, help="per-request seconds")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _Usage:
        return EXIT_USAGE
    except InvalidModel as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
