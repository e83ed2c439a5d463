"""HTTP facade over parsing, solving, diagnosis, evolution, and export.

Models and realizations are content-addressed: an id is a hash of the
canonical serialization, so re-posting the same model yields the same
id and a realization remembers which model content it was computed
against.  State lives in an in-memory per-session store (header
``X-Session-Id``, default session otherwise) that expires after an idle
TTL; nothing is persisted.  Solver work runs under a per-request time
budget and reports exhaustion as 503 rather than hanging.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Any

from fastapi import FastAPI, Header, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .dsl import parse_dsl
from .encoder import InvalidModel, UnknownAttribute
from .evolution import (
    CRITERION_KINDS,
    MissingWeight,
    NonTaskInterest,
    SimilarityCriterion,
    Unrealizable,
    evolve,
)
from .jsonio import (
    JsonFormatError,
    content_hash,
    model_to_dict,
    parse_json,
    rational_from_json,
    rational_to_json,
    realization_to_dict,
)
from .model import (
    Assertion,
    CgmModel,
    Mark,
    Realization,
    check_realization,
    validate_structure,
)
from .omt import Budget, NotUnsat, ResourceLimit
from .reason import diagnose_assertions, enumerate_realizations, realize
from .smtlib import ExportOptions, export_smt2

__all__ = ["create_app", "SessionStore"]


@dataclass
class _StoredRealization:
    realization: Realization
    model_hash: str
    objective_names: tuple[str, ...]
    values: tuple[Fraction, ...]


@dataclass
class _Session:
    models: dict[str, CgmModel] = field(default_factory=dict)
    realizations: dict[str, _StoredRealization] = field(default_factory=dict)
    last_used: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """Per-session models and realizations with idle expiry."""

    def __init__(self, idle_ttl: float) -> None:
        self.idle_ttl = idle_ttl
        self._sessions: dict[str, _Session] = {}
        self._lock = threading.Lock()

    def session(self, session_id: str) -> _Session:
        now = time.monotonic()
        with self._lock:
            expired = [
                sid
                for sid, s in self._sessions.items()
                if now - s.last_used > self.idle_ttl
            ]
            for sid in expired:
                del self._sessions[sid]
            s = self._sessions.setdefault(session_id, _Session())
            s.last_used = now
            return s


class _Fail(Exception):
    def __init__(self, status: int, body: dict[str, Any]):
        self.status = status
        self.body = body


def _realization_id(model_hash: str, realization: Realization) -> str:
    doc = {
        "modelHash": model_hash,
        "bools": sorted(realization.bool_assign.items()),
        "nums": sorted((k, str(v)) for k, v in realization.num_assign.items()),
    }
    blob = json.dumps(doc, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _parse_body_model(raw: bytes, content_type: str) -> tuple[CgmModel | None, list[str]]:
    text = raw.decode("utf-8", errors="replace")
    if "json" in content_type:
        result = parse_json(text)
    else:
        result = parse_dsl(text)
    return result.model, [str(d) for d in result.diagnostics]


class AssertionBody(BaseModel):
    subject: str
    mark: str | None = None  # "satisfied" | "denied" | null to clear


class SolveBody(BaseModel):
    objectives: list[str] | None = None
    enumerateLimit: int | None = None


class EnumerateBody(BaseModel):
    limit: int


class EvolveBody(BaseModel):
    oldModelId: str
    oldRealizationId: str
    newModelId: str
    criterion: str
    tieBreakers: list[str] | None = None
    interest: list[str] | None = None
    weights: dict[str, str | int] | None = None
    countDeniedNew: bool = False


class ExportBody(BaseModel):
    objectives: list[str] | None = None
    includeObjectives: bool = True
    lexicographic: bool = True
    namePrefix: str = ""


def create_app(budget_seconds: float = 10.0, idle_ttl: float = 3600.0) -> FastAPI:
    app = FastAPI(title="cgmlab", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(idle_ttl)
    app.state.store = store

    def budget() -> Budget:
        return Budget(seconds=budget_seconds)

    def get_model(session: _Session, model_id: str) -> CgmModel:
        model = session.models.get(model_id)
        if model is None:
            raise _Fail(404, {"error": f"unknown model {model_id!r}"})
        return model

    def values_out(names: tuple[str, ...], values: tuple[Fraction, ...]) -> list[dict]:
        return [
            {"name": n, "value": rational_to_json(v)}
            for n, v in zip(names, values)
        ]

    def checked(model: CgmModel, realization: Realization) -> Realization:
        report = check_realization(model, realization)
        if report.violations:
            raise _Fail(
                500,
                {"error": "solver returned an assignment the checker rejects",
                 "violations": [v.message for v in report.violations]},
            )
        return realization

    def remember(
        session: _Session, model: CgmModel, stored: _StoredRealization
    ) -> str:
        rid = _realization_id(stored.model_hash, stored.realization)
        with session.lock:
            session.realizations[rid] = stored
        return rid

    @app.exception_handler(_Fail)
    async def fail_handler(_request: Request, exc: _Fail) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content=exc.body)

    @app.exception_handler(ResourceLimit)
    async def limit_handler(_request: Request, exc: ResourceLimit) -> JSONResponse:
        return JSONResponse(status_code=503, content={"error": str(exc)})

    @app.post("/api/models")
    async def post_model(
        request: Request, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        raw = await request.body()
        model, diagnostics = _parse_body_model(
            raw, request.headers.get("content-type", "text/plain")
        )
        if model is None:
            return JSONResponse(
                status_code=400, content={"error": "parse failed", "diagnostics": diagnostics}
            )
        model_id = content_hash(model)
        with session.lock:
            session.models[model_id] = model
        return JSONResponse({"modelId": model_id, "diagnostics": diagnostics})

    @app.get("/api/models/{model_id}")
    async def get_model_json(
        model_id: str, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        return JSONResponse(model_to_dict(model))

    @app.post("/api/models/{model_id}/assertions")
    async def post_assertion(
        model_id: str, body: AssertionBody, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        if body.subject not in model.element_by_id:
            raise _Fail(404, {"error": f"unknown element {body.subject!r}"})
        kept = tuple(a for a in model.assertions if a.subject != body.subject)
        if body.mark is not None:
            try:
                mark = Mark(body.mark)
            except ValueError:
                raise _Fail(400, {"error": f"unknown mark {body.mark!r}"}) from None
            kept = kept + (Assertion(body.subject, mark),)
        updated = replace(model, assertions=kept)
        problems = [d for d in validate_structure(updated) if d.severity == "error"]
        if problems:
            raise _Fail(
                400,
                {"error": "assertion change breaks the model",
                 "diagnostics": [str(d) for d in problems]},
            )
        new_id = content_hash(updated)
        with session.lock:
            session.models[new_id] = updated
        return JSONResponse(
            {
                "modelId": new_id,
                "assertions": [
                    {"subject": a.subject, "mark": a.mark.value}
                    for a in updated.assertions
                ],
            }
        )

    @app.post("/api/models/{model_id}/solve")
    async def post_solve(
        model_id: str, body: SolveBody, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        try:
            result = realize(model, body.objectives, budget=budget())
        except (UnknownAttribute, InvalidModel) as exc:
            raise _Fail(400, {"error": str(exc)}) from None
        if result.status == "unsat":
            core = diagnose_assertions(model, budget=budget())
            raise _Fail(
                422,
                {"error": "unrealizable", "core": sorted(a.subject for a in core)},
            )
        assert result.realization is not None
        realization = checked(model, result.realization)
        model_hash = content_hash(model)
        rid = remember(
            session,
            model,
            _StoredRealization(
                realization=realization,
                model_hash=model_hash,
                objective_names=result.objective_names,
                values=result.values,
            ),
        )
        payload: dict[str, Any] = {
            "status": "sat",
            "realizationId": rid,
            "realization": realization_to_dict(model, realization),
            "objectiveValues": values_out(result.objective_names, result.values),
            "stats": asdict(result.stats),
        }
        if body.enumerateLimit is not None:
            payload["realizations"] = [
                realization_to_dict(model, checked(model, r))
                for r in enumerate_realizations(
                    model, limit=body.enumerateLimit, budget=budget()
                )
            ]
        return JSONResponse(payload)

    @app.post("/api/models/{model_id}/enumerate")
    async def post_enumerate(
        model_id: str, body: EnumerateBody, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        out = [
            realization_to_dict(model, checked(model, r))
            for r in enumerate_realizations(model, limit=body.limit, budget=budget())
        ]
        return JSONResponse({"realizations": out})

    @app.post("/api/models/{model_id}/diagnose")
    async def post_diagnose(
        model_id: str, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        try:
            core = diagnose_assertions(model, budget=budget())
        except NotUnsat:
            raise _Fail(
                400, {"error": "model is realizable; nothing to diagnose"}
            ) from None
        return JSONResponse({"core": sorted(a.subject for a in core)})

    @app.post("/api/evolve")
    async def post_evolve(
        body: EvolveBody, x_session_id: str = Header("default")
    ) -> JSONResponse:
        session = store.session(x_session_id)
        old_model = get_model(session, body.oldModelId)
        new_model = get_model(session, body.newModelId)
        stored = session.realizations.get(body.oldRealizationId)
        if stored is None:
            raise _Fail(404, {"error": f"unknown realization {body.oldRealizationId!r}"})
        if stored.model_hash != content_hash(old_model):
            raise _Fail(
                409,
                {
                    "error": "realization was computed against different model content",
                    "expected": stored.model_hash,
                    "got": content_hash(old_model),
                },
            )
        if body.criterion not in CRITERION_KINDS:
            raise _Fail(400, {"error": f"unknown criterion {body.criterion!r}"})
        criterion = SimilarityCriterion(
            body.criterion,
            tie_breakers=body.tieBreakers,
            count_denied_new=body.countDeniedNew,
        )
        weights = None
        if body.weights is not None:
            weights = {
                k: rational_from_json(v, f"weights.{k}") for k, v in body.weights.items()
            }
        try:
            result = evolve(
                old_model,
                stored.realization,
                new_model,
                criterion,
                interest=body.interest,
                weights=weights,
                budget=budget(),
            )
        except Unrealizable as exc:
            raise _Fail(
                422,
                {"error": "unrealizable", "core": sorted(a.subject for a in exc.core)},
            ) from None
        except (MissingWeight, NonTaskInterest) as exc:
            raise _Fail(400, {"error": str(exc)}) from None
        realization = checked(new_model, result.realization)
        new_hash = content_hash(new_model)
        rid = remember(
            session,
            new_model,
            _StoredRealization(
                realization=realization,
                model_hash=new_hash,
                objective_names=tuple(result.objective_values),
                values=tuple(result.objective_values.values()),
            ),
        )
        return JSONResponse(
            {
                "realizationId": rid,
                "realization": realization_to_dict(new_model, realization),
                "criterion": criterion.kind,
                "criterionValue": rational_to_json(result.value),
                "tieBreakers": values_out(result.tie_names, result.tie_values),
                "objectiveValues": [
                    {"name": n, "value": rational_to_json(v)}
                    for n, v in result.objective_values.items()
                ],
            }
        )

    @app.post("/api/models/{model_id}/export-smt2")
    async def post_export(
        model_id: str,
        body: ExportBody | None = None,
        x_session_id: str = Header("default"),
    ) -> Response:
        session = store.session(x_session_id)
        model = get_model(session, model_id)
        body = body or ExportBody()
        options = ExportOptions(
            include_objectives=body.includeObjectives,
            lexicographic=body.lexicographic,
            name_prefix=body.namePrefix,
        )
        try:
            text = export_smt2(model, body.objectives, options)
        except (InvalidModel, ValueError, KeyError) as exc:
            raise _Fail(400, {"error": str(exc)}) from None
        return PlainTextResponse(text)

    return app
