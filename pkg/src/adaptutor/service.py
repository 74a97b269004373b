"""HTTP facade over definitions, live sessions, event ingestion, and replay.

The service adds no decision logic: every assignment returned over HTTP is
produced by the same session fold as in-process use, so API-driven runs
and library-driven runs are interchangeable. State is file-backed through
the store; any session can be dropped from memory and refolded from its
log at any time.

Two static bearer tokens separate the roles: the trainee token drives a
session (and sees definitions redacted of answers, solutions, grading keys
and weights); the instructor token additionally uploads definitions, reads
audits with full term breakdowns, and runs replay analytics. Error bodies
are always ``{code, message, details}``.
"""

from __future__ import annotations

import threading
import uuid
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .model import (
    ParseError,
    TrainingDefinition,
    parse_training_definition,
    serialize_training_definition,
    validate,
)
from .model import _parse_matrix  # matrix payloads reuse the definition grammar
from .replay import (
    EmptyCohort,
    LogSchemaError,
    MixedDefinitions,
    PhaseMismatch,
    SessionStats,
    aggregate_transitions,
    format_stats_csv,
    replay_session,
    summarize_sessions,
    sweep_weights,
)
from .session import (
    DuplicateSession,
    InvalidStage,
    OutOfOrderEvent,
    Session,
    SessionEvent,
    SessionState,
    UnknownDefinition,
    event_from_dict,
    now_ms,
)
from .store import DefinitionInUse, Store, StoreCorruption
from .tutor import TaskAssignment, UnknownQuestionId


class ApiError(Exception):
    """Error with a fixed HTTP mapping and machine-readable code."""

    def __init__(self, status: int, code: str, message: str, details: dict | None = None):
        self.status = status
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(message)


def _error_response(status: int, code: str, message: str, details: dict | None = None
                    ) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details or {}},
    )


# Domain exception -> (HTTP status, error code). Registered as handlers so
# endpoints raise domain errors directly.
_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (ParseError, 400, "PARSE_ERROR"),
    (InvalidStage, 409, "INVALID_STAGE"),
    (OutOfOrderEvent, 409, "OUT_OF_ORDER"),
    (DuplicateSession, 409, "DUPLICATE_SESSION"),
    (DefinitionInUse, 409, "DEFINITION_IN_USE"),
    (UnknownDefinition, 404, "NOT_FOUND"),
    (UnknownQuestionId, 422, "UNKNOWN_QUESTION"),
    (LogSchemaError, 422, "LOG_SCHEMA"),
    (PhaseMismatch, 422, "PHASE_MISMATCH"),
    (MixedDefinitions, 422, "MIXED_DEFINITIONS"),
    (EmptyCohort, 422, "EMPTY_COHORT"),
    (StoreCorruption, 500, "STORE_CORRUPTION"),
    (ValueError, 400, "INVALID_REQUEST"),
]


class _LiveSession:
    """One session held in memory; the lock serializes its writers."""

    __slots__ = ("session", "persisted", "lock")

    def __init__(self, session: Session, persisted: int):
        self.session = session
        self.persisted = persisted
        self.lock = threading.Lock()


def _fraction_fields(name: str, value: Fraction) -> dict:
    return {name: str(value), f"{name}_value": float(value)}


def _outcome_to_dict(outcome) -> dict:
    return {
        "phase": outcome.phase_index,
        **_fraction_fields("completion_seconds", outcome.completion_seconds),
        "matched_command_count": outcome.matched_command_count,
        "wrong_submissions": outcome.wrong_submissions,
        "correct_answer_submitted": outcome.correct_answer_submitted,
        "solution_displayed": outcome.solution_displayed,
        "hints_taken": outcome.hints_taken,
    }


def _stats_to_dict(stats: SessionStats) -> dict:
    return {
        "training": stats.training,
        "participants": stats.participants,
        **_fraction_fields("completion_ratio", stats.completion_ratio),
        "modal_end_phase": stats.modal_end_phase,
        **_fraction_fields("avg_actions", stats.avg_actions),
    }


def redact_definition(definition: TrainingDefinition) -> dict:
    """The definition as a trainee may see it: no answers, no solutions,
    no grading keys, no weights."""
    return {
        "id": definition.id,
        "title": definition.title,
        "intro": definition.intro,
        "assessment": {
            "questions": [
                {
                    "id": q.id,
                    "wording": q.wording,
                    "kind": q.kind,
                    **({"options": list(q.options)} if q.kind == "knowledge-quiz" else {}),
                }
                for q in definition.assessment.questions
            ]
        },
        "phases": [
            {
                "index": p.index,
                "title": p.title,
                "expected_completion_seconds": p.expected_completion_seconds,
                "task_count": p.task_count,
            }
            for p in definition.phases
        ],
        "post_questionnaire": list(definition.post_questionnaire),
    }


def _task_view(definition: TrainingDefinition, state: SessionState) -> dict:
    progress = state.current
    phase = definition.phase(progress.phase_index)
    task = phase.task(progress.task_index)
    hints = []
    for i, hint in enumerate(task.hints):
        entry: dict[str, Any] = {
            "index": i,
            "title": hint.title,
            "displayed": i in progress.hints_displayed,
        }
        if entry["displayed"]:
            entry["text"] = hint.text
        hints.append(entry)
    view: dict[str, Any] = {
        "session_id": state.session_id,
        "stage": state.stage_label,
        "phase": phase.index,
        "phase_title": phase.title,
        "phase_count": definition.phase_count,
        "task_index": task.index,
        "assignment_text": task.assignment_text,
        "includes_solution_walkthrough": task.includes_solution_walkthrough,
        "expected_completion_seconds": phase.expected_completion_seconds,
        "entered_at": progress.entered_at,
        "wrong_submissions": progress.wrong_submissions,
        "hints": hints,
        "solution_displayed": progress.solution_displayed,
    }
    if progress.solution_displayed:
        view["solution"] = task.solution
    return view


def _session_summary(definition: TrainingDefinition, state: SessionState) -> dict:
    summary: dict[str, Any] = {
        "session_id": state.session_id,
        "definition_id": state.definition_id,
        "stage": state.stage_label,
        "phase": state.stage_phase,
        "completed_phases": len(state.outcomes),
        "phase_count": definition.phase_count,
        "length": state.length,
        "last_timestamp": state.last_timestamp,
        "questionnaire_submitted": state.questionnaire_answers is not None,
    }
    if state.current is not None:
        summary["task_index"] = state.current.task_index
    return summary


def _assignment_view(assignment: TaskAssignment) -> dict:
    # Trainee responses carry the assignment without the term breakdown;
    # the audit endpoint serves the full picture to instructors.
    view = assignment.to_dict()
    view.pop("terms")
    return view


def create_app(
    store_dir: Path | str,
    instructor_token: str,
    trainee_token: str,
) -> FastAPI:
    """Build the service around a store directory and two role tokens."""
    app = FastAPI(title="adaptutor", docs_url=None, redoc_url=None, openapi_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = Store(store_dir)
    app.state.instructor_token = instructor_token
    app.state.trainee_token = trainee_token
    app.state.registry = {}
    app.state.registry_lock = threading.Lock()

    # -- error envelope -----------------------------------------------------

    for exc_type, status, code in _ERROR_MAP:
        def _handler(request: Request, exc: Exception,
                     status: int = status, code: str = code) -> JSONResponse:
            return _error_response(status, code, str(exc))
        app.add_exception_handler(exc_type, _handler)

    def _api_error_handler(request: Request, exc: ApiError) -> JSONResponse:
        return _error_response(exc.status, exc.code, exc.message, exc.details)

    def _request_validation_handler(request: Request, exc: RequestValidationError
                                    ) -> JSONResponse:
        return _error_response(400, "BAD_REQUEST", "malformed request body",
                               {"errors": [str(e.get("msg", e)) for e in exc.errors()]})

    app.add_exception_handler(ApiError, _api_error_handler)
    app.add_exception_handler(RequestValidationError, _request_validation_handler)

    # -- auth ---------------------------------------------------------------

    def role_of(request: Request) -> str:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError(401, "UNAUTHORIZED", "missing bearer token")
        token = header[7:].strip()
        if token == app.state.instructor_token:
            return "instructor"
        if token == app.state.trainee_token:
            return "trainee"
        raise ApiError(401, "UNAUTHORIZED", "unknown token")

    def require_instructor(request: Request) -> None:
        if role_of(request) != "instructor":
            raise ApiError(403, "FORBIDDEN", "instructor token required")

    # -- session registry ---------------------------------------------------

    store: Store = app.state.store

    def locate_session(session_id: str) -> _LiveSession:
        with app.state.registry_lock:
            live = app.state.registry.get(session_id)
            if live is not None:
                return live
            events = store.read_events(session_id)
            if events is None:
                raise ApiError(404, "NOT_FOUND", f"no session {session_id!r}")
            if not events:
                raise StoreCorruption(f"session {session_id!r} log is empty")
            definition_id = events[0].data.get("definition_id")
            definition = store.load_definition(definition_id) if definition_id else None
            if definition is None:
                raise StoreCorruption(
                    f"session {session_id!r} references missing definition {definition_id!r}"
                )
            try:
                session = Session.from_events(definition, events)
            except (InvalidStage, OutOfOrderEvent, ParseError, ValueError) as exc:
                raise StoreCorruption(
                    f"session {session_id!r} log does not fold: {exc}"
                ) from None
            live = _LiveSession(session, len(events))
            app.state.registry[session_id] = live
            return live

    def persist(session_id: str, live: _LiveSession) -> None:
        new = list(live.session.events[live.persisted:])
        try:
            store.append_events(session_id, new)
        except OSError as exc:
            # State ran ahead of disk; drop the cache so the next access
            # refolds from what was actually persisted.
            with app.state.registry_lock:
                app.state.registry.pop(session_id, None)
            raise StoreCorruption(f"could not persist session {session_id!r}: {exc}") from None
        live.persisted = len(live.session.events)

    def client_timestamp(payload: Mapping[str, Any]) -> int | None:
        value = payload.get("timestamp")
        if value is None:
            return None
        if not isinstance(value, int) or isinstance(value, bool):
            raise ApiError(400, "BAD_REQUEST", "timestamp must be an integer (UTC ms)")
        return value

    # -- meta ----------------------------------------------------------------

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    # -- definitions ---------------------------------------------------------

    @app.post("/definitions")
    def upload_definition(request: Request, payload: dict = Body(...)) -> JSONResponse:
        require_instructor(request)
        definition = parse_training_definition(payload)
        report = validate(definition)
        violations = [
            {"code": v.code, "location": v.location, "message": v.message,
             "severity": v.severity}
            for v in report.violations
        ]
        if not report.ok:
            return _error_response(422, "VALIDATION_FAILED",
                                   f"definition {definition.id!r} has violations",
                                   {"violations": violations})
        store.save_definition(definition)
        return JSONResponse(status_code=201,
                            content={"id": definition.id, "violations": violations})

    @app.get("/definitions")
    def list_definitions(request: Request) -> list[dict]:
        role_of(request)
        out = []
        for definition_id in store.definition_ids():
            definition = store.load_definition(definition_id)
            if definition is not None:
                out.append({"id": definition.id, "title": definition.title,
                            "phase_count": definition.phase_count})
        return out

    @app.get("/definitions/{definition_id}")
    def get_definition(request: Request, definition_id: str) -> dict:
        role = role_of(request)
        definition = store.load_definition(definition_id)
        if definition is None:
            raise ApiError(404, "NOT_FOUND", f"no definition {definition_id!r}")
        if role == "instructor":
            return serialize_training_definition(definition)
        return redact_definition(definition)

    # -- sessions ------------------------------------------------------------

    @app.post("/sessions")
    def create_session(request: Request, payload: dict = Body(...)) -> JSONResponse:
        role_of(request)
        definition_id = payload.get("definition_id")
        if not isinstance(definition_id, str):
            raise ApiError(400, "BAD_REQUEST", "definition_id is required")
        definition = store.load_definition(definition_id)
        if definition is None:
            raise UnknownDefinition(f"no definition {definition_id!r}")
        session_id = payload.get("session_id") or uuid.uuid4().hex
        if not isinstance(session_id, str):
            raise ApiError(400, "BAD_REQUEST", "session_id must be a string")
        with app.state.registry_lock:
            if session_id in app.state.registry or store.session_exists(session_id):
                raise DuplicateSession(f"session {session_id!r} already exists")
            session = Session.start(definition, session_id, at=client_timestamp(payload))
            live = _LiveSession(session, 0)
            app.state.registry[session_id] = live
        with live.lock:
            persist(session_id, live)
            store.mark_definition_used(definition_id)
            return JSONResponse(
                status_code=201,
                content=_session_summary(definition, session.state),
            )

    @app.get("/sessions")
    def list_sessions(request: Request) -> list[dict]:
        require_instructor(request)
        out = []
        for session_id in store.session_ids():
            try:
                live = locate_session(session_id)
            except StoreCorruption:
                out.append({"session_id": session_id, "stage": "corrupt"})
                continue
            out.append(_session_summary(live.session.definition, live.session.state))
        return out

    @app.get("/sessions/{session_id}")
    def get_session(request: Request, session_id: str) -> dict:
        role_of(request)
        live = locate_session(session_id)
        with live.lock:
            return _session_summary(live.session.definition, live.session.state)

    @app.post("/sessions/{session_id}/assessment")
    def submit_assessment(request: Request, session_id: str,
                          payload: dict = Body(...)) -> dict:
        role_of(request)
        answers = payload.get("answers")
        if not isinstance(answers, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in answers.items()
        ):
            raise ApiError(400, "BAD_REQUEST", "answers must map question ids to strings")
        live = locate_session(session_id)
        with live.lock:
            assignment = live.session.submit_assessment(answers, at=client_timestamp(payload))
            persist(session_id, live)
            return {
                "assignment": _assignment_view(assignment),
                "stage": live.session.state.stage_label,
            }

    @app.get("/sessions/{session_id}/task")
    def get_task(request: Request, session_id: str) -> dict:
        role_of(request)
        live = locate_session(session_id)
        with live.lock:
            state = live.session.state
            if state.stage != "in_phase":
                raise InvalidStage(f"no current task in stage {state.stage_label}")
            return _task_view(live.session.definition, state)

    @app.post("/sessions/{session_id}/answer")
    def submit_answer(request: Request, session_id: str,
                      payload: dict = Body(...)) -> dict:
        role_of(request)
        text = payload.get("text")
        if not isinstance(text, str):
            raise ApiError(400, "BAD_REQUEST", "text is required")
        live = locate_session(session_id)
        with live.lock:
            result = live.session.submit_answer(text, at=client_timestamp(payload))
            persist(session_id, live)
            body: dict[str, Any] = {
                "correct": result.correct,
                "stage": live.session.state.stage_label,
            }
            if not result.correct:
                body["wrong_submissions"] = result.wrong_submissions
                return body
            body["completed_phase"] = result.completed_phase
            if result.training_complete:
                body["training_complete"] = True
            if result.assignment is not None:
                body["assignment"] = _assignment_view(result.assignment)
            return body

    @app.post("/sessions/{session_id}/solution")
    def reveal_solution(request: Request, session_id: str,
                        payload: dict | None = Body(None)) -> dict:
        role_of(request)
        live = locate_session(session_id)
        with live.lock:
            solution = live.session.reveal_solution(at=client_timestamp(payload or {}))
            persist(session_id, live)
            return {
                "phase": live.session.state.current.phase_index,
                "solution": solution,
                "stage": live.session.state.stage_label,
            }

    @app.post("/sessions/{session_id}/events")
    def ingest_events(request: Request, session_id: str,
                      payload: dict = Body(...)) -> dict:
        role_of(request)
        raw_events = payload.get("events")
        if not isinstance(raw_events, list):
            raise ApiError(400, "BAD_REQUEST", "events must be a list")
        live = locate_session(session_id)
        with live.lock:
            parsed: list[SessionEvent] = []
            for i, raw in enumerate(raw_events):
                if isinstance(raw, dict) and "session_id" not in raw:
                    raw = {**raw, "session_id": session_id}
                parsed.append(event_from_dict(raw, path=f"events[{i}]"))
            before = live.session.state.length
            # Collectors may deliver out of order within a batch; sequence
            # numbers define the order. A failing event mid-batch must not
            # lose its persisted predecessors.
            try:
                for event in sorted(parsed, key=lambda e: e.sequence_number):
                    live.session.ingest_event(event)
            finally:
                persist(session_id, live)
            state = live.session.state
            return {
                "applied": state.length - before,
                "length": state.length,
                "stage": state.stage_label,
            }

    @app.post("/sessions/{session_id}/questionnaire")
    def submit_questionnaire(request: Request, session_id: str,
                             payload: dict = Body(...)) -> dict:
        role_of(request)
        answers = payload.get("answers")
        if not isinstance(answers, list) or not all(isinstance(a, str) for a in answers):
            raise ApiError(400, "BAD_REQUEST", "answers must be a list of strings")
        live = locate_session(session_id)
        with live.lock:
            state = live.session.submit_questionnaire(answers, at=client_timestamp(payload))
            persist(session_id, live)
            return {"stage": state.stage_label}

    @app.get("/sessions/{session_id}/audit")
    def session_audit(request: Request, session_id: str) -> dict:
        require_instructor(request)
        live = locate_session(session_id)
        with live.lock:
            state = live.session.state
            vectors = state.metric_vectors
            return {
                "session_id": state.session_id,
                "definition_id": state.definition_id,
                "stage": state.stage_label,
                "metric_vectors": {
                    "p": list(vectors.p),
                    "k": list(vectors.k),
                    "a": list(vectors.a),
                    "t": list(vectors.t),
                    "s": list(vectors.s),
                },
                "assignments": [a.to_dict() for a in state.assignments],
                "outcomes": [_outcome_to_dict(o) for o in state.outcomes],
                "pretraining_answers": dict(state.pretraining_answers or {}),
                "questionnaire_answers": list(state.questionnaire_answers or ()),
                "events": [e.to_dict() for e in live.session.events],
            }

    # -- replay --------------------------------------------------------------

    @app.post("/replay")
    def run_replay(request: Request, payload: dict = Body(...)) -> JSONResponse:
        require_instructor(request)
        definition_id = payload.get("definition_id")
        if not isinstance(definition_id, str):
            raise ApiError(400, "BAD_REQUEST", "definition_id is required")
        definition = store.load_definition(definition_id)
        if definition is None:
            raise ApiError(404, "NOT_FOUND", f"no definition {definition_id!r}")

        session_ids = payload.get("session_ids")
        if session_ids is not None and (
            not isinstance(session_ids, list)
            or not all(isinstance(s, str) for s in session_ids)
        ):
            raise ApiError(400, "BAD_REQUEST", "session_ids must be a list of strings")

        sidecar = payload.get("answers") or {}
        if not isinstance(sidecar, dict):
            raise ApiError(400, "BAD_REQUEST", "answers must map session ids to answer maps")

        logs: list[list[SessionEvent]] = []
        used_ids: list[str] = []
        explicit = session_ids is not None
        for sid in session_ids if explicit else store.session_ids():
            events = store.read_events(sid)
            if events is None:
                raise ApiError(404, "NOT_FOUND", f"no session {sid!r}")
            belongs = bool(events) and events[0].data.get("definition_id") == definition_id
            if not belongs:
                if explicit:
                    raise ApiError(
                        422, "MIXED_DEFINITIONS",
                        f"session {sid!r} does not belong to definition {definition_id!r}",
                    )
                continue
            logs.append(events)
            used_ids.append(sid)

        paths = [
            replay_session(events, definition, answers=sidecar.get(sid))
            for sid, events in zip(used_ids, logs)
        ]
        graph = aggregate_transitions(paths)
        stats = summarize_sessions(logs, definition)

        variants_payload = payload.get("weight_variants")
        variant_results = []
        if variants_payload is not None:
            if not isinstance(variants_payload, list):
                raise ApiError(400, "BAD_REQUEST", "weight_variants must be a list")
            variants = []
            for vi, matrices in enumerate(variants_payload):
                if not isinstance(matrices, list):
                    raise ApiError(400, "BAD_REQUEST",
                                   f"weight_variants[{vi}] must be a list of matrices")
                variants.append(tuple(
                    _parse_matrix(m, f"weight_variants[{vi}][{mi}]")
                    for mi, m in enumerate(matrices)
                ))
            sidecar_by_sid = {sid: sidecar.get(sid) for sid in used_ids if sidecar.get(sid)}
            for result in sweep_weights(logs, definition, variants, answers=sidecar_by_sid):
                variant_results.append({
                    "variant_index": result.variant_index,
                    "transitions": result.graph.to_sankey(),
                    "task_index_distribution": {
                        str(task): count
                        for task, count in result.task_index_distribution.items()
                    },
                })

        report_id = uuid.uuid4().hex
        report = {
            "report_id": report_id,
            "definition_id": definition_id,
            "created_at": now_ms(),
            "participants": used_ids,
            "paths": [
                {
                    "participant_id": p.participant_id,
                    "source": p.source,
                    "assigned_tasks": [
                        {"phase": s.phase, "task": s.task,
                         **_fraction_fields("performance", s.performance)}
                        for s in p.assigned_tasks
                    ],
                }
                for p in paths
            ],
            "transitions": graph.to_sankey(),
            "stats": _stats_to_dict(stats),
            "stats_csv": format_stats_csv([stats]),
            "variants": variant_results,
        }
        store.save_report(report_id, report)
        return JSONResponse(status_code=201, content=report)

    @app.get("/replay/{report_id}")
    def get_report(request: Request, report_id: str) -> dict:
        require_instructor(request)
        report = store.load_report(report_id)
        if report is None:
            raise ApiError(404, "NOT_FOUND", f"no report {report_id!r}")
        return report

    return app
