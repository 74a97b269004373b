"""Event-sourced session state machine.

A session runs one trainee through intro, pre-assessment, the phases in
order, and the closing questionnaire. Everything that happens is an event;
the session state is a pure fold over the event log, so replaying a
persisted log reproduces the state exactly, task assignments included
(``phase_entered`` events carry only the task index; the fold re-runs the
decision and cross-checks it).

Events carry gapless sequence numbers and nondecreasing UTC-millisecond
timestamps. Phase duration is measured between the ``phase_entered`` and
the correct ``answer_submitted`` timestamps, never server receipt time,
because command events may arrive batched from the learning environment.

The persisted form is one JSON object per line (JSONL) in
``<session_id>.events.jsonl``; the replay module consumes the same format.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Any, Mapping

from .model import ParseError, TrainingDefinition, validate
from .tutor import (
    MetricVectors,
    PhaseOutcome,
    TaskAssignment,
    decide,
    derive_outcome_bits,
    evaluate_pretraining,
)


class InvalidStage(Exception):
    """The operation or event is not legal in the session's current stage."""


class OutOfOrderEvent(Exception):
    """Sequence gap, conflicting reuse of a sequence number, or a timestamp
    running backwards."""


class DuplicateSession(Exception):
    """A session with this id already exists."""


class UnknownDefinition(Exception):
    """The referenced training definition does not exist."""


# Kind-specific payload fields and their JSON types. The common header
# fields are session_id, sequence_number, timestamp and kind.
EVENT_PAYLOAD_FIELDS: dict[str, dict[str, type]] = {
    "session_started": {"definition_id": str},
    "assessment_submitted": {"answers": dict},
    "phase_entered": {"x": int, "task_index": int},
    "command_executed": {"raw_command": str, "host": str},
    "answer_submitted": {"text": str, "correct": bool},
    "hint_displayed": {"x": int, "hint_index": int},
    "solution_displayed": {"x": int},
    "phase_completed": {"x": int},
    "questionnaire_submitted": {"answers": list},
    "session_finished": {},
}

EVENT_KINDS = frozenset(EVENT_PAYLOAD_FIELDS)


def now_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass(frozen=True)
class SessionEvent:
    """One entry of a session's append-only log."""

    session_id: str
    sequence_number: int
    timestamp: int
    kind: str
    data: Mapping[str, Any]

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "sequence_number": self.sequence_number,
            "timestamp": self.timestamp,
            "kind": self.kind,
            **self.data,
        }


def make_event(
    session_id: str, sequence_number: int, timestamp: int, kind: str, **data: Any
) -> SessionEvent:
    """Build an event, checking the payload against the kind's field table."""
    return event_from_dict(
        {
            "session_id": session_id,
            "sequence_number": sequence_number,
            "timestamp": timestamp,
            "kind": kind,
            **data,
        }
    )


def event_from_dict(document: Any, path: str = "event") -> SessionEvent:
    """Validate and build an event from a decoded JSON object."""
    if not isinstance(document, dict):
        raise ParseError(path, f"expected an object, found {type(document).__name__}")

    def field(name: str, kind: type) -> Any:
        if name not in document:
            raise ParseError(f"{path}.{name}", "missing required field")
        value = document[name]
        if kind is int and isinstance(value, bool):
            raise ParseError(f"{path}.{name}", "expected an integer, found a boolean")
        if not isinstance(value, kind):
            raise ParseError(
                f"{path}.{name}", f"expected {kind.__name__}, found {type(value).__name__}"
            )
        return value

    kind = field("kind", str)
    if kind not in EVENT_PAYLOAD_FIELDS:
        raise ParseError(f"{path}.kind", f"unknown event kind {kind!r}")
    sequence_number = field("sequence_number", int)
    if sequence_number < 1:
        raise ParseError(f"{path}.sequence_number", "must be a positive integer")
    timestamp = field("timestamp", int)

    payload_fields = EVENT_PAYLOAD_FIELDS[kind]
    data = {name: field(name, ftype) for name, ftype in payload_fields.items()}
    known = {"session_id", "sequence_number", "timestamp", "kind", *payload_fields}
    extra = sorted(set(document) - known)
    if extra:
        raise ParseError(path, f"unexpected fields for {kind}: {', '.join(extra)}")
    if kind == "assessment_submitted":
        for k, v in data["answers"].items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ParseError(f"{path}.answers", "answers must map question ids to strings")
    if kind == "questionnaire_submitted":
        if not all(isinstance(a, str) for a in data["answers"]):
            raise ParseError(f"{path}.answers", "answers must be a list of strings")

    return SessionEvent(
        session_id=field("session_id", str),
        sequence_number=sequence_number,
        timestamp=timestamp,
        kind=kind,
        data=data,
    )


@dataclass(frozen=True)
class PhaseProgress:
    """Live counters for the phase currently being played."""

    phase_index: int
    task_index: int
    entered_at: int
    command_count: int = 0
    matched_command_count: int = 0
    wrong_submissions: int = 0
    hints_displayed: tuple[int, ...] = ()
    solution_displayed: bool = False
    answered_at: int | None = None


@dataclass(frozen=True)
class SessionState:
    """Folded state of one session; every field is derived from the log."""

    session_id: str
    definition_id: str
    stage: str
    stage_phase: int | None
    metric_vectors: MetricVectors
    outcomes: tuple[PhaseOutcome, ...]
    assignments: tuple[TaskAssignment, ...]
    phase_entered_at: tuple[int, ...]
    current: PhaseProgress | None
    pretraining_answers: Mapping[str, str] | None
    questionnaire_answers: tuple[str, ...] | None
    length: int
    last_timestamp: int

    @property
    def stage_label(self) -> str:
        if self.stage in ("in_phase", "awaiting_decision"):
            return f"{self.stage}({self.stage_phase})"
        return self.stage


def _require_stage(state: SessionState, event: SessionEvent, *stages: str) -> None:
    if state.stage not in stages:
        raise InvalidStage(
            f"event {event.kind} (seq {event.sequence_number}) not allowed in"
            f" stage {state.stage_label}"
        )


def _require_phase(state: SessionState, event: SessionEvent) -> int:
    x = event.data["x"]
    if state.current is None or x != state.current.phase_index:
        raise InvalidStage(
            f"event {event.kind} (seq {event.sequence_number}) is for phase {x},"
            f" but the session is in stage {state.stage_label}"
        )
    return x


def fold_step(
    definition: TrainingDefinition, state: SessionState | None, event: SessionEvent
) -> SessionState:
    """Apply one event to the folded state, enforcing the session grammar.

    The first event must be session_started. The pre-assessment is shown
    together with the intro, so assessment_submitted is accepted from the
    intro stage directly; no separate acknowledgment event exists.
    """
    if state is None:
        if event.kind != "session_started":
            raise InvalidStage(f"a session log must begin with session_started, not {event.kind}")
        if event.sequence_number != 1:
            raise OutOfOrderEvent(f"first event has sequence {event.sequence_number}, expected 1")
        if event.data["definition_id"] != definition.id:
            raise ValueError(
                f"log references definition {event.data['definition_id']!r},"
                f" folding against {definition.id!r}"
            )
        return SessionState(
            session_id=event.session_id,
            definition_id=definition.id,
            stage="intro",
            stage_phase=None,
            metric_vectors=MetricVectors(p=()),
            outcomes=(),
            assignments=(),
            phase_entered_at=(),
            current=None,
            pretraining_answers=None,
            questionnaire_answers=None,
            length=1,
            last_timestamp=event.timestamp,
        )

    if event.session_id != state.session_id:
        raise ValueError(
            f"event for session {event.session_id!r} folded into {state.session_id!r}"
        )
    if event.sequence_number != state.length + 1:
        raise OutOfOrderEvent(
            f"expected sequence {state.length + 1}, got {event.sequence_number}"
        )
    if event.timestamp < state.last_timestamp:
        raise OutOfOrderEvent(
            f"timestamp {event.timestamp} before predecessor {state.last_timestamp}"
            f" (seq {event.sequence_number})"
        )

    state = replace(state, length=state.length + 1, last_timestamp=event.timestamp)
    kind = event.kind

    if kind == "session_started":
        raise InvalidStage("session_started may only open a log")

    if kind == "assessment_submitted":
        _require_stage(state, event, "intro", "assessment")
        answers = dict(event.data["answers"])
        bits = evaluate_pretraining(answers, definition.assessment, definition.phases)
        return replace(
            state,
            stage="awaiting_decision",
            stage_phase=1,
            metric_vectors=MetricVectors(p=bits),
            pretraining_answers=answers,
        )

    if kind == "phase_entered":
        _require_stage(state, event, "awaiting_decision")
        x = event.data["x"]
        if x != state.stage_phase:
            raise InvalidStage(f"phase_entered({x}) while awaiting phase {state.stage_phase}")
        assignment = decide(definition, state.metric_vectors, x)
        if assignment.task_index != event.data["task_index"]:
            raise ValueError(
                f"log assigns task {event.data['task_index']} in phase {x}, but the"
                f" decision model picks task {assignment.task_index}; the log was not"
                f" produced by this definition"
            )
        return replace(
            state,
            stage="in_phase",
            stage_phase=x,
            assignments=state.assignments + (assignment,),
            phase_entered_at=state.phase_entered_at + (event.timestamp,),
            current=PhaseProgress(phase_index=x, task_index=assignment.task_index,
                                  entered_at=event.timestamp),
        )

    if kind == "command_executed":
        _require_stage(state, event, "in_phase")
        progress = state.current
        phase = definition.phase(progress.phase_index)
        matched = any(p.matches(event.data["raw_command"]) for p in phase.expected_commands)
        return replace(
            state,
            current=replace(
                progress,
                command_count=progress.command_count + 1,
                matched_command_count=progress.matched_command_count + (1 if matched else 0),
            ),
        )

    if kind == "hint_displayed":
        _require_stage(state, event, "in_phase")
        x = _require_phase(state, event)
        task = definition.phase(x).task(state.current.task_index)
        index = event.data["hint_index"]
        if not 0 <= index < len(task.hints):
            raise ValueError(
                f"hint_displayed({x}, {index}) but task {state.current.task_index}"
                f" has {len(task.hints)} hints"
            )
        shown = state.current.hints_displayed
        if index not in shown:
            shown = shown + (index,)
        return replace(state, current=replace(state.current, hints_displayed=shown))

    if kind == "solution_displayed":
        _require_stage(state, event, "in_phase")
        _require_phase(state, event)
        return replace(state, current=replace(state.current, solution_displayed=True))

    if kind == "answer_submitted":
        _require_stage(state, event, "in_phase")
        progress = state.current
        phase = definition.phase(progress.phase_index)
        correct = event.data["text"].strip() == phase.answer.strip()
        if correct != event.data["correct"]:
            raise ValueError(
                f"answer_submitted at seq {event.sequence_number} recorded"
                f" correct={event.data['correct']}, but the definition grades"
                f" {correct}; the log was not produced by this definition"
            )
        if not correct:
            return replace(
                state,
                current=replace(progress, wrong_submissions=progress.wrong_submissions + 1),
            )
        if progress.answered_at is None:
            return replace(state, current=replace(progress, answered_at=event.timestamp))
        return state

    if kind == "phase_completed":
        _require_stage(state, event, "in_phase")
        x = _require_phase(state, event)
        progress = state.current
        if progress.answered_at is None:
            raise InvalidStage(f"phase_completed({x}) without a correct answer")
        phase = definition.phase(x)
        outcome = PhaseOutcome(
            phase_index=x,
            completion_seconds=Fraction(progress.answered_at - progress.entered_at, 1000),
            matched_command_count=progress.matched_command_count,
            wrong_submissions=progress.wrong_submissions,
            correct_answer_submitted=True,
            solution_displayed=progress.solution_displayed,
            hints_taken=len(progress.hints_displayed),
        )
        bits = derive_outcome_bits(outcome, phase)
        last = x == definition.phase_count
        return replace(
            state,
            stage="questionnaire" if last else "awaiting_decision",
            stage_phase=None if last else x + 1,
            metric_vectors=state.metric_vectors.with_phase_bits(*bits),
            outcomes=state.outcomes + (outcome,),
            current=None,
        )

    if kind == "questionnaire_submitted":
        _require_stage(state, event, "questionnaire")
        if state.questionnaire_answers is not None:
            raise InvalidStage("questionnaire already submitted")
        return replace(state, questionnaire_answers=tuple(event.data["answers"]))

    if kind == "session_finished":
        _require_stage(state, event, "questionnaire")
        if state.questionnaire_answers is None:
            raise InvalidStage("session_finished before questionnaire_submitted")
        return replace(state, stage="finished", stage_phase=None)

    raise ParseError("event.kind", f"unknown event kind {kind!r}")


def fold(definition: TrainingDefinition, events: list[SessionEvent]) -> SessionState:
    """Fold a whole log; pure, so equal logs give equal states."""
    if not events:
        raise InvalidStage("cannot fold an empty event log")
    state: SessionState | None = None
    for event in events:
        state = fold_step(definition, state, event)
    return state


@dataclass(frozen=True)
class AnswerResult:
    """Outcome of one answer submission."""

    correct: bool
    wrong_submissions: int
    completed_phase: int | None = None
    assignment: TaskAssignment | None = None
    training_complete: bool = False


class Session:
    """Single-writer wrapper pairing an event log with its folded state.

    Operations validate their stage precondition, append events, and fold
    them one by one; the folded state is therefore the only source of
    truth, and crash recovery is ``Session.from_events`` on the persisted
    log.
    """

    def __init__(self, definition: TrainingDefinition, events: list[SessionEvent],
                 state: SessionState):
        self._definition = definition
        self._events = events
        self._state = state

    @classmethod
    def start(
        cls, definition: TrainingDefinition, session_id: str, at: int | None = None
    ) -> Session:
        report = validate(definition)
        if not report.ok:
            raise ValueError(
                f"definition {definition.id!r} does not validate: {', '.join(report.codes())}"
            )
        event = make_event(
            session_id, 1, now_ms() if at is None else at,
            "session_started", definition_id=definition.id,
        )
        return cls(definition, [event], fold_step(definition, None, event))

    @classmethod
    def from_events(cls, definition: TrainingDefinition, events: list[SessionEvent]) -> Session:
        return cls(definition, list(events), fold(definition, list(events)))

    @property
    def definition(self) -> TrainingDefinition:
        return self._definition

    @property
    def state(self) -> SessionState:
        return self._state

    @property
    def events(self) -> tuple[SessionEvent, ...]:
        return tuple(self._events)

    def _append(self, kind: str, at: int, **data: Any) -> SessionState:
        event = make_event(
            self._state.session_id, self._state.length + 1, at, kind, **data
        )
        # Fold before committing so a rejected event leaves no trace.
        folded = fold_step(self._definition, self._state, event)
        self._events.append(event)
        self._state = folded
        return folded

    def _require_stage(self, operation: str, *stages: str) -> None:
        if self._state.stage not in stages:
            raise InvalidStage(
                f"{operation} not allowed in stage {self._state.stage_label}"
            )

    def submit_assessment(self, answers: Mapping[str, str], at: int | None = None
                          ) -> TaskAssignment:
        """Grade the pre-assessment and enter phase 1 on the decided task."""
        self._require_stage("submit_assessment", "intro", "assessment")
        at = now_ms() if at is None else at
        self._append("assessment_submitted", at, answers=dict(answers))
        assignment = decide(self._definition, self._state.metric_vectors, 1)
        self._append("phase_entered", at, x=1, task_index=assignment.task_index)
        return self._state.assignments[-1]

    def ingest_event(self, event: SessionEvent) -> SessionState:
        """Apply one externally collected event (commands, hints, solutions).

        Re-delivery of an already applied event is a no-op; reusing an
        applied sequence number for different content is an error.
        """
        if event.kind not in ("command_executed", "hint_displayed", "solution_displayed"):
            raise InvalidStage(f"ingest_event does not accept {event.kind} events")
        if event.session_id != self._state.session_id:
            raise ValueError(
                f"event for session {event.session_id!r} ingested"
                f" into {self._state.session_id!r}"
            )
        if event.sequence_number <= self._state.length:
            stored = self._events[event.sequence_number - 1]
            if stored == event:
                return self._state
            raise OutOfOrderEvent(
                f"sequence {event.sequence_number} already holds a {stored.kind} event"
                f" with different content"
            )
        if event.sequence_number > self._state.length + 1:
            raise OutOfOrderEvent(
                f"sequence gap: expected {self._state.length + 1},"
                f" got {event.sequence_number}"
            )
        return self._append(event.kind, event.timestamp, **event.data)

    def submit_answer(self, text: str, at: int | None = None) -> AnswerResult:
        """Grade an answer; on the phase answer, complete the phase and
        either enter the next phase on the decided task or move to the
        questionnaire."""
        self._require_stage("submit_answer", "in_phase")
        at = now_ms() if at is None else at
        x = self._state.current.phase_index
        phase = self._definition.phase(x)
        correct = text.strip() == phase.answer.strip()
        self._append("answer_submitted", at, text=text, correct=correct)
        if not correct:
            return AnswerResult(correct=False,
                                wrong_submissions=self._state.current.wrong_submissions)
        self._append("phase_completed", at, x=x)
        if x == self._definition.phase_count:
            return AnswerResult(correct=True, wrong_submissions=0, completed_phase=x,
                                training_complete=True)
        assignment = decide(self._definition, self._state.metric_vectors, x + 1)
        self._append("phase_entered", at, x=x + 1, task_index=assignment.task_index)
        return AnswerResult(
            correct=True,
            wrong_submissions=0,
            completed_phase=x,
            assignment=self._state.assignments[-1],
        )

    def reveal_solution(self, at: int | None = None) -> str:
        """Show the current task's solution; the phase's s bit becomes 0.

        Idempotent: revealing again returns the same text without logging
        a second event.
        """
        self._require_stage("reveal_solution", "in_phase")
        progress = self._state.current
        if not progress.solution_displayed:
            self._append(
                "solution_displayed", now_ms() if at is None else at, x=progress.phase_index
            )
        task = self._definition.phase(progress.phase_index).task(progress.task_index)
        return task.solution

    def display_hint(self, hint_index: int, at: int | None = None) -> str:
        """Show one hint of the current task and return its text; hints are
        logged for analytics but never affect the decision model."""
        self._require_stage("display_hint", "in_phase")
        progress = self._state.current
        task = self._definition.phase(progress.phase_index).task(progress.task_index)
        if not 0 <= hint_index < len(task.hints):
            raise ValueError(
                f"task {progress.task_index} of phase {progress.phase_index}"
                f" has {len(task.hints)} hints, no index {hint_index}"
            )
        if hint_index not in progress.hints_displayed:
            self._append(
                "hint_displayed", now_ms() if at is None else at,
                x=progress.phase_index, hint_index=hint_index,
            )
        return task.hints[hint_index].text

    def submit_questionnaire(self, answers: list[str], at: int | None = None) -> SessionState:
        """Record the closing questionnaire and finish the session."""
        self._require_stage("submit_questionnaire", "questionnaire")
        if self._state.questionnaire_answers is not None:
            raise InvalidStage("questionnaire already submitted")
        at = now_ms() if at is None else at
        self._append("questionnaire_submitted", at, answers=list(answers))
        return self._append("session_finished", at)
