"""Offline replay, transition aggregation, and cohort statistics.

Recorded session logs (adaptive or not) are re-run through the decision
model: the replay derives each phase's outcome bits from the log and asks
the model which task it would assign, ignoring the task indices the log
actually recorded. Swapping in alternative weight matrices turns this into
a what-if tool for instructors.

Logs are the session module's JSONL event streams. The walker here is
deliberately more tolerant than the live session fold: recorded answer
grades are taken as authoritative (historical trainings may have graded
differently), recorded task indices may be anything, and a log may stop in
the middle of a phase. Structural problems (bad JSON, sequence gaps, phase
order violations) raise LogSchemaError; a log whose phase indices do not
fit the definition raises PhaseMismatch.

Aggregated graphs use the node naming "P<x>T<y>" and serialize to the
usual Sankey shape: ``nodes[]`` plus ``links[]`` with ``source``,
``target`` and ``value`` node indices. Flow is conserved: a node's visit
count equals its outgoing link total plus the number of participants whose
path ends there.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Mapping

from .model import ParseError, TrainingDefinition, WeightMatrix, validate
from .session import EVENT_KINDS, SessionEvent, event_from_dict
from .tutor import MetricVectors, PhaseOutcome, decide, derive_outcome_bits, evaluate_pretraining


class LogSchemaError(Exception):
    """The event stream is structurally broken (JSON, sequence, grammar)."""


class PhaseMismatch(Exception):
    """The log's phases do not fit the definition replayed against."""


class MixedDefinitions(Exception):
    """Paths from different definitions cannot be aggregated."""


class EmptyCohort(Exception):
    """Statistics over zero sessions are undefined."""


ACTION_KINDS = frozenset(
    {"phase_entered", "answer_submitted", "hint_displayed", "solution_displayed"}
)


@dataclass(frozen=True)
class PathStep:
    """One decision on a participant's path."""

    phase: int
    task: int
    performance: Fraction


@dataclass(frozen=True)
class SimulatedPath:
    """The tasks one participant got (recorded) or would get (simulated)."""

    participant_id: str
    definition_id: str
    assigned_tasks: tuple[PathStep, ...]
    source: str  # "recorded" | "simulated"


@dataclass(frozen=True)
class GraphNode:
    phase: int
    task: int
    count: int
    ends: int

    @property
    def name(self) -> str:
        return f"P{self.phase}T{self.task}"


@dataclass(frozen=True)
class GraphLink:
    source: tuple[int, int]
    target: tuple[int, int]
    value: int


@dataclass(frozen=True)
class TransitionGraph:
    """Task-to-task participant flow across a cohort of paths."""

    definition_id: str
    nodes: tuple[GraphNode, ...]
    links: tuple[GraphLink, ...]

    def to_sankey(self) -> dict:
        """JSON shape consumed by standard Sankey renderers."""
        index = {(n.phase, n.task): i for i, n in enumerate(self.nodes)}
        return {
            "training": self.definition_id,
            "nodes": [
                {"name": n.name, "phase": n.phase, "task": n.task,
                 "count": n.count, "ends": n.ends}
                for n in self.nodes
            ],
            "links": [
                {"source": index[l.source], "target": index[l.target], "value": l.value}
                for l in self.links
            ],
        }


@dataclass(frozen=True)
class SessionStats:
    """Cohort summary of one training, exact until rendered."""

    training: str
    participants: int
    completion_ratio: Fraction
    modal_end_phase: int
    avg_actions: Fraction


@dataclass(frozen=True)
class SweepResult:
    """Replay outcome of one weight variant over a cohort."""

    variant_index: int
    graph: TransitionGraph
    task_index_distribution: Mapping[int, int]


def parse_event_stream(source: bytes | str | Iterable[str]) -> list[SessionEvent]:
    """Decode one JSONL event log; blank lines are ignored."""
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    lines = source.splitlines() if isinstance(source, str) else source
    events: list[SessionEvent] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            document = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogSchemaError(f"line {lineno}: invalid JSON: {exc.msg}") from None
        try:
            events.append(event_from_dict(document, path=f"line {lineno}"))
        except ParseError as exc:
            raise LogSchemaError(str(exc)) from None
    return events


@dataclass
class _PhaseRecord:
    phase_index: int
    entered_at: int
    recorded_task: int
    matched_commands: int = 0
    wrong_submissions: int = 0
    answered_at: int | None = None
    solution_displayed: bool = False
    hints_taken: int = 0
    completed: bool = False


@dataclass(frozen=True)
class _WalkedLog:
    session_id: str
    definition_id: str | None
    answers: Mapping[str, str] | None
    records: tuple[_PhaseRecord, ...]
    action_count: int
    solution_count: int


def _walk(events: list[SessionEvent], definition: TrainingDefinition) -> _WalkedLog:
    """Extract per-phase evidence from a log with light grammar checks."""
    if not events:
        raise LogSchemaError("empty event log")
    first = events[0]
    if first.kind != "session_started":
        raise LogSchemaError(f"log must begin with session_started, not {first.kind}")

    session_id = first.session_id
    answers: Mapping[str, str] | None = None
    records: list[_PhaseRecord] = []
    open_record: _PhaseRecord | None = None
    action_count = 0
    solution_count = 0
    last_ts = first.timestamp

    for position, event in enumerate(events, start=1):
        if event.sequence_number != position:
            raise LogSchemaError(
                f"sequence gap: event {position} carries number {event.sequence_number}"
            )
        if event.session_id != session_id:
            raise LogSchemaError(
                f"log mixes sessions {session_id!r} and {event.session_id!r}"
            )
        if event.timestamp < last_ts:
            raise LogSchemaError(
                f"timestamp runs backwards at sequence {event.sequence_number}"
            )
        last_ts = event.timestamp
        kind = event.kind
        if kind in ACTION_KINDS:
            action_count += 1

        if kind == "session_started":
            if position != 1:
                raise LogSchemaError("session_started may only open a log")
        elif kind == "assessment_submitted":
            answers = dict(event.data["answers"])
        elif kind == "phase_entered":
            x = event.data["x"]
            if open_record is not None:
                raise LogSchemaError(
                    f"phase_entered({x}) while phase {open_record.phase_index} is open"
                )
            if x != len(records) + 1:
                raise LogSchemaError(
                    f"phase_entered({x}) out of order, expected phase {len(records) + 1}"
                )
            if x > definition.phase_count:
                raise PhaseMismatch(
                    f"log enters phase {x}, definition has {definition.phase_count} phases"
                )
            open_record = _PhaseRecord(
                phase_index=x, entered_at=event.timestamp,
                recorded_task=event.data["task_index"],
            )
        elif kind == "command_executed":
            if open_record is None:
                raise LogSchemaError("command_executed outside any phase")
            phase = definition.phase(open_record.phase_index)
            if any(p.matches(event.data["raw_command"]) for p in phase.expected_commands):
                open_record.matched_commands += 1
        elif kind == "answer_submitted":
            if open_record is None:
                raise LogSchemaError("answer_submitted outside any phase")
            if event.data["correct"]:
                if open_record.answered_at is None:
                    open_record.answered_at = event.timestamp
            else:
                open_record.wrong_submissions += 1
        elif kind == "hint_displayed":
            if open_record is None or event.data["x"] != open_record.phase_index:
                raise LogSchemaError(f"hint_displayed({event.data['x']}) outside its phase")
            open_record.hints_taken += 1
        elif kind == "solution_displayed":
            if open_record is None or event.data["x"] != open_record.phase_index:
                raise LogSchemaError(f"solution_displayed({event.data['x']}) outside its phase")
            if not open_record.solution_displayed:
                open_record.solution_displayed = True
                solution_count += 1
        elif kind == "phase_completed":
            x = event.data["x"]
            if open_record is None or x != open_record.phase_index:
                raise LogSchemaError(f"phase_completed({x}) outside its phase")
            if open_record.answered_at is None:
                raise LogSchemaError(f"phase_completed({x}) without a correct answer")
            open_record.completed = True
            records.append(open_record)
            open_record = None
        # questionnaire_submitted and session_finished carry no evidence.

    if open_record is not None:
        records.append(open_record)
    return _WalkedLog(
        session_id=session_id,
        definition_id=first.data.get("definition_id"),
        answers=answers,
        records=tuple(records),
        action_count=action_count,
        solution_count=solution_count,
    )


def _outcome(record: _PhaseRecord) -> PhaseOutcome:
    answered = record.answered_at if record.answered_at is not None else record.entered_at
    return PhaseOutcome(
        phase_index=record.phase_index,
        completion_seconds=Fraction(answered - record.entered_at, 1000),
        matched_command_count=record.matched_commands,
        wrong_submissions=record.wrong_submissions,
        correct_answer_submitted=record.answered_at is not None,
        solution_displayed=record.solution_displayed,
        hints_taken=record.hints_taken,
    )


def replay_session(
    events: list[SessionEvent],
    definition: TrainingDefinition,
    answers: Mapping[str, str] | None = None,
) -> SimulatedPath:
    """Decide, for every phase the participant entered, which task the
    model would assign.

    ``answers`` is a sidecar pre-assessment for logs that lack one (older
    non-adaptive recordings); a log's own assessment wins. With neither,
    every p bit scores 0, same as unanswered questions.
    """
    walked = _walk(events, definition)
    effective = walked.answers if walked.answers is not None else (answers or {})
    p_bits = evaluate_pretraining(dict(effective), definition.assessment, definition.phases)

    vectors = MetricVectors(p=p_bits)
    steps: list[PathStep] = []
    for record in walked.records:
        x = record.phase_index
        assignment = decide(definition, vectors, x)
        steps.append(PathStep(phase=x, task=assignment.task_index,
                              performance=assignment.performance))
        if record.completed:
            bits = derive_outcome_bits(_outcome(record), definition.phase(x))
            vectors = vectors.with_phase_bits(*bits)
    return SimulatedPath(
        participant_id=walked.session_id,
        definition_id=definition.id,
        assigned_tasks=tuple(steps),
        source="simulated",
    )


def recorded_path(events: list[SessionEvent], definition: TrainingDefinition) -> SimulatedPath:
    """The path a log actually took, with the performance values the model
    produces for it; only valid for logs recorded under this definition."""
    walked = _walk(events, definition)
    effective = walked.answers or {}
    p_bits = evaluate_pretraining(dict(effective), definition.assessment, definition.phases)
    vectors = MetricVectors(p=p_bits)
    steps: list[PathStep] = []
    for record in walked.records:
        x = record.phase_index
        assignment = decide(definition, vectors, x)
        if assignment.task_index != record.recorded_task:
            raise PhaseMismatch(
                f"log records task {record.recorded_task} in phase {x}, but this"
                f" definition decides task {assignment.task_index}"
            )
        steps.append(PathStep(phase=x, task=record.recorded_task,
                              performance=assignment.performance))
        if record.completed:
            bits = derive_outcome_bits(_outcome(record), definition.phase(x))
            vectors = vectors.with_phase_bits(*bits)
    return SimulatedPath(
        participant_id=walked.session_id,
        definition_id=definition.id,
        assigned_tasks=tuple(steps),
        source="recorded",
    )


def aggregate_transitions(paths: list[SimulatedPath]) -> TransitionGraph:
    """Merge paths into a task-to-task flow graph.

    Associative: aggregating a concatenation equals merging the parts.
    Every path must come from the same definition.
    """
    definition_ids = {p.definition_id for p in paths}
    if len(definition_ids) > 1:
        raise MixedDefinitions(
            f"paths span definitions {', '.join(sorted(definition_ids))}"
        )
    visits: Counter = Counter()
    ends: Counter = Counter()
    flows: Counter = Counter()
    for path in paths:
        steps = path.assigned_tasks
        for step in steps:
            visits[(step.phase, step.task)] += 1
        for a, b in zip(steps, steps[1:]):
            flows[((a.phase, a.task), (b.phase, b.task))] += 1
        if steps:
            last = steps[-1]
            ends[(last.phase, last.task)] += 1
    nodes = tuple(
        GraphNode(phase=phase, task=task, count=visits[(phase, task)],
                  ends=ends[(phase, task)])
        for phase, task in sorted(visits)
    )
    links = tuple(
        GraphLink(source=source, target=target, value=flows[(source, target)])
        for source, target in sorted(flows)
    )
    return TransitionGraph(
        definition_id=next(iter(definition_ids)) if definition_ids else "",
        nodes=nodes,
        links=links,
    )


def summarize_sessions(
    logs: list[list[SessionEvent]], definition: TrainingDefinition
) -> SessionStats:
    """Cohort statistics: completion ratio (all phases done, no solution
    shown), the phase most participants ended in (ties break low), and the
    mean number of actions (phase starts, answer submissions, hint and
    solution displays)."""
    if not logs:
        raise EmptyCohort("no session logs to summarize")
    walked = [_walk(events, definition) for events in logs]
    m = definition.phase_count
    completers = sum(
        1
        for w in walked
        if w.solution_count == 0
        and sum(1 for r in w.records if r.completed) == m
    )
    end_phases = Counter(
        w.records[-1].phase_index if w.records else 0 for w in walked
    )
    modal = min(end_phases, key=lambda phase: (-end_phases[phase], phase))
    total_actions = sum(w.action_count for w in walked)
    return SessionStats(
        training=definition.id,
        participants=len(walked),
        completion_ratio=Fraction(completers, len(walked)),
        modal_end_phase=modal,
        avg_actions=Fraction(total_actions, len(walked)),
    )


def _csv_number(value: Fraction) -> str:
    if value.denominator == 1:
        return str(int(value))
    return format(float(value), ".6g")


def format_stats_csv(stats: list[SessionStats]) -> str:
    """Fixed-column CSV used by the command line and the service."""
    lines = ["training,completion_ratio,modal_end_phase,avg_actions"]
    for s in stats:
        lines.append(
            f"{s.training},{_csv_number(s.completion_ratio)},"
            f"{s.modal_end_phase},{_csv_number(s.avg_actions)}"
        )
    return "\n".join(lines) + "\n"


def sweep_weights(
    logs: list[list[SessionEvent]],
    definition: TrainingDefinition,
    weight_variants: list[tuple[WeightMatrix, ...]],
    answers: Mapping[str, Mapping[str, str]] | None = None,
) -> list[SweepResult]:
    """Replay a cohort under each weight variant independently.

    Every variant must validate against the definition before any replay
    runs. ``answers`` optionally maps session ids to sidecar assessments.
    """
    variants: list[TrainingDefinition] = []
    for i, matrices in enumerate(weight_variants):
        candidate = replace(definition, weight_matrices=tuple(matrices))
        report = validate(candidate)
        if not report.ok:
            raise ValueError(
                f"weight variant {i} does not validate: {', '.join(report.codes())}"
            )
        variants.append(candidate)

    results: list[SweepResult] = []
    for i, candidate in enumerate(variants):
        paths = []
        for events in logs:
            sidecar = None
            if answers and events:
                sidecar = answers.get(events[0].session_id)
            paths.append(replay_session(events, candidate, answers=sidecar))
        graph = aggregate_transitions(paths)
        distribution = Counter(
            step.task for path in paths for step in path.assigned_tasks
        )
        results.append(
            SweepResult(
                variant_index=i,
                graph=graph,
                task_index_distribution=dict(sorted(distribution.items())),
            )
        )
    return results


# EVENT_KINDS is re-exported for log tooling that filters by kind.
__all__ = [
    "ACTION_KINDS",
    "EVENT_KINDS",
    "EmptyCohort",
    "GraphLink",
    "GraphNode",
    "LogSchemaError",
    "MixedDefinitions",
    "PathStep",
    "PhaseMismatch",
    "SessionStats",
    "SimulatedPath",
    "SweepResult",
    "TransitionGraph",
    "aggregate_transitions",
    "format_stats_csv",
    "parse_event_stream",
    "recorded_path",
    "replay_session",
    "summarize_sessions",
    "sweep_weights",
]
