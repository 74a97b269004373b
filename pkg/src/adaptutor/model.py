"""Domain types for graph-structured adaptive trainings.

A training is an ordered list of phases, each holding variant tasks of
decreasing difficulty (task 1 is the hardest). Trainees are routed through
the graph by a decision component that weighs pre-assessment answers and
behavioral evidence from completed phases; the weights live in one matrix
per phase with columns (alpha, beta, gamma, delta, epsilon) covering the
five evidence kinds: assessment, key commands, answers, timeliness, and
solution restraint.

This module owns the definition file format (JSON, schema shipped in
``docs/training-definition.schema.json``), its parser and serializer, and
semantic validation. Weights are exact rationals: JSON numbers are read
with decimal-literal semantics and strings like ``"1/3"`` are accepted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Any, Literal

WEIGHT_COLUMNS = ("alpha", "beta", "gamma", "delta", "epsilon")

SELF_REPORT_SCALE = ("High", "Medium", "Low", "None")
DEFAULT_SUFFICIENT_SELF_REPORT = frozenset({"High", "Medium"})
DEFAULT_COMMAND_COUNT_THRESHOLD = 10


class ParseError(Exception):
    """Raised on malformed input documents; carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class CommandPattern:
    """Matcher for command events captured in the learning environment."""

    pattern: str
    match_kind: Literal["command-name-equals", "substring"] = "command-name-equals"

    def matches(self, raw_command: str) -> bool:
        if self.match_kind == "substring":
            return self.pattern in raw_command
        tokens = raw_command.split()
        return bool(tokens) and tokens[0] == self.pattern


@dataclass(frozen=True)
class Question:
    """One pre-assessment question, either a knowledge quiz or a self-report.

    Knowledge quizzes carry the full option list plus the subset counted
    correct. Self-reports use the fixed High/Medium/Low/None scale and are
    counted correct when the answer falls in ``sufficient_self_report``.
    """

    id: str
    wording: str
    kind: Literal["knowledge-quiz", "self-report"]
    options: tuple[str, ...] = ()
    correct_options: frozenset[str] = frozenset()
    sufficient_self_report: frozenset[str] = DEFAULT_SUFFICIENT_SELF_REPORT

    def is_correct(self, answer: str) -> bool:
        if self.kind == "knowledge-quiz":
            return answer in self.correct_options
        return answer in self.sufficient_self_report


@dataclass(frozen=True)
class QuestionGroup:
    """Set of questions tied to a phase; satisfied at the essential ratio."""

    id: str
    question_ids: frozenset[str]
    essential_ratio: Fraction = Fraction(1)


@dataclass(frozen=True)
class Assessment:
    questions: tuple[Question, ...]
    groups: tuple[QuestionGroup, ...]

    def question_by_id(self, question_id: str) -> Question | None:
        for q in self.questions:
            if q.id == question_id:
                return q
        return None

    def group_by_id(self, group_id: str) -> QuestionGroup | None:
        for g in self.groups:
            if g.id == group_id:
                return g
        return None


@dataclass(frozen=True)
class Hint:
    title: str
    text: str


@dataclass(frozen=True)
class Task:
    """One variant task; index 1 is the base (hardest) task of its phase."""

    index: int
    assignment_text: str
    hints: tuple[Hint, ...] = ()
    includes_solution_walkthrough: bool = False
    solution: str = ""


@dataclass(frozen=True)
class Phase:
    """One topical unit; the answer and evaluation settings are shared by
    all its tasks, so a phase is completed the same way whichever task
    was assigned."""

    index: int
    title: str
    tasks: tuple[Task, ...]
    expected_completion_seconds: int
    answer: str
    expected_commands: tuple[CommandPattern, ...] = ()
    command_count_threshold: int = DEFAULT_COMMAND_COUNT_THRESHOLD
    max_wrong_submissions: int | None = None
    question_group_ref: str | None = None

    @property
    def task_count(self) -> int:
        return len(self.tasks)

    def task(self, index: int) -> Task:
        for t in self.tasks:
            if t.index == index:
                return t
        raise KeyError(f"phase {self.index} has no task {index}")

    def count_matched_commands(self, raw_commands: list[str]) -> int:
        return sum(
            1
            for cmd in raw_commands
            if any(p.matches(cmd) for p in self.expected_commands)
        )


@dataclass(frozen=True)
class WeightMatrix:
    """Weights for one phase's decision: row i weighs evidence from phase i,
    columns in order (alpha, beta, gamma, delta, epsilon)."""

    phase_index: int
    rows: tuple[tuple[Fraction, Fraction, Fraction, Fraction, Fraction], ...]

    @property
    def total_weight(self) -> Fraction:
        return sum((w for row in self.rows for w in row), Fraction(0))


@dataclass(frozen=True)
class TrainingDefinition:
    """A full training graph plus the matrices configuring its decisions."""

    id: str
    title: str
    intro: str
    assessment: Assessment
    phases: tuple[Phase, ...]
    weight_matrices: tuple[WeightMatrix, ...]
    post_questionnaire: tuple[str, ...] = ()

    @property
    def phase_count(self) -> int:
        return len(self.phases)

    def phase(self, index: int) -> Phase:
        for p in self.phases:
            if p.index == index:
                return p
        raise KeyError(f"no phase {index}")

    def matrix_for(self, phase_index: int) -> WeightMatrix:
        for m in self.weight_matrices:
            if m.phase_index == phase_index:
                return m
        raise KeyError(f"no weight matrix for phase {phase_index}")

    def group_for_phase(self, phase_index: int) -> QuestionGroup | None:
        ref = self.phase(phase_index).question_group_ref
        if ref is None:
            return None
        return self.assessment.group_by_id(ref)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

Severity = Literal["error", "warning"]


@dataclass(frozen=True)
class Violation:
    code: str
    location: str
    message: str
    severity: Severity = "error"


@dataclass(frozen=True)
class ValidationReport:
    """Violations found in a definition. Violations are data, not failures;
    ``empty`` means fully clean, ``ok`` means no error-severity entries."""

    violations: tuple[Violation, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.violations

    @property
    def ok(self) -> bool:
        return all(v.severity != "error" for v in self.violations)

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


def validate(definition: TrainingDefinition) -> ValidationReport:
    """Check a parsed definition against the structural model assumptions.

    Pure and deterministic. Notable codes: MATRIX_ROW_COUNT (matrix for
    phase x must have x rows), ZERO_DENOMINATOR (an all-zero matrix would
    make the performance formula undefined), IN_PHASE_BEHAVIORAL_WEIGHT
    (row x of matrix x may weigh only the alpha column, since behavioral
    evidence for a phase cannot exist before the phase is played), and the
    warning ALPHA_WEIGHT_WITHOUT_GROUP for phases whose assessment weight
    can never be satisfied because no question group is attached.
    """
    out: list[Violation] = []

    def err(code: str, location: str, message: str) -> None:
        out.append(Violation(code, location, message))

    def warn(code: str, location: str, message: str) -> None:
        out.append(Violation(code, location, message, severity="warning"))

    m = len(definition.phases)
    if m == 0:
        err("NO_PHASES", "phases", "a training needs at least one phase")

    question_ids = [q.id for q in definition.assessment.questions]
    dup_q = {q for q in question_ids if question_ids.count(q) > 1}
    for q in sorted(dup_q):
        err("DUPLICATE_QUESTION_ID", "assessment.questions", f"question id {q!r} appears more than once")

    group_ids = [g.id for g in definition.assessment.groups]
    dup_g = {g for g in group_ids if group_ids.count(g) > 1}
    for g in sorted(dup_g):
        err("DUPLICATE_GROUP_ID", "assessment.groups", f"group id {g!r} appears more than once")

    known_questions = set(question_ids)
    for gi, group in enumerate(definition.assessment.groups):
        loc = f"assessment.groups[{gi}]"
        if not group.question_ids:
            err("EMPTY_QUESTION_GROUP", loc, f"group {group.id!r} has no questions")
        for qid in sorted(group.question_ids - known_questions):
            err("UNKNOWN_QUESTION", loc, f"group {group.id!r} references unknown question {qid!r}")
        if not (0 <= group.essential_ratio <= 1):
            err(
                "ESSENTIAL_RATIO_RANGE",
                loc,
                f"essential_ratio {group.essential_ratio} outside [0, 1]",
            )

    known_groups = set(group_ids)
    for pi, phase in enumerate(definition.phases):
        loc = f"phases[{pi}]"
        if phase.index != pi + 1:
            err("PHASE_INDEX", loc, f"expected phase index {pi + 1}, found {phase.index}")
        if not phase.tasks:
            err("EMPTY_PHASE", loc, "a phase needs at least one task")
        for ti, task in enumerate(phase.tasks):
            if task.index != ti + 1:
                err("TASK_INDEX", f"{loc}.tasks[{ti}]", f"expected task index {ti + 1}, found {task.index}")
            if task.includes_solution_walkthrough and ti != len(phase.tasks) - 1:
                err(
                    "WALKTHROUGH_NOT_LAST",
                    f"{loc}.tasks[{ti}]",
                    "a step-by-step walkthrough must be the easiest (last) task",
                )
        if phase.expected_completion_seconds <= 0:
            err("EXPECTED_TIME", loc, "expected_completion_seconds must be positive")
        if phase.command_count_threshold < 1:
            err("COMMAND_THRESHOLD", loc, "command_count_threshold must be at least 1")
        if phase.max_wrong_submissions is not None and phase.max_wrong_submissions < 1:
            err("MAX_WRONG_SUBMISSIONS", loc, "max_wrong_submissions must be positive or unlimited")
        if phase.question_group_ref is not None and phase.question_group_ref not in known_groups:
            err(
                "UNKNOWN_QUESTION_GROUP",
                loc,
                f"phase {phase.index} references unknown question group {phase.question_group_ref!r}",
            )

    expected_indices = [p.index for p in definition.phases]
    matrix_indices = [w.phase_index for w in definition.weight_matrices]
    if matrix_indices != expected_indices:
        err(
            "MATRIX_COUNT",
            "weight_matrices",
            f"need exactly one matrix per phase in order, found phase indices {matrix_indices}",
        )

    phases_by_index = {p.index: p for p in definition.phases}
    for wi, matrix in enumerate(definition.weight_matrices):
        loc = f"weight_matrices[{wi}]"
        x = matrix.phase_index
        if len(matrix.rows) != x:
            err(
                "MATRIX_ROW_COUNT",
                loc,
                f"matrix for phase {x} must have {x} rows, found {len(matrix.rows)}",
            )
        for ri, row in enumerate(matrix.rows):
            for ci, w in enumerate(row):
                if w < 0:
                    err(
                        "NEGATIVE_WEIGHT",
                        f"{loc}.rows[{ri}]",
                        f"weight {WEIGHT_COLUMNS[ci]} is negative",
                    )
        if matrix.total_weight == 0:
            err("ZERO_DENOMINATOR", loc, f"matrix for phase {x} is all zero")
        if len(matrix.rows) == x and x >= 1:
            own_row = matrix.rows[x - 1]
            for ci in range(1, 5):
                if own_row[ci] != 0:
                    err(
                        "IN_PHASE_BEHAVIORAL_WEIGHT",
                        f"{loc}.rows[{x - 1}]",
                        f"row {x} weighs {WEIGHT_COLUMNS[ci]}, but behavioral evidence"
                        f" for phase {x} does not exist when phase {x} is decided",
                    )
        # An alpha weight on row i is dead configuration unless phase i maps
        # to a question group; flag it rather than silently scoring zero.
        for ri, row in enumerate(matrix.rows):
            phase = phases_by_index.get(ri + 1)
            if phase is not None and row[0] > 0 and phase.question_group_ref is None:
                warn(
                    "ALPHA_WEIGHT_WITHOUT_GROUP",
                    f"{loc}.rows[{ri}]",
                    f"alpha weight references phase {ri + 1}, which has no question group",
                )

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _expect(obj: Any, path: str, kind: type, name: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(path, f"expected an object, found {type(obj).__name__}")
    if name not in obj:
        raise ParseError(f"{path}.{name}" if path else name, "missing required field")
    value = obj[name]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParseError(f"{path}.{name}", f"expected a number, found {type(value).__name__}")
        return value
    if kind is int and isinstance(value, bool):
        raise ParseError(f"{path}.{name}", "expected an integer, found a boolean")
    if not isinstance(value, kind):
        raise ParseError(f"{path}.{name}", f"expected {kind.__name__}, found {type(value).__name__}")
    return value


def _optional(obj: dict, path: str, kind: type, name: str, default: Any) -> Any:
    if name not in obj or obj[name] is None:
        return default
    return _expect(obj, path, kind, name)


def _no_extras(obj: Any, path: str, *allowed: str) -> None:
    # A misspelled optional key would silently fall back to its default,
    # so unknown keys are rejected rather than ignored.
    if not isinstance(obj, dict):
        raise ParseError(path, f"expected an object, found {type(obj).__name__}")
    extras = sorted(set(obj) - set(allowed))
    if extras:
        raise ParseError(path or "document", f"unknown fields: {', '.join(extras)}")


def parse_weight(value: Any, path: str) -> Fraction:
    """Read a weight as an exact rational.

    Integers stay exact, floats are taken as decimal literals (0.1 means
    1/10), and strings may use fraction syntax like "1/3".
    """
    try:
        if isinstance(value, bool):
            raise ValueError("booleans are not weights")
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(path, f"not a rational number: {value!r} ({exc})") from None
    raise ParseError(path, f"not a rational number: {value!r}")


def _parse_question(obj: Any, path: str) -> Question:
    qid = _expect(obj, path, str, "id")
    wording = _expect(obj, path, str, "wording")
    kind = _expect(obj, path, str, "kind")
    if kind == "knowledge-quiz":
        _no_extras(obj, path, "id", "wording", "kind", "options", "correct_options")
        options = _expect(obj, path, list, "options")
        correct = _expect(obj, path, list, "correct_options")
        return Question(
            id=qid,
            wording=wording,
            kind="knowledge-quiz",
            options=tuple(str(o) for o in options),
            correct_options=frozenset(str(o) for o in correct),
        )
    if kind == "self-report":
        _no_extras(obj, path, "id", "wording", "kind", "sufficient_self_report")
        sufficient = _optional(obj, path, list, "sufficient_self_report", None)
        for level in sufficient or ():
            if level not in SELF_REPORT_SCALE:
                raise ParseError(f"{path}.sufficient_self_report", f"unknown scale level {level!r}")
        return Question(
            id=qid,
            wording=wording,
            kind="self-report",
            sufficient_self_report=(
                DEFAULT_SUFFICIENT_SELF_REPORT if sufficient is None else frozenset(sufficient)
            ),
        )
    raise ParseError(f"{path}.kind", f"unknown question kind {kind!r}")


def _parse_assessment(obj: Any, path: str) -> Assessment:
    _no_extras(obj, path, "questions", "groups")
    questions = [
        _parse_question(q, f"{path}.questions[{i}]")
        for i, q in enumerate(_expect(obj, path, list, "questions"))
    ]
    groups = []
    for i, g in enumerate(_optional(obj, path, list, "groups", [])):
        gpath = f"{path}.groups[{i}]"
        _no_extras(g, gpath, "id", "question_ids", "essential_ratio")
        ratio_raw = g.get("essential_ratio", 1)
        groups.append(
            QuestionGroup(
                id=_expect(g, gpath, str, "id"),
                question_ids=frozenset(
                    str(q) for q in _expect(g, gpath, list, "question_ids")
                ),
                essential_ratio=parse_weight(ratio_raw, f"{gpath}.essential_ratio"),
            )
        )
    return Assessment(questions=tuple(questions), groups=tuple(groups))


def _parse_task(obj: Any, path: str) -> Task:
    _no_extras(
        obj, path,
        "index", "assignment_text", "hints", "includes_solution_walkthrough", "solution",
    )
    hints = []
    for i, h in enumerate(_optional(obj, path, list, "hints", [])):
        hpath = f"{path}.hints[{i}]"
        _no_extras(h, hpath, "title", "text")
        hints.append(Hint(title=_expect(h, hpath, str, "title"), text=_expect(h, hpath, str, "text")))
    return Task(
        index=_expect(obj, path, int, "index"),
        assignment_text=_expect(obj, path, str, "assignment_text"),
        hints=tuple(hints),
        includes_solution_walkthrough=_optional(obj, path, bool, "includes_solution_walkthrough", False),
        solution=_optional(obj, path, str, "solution", ""),
    )


def _parse_phase(obj: Any, path: str) -> Phase:
    _no_extras(
        obj, path,
        "index", "title", "tasks", "expected_completion_seconds", "answer",
        "expected_commands", "command_count_threshold", "max_wrong_submissions",
        "question_group_ref",
    )
    patterns = []
    for i, p in enumerate(_optional(obj, path, list, "expected_commands", [])):
        ppath = f"{path}.expected_commands[{i}]"
        _no_extras(p, ppath, "pattern", "match_kind")
        kind = _optional(p, ppath, str, "match_kind", "command-name-equals")
        if kind not in ("command-name-equals", "substring"):
            raise ParseError(f"{ppath}.match_kind", f"unknown match kind {kind!r}")
        patterns.append(CommandPattern(pattern=_expect(p, ppath, str, "pattern"), match_kind=kind))
    tasks = [
        _parse_task(t, f"{path}.tasks[{i}]")
        for i, t in enumerate(_expect(obj, path, list, "tasks"))
    ]
    return Phase(
        index=_expect(obj, path, int, "index"),
        title=_expect(obj, path, str, "title"),
        tasks=tuple(tasks),
        expected_completion_seconds=_expect(obj, path, int, "expected_completion_seconds"),
        answer=_expect(obj, path, str, "answer"),
        expected_commands=tuple(patterns),
        command_count_threshold=_optional(
            obj, path, int, "command_count_threshold", DEFAULT_COMMAND_COUNT_THRESHOLD
        ),
        max_wrong_submissions=_optional(obj, path, int, "max_wrong_submissions", None),
        question_group_ref=_optional(obj, path, str, "question_group_ref", None),
    )


def _parse_matrix(obj: Any, path: str) -> WeightMatrix:
    _no_extras(obj, path, "phase_index", "rows")
    rows = []
    for i, row in enumerate(_expect(obj, path, list, "rows")):
        rpath = f"{path}.rows[{i}]"
        if not isinstance(row, list) or len(row) != len(WEIGHT_COLUMNS):
            raise ParseError(rpath, f"a row must be an array of {len(WEIGHT_COLUMNS)} weights")
        rows.append(tuple(parse_weight(w, f"{rpath}[{j}]") for j, w in enumerate(row)))
    return WeightMatrix(phase_index=_expect(obj, path, int, "phase_index"), rows=tuple(rows))


def parse_training_definition(document: Any) -> TrainingDefinition:
    """Build a TrainingDefinition from an already-decoded JSON document."""
    _no_extras(
        document, "",
        "id", "title", "intro", "assessment", "phases", "weight_matrices",
        "post_questionnaire",
    )
    phases = [
        _parse_phase(p, f"phases[{i}]")
        for i, p in enumerate(_expect(document, "", list, "phases"))
    ]
    matrices = [
        _parse_matrix(w, f"weight_matrices[{i}]")
        for i, w in enumerate(_expect(document, "", list, "weight_matrices"))
    ]
    post = _optional(document, "", list, "post_questionnaire", [])
    return TrainingDefinition(
        id=_expect(document, "", str, "id"),
        title=_expect(document, "", str, "title"),
        intro=_expect(document, "", str, "intro"),
        assessment=_parse_assessment(_expect(document, "", dict, "assessment"), "assessment"),
        phases=tuple(phases),
        weight_matrices=tuple(matrices),
        post_questionnaire=tuple(str(q) for q in post),
    )


def load_training_definition(source: bytes | str | IO) -> TrainingDefinition:
    """Load a definition from JSON bytes, text, or a readable stream.

    Parsing is purely structural; run validate() for the semantic checks.
    """
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}", f"invalid JSON: {exc.msg}") from None
    return parse_training_definition(document)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _weight_out(w: Fraction) -> int | str:
    return int(w) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"


def serialize_training_definition(definition: TrainingDefinition) -> dict:
    """Inverse of parse_training_definition on semantic content."""
    doc: dict[str, Any] = {
        "id": definition.id,
        "title": definition.title,
        "intro": definition.intro,
        "assessment": {
            "questions": [
                {
                    "id": q.id,
                    "wording": q.wording,
                    "kind": q.kind,
                    **(
                        {
                            "options": list(q.options),
                            "correct_options": sorted(q.correct_options),
                        }
                        if q.kind == "knowledge-quiz"
                        else {"sufficient_self_report": sorted(q.sufficient_self_report)}
                    ),
                }
                for q in definition.assessment.questions
            ],
            "groups": [
                {
                    "id": g.id,
                    "question_ids": sorted(g.question_ids),
                    "essential_ratio": _weight_out(g.essential_ratio),
                }
                for g in definition.assessment.groups
            ],
        },
        "phases": [
            {
                "index": p.index,
                "title": p.title,
                "expected_completion_seconds": p.expected_completion_seconds,
                "answer": p.answer,
                "expected_commands": [
                    {"pattern": c.pattern, "match_kind": c.match_kind}
                    for c in p.expected_commands
                ],
                "command_count_threshold": p.command_count_threshold,
                "max_wrong_submissions": p.max_wrong_submissions,
                "question_group_ref": p.question_group_ref,
                "tasks": [
                    {
                        "index": t.index,
                        "assignment_text": t.assignment_text,
                        "hints": [{"title": h.title, "text": h.text} for h in t.hints],
                        "includes_solution_walkthrough": t.includes_solution_walkthrough,
                        "solution": t.solution,
                    }
                    for t in p.tasks
                ],
            }
            for p in definition.phases
        ],
        "weight_matrices": [
            {
                "phase_index": w.phase_index,
                "rows": [[_weight_out(c) for c in row] for row in w.rows],
            }
            for w in definition.weight_matrices
        ],
    }
    if definition.post_questionnaire:
        doc["post_questionnaire"] = list(definition.post_questionnaire)
    return doc


def dump_training_definition(definition: TrainingDefinition) -> bytes:
    doc = serialize_training_definition(definition)
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")
