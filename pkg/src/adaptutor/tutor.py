"""The decision component: binary evidence in, a task assignment out.

Evidence about a trainee is five binary vectors, one bit per phase:

* ``p``: the pre-assessment question group tied to the phase was satisfied,
* ``k``: the phase's expected key commands were used, within the count
  threshold,
* ``a``: the phase's answer was submitted within the wrong-submission
  budget,
* ``t``: the phase was completed faster than its expected time (strict),
* ``s``: the solution was NOT displayed.

Performance entering phase x is the weighted fraction of satisfied bits
over phases 1..x, where the phase's weight matrix says which bits matter
and how much:

    f(x) = sum_i [p_i*w_ia + s_i*(k_i*w_ib + a_i*w_ig + t_i*w_id + w_ie)]
           / sum_i (w_ia + w_ib + w_ig + w_id + w_ie)

``s`` multiplies the whole behavioral term, so a trainee who displayed the
solution gets no command/answer/time credit for that phase. The suitable
task is then

    T_x = n_x                      if f(x) = 0
        = trunc(n_x*(1 - f(x)))+1  otherwise

with task 1 the hardest and task n_x the easiest. All arithmetic is exact
(fractions.Fraction); floats appear only in display serialization, because
trunc makes band edges like f = 1/3 with n = 3 sensitive to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .model import Assessment, Phase, TrainingDefinition, WeightMatrix


class UnknownQuestionId(Exception):
    """An answer references a question the assessment does not contain."""


class ZeroDenominator(Exception):
    """The weight matrix sums to zero; unreachable on validated definitions."""


@dataclass(frozen=True)
class MetricVectors:
    """Binary evidence for one trainee.

    ``p`` has one bit per phase and is fixed once the pre-assessment is
    evaluated. The behavioral vectors only hold bits for completed phases,
    so their common length is the highest completed phase index.
    """

    p: tuple[int, ...]
    k: tuple[int, ...] = ()
    a: tuple[int, ...] = ()
    t: tuple[int, ...] = ()
    s: tuple[int, ...] = ()

    def __post_init__(self):
        if not (len(self.k) == len(self.a) == len(self.t) == len(self.s)):
            raise ValueError("behavioral vectors must cover the same completed phases")

    @property
    def completed_through(self) -> int:
        return len(self.k)

    def with_phase_bits(self, k: int, a: int, t: int, s: int) -> MetricVectors:
        """Vectors extended by the bits of the next completed phase."""
        return MetricVectors(
            p=self.p,
            k=self.k + (k,),
            a=self.a + (a,),
            t=self.t + (t,),
            s=self.s + (s,),
        )


@dataclass(frozen=True)
class PhaseOutcome:
    """What actually happened in one phase, before binarization."""

    phase_index: int
    completion_seconds: Fraction
    matched_command_count: int
    wrong_submissions: int
    correct_answer_submitted: bool
    solution_displayed: bool
    hints_taken: int = 0


@dataclass(frozen=True)
class TermContribution:
    """One weighted term of the performance numerator, for auditability.

    Only terms with a positive weight are recorded. ``satisfied`` is the
    effective bit product (for behavioral columns that includes the
    solution bit), so contribution = weight if satisfied else 0.
    """

    phase: int
    column: str
    weight: Fraction
    satisfied: bool
    contribution: Fraction

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "column": self.column,
            "weight": str(self.weight),
            "satisfied": self.satisfied,
            "contribution": str(self.contribution),
        }


@dataclass(frozen=True)
class TaskAssignment:
    """Decision output for one phase: the task plus its full audit trail."""

    phase_index: int
    task_index: int
    performance: Fraction
    numerator: Fraction
    denominator: Fraction
    term_breakdown: tuple[TermContribution, ...] = ()

    def to_dict(self) -> dict:
        return {
            "phase": self.phase_index,
            "task_index": self.task_index,
            "performance": str(self.performance),
            "performance_value": float(self.performance),
            "numerator": str(self.numerator),
            "denominator": str(self.denominator),
            "terms": [t.to_dict() for t in self.term_breakdown],
        }


def evaluate_pretraining(
    answers: dict[str, str],
    assessment: Assessment,
    phases: tuple[Phase, ...] | list[Phase],
) -> tuple[int, ...]:
    """Compute the p vector from pre-assessment answers.

    A phase's bit is 1 when the fraction of correctly answered questions
    in its group reaches the group's essential ratio (boundary inclusive).
    Missing answers count as incorrect; phases without a question group
    score 0.

    Raises UnknownQuestionId for answers outside the assessment.
    """
    known = {q.id for q in assessment.questions}
    unknown = sorted(set(answers) - known)
    if unknown:
        raise UnknownQuestionId(f"answers reference unknown questions: {', '.join(unknown)}")

    bits = []
    for phase in phases:
        group = (
            assessment.group_by_id(phase.question_group_ref)
            if phase.question_group_ref is not None
            else None
        )
        if group is None or not group.question_ids:
            bits.append(0)
            continue
        correct = 0
        for qid in group.question_ids:
            question = assessment.question_by_id(qid)
            if question is not None and qid in answers and question.is_correct(answers[qid]):
                correct += 1
        satisfied = Fraction(correct, len(group.question_ids)) >= group.essential_ratio
        bits.append(1 if satisfied else 0)
    return tuple(bits)


def derive_outcome_bits(outcome: PhaseOutcome, phase: Phase) -> tuple[int, int, int, int]:
    """Binarize a phase outcome into its (k, a, t, s) bits.

    k needs at least one matched command and at most the threshold; a
    needs the correct answer within the wrong-submission budget; t is
    strict (finishing exactly on the expected time scores 0); s is 1
    unless the solution was displayed.
    """
    if outcome.phase_index != phase.index:
        raise ValueError(f"outcome is for phase {outcome.phase_index}, not {phase.index}")
    k = 1 if 1 <= outcome.matched_command_count <= phase.command_count_threshold else 0
    within_budget = (
        phase.max_wrong_submissions is None
        or outcome.wrong_submissions <= phase.max_wrong_submissions
    )
    a = 1 if outcome.correct_answer_submitted and within_budget else 0
    t = 1 if outcome.completion_seconds < phase.expected_completion_seconds else 0
    s = 0 if outcome.solution_displayed else 1
    return k, a, t, s


def _bit(vector: tuple[int, ...], i: int) -> int:
    # Rows beyond the evidence default to 0; on validated matrices those
    # rows carry no behavioral weight, so the default never shows in f.
    return vector[i - 1] if i <= len(vector) else 0


def performance(x: int, vectors: MetricVectors, matrix: WeightMatrix) -> Fraction:
    """Weighted fraction of satisfied evidence entering phase x, in [0, 1]."""
    numerator, denominator = performance_parts(x, vectors, matrix)
    if denominator == 0:
        raise ZeroDenominator(f"weight matrix for phase {x} sums to zero")
    return numerator / denominator


def performance_parts(
    x: int, vectors: MetricVectors, matrix: WeightMatrix
) -> tuple[Fraction, Fraction]:
    """Numerator and denominator of the performance fraction, unreduced."""
    if len(matrix.rows) < x:
        raise ValueError(f"matrix has {len(matrix.rows)} rows, phase {x} needs {x}")
    if vectors.completed_through < x - 1:
        raise ValueError(
            f"deciding phase {x} needs evidence through phase {x - 1},"
            f" have {vectors.completed_through}"
        )
    numerator = Fraction(0)
    denominator = Fraction(0)
    for i in range(1, x + 1):
        w_alpha, w_beta, w_gamma, w_delta, w_epsilon = matrix.rows[i - 1]
        s_i = _bit(vectors.s, i)
        numerator += _bit(vectors.p, i) * w_alpha + s_i * (
            _bit(vectors.k, i) * w_beta
            + _bit(vectors.a, i) * w_gamma
            + _bit(vectors.t, i) * w_delta
            + w_epsilon
        )
        denominator += w_alpha + w_beta + w_gamma + w_delta + w_epsilon
    return numerator, denominator


def assign_task(f: Fraction, n: int) -> int:
    """Map a performance value to the most suitable task index in 1..n.

    Zero performance pins the easiest task n; otherwise the band is
    trunc(n*(1-f)) + 1, which is also n as f approaches 0, so the mapping
    has no jump at the bottom.
    """
    if n < 1:
        raise ValueError("a phase needs at least one task")
    f = Fraction(f)
    if not 0 <= f <= 1:
        raise ValueError(f"performance {f} outside [0, 1]")
    if f == 0:
        return n
    return int(n * (1 - f)) + 1


def decide(definition: TrainingDefinition, vectors: MetricVectors, x: int) -> TaskAssignment:
    """Run the decision for phase x: performance, task choice, audit trail."""
    phase = definition.phase(x)
    matrix = definition.matrix_for(x)

    terms: list[TermContribution] = []
    for i in range(1, x + 1):
        row = matrix.rows[i - 1]
        s_i = _bit(vectors.s, i)
        effective = {
            "alpha": _bit(vectors.p, i),
            "beta": s_i * _bit(vectors.k, i),
            "gamma": s_i * _bit(vectors.a, i),
            "delta": s_i * _bit(vectors.t, i),
            "epsilon": s_i,
        }
        for column, weight in zip(effective, row):
            if weight > 0:
                satisfied = bool(effective[column])
                terms.append(
                    TermContribution(
                        phase=i,
                        column=column,
                        weight=weight,
                        satisfied=satisfied,
                        contribution=weight if satisfied else Fraction(0),
                    )
                )

    numerator, denominator = performance_parts(x, vectors, matrix)
    if denominator == 0:
        raise ZeroDenominator(f"weight matrix for phase {x} sums to zero")
    f = numerator / denominator
    return TaskAssignment(
        phase_index=x,
        task_index=assign_task(f, phase.task_count),
        performance=f,
        numerator=numerator,
        denominator=denominator,
        term_breakdown=tuple(terms),
    )
