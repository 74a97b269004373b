"""Scoring model unit and property tests, checked against tests.oracle."""

from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptutor.model import WeightMatrix
from adaptutor.tutor import (
    MetricVectors,
    PhaseOutcome,
    UnknownQuestionId,
    ZeroDenominator,
    assign_task,
    decide,
    derive_outcome_bits,
    evaluate_pretraining,
    performance,
    performance_parts,
)
from tests.cohort import as_rows, make_definition
from tests.oracle import oracle_performance, oracle_task

WEIGHT_VALUES = (Fraction(0), Fraction(1, 2), Fraction(1))

bits = st.integers(0, 1)


def weight_rows(x: int):
    """Strategy for x validated weight rows with weights in {0, 1/2, 1}."""
    free_row = st.tuples(*[st.sampled_from(WEIGHT_VALUES)] * 5)
    last_row = st.sampled_from(WEIGHT_VALUES).map(
        lambda alpha: (alpha, Fraction(0), Fraction(0), Fraction(0), Fraction(0))
    )
    rows = st.tuples(*([free_row] * (x - 1) + [last_row]))
    return rows.filter(lambda r: any(any(w for w in row) for row in r))


def vectors_for(x: int):
    vector = st.tuples(*[bits] * x)
    return st.builds(
        MetricVectors, p=vector, k=vector, a=vector, t=vector, s=vector
    )


class TestPerformance:
    @given(st.integers(1, 4).flatmap(
        lambda x: st.tuples(st.just(x), vectors_for(x), weight_rows(x))
    ))
    @settings(max_examples=400, deadline=None)
    def test_matches_oracle_and_stays_in_unit_interval(self, case):
        x, vectors, rows = case
        matrix = WeightMatrix(phase_index=x, rows=rows)
        f = performance(x, vectors, matrix)
        assert f == oracle_performance(x, vectors.p, vectors.k, vectors.a,
                                       vectors.t, vectors.s, rows)
        assert 0 <= f <= 1

    @given(st.integers(2, 4).flatmap(
        lambda x: st.tuples(st.just(x), vectors_for(x), weight_rows(x))
    ))
    @settings(max_examples=300, deadline=None)
    def test_solution_bit_nullifies_behavioral_credit(self, case):
        # With every s bit cleared, only the alpha terms can score.
        x, vectors, rows = case
        zeroed = MetricVectors(p=vectors.p, k=vectors.k, a=vectors.a,
                               t=vectors.t, s=(0,) * x)
        matrix = WeightMatrix(phase_index=x, rows=rows)
        numerator, _ = performance_parts(x, zeroed, matrix)
        alpha_only = sum(
            vectors.p[i] * rows[i][0] for i in range(x)
        )
        assert numerator == alpha_only

    @given(st.integers(1, 4).flatmap(
        lambda x: st.tuples(st.just(x), vectors_for(x), weight_rows(x))
    ))
    @settings(max_examples=300, deadline=None)
    def test_setting_any_zero_bit_never_lowers_f(self, case):
        x, vectors, rows = case
        matrix = WeightMatrix(phase_index=x, rows=rows)
        base = performance(x, vectors, matrix)
        for name in ("p", "k", "a", "t", "s"):
            vector = getattr(vectors, name)
            for i in range(x):
                if vector[i] == 1:
                    continue
                raised = vector[:i] + (1,) + vector[i + 1:]
                bumped = MetricVectors(**{**{
                    "p": vectors.p, "k": vectors.k, "a": vectors.a,
                    "t": vectors.t, "s": vectors.s}, name: raised})
                assert performance(x, bumped, matrix) >= base

    def test_needs_evidence_through_previous_phase(self):
        matrix = WeightMatrix(
            phase_index=2, rows=as_rows([[1, 1, 1, 1, 1], [1, 0, 0, 0, 0]])
        )
        with pytest.raises(ValueError, match="evidence through phase 1"):
            performance(2, MetricVectors(p=(1, 1)), matrix)

    def test_zero_denominator_is_reported(self):
        matrix = WeightMatrix(phase_index=1, rows=as_rows([[0, 0, 0, 0, 0]]))
        with pytest.raises(ZeroDenominator):
            performance(1, MetricVectors(p=(1,)), matrix)

    def test_perfect_and_hopeless_vectors_hit_the_bounds(self):
        rows = as_rows([[1, "1/2", 1, "1/2", 1], [1, 0, 0, 0, 0]])
        matrix = WeightMatrix(phase_index=2, rows=rows)
        ones = MetricVectors(p=(1, 1), k=(1, 1), a=(1, 1), t=(1, 1), s=(1, 1))
        zeros = MetricVectors(p=(0, 0), k=(0, 0), a=(0, 0), t=(0, 0), s=(0, 0))
        assert performance(2, ones, matrix) == 1
        assert performance(2, zeros, matrix) == 0


class TestAssignTask:
    @pytest.mark.parametrize(
        "f,n,expected",
        [
            (Fraction(0), 3, 3),
            (Fraction(1), 3, 1),
            (Fraction(1, 3), 3, 3),
            (Fraction(3, 4), 3, 1),
            (Fraction(1, 2), 3, 2),
            (Fraction(2, 3), 3, 2),
            (Fraction(1, 4), 4, 4),
            (Fraction(1), 1, 1),
            (Fraction(0), 1, 1),
        ],
    )
    def test_band_edges(self, f, n, expected):
        assert assign_task(f, n) == expected
        assert assign_task(f, n) == oracle_task(f, n)

    @given(st.fractions(0, 1), st.integers(1, 12))
    @settings(max_examples=500, deadline=None)
    def test_matches_oracle_and_stays_in_range(self, f, n):
        index = assign_task(f, n)
        assert index == oracle_task(f, n)
        assert 1 <= index <= n

    @given(st.fractions(0, 1), st.fractions(0, 1), st.integers(1, 12))
    @settings(max_examples=500, deadline=None)
    def test_better_performance_never_gets_an_easier_task(self, f1, f2, n):
        low, high = sorted((f1, f2))
        assert assign_task(high, n) <= assign_task(low, n)

    def test_rejects_out_of_range_inputs(self):
        with pytest.raises(ValueError):
            assign_task(Fraction(3, 2), 3)
        with pytest.raises(ValueError):
            assign_task(Fraction(-1, 2), 3)
        with pytest.raises(ValueError):
            assign_task(Fraction(1, 2), 0)


class TestOutcomeBits:
    def outcome(self, **overrides) -> PhaseOutcome:
        base = dict(
            phase_index=1,
            completion_seconds=Fraction(100),
            matched_command_count=3,
            wrong_submissions=0,
            correct_answer_submitted=True,
            solution_displayed=False,
        )
        base.update(overrides)
        return PhaseOutcome(**base)

    def phase(self, **overrides):
        definition = make_definition(1, threshold=10, max_wrong=overrides.pop("max_wrong", None))
        phase = definition.phases[0]
        return phase

    def test_happy_path_scores_all_bits(self):
        assert derive_outcome_bits(self.outcome(), self.phase()) == (1, 1, 1, 1)

    def test_k_needs_at_least_one_command(self):
        k, *_ = derive_outcome_bits(self.outcome(matched_command_count=0), self.phase())
        assert k == 0

    def test_k_boundary_at_threshold(self):
        k, *_ = derive_outcome_bits(self.outcome(matched_command_count=10), self.phase())
        assert k == 1
        k, *_ = derive_outcome_bits(self.outcome(matched_command_count=11), self.phase())
        assert k == 0

    def test_t_is_strict(self):
        phase = self.phase()
        expected = phase.expected_completion_seconds
        _, _, t, _ = derive_outcome_bits(
            self.outcome(completion_seconds=Fraction(expected)), phase
        )
        assert t == 0
        _, _, t, _ = derive_outcome_bits(
            self.outcome(completion_seconds=Fraction(expected) - Fraction(1, 1000)), phase
        )
        assert t == 1

    def test_a_budget_unlimited_by_default(self):
        _, a, _, _ = derive_outcome_bits(self.outcome(wrong_submissions=999), self.phase())
        assert a == 1

    def test_a_budget_boundary(self):
        phase = self.phase(max_wrong=2)
        _, a, _, _ = derive_outcome_bits(self.outcome(wrong_submissions=2), phase)
        assert a == 1
        _, a, _, _ = derive_outcome_bits(self.outcome(wrong_submissions=3), phase)
        assert a == 0

    def test_a_needs_a_correct_answer_at_all(self):
        _, a, _, _ = derive_outcome_bits(
            self.outcome(correct_answer_submitted=False), self.phase()
        )
        assert a == 0

    def test_s_inverts_solution_display(self):
        *_, s = derive_outcome_bits(self.outcome(solution_displayed=True), self.phase())
        assert s == 0

    def test_phase_mismatch_is_an_error(self):
        with pytest.raises(ValueError):
            derive_outcome_bits(self.outcome(phase_index=2), self.phase())


class TestPretraining:
    def test_all_correct_sets_all_bits(self):
        d = make_definition(3)
        answers = {"q-1": "yes", "q-2": "yes", "q-3": "yes"}
        assert evaluate_pretraining(answers, d.assessment, d.phases) == (1, 1, 1)

    def test_wrong_and_missing_answers_score_zero(self):
        d = make_definition(3)
        assert evaluate_pretraining({"q-1": "no"}, d.assessment, d.phases) == (0, 0, 0)

    def test_unknown_question_id_raises(self):
        d = make_definition(2)
        with pytest.raises(UnknownQuestionId, match="q-9"):
            evaluate_pretraining({"q-9": "yes"}, d.assessment, d.phases)

    def test_essential_ratio_boundary_is_inclusive(self):
        from dataclasses import replace

        d = make_definition(2)
        groups = tuple(
            replace(g, question_ids=frozenset({"q-1", "q-2"}), essential_ratio=Fraction(1, 2))
            for g in d.assessment.groups[:1]
        ) + d.assessment.groups[1:]
        assessment = replace(d.assessment, groups=groups)
        # Exactly half right meets a 1/2 ratio.
        bits = evaluate_pretraining({"q-1": "yes", "q-2": "no"}, assessment, d.phases)
        assert bits[0] == 1

    def test_phase_without_group_scores_zero(self):
        from dataclasses import replace

        d = make_definition(2)
        phases = (replace(d.phases[0], question_group_ref=None),) + d.phases[1:]
        bits = evaluate_pretraining({"q-1": "yes", "q-2": "yes"}, d.assessment, phases)
        assert bits == (0, 1)


class TestDecide:
    def test_breakdown_terms_sum_to_numerator(self):
        d = make_definition(
            3,
            matrices=[
                [[1, 0, 0, 0, 0]],
                [["1/2", 1, 0, 1, "1/2"], [1, 0, 0, 0, 0]],
                [[1, 1, 1, 1, 1], [0, "1/2", "1/2", 0, 1], [1, 0, 0, 0, 0]],
            ],
        )
        vectors = MetricVectors(p=(1, 0, 1), k=(1, 0), a=(0, 1), t=(1, 1), s=(1, 0))
        assignment = decide(d, vectors, 3)
        assert sum(t.contribution for t in assignment.term_breakdown) == assignment.numerator
        assert all(t.weight > 0 for t in assignment.term_breakdown)
        assert assignment.performance == assignment.numerator / assignment.denominator

    def test_revealed_phase_loses_all_behavioral_credit(self):
        d = make_definition(2, matrices=[[[1, 0, 0, 0, 0]],
                                         [[0, 1, 1, 1, 1], [0, 0, 0, 0, 0]]])
        vectors = MetricVectors(p=(0, 0), k=(1,), a=(1,), t=(1,), s=(0,))
        assignment = decide(d, vectors, 2)
        assert assignment.performance == 0
        assert not any(t.satisfied for t in assignment.term_breakdown)
        # The same evidence with the solution bit intact scores full marks.
        kept = MetricVectors(p=(0, 0), k=(1,), a=(1,), t=(1,), s=(1,))
        assert decide(d, kept, 2).performance == 1

    def test_to_dict_serializes_fractions_as_strings(self):
        d = make_definition(2, matrices=[[[1, 0, 0, 0, 0]],
                                         [[1, 1, 0, 0, 1], [1, 0, 0, 0, 0]]])
        vectors = MetricVectors(p=(1, 0), k=(1,), a=(1,), t=(0,), s=(1,))
        doc = decide(d, vectors, 2).to_dict()
        # numerator 3 of denominator 4: alpha(1) + beta(1) + epsilon(1).
        assert doc["performance"] == "3/4"
        assert doc["performance_value"] == 0.75
        assert doc["task_index"] == 1
        assert {t["column"] for t in doc["terms"]} == {"alpha", "beta", "epsilon"}
