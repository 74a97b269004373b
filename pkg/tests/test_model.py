"""Definition parsing, validation and round-trip serialization."""

from __future__ import annotations

import json
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import pytest

from adaptutor.model import (
    ParseError,
    WeightMatrix,
    dump_training_definition,
    load_training_definition,
    parse_training_definition,
    parse_weight,
    serialize_training_definition,
    validate,
)
from tests.cohort import as_rows, fixture_definition, make_definition


def fixture_document() -> dict:
    return serialize_training_definition(fixture_definition())


class TestParseWeight:
    def test_integers_are_exact(self):
        assert parse_weight(3, "w") == Fraction(3)

    def test_fraction_strings(self):
        assert parse_weight("1/3", "w") == Fraction(1, 3)
        assert parse_weight("2/4", "w") == Fraction(1, 2)

    def test_float_reads_as_decimal_literal(self):
        # 0.1 must mean a tenth, not the nearest binary double.
        assert parse_weight(0.1, "w") == Fraction(1, 10)
        assert parse_weight(0.5, "w") == Fraction(1, 2)

    @pytest.mark.parametrize("bad", ["", "1/0", "a/b", None, [], "1.2.3"])
    def test_rejects_garbage(self, bad):
        with pytest.raises(ParseError):
            parse_weight(bad, "w")


class TestParsing:
    def test_fixture_parses_and_validates_clean(self):
        definition = fixture_definition()
        assert definition.phase_count == 5
        assert [p.index for p in definition.phases] == [1, 2, 3, 4, 5]
        report = validate(definition)
        assert report.empty, report.violations

    def test_round_trip_is_identity(self):
        definition = fixture_definition()
        again = parse_training_definition(serialize_training_definition(definition))
        assert again == definition

    def test_dump_load_round_trip(self):
        definition = make_definition(4, matrices=None)
        data = dump_training_definition(definition)
        assert load_training_definition(data) == definition

    def test_dump_is_deterministic(self):
        definition = fixture_definition()
        assert dump_training_definition(definition) == dump_training_definition(definition)

    def test_unknown_top_level_key_rejected(self):
        doc = fixture_document()
        doc["surprise"] = 1
        with pytest.raises(ParseError, match="surprise"):
            parse_training_definition(doc)

    def test_wrong_type_names_the_path(self):
        doc = fixture_document()
        doc["phases"][0]["expected_completion_seconds"] = "fast"
        with pytest.raises(ParseError, match=r"phases\[0\]"):
            parse_training_definition(doc)

    def test_invalid_json_bytes(self):
        with pytest.raises(ParseError):
            load_training_definition(b"{not json")

    def test_non_object_document(self):
        with pytest.raises(ParseError):
            parse_training_definition([1, 2, 3])


def with_matrix(definition, x, rows):
    matrices = list(definition.weight_matrices)
    matrices[x - 1] = WeightMatrix(phase_index=x, rows=as_rows(rows))
    return replace(definition, weight_matrices=tuple(matrices))


class TestValidation:
    def test_matrix_row_count_must_equal_phase_index(self):
        bad = with_matrix(make_definition(3), 2, [[1, 0, 0, 0, 0]])
        assert "MATRIX_ROW_COUNT" in validate(bad).codes()

    def test_current_phase_row_allows_only_alpha(self):
        bad = with_matrix(make_definition(2), 2, [[1, 1, 1, 1, 1], [1, 1, 0, 0, 0]])
        assert "IN_PHASE_BEHAVIORAL_WEIGHT" in validate(bad).codes()

    def test_zero_denominator(self):
        bad = with_matrix(make_definition(1), 1, [[0, 0, 0, 0, 0]])
        assert "ZERO_DENOMINATOR" in validate(bad).codes()

    def test_negative_weight(self):
        bad = with_matrix(make_definition(1), 1, [[-1, 0, 0, 0, 0]])
        assert "NEGATIVE_WEIGHT" in validate(bad).codes()

    def test_matrix_count_must_match_phases(self):
        definition = make_definition(3)
        bad = replace(definition, weight_matrices=definition.weight_matrices[:2])
        assert "MATRIX_COUNT" in validate(bad).codes()

    def test_alpha_weight_without_group_is_warning_only(self):
        definition = make_definition(2)
        phases = list(definition.phases)
        phases[0] = replace(phases[0], question_group_ref=None)
        report = validate(replace(definition, phases=tuple(phases)))
        assert "ALPHA_WEIGHT_WITHOUT_GROUP" in report.codes()
        assert report.ok and not report.empty

    def test_unknown_question_group(self):
        definition = make_definition(2)
        phases = list(definition.phases)
        phases[1] = replace(phases[1], question_group_ref="g-nope")
        bad = replace(definition, phases=tuple(phases))
        assert "UNKNOWN_QUESTION_GROUP" in validate(bad).codes()

    def test_walkthrough_only_on_last_task(self):
        definition = make_definition(1)
        phase = definition.phases[0]
        tasks = list(phase.tasks)
        tasks[0] = replace(tasks[0], includes_solution_walkthrough=True)
        bad = replace(
            definition, phases=(replace(phase, tasks=tuple(tasks)),)
        )
        assert "WALKTHROUGH_NOT_LAST" in validate(bad).codes()

    def test_phase_and_task_indexes_must_be_contiguous(self):
        definition = make_definition(2)
        phases = list(definition.phases)
        phases[1] = replace(phases[1], index=3)
        assert "PHASE_INDEX" in validate(replace(definition, phases=tuple(phases))).codes()

        definition = make_definition(1)
        phase = definition.phases[0]
        tasks = (replace(phase.tasks[0], index=2),) + phase.tasks[1:]
        bad = replace(definition, phases=(replace(phase, tasks=tasks),))
        assert "TASK_INDEX" in validate(bad).codes()

    def test_nonpositive_expected_time(self):
        definition = make_definition(1)
        phase = replace(definition.phases[0], expected_completion_seconds=0)
        assert "EXPECTED_TIME" in validate(replace(definition, phases=(phase,))).codes()

    def test_report_location_points_at_offender(self):
        bad = with_matrix(make_definition(3), 2, [[1, 0, 0, 0, 0]])
        report = validate(bad)
        row_count = [v for v in report.violations if v.code == "MATRIX_ROW_COUNT"]
        assert row_count and "weight_matrices[1]" in row_count[0].location


class TestJsonSchema:
    """The published schema and the parser must accept the same documents."""

    schema = json.loads(
        Path(__file__).resolve().parents[1]
        .joinpath("docs", "training-definition.schema.json")
        .read_text()
    )

    def test_fixture_matches_schema(self):
        import jsonschema

        jsonschema.validate(fixture_document(), self.schema)

    def test_schema_rejects_extra_keys(self):
        import jsonschema

        doc = fixture_document()
        doc["phases"][0]["bonus"] = True
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(doc, self.schema)
        with pytest.raises(ParseError):
            parse_training_definition(doc)

    def test_schema_accepts_generated_definitions(self):
        import jsonschema

        doc = serialize_training_definition(make_definition(4, tasks_per_phase=2))
        jsonschema.validate(doc, self.schema)
