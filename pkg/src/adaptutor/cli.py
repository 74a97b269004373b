"""Operator command line: validate, simulate, stats, serve.

Exit codes: 0 success, 1 domain violation (validation findings, replay
domain errors, service startup refusal), 2 I/O or parse failure. Outputs
are byte-stable for identical inputs: JSON is dumped with sorted keys,
CSV columns are fixed, files end with a newline.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from pathlib import Path

from .model import ParseError, load_training_definition, validate
from .model import _parse_matrix  # weight variant files reuse the definition grammar
from .replay import (
    EmptyCohort,
    LogSchemaError,
    MixedDefinitions,
    PhaseMismatch,
    aggregate_transitions,
    format_stats_csv,
    parse_event_stream,
    replay_session,
    summarize_sessions,
    sweep_weights,
)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


def _dump_json(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def _load_definition(path: str):
    try:
        with open(path, "rb") as handle:
            return load_training_definition(handle)
    except OSError as exc:
        raise SystemExit(_fail(f"{path}: {exc.strerror or exc}", EXIT_IO))
    except ParseError as exc:
        raise SystemExit(_fail(f"{path}: {exc}", EXIT_IO))


def _fail(message: str, code: int) -> int:
    print(message, file=sys.stderr)
    return code


def _read_logs(logs_dir: str) -> list[tuple[str, list]]:
    directory = Path(logs_dir)
    if not directory.is_dir():
        raise SystemExit(_fail(f"{logs_dir}: not a directory", EXIT_IO))
    logs = []
    errors = []
    for path in sorted(directory.glob("*.events.jsonl")):
        try:
            logs.append((path.name, parse_event_stream(path.read_text(encoding="utf-8"))))
        except OSError as exc:
            errors.append(f"{path}: {exc.strerror or exc}")
        except LogSchemaError as exc:
            errors.append(f"{path}: {exc}")
    if errors:
        for line in errors:
            print(line, file=sys.stderr)
        raise SystemExit(EXIT_IO)
    return logs


def cmd_validate(args: argparse.Namespace) -> int:
    definition = _load_definition(args.definition)
    report = validate(definition)
    if args.format == "json":
        sys.stdout.write(_dump_json({
            "id": definition.id,
            "empty": report.empty,
            "ok": report.ok,
            "violations": [
                {"code": v.code, "location": v.location,
                 "message": v.message, "severity": v.severity}
                for v in report.violations
            ],
        }))
    else:
        for v in report.violations:
            print(f"{v.severity}: {v.code} at {v.location}: {v.message}")
        if report.empty:
            print(f"{definition.id}: ok")
    return EXIT_OK if report.empty else EXIT_DOMAIN


def cmd_simulate(args: argparse.Namespace) -> int:
    definition = _load_definition(args.definition)
    named_logs = _read_logs(args.logs)
    logs = [events for _, events in named_logs]

    sidecar = {}
    if args.answers:
        try:
            sidecar = json.loads(Path(args.answers).read_text(encoding="utf-8"))
        except OSError as exc:
            return _fail(f"{args.answers}: {exc.strerror or exc}", EXIT_IO)
        except json.JSONDecodeError as exc:
            return _fail(f"{args.answers}: invalid JSON: {exc.msg}", EXIT_IO)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _fail(f"{args.out}: {exc.strerror or exc}", EXIT_IO)

    try:
        paths = []
        for (name, events) in named_logs:
            answers = sidecar.get(events[0].session_id) if events else None
            paths.append(replay_session(events, definition, answers=answers))
        graph = aggregate_transitions(paths)
        stats = summarize_sessions(logs, definition)
    except (PhaseMismatch, MixedDefinitions, EmptyCohort) as exc:
        return _fail(str(exc), EXIT_DOMAIN)
    except LogSchemaError as exc:
        return _fail(str(exc), EXIT_IO)

    (out / "transitions.json").write_text(_dump_json(graph.to_sankey()), encoding="utf-8")
    (out / "stats.csv").write_text(format_stats_csv([stats]), encoding="utf-8")
    written = ["transitions.json", "stats.csv"]

    if args.weights:
        try:
            document = json.loads(Path(args.weights).read_text(encoding="utf-8"))
            if not isinstance(document, list):
                raise ParseError("weights", "expected a JSON array of weight variants")
            variants = [
                tuple(_parse_matrix(m, f"[{vi}][{mi}]") for mi, m in enumerate(variant))
                for vi, variant in enumerate(document)
            ]
        except OSError as exc:
            return _fail(f"{args.weights}: {exc.strerror or exc}", EXIT_IO)
        except (json.JSONDecodeError, ParseError) as exc:
            return _fail(f"{args.weights}: {exc}", EXIT_IO)
        try:
            results = sweep_weights(logs, definition, variants, answers=sidecar)
        except (ValueError, PhaseMismatch, MixedDefinitions) as exc:
            return _fail(str(exc), EXIT_DOMAIN)
        for result in results:
            variant_dir = out / f"variant-{result.variant_index}"
            variant_dir.mkdir(exist_ok=True)
            (variant_dir / "transitions.json").write_text(
                _dump_json(result.graph.to_sankey()), encoding="utf-8")
            (variant_dir / "task_distribution.json").write_text(
                _dump_json({str(k): v for k, v in result.task_index_distribution.items()}),
                encoding="utf-8")
            written.append(f"variant-{result.variant_index}/")

    print(f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    definition = _load_definition(args.definition)
    logs = [events for _, events in _read_logs(args.logs)]
    try:
        stats = summarize_sessions(logs, definition)
    except EmptyCohort as exc:
        return _fail(str(exc), EXIT_DOMAIN)
    except LogSchemaError as exc:
        return _fail(str(exc), EXIT_IO)
    if args.format == "json":
        sys.stdout.write(_dump_json({
            "training": stats.training,
            "participants": stats.participants,
            "completion_ratio": str(stats.completion_ratio),
            "completion_ratio_value": float(stats.completion_ratio),
            "modal_end_phase": stats.modal_end_phase,
            "avg_actions": str(stats.avg_actions),
            "avg_actions_value": float(stats.avg_actions),
        }))
    else:
        sys.stdout.write(format_stats_csv([stats]))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    instructor = args.instructor_token or os.environ.get("TUTOR_INSTRUCTOR_TOKEN")
    trainee = args.trainee_token or os.environ.get("TUTOR_TRAINEE_TOKEN")
    if not instructor:
        instructor = secrets.token_hex(16)
        print(f"generated instructor token: {instructor}", file=sys.stderr)
    if not trainee:
        trainee = secrets.token_hex(16)
        print(f"generated trainee token: {trainee}", file=sys.stderr)

    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        return _fail(f"--listen must be addr:port, got {args.listen!r}", EXIT_DOMAIN)

    try:
        app = create_app(args.store, instructor_token=instructor, trainee_token=trainee)
    except OSError as exc:
        return _fail(f"store {args.store!r} unusable: {exc.strerror or exc}", EXIT_DOMAIN)
    probe = Path(args.store) / ".writable"
    try:
        probe.touch()
        probe.unlink()
    except OSError as exc:
        return _fail(f"store {args.store!r} not writable: {exc.strerror or exc}", EXIT_DOMAIN)

    try:
        uvicorn.run(app, host=host, port=int(port_text), log_level="info")
    except (OSError, SystemExit) as exc:
        return _fail(f"cannot listen on {args.listen}: {exc}", EXIT_DOMAIN)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tutor",
        description="Adaptive training engine: definition tooling, replay analytics, service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a training definition")
    p.add_argument("definition", help="path to a training definition JSON file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate",
                       help="replay recorded logs through the decision model")
    p.add_argument("--definition", required=True, help="training definition JSON file")
    p.add_argument("--logs", required=True, help="directory of *.events.jsonl logs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--weights", help="JSON file: array of weight-matrix variants")
    p.add_argument("--answers",
                   help="JSON sidecar: {session_id: {question_id: answer}} for logs"
                        " without a recorded assessment")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="cohort statistics from recorded logs")
    p.add_argument("--definition", required=True, help="training definition JSON file")
    p.add_argument("--logs", required=True, help="directory of *.events.jsonl logs")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--store", required=True, help="persistence directory")
    p.add_argument("--listen", default="127.0.0.1:8000", help="addr:port (default %(default)s)")
    p.add_argument("--instructor-token",
                   help="instructor bearer token (env TUTOR_INSTRUCTOR_TOKEN)")
    p.add_argument("--trainee-token",
                   help="trainee bearer token (env TUTOR_TRAINEE_TOKEN)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        raise exc
    except ParseError as exc:
        return _fail(str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
