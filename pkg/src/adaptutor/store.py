"""File-backed persistence for definitions, session logs, and reports.

Layout under one root directory:

* ``definitions/<id>.json`` — training definitions, immutable once any
  session references them (tracked by a ``<id>.in-use`` marker),
* ``sessions/<session_id>.events.jsonl`` — append-only event logs, one
  JSON object per line,
* ``reports/<report_id>.json`` — replay reports.

Desk-scale cohorts need no database; files also make the recovery rule
simple: a truncated final log line (interrupted append) is discarded with
a warning, anything else broken raises StoreCorruption so the affected
session is refused without harming the others.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .model import (
    ParseError,
    TrainingDefinition,
    dump_training_definition,
    load_training_definition,
)
from .session import SessionEvent, event_from_dict

log = logging.getLogger(__name__)


class StoreCorruption(Exception):
    """A persisted artifact is unreadable beyond the recoverable cases."""


class DefinitionInUse(Exception):
    """The definition has sessions and can no longer be replaced."""


@dataclass(frozen=True)
class StoredEntity:
    kind: str  # "definition" | "session-log" | "replay-report"
    id: str
    created_at: int  # UTC milliseconds (file mtime)
    path: Path


def _entity(kind: str, entity_id: str, path: Path) -> StoredEntity:
    return StoredEntity(
        kind=kind, id=entity_id, created_at=int(path.stat().st_mtime * 1000), path=path
    )


class Store:
    """One directory holding everything the service persists."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.definitions_dir = self.root / "definitions"
        self.sessions_dir = self.root / "sessions"
        self.reports_dir = self.root / "reports"
        for directory in (self.definitions_dir, self.sessions_dir, self.reports_dir):
            directory.mkdir(parents=True, exist_ok=True)

    # -- definitions --------------------------------------------------------

    def _definition_path(self, definition_id: str) -> Path:
        return self.definitions_dir / f"{definition_id}.json"

    def _in_use_path(self, definition_id: str) -> Path:
        return self.definitions_dir / f"{definition_id}.in-use"

    def save_definition(self, definition: TrainingDefinition) -> StoredEntity:
        path = self._definition_path(definition.id)
        if path.exists() and self.definition_in_use(definition.id):
            raise DefinitionInUse(
                f"definition {definition.id!r} already has sessions and is immutable"
            )
        path.write_bytes(dump_training_definition(definition))
        return _entity("definition", definition.id, path)

    def load_definition(self, definition_id: str) -> TrainingDefinition | None:
        path = self._definition_path(definition_id)
        if not path.exists():
            return None
        try:
            return load_training_definition(path.read_bytes())
        except ParseError as exc:
            raise StoreCorruption(f"definition {definition_id!r} unreadable: {exc}") from None

    def definition_ids(self) -> list[str]:
        return sorted(p.stem for p in self.definitions_dir.glob("*.json"))

    def definition_in_use(self, definition_id: str) -> bool:
        return self._in_use_path(definition_id).exists()

    def mark_definition_used(self, definition_id: str) -> None:
        self._in_use_path(definition_id).touch()

    # -- session logs -------------------------------------------------------

    def _session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.events.jsonl"

    def session_exists(self, session_id: str) -> bool:
        return self._session_path(session_id).exists()

    def session_ids(self) -> list[str]:
        return sorted(p.name[: -len(".events.jsonl")]
                      for p in self.sessions_dir.glob("*.events.jsonl"))

    def append_events(self, session_id: str, events: list[SessionEvent]) -> None:
        if not events:
            return
        lines = "".join(
            json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"
            for e in events
        )
        with open(self._session_path(session_id), "a", encoding="utf-8") as handle:
            handle.write(lines)
            handle.flush()
            os.fsync(handle.fileno())

    def read_events(self, session_id: str) -> list[SessionEvent] | None:
        """Read a session's log, applying the append-only recovery rule.

        A final line that does not decode is the leftover of an
        interrupted append: it is dropped with a warning and truncated
        away, so the next append starts on a clean line instead of
        concatenating onto the partial one. A broken line anywhere else
        is corruption.
        """
        path = self._session_path(session_id)
        if not path.exists():
            return None
        text = path.read_bytes().decode("utf-8")
        entries: list[tuple[int, int, str]] = []  # (line number, byte offset, content)
        offset = 0
        for number, line in enumerate(text.splitlines(keepends=True), start=1):
            if line.strip():
                entries.append((number, offset, line.strip()))
            offset += len(line.encode("utf-8"))
        events: list[SessionEvent] = []
        for position, (number, byte_offset, line) in enumerate(entries):
            last = position == len(entries) - 1
            try:
                events.append(event_from_dict(json.loads(line), path=f"line {number}"))
            except (json.JSONDecodeError, ParseError) as exc:
                if not last:
                    raise StoreCorruption(
                        f"session {session_id!r} log broken at line {number}: {exc}"
                    ) from None
                log.warning(
                    "session %s: discarding truncated final log line %d (%s)",
                    session_id, number, exc,
                )
                try:
                    with open(path, "r+b") as handle:
                        handle.truncate(byte_offset)
                except OSError as trunc_exc:  # read-only store: recover, don't repair
                    log.warning(
                        "session %s: could not truncate partial line: %s",
                        session_id, trunc_exc,
                    )
                break
        return events

    # -- replay reports -----------------------------------------------------

    def _report_path(self, report_id: str) -> Path:
        return self.reports_dir / f"{report_id}.json"

    def save_report(self, report_id: str, payload: dict) -> StoredEntity:
        path = self._report_path(report_id)
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        return _entity("replay-report", report_id, path)

    def load_report(self, report_id: str) -> dict | None:
        path = self._report_path(report_id)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise StoreCorruption(f"report {report_id!r} unreadable: {exc.msg}") from None

    def report_ids(self) -> list[str]:
        return sorted(p.stem for p in self.reports_dir.glob("*.json"))
