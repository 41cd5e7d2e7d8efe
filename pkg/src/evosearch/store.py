"""SQLite-backed persistent search state.

One file per session (``state.db`` in the session root) holding metric
definitions, rounds, candidates, metric samples, holdout results, failures,
and the session lifecycle row. Writes are serialized through a single lock
so parallel round workers can share one handle; every submission is a single
transaction so partial candidates are never visible.
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ROUND_ACTIONS = ("baseline", "generate", "tune", "evolve", "mutate")
ROUND_STATUSES = ("running", "completed", "failed", "skipped")
PHASES = ("preparation", "baseline", "discovery", "finished")
RUN_STATUSES = ("active", "stopped")
DIRECTIONS = ("maximize", "minimize")
SUGGESTIONS = ("generate", "tune", "evolve")

_ANALYSIS_EXCERPT_CHARS = 240


class StoreError(RuntimeError):
    """Base class for storage failures."""


class ConflictError(StoreError):
    pass


class NotFoundError(StoreError):
    pass


class LineageError(StoreError):
    """A candidate submission violates the lineage rules."""


class StateError(StoreError):
    """An operation was attempted in an invalid session state."""


@dataclass(frozen=True)
class MetricDefinition:
    name: str
    direction: str
    description: str = ""
    target_value: Optional[float] = None
    is_primary: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise StoreError("metric name must be non-empty")
        if self.direction not in DIRECTIONS:
            raise StoreError(f"unknown direction: {self.direction!r}")


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    action: str
    status: str
    summary: str = ""
    winning_candidate_id: Optional[int] = None


@dataclass
class CandidateRecord:
    """A registered candidate algorithm.

    ``candidate_id`` and ``lineage_id`` are assigned by the store on
    submission; leave them None when submitting. A caller-supplied
    ``lineage_id`` is cross-checked against the derived one.
    """

    round_index: int
    action: str
    artifact_path: str
    description: str = ""
    parent_ids: list[int] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    analysis: str = ""
    suggested_next_action: Optional[str] = None
    notes: str = ""
    candidate_id: Optional[int] = None
    lineage_id: Optional[int] = None


@dataclass(frozen=True)
class MetricSample:
    candidate_id: Optional[int]
    metric_name: str
    value: float


@dataclass(frozen=True)
class HoldoutMetricSample:
    candidate_id: int
    value: Optional[float] = None
    failure_note: Optional[str] = None


@dataclass(frozen=True)
class SessionState:
    phase: str = "preparation"
    run_status: str = "active"
    active_round: Optional[int] = None
    active_action: Optional[str] = None
    preparation_summary: str = ""
    stop_reason: Optional[str] = None


@dataclass(frozen=True)
class FailureRecord:
    round_index: int
    failing_code_path: str
    error_message: str
    parent_ids: list[int] = field(default_factory=list)
    settings: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HistoryEntry:
    """One row of the ranked cross-table history view."""

    candidate_id: int
    round_index: int
    action: str
    lineage_id: int
    parent_ids: tuple[int, ...]
    value: float
    description: str
    analysis_excerpt: str


@dataclass(frozen=True)
class Recovery:
    state: SessionState
    resume_round: Optional[int]
    failed_rounds: tuple[int, ...] = ()


_SCHEMA = """
CREATE TABLE IF NOT EXISTS metric_definitions (
    name TEXT PRIMARY KEY,
    direction TEXT NOT NULL CHECK (direction IN ('maximize', 'minimize')),
    description TEXT NOT NULL DEFAULT '',
    target_value REAL,
    is_primary INTEGER NOT NULL DEFAULT 0
);

CREATE TABLE IF NOT EXISTS rounds (
    round_index INTEGER PRIMARY KEY,
    action TEXT NOT NULL
        CHECK (action IN ('baseline', 'generate', 'tune', 'evolve', 'mutate')),
    status TEXT NOT NULL
        CHECK (status IN ('running', 'completed', 'failed', 'skipped')),
    summary TEXT NOT NULL DEFAULT '',
    winning_candidate_id INTEGER
);

CREATE TABLE IF NOT EXISTS candidates (
    candidate_id INTEGER PRIMARY KEY AUTOINCREMENT,
    round_index INTEGER NOT NULL REFERENCES rounds(round_index),
    action TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    artifact_path TEXT NOT NULL,
    lineage_id INTEGER NOT NULL,
    parent_ids TEXT NOT NULL DEFAULT '[]',
    settings TEXT NOT NULL DEFAULT '{}',
    analysis TEXT NOT NULL DEFAULT '',
    suggested_next_action TEXT,
    notes TEXT NOT NULL DEFAULT ''
);

CREATE TABLE IF NOT EXISTS metrics (
    candidate_id INTEGER NOT NULL REFERENCES candidates(candidate_id),
    metric_name TEXT NOT NULL REFERENCES metric_definitions(name),
    value REAL NOT NULL,
    PRIMARY KEY (candidate_id, metric_name)
);

CREATE TABLE IF NOT EXISTS holdout_test_metrics (
    candidate_id INTEGER PRIMARY KEY REFERENCES candidates(candidate_id),
    value REAL,
    failure_note TEXT
);

CREATE TABLE IF NOT EXISTS session_state (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    phase TEXT NOT NULL
        CHECK (phase IN ('preparation', 'baseline', 'discovery', 'finished')),
    run_status TEXT NOT NULL CHECK (run_status IN ('active', 'stopped')),
    active_round INTEGER,
    active_action TEXT,
    preparation_summary TEXT NOT NULL DEFAULT '',
    stop_reason TEXT
);

CREATE TABLE IF NOT EXISTS candidate_failures (
    failure_id INTEGER PRIMARY KEY AUTOINCREMENT,
    round_index INTEGER NOT NULL,
    failing_code_path TEXT NOT NULL,
    parent_ids TEXT NOT NULL DEFAULT '[]',
    error_message TEXT NOT NULL,
    settings TEXT NOT NULL DEFAULT '{}',
    metadata TEXT NOT NULL DEFAULT '{}'
);
"""


class SearchStore:
    """Handle over one session database. Safe to share across threads."""

    def __init__(self, db_path: Path | str) -> None:
        self.db_path = Path(db_path)
        self.root = self.db_path.parent
        self._lock = threading.RLock()
        try:
            self._conn = sqlite3.connect(str(self.db_path), check_same_thread=False)
        except sqlite3.Error as exc:
            raise StoreError(f"cannot open database at {self.db_path}: {exc}") from exc
        self._conn.row_factory = sqlite3.Row
        self._init_schema()

    # -- lifecycle ---------------------------------------------------------

    def _init_schema(self) -> None:
        with self._lock:
            try:
                version = self._conn.execute("PRAGMA user_version").fetchone()[0]
                if version not in (0, SCHEMA_VERSION):
                    raise StoreError(
                        f"schema version {version} is newer than supported "
                        f"version {SCHEMA_VERSION}"
                    )
                with self._conn:
                    self._conn.execute("PRAGMA foreign_keys = ON")
                    self._conn.executescript(_SCHEMA)
                    self._conn.execute(f"PRAGMA user_version = {SCHEMA_VERSION}")
                    row = self._conn.execute(
                        "SELECT COUNT(*) FROM session_state"
                    ).fetchone()
                    if row[0] == 0:
                        self._conn.execute(
                            "INSERT INTO session_state"
                            " (id, phase, run_status) VALUES (1, 'preparation', 'active')"
                        )
            except sqlite3.DatabaseError as exc:
                raise StoreError(f"database at {self.db_path} is unusable: {exc}") from exc

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> "SearchStore":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- metric definitions ------------------------------------------------

    def define_metric(self, definition: MetricDefinition) -> None:
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT direction FROM metric_definitions WHERE name = ?",
                (definition.name,),
            ).fetchone()
            if row is not None and row["direction"] != definition.direction:
                raise ConflictError(
                    f"metric {definition.name!r} already defined with direction "
                    f"{row['direction']!r}; direction is immutable"
                )
            if definition.is_primary:
                self._conn.execute("UPDATE metric_definitions SET is_primary = 0")
            self._conn.execute(
                "INSERT INTO metric_definitions"
                " (name, direction, description, target_value, is_primary)"
                " VALUES (?, ?, ?, ?, ?)"
                " ON CONFLICT(name) DO UPDATE SET"
                "  description = excluded.description,"
                "  target_value = excluded.target_value,"
                "  is_primary = excluded.is_primary",
                (
                    definition.name,
                    definition.direction,
                    definition.description,
                    definition.target_value,
                    1 if definition.is_primary else 0,
                ),
            )

    def metric_definitions(self) -> list[MetricDefinition]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM metric_definitions ORDER BY name"
            ).fetchall()
        return [
            MetricDefinition(
                name=r["name"],
                direction=r["direction"],
                description=r["description"],
                target_value=r["target_value"],
                is_primary=bool(r["is_primary"]),
            )
            for r in rows
        ]

    def primary_metric(self) -> Optional[MetricDefinition]:
        for definition in self.metric_definitions():
            if definition.is_primary:
                return definition
        return None

    # -- rounds ------------------------------------------------------------

    def begin_round(self, round_index: int, action: str) -> None:
        if action not in ROUND_ACTIONS:
            raise StoreError(f"unknown round action: {action!r}")
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT COALESCE(MAX(round_index), -1) AS top FROM rounds"
            ).fetchone()
            expected = row["top"] + 1
            if round_index != expected:
                raise StateError(
                    f"round indices must be contiguous: expected {expected},"
                    f" got {round_index}"
                )
            self._conn.execute(
                "INSERT INTO rounds (round_index, action, status) VALUES (?, ?, 'running')",
                (round_index, action),
            )
            self._conn.execute(
                "UPDATE session_state SET active_round = ?, active_action = ? WHERE id = 1",
                (round_index, action),
            )

    def finish_round(
        self, round_index: int, status: str = "completed", summary: str = ""
    ) -> None:
        if status not in ROUND_STATUSES or status == "running":
            raise StoreError(f"invalid terminal round status: {status!r}")
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE rounds SET status = ?, summary = ? WHERE round_index = ?",
                (status, summary, round_index),
            )
            if cur.rowcount == 0:
                raise NotFoundError(f"no round {round_index}")
            self._conn.execute(
                "UPDATE session_state SET active_round = NULL, active_action = NULL"
                " WHERE id = 1 AND active_round = ?",
                (round_index,),
            )

    def round(self, round_index: int) -> RoundRecord:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM rounds WHERE round_index = ?", (round_index,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no round {round_index}")
        return _round_from_row(row)

    def rounds(self) -> list[RoundRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM rounds ORDER BY round_index"
            ).fetchall()
        return [_round_from_row(r) for r in rows]

    # -- candidates ----------------------------------------------------------

    def submit_candidate(
        self, record: CandidateRecord, metrics: Sequence[MetricSample] = ()
    ) -> int:
        """Register a candidate with its metric samples atomically.

        Assigns the candidate id and derives the lineage id from the action
        and parents; rejects records violating the lineage rules before any
        write happens.
        """
        if record.action not in ROUND_ACTIONS:
            raise LineageError(f"unknown candidate action: {record.action!r}")
        if record.suggested_next_action is not None and (
            record.suggested_next_action not in SUGGESTIONS
        ):
            raise StoreError(
                f"unknown suggested_next_action: {record.suggested_next_action!r}"
            )
        artifact = self.root / record.artifact_path
        if not artifact.exists():
            raise StoreError(
                f"artifact {record.artifact_path!r} does not exist under {self.root}"
            )
        parent_ids = list(record.parent_ids)
        _check_lineage_arity(record.action, parent_ids)
        with self._lock, self._conn:
            round_row = self._conn.execute(
                "SELECT status FROM rounds WHERE round_index = ?",
                (record.round_index,),
            ).fetchone()
            if round_row is None:
                raise StateError(f"no active round {record.round_index}")
            if round_row["status"] != "running":
                raise StateError(
                    f"round {record.round_index} is {round_row['status']},"
                    " not accepting submissions"
                )
            parent_lineages = []
            for pid in parent_ids:
                parent = self._conn.execute(
                    "SELECT lineage_id FROM candidates WHERE candidate_id = ?",
                    (pid,),
                ).fetchone()
                if parent is None:
                    raise LineageError(f"parent candidate {pid} does not exist")
                parent_lineages.append(parent["lineage_id"])
            for sample in metrics:
                known = self._conn.execute(
                    "SELECT name FROM metric_definitions WHERE name = ?",
                    (sample.metric_name,),
                ).fetchone()
                if known is None:
                    raise NotFoundError(f"metric {sample.metric_name!r} is not defined")
            cur = self._conn.execute(
                "INSERT INTO candidates"
                " (round_index, action, description, artifact_path, lineage_id,"
                "  parent_ids, settings, analysis, suggested_next_action, notes)"
                " VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    record.round_index,
                    record.action,
                    record.description,
                    record.artifact_path,
                    -1,
                    json.dumps(parent_ids),
                    json.dumps(record.settings),
                    record.analysis,
                    record.suggested_next_action,
                    record.notes,
                ),
            )
            candidate_id = int(cur.lastrowid)
            lineage_id = _derive_lineage(
                record.action, candidate_id, parent_lineages
            )
            if record.lineage_id is not None and record.lineage_id != lineage_id:
                raise LineageError(
                    f"caller lineage_id {record.lineage_id} disagrees with"
                    f" derived lineage_id {lineage_id}"
                )
            self._conn.execute(
                "UPDATE candidates SET lineage_id = ? WHERE candidate_id = ?",
                (lineage_id, candidate_id),
            )
            for sample in metrics:
                self._conn.execute(
                    "INSERT OR REPLACE INTO metrics (candidate_id, metric_name, value)"
                    " VALUES (?, ?, ?)",
                    (candidate_id, sample.metric_name, float(sample.value)),
                )
            self._refresh_round_winner(record.round_index)
        record.candidate_id = candidate_id
        record.lineage_id = lineage_id
        return candidate_id

    def _refresh_round_winner(self, round_index: int) -> None:
        # argbest over the round's submissions under the primary metric;
        # ties keep the earlier submission
        primary = self._conn.execute(
            "SELECT name, direction FROM metric_definitions WHERE is_primary = 1"
        ).fetchone()
        if primary is None:
            return
        order = "DESC" if primary["direction"] == "maximize" else "ASC"
        row = self._conn.execute(
            "SELECT c.candidate_id FROM candidates c"
            " JOIN metrics m ON m.candidate_id = c.candidate_id"
            " WHERE c.round_index = ? AND m.metric_name = ?"
            f" ORDER BY m.value {order}, c.candidate_id ASC LIMIT 1",
            (round_index, primary["name"]),
        ).fetchone()
        if row is not None:
            self._conn.execute(
                "UPDATE rounds SET winning_candidate_id = ? WHERE round_index = ?",
                (row["candidate_id"], round_index),
            )

    def candidate(self, candidate_id: int) -> CandidateRecord:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM candidates WHERE candidate_id = ?", (candidate_id,)
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no candidate {candidate_id}")
        return _candidate_from_row(row)

    def candidates(self) -> list[CandidateRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM candidates ORDER BY candidate_id"
            ).fetchall()
        return [_candidate_from_row(r) for r in rows]

    def candidate_count(self) -> int:
        with self._lock:
            return self._conn.execute("SELECT COUNT(*) FROM candidates").fetchone()[0]

    def update_candidate_analysis(self, candidate_id: int, analysis: str) -> None:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE candidates SET analysis = ? WHERE candidate_id = ?",
                (analysis, candidate_id),
            )
            if cur.rowcount == 0:
                raise NotFoundError(f"no candidate {candidate_id}")

    # -- metric samples ------------------------------------------------------

    def log_metric(self, sample: MetricSample) -> None:
        """Insert or replace one metric sample for an existing candidate."""
        with self._lock, self._conn:
            self._require_candidate(sample.candidate_id)
            known = self._conn.execute(
                "SELECT name FROM metric_definitions WHERE name = ?",
                (sample.metric_name,),
            ).fetchone()
            if known is None:
                raise NotFoundError(f"metric {sample.metric_name!r} is not defined")
            self._conn.execute(
                "INSERT OR REPLACE INTO metrics (candidate_id, metric_name, value)"
                " VALUES (?, ?, ?)",
                (sample.candidate_id, sample.metric_name, float(sample.value)),
            )
            row = self._conn.execute(
                "SELECT round_index FROM candidates WHERE candidate_id = ?",
                (sample.candidate_id,),
            ).fetchone()
            self._refresh_round_winner(row["round_index"])

    def metric_history(self, metric_name: str) -> list[tuple[int, int, float]]:
        """(candidate_id, round_index, value) rows for one metric, by candidate."""
        with self._lock:
            known = self._conn.execute(
                "SELECT name FROM metric_definitions WHERE name = ?", (metric_name,)
            ).fetchone()
            if known is None:
                raise NotFoundError(f"metric {metric_name!r} is not defined")
            rows = self._conn.execute(
                "SELECT m.candidate_id, c.round_index, m.value FROM metrics m"
                " JOIN candidates c ON c.candidate_id = m.candidate_id"
                " WHERE m.metric_name = ? ORDER BY m.candidate_id",
                (metric_name,),
            ).fetchall()
        return [(r["candidate_id"], r["round_index"], r["value"]) for r in rows]

    def metrics_for(self, candidate_id: int) -> dict[str, float]:
        with self._lock:
            self._require_candidate(candidate_id)
            rows = self._conn.execute(
                "SELECT metric_name, value FROM metrics WHERE candidate_id = ?"
                " ORDER BY metric_name",
                (candidate_id,),
            ).fetchall()
        return {r["metric_name"]: r["value"] for r in rows}

    # -- holdout metrics -----------------------------------------------------

    def record_holdout_metric(self, sample: HoldoutMetricSample) -> None:
        if sample.value is None and not sample.failure_note:
            raise StoreError("null holdout value requires a non-empty failure note")
        if sample.value is not None and sample.failure_note:
            raise StoreError("holdout value and failure note are mutually exclusive")
        with self._lock, self._conn:
            self._require_candidate(sample.candidate_id)
            self._conn.execute(
                "INSERT OR REPLACE INTO holdout_test_metrics"
                " (candidate_id, value, failure_note) VALUES (?, ?, ?)",
                (sample.candidate_id, sample.value, sample.failure_note),
            )

    def holdout_metrics(self) -> list[HoldoutMetricSample]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM holdout_test_metrics ORDER BY candidate_id"
            ).fetchall()
        return [
            HoldoutMetricSample(
                candidate_id=r["candidate_id"],
                value=r["value"],
                failure_note=r["failure_note"],
            )
            for r in rows
        ]

    def holdout_metric_for(self, candidate_id: int) -> Optional[HoldoutMetricSample]:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM holdout_test_metrics WHERE candidate_id = ?",
                (candidate_id,),
            ).fetchone()
        if row is None:
            return None
        return HoldoutMetricSample(
            candidate_id=row["candidate_id"],
            value=row["value"],
            failure_note=row["failure_note"],
        )

    # -- failures --------------------------------------------------------

    def record_failure(self, rec: FailureRecord) -> None:
        if not rec.error_message:
            raise StoreError("failure error_message must be non-empty")
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT round_index FROM rounds WHERE round_index = ?",
                (rec.round_index,),
            ).fetchone()
            if row is None:
                raise StateError(f"no round {rec.round_index} to attach failure to")
            self._conn.execute(
                "INSERT INTO candidate_failures"
                " (round_index, failing_code_path, parent_ids, error_message,"
                "  settings, metadata)"
                " VALUES (?, ?, ?, ?, ?, ?)",
                (
                    rec.round_index,
                    rec.failing_code_path,
                    json.dumps(list(rec.parent_ids)),
                    rec.error_message,
                    json.dumps(rec.settings),
                    json.dumps(rec.metadata),
                ),
            )

    def failures(self) -> list[FailureRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM candidate_failures ORDER BY failure_id"
            ).fetchall()
        return [
            FailureRecord(
                round_index=r["round_index"],
                failing_code_path=r["failing_code_path"],
                error_message=r["error_message"],
                parent_ids=json.loads(r["parent_ids"]),
                settings=json.loads(r["settings"]),
                metadata=json.loads(r["metadata"]),
            )
            for r in rows
        ]

    # -- history -----------------------------------------------------------

    def query_history(self, top_n: Optional[int] = None) -> list[HistoryEntry]:
        """Candidates joined with their primary-metric value, best first.

        Ties break to the earlier round, then the lower candidate id.
        """
        with self._lock:
            primary = self._conn.execute(
                "SELECT name, direction FROM metric_definitions WHERE is_primary = 1"
            ).fetchone()
            if primary is None:
                raise StateError("no primary metric is defined")
            order = "DESC" if primary["direction"] == "maximize" else "ASC"
            sql = (
                "SELECT c.*, m.value AS value FROM candidates c"
                " JOIN metrics m ON m.candidate_id = c.candidate_id"
                " WHERE m.metric_name = ?"
                f" ORDER BY m.value {order}, c.round_index ASC, c.candidate_id ASC"
            )
            params: tuple = (primary["name"],)
            if top_n is not None:
                sql += " LIMIT ?"
                params = (primary["name"], top_n)
            rows = self._conn.execute(sql, params).fetchall()
        return [
            HistoryEntry(
                candidate_id=r["candidate_id"],
                round_index=r["round_index"],
                action=r["action"],
                lineage_id=r["lineage_id"],
                parent_ids=tuple(json.loads(r["parent_ids"])),
                value=r["value"],
                description=r["description"],
                analysis_excerpt=r["analysis"][:_ANALYSIS_EXCERPT_CHARS],
            )
            for r in rows
        ]

    def best_candidate(self) -> Optional[HistoryEntry]:
        ranked = self.query_history(top_n=1)
        return ranked[0] if ranked else None

    # -- session state -------------------------------------------------------

    def session_state(self) -> SessionState:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM session_state WHERE id = 1"
            ).fetchone()
        return SessionState(
            phase=row["phase"],
            run_status=row["run_status"],
            active_round=row["active_round"],
            active_action=row["active_action"],
            preparation_summary=row["preparation_summary"],
            stop_reason=row["stop_reason"],
        )

    def set_phase(self, phase: str) -> None:
        if phase not in PHASES:
            raise StoreError(f"unknown phase: {phase!r}")
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE session_state SET phase = ? WHERE id = 1", (phase,)
            )

    def set_preparation_summary(self, summary: str) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE session_state SET preparation_summary = ? WHERE id = 1",
                (summary,),
            )

    def stop(self, reason: str) -> None:
        if not reason:
            raise StateError("stopping requires a non-empty reason")
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE session_state SET run_status = 'stopped', stop_reason = ?"
                " WHERE id = 1",
                (reason,),
            )

    # -- internals -----------------------------------------------------------

    def _require_candidate(self, candidate_id: Optional[int]) -> None:
        row = self._conn.execute(
            "SELECT candidate_id FROM candidates WHERE candidate_id = ?",
            (candidate_id,),
        ).fetchone()
        if row is None:
            raise NotFoundError(f"no candidate {candidate_id}")


def open_or_create(db_path: Path | str) -> SearchStore:
    """Open the session database, creating the schema on first use."""
    path = Path(db_path)
    if not path.parent.exists():
        raise StoreError(f"parent directory {path.parent} does not exist")
    return SearchStore(path)


def recover_session(db_path: Path | str) -> tuple[SearchStore, Recovery]:
    """Reopen an interrupted session and compute the resume point.

    Rounds left in status ``running`` are marked failed: agent context is
    not persisted, so a half-finished round cannot be resumed and the
    controller restarts from the next round index instead.
    """
    path = Path(db_path)
    if not path.exists():
        raise StoreError(f"no database at {path}")
    store = open_or_create(path)
    with store._lock, store._conn:
        rows = store._conn.execute(
            "SELECT round_index FROM rounds WHERE status = 'running'"
            " ORDER BY round_index"
        ).fetchall()
        failed = tuple(r["round_index"] for r in rows)
        for round_index in failed:
            store._conn.execute(
                "UPDATE rounds SET status = 'failed',"
                " summary = 'interrupted; marked failed on recovery'"
                " WHERE round_index = ?",
                (round_index,),
            )
        store._conn.execute(
            "UPDATE session_state SET active_round = NULL, active_action = NULL"
            " WHERE id = 1"
        )
        top = store._conn.execute(
            "SELECT COALESCE(MAX(round_index), -1) AS top FROM rounds"
        ).fetchone()["top"]
    state = store.session_state()
    resume = None if state.phase == "finished" else top + 1
    if failed:
        logger.warning(
            "recovered session %s: rounds %s marked failed, resuming at %s",
            path,
            list(failed),
            resume,
        )
    return store, Recovery(state=state, resume_round=resume, failed_rounds=failed)


def _check_lineage_arity(action: str, parent_ids: list[int]) -> None:
    arity = {"baseline": 0, "generate": 0, "tune": 1, "evolve": 2, "mutate": 1}
    expected = arity[action]
    if len(parent_ids) != expected:
        raise LineageError(
            f"action {action!r} requires exactly {expected} parent(s),"
            f" got {len(parent_ids)}"
        )
    if len(set(parent_ids)) != len(parent_ids):
        raise LineageError("parent_ids must be distinct")


def _derive_lineage(
    action: str, candidate_id: int, parent_lineages: list[int]
) -> int:
    # generate / baseline / evolve start a fresh lineage keyed by the new id;
    # tune and mutate stay within the parent's lineage
    if action in ("generate", "baseline", "evolve"):
        return candidate_id
    return parent_lineages[0]


def _round_from_row(row: sqlite3.Row) -> RoundRecord:
    return RoundRecord(
        round_index=row["round_index"],
        action=row["action"],
        status=row["status"],
        summary=row["summary"],
        winning_candidate_id=row["winning_candidate_id"],
    )


def _candidate_from_row(row: sqlite3.Row) -> CandidateRecord:
    return CandidateRecord(
        candidate_id=row["candidate_id"],
        round_index=row["round_index"],
        action=row["action"],
        description=row["description"],
        artifact_path=row["artifact_path"],
        lineage_id=row["lineage_id"],
        parent_ids=json.loads(row["parent_ids"]),
        settings=json.loads(row["settings"]),
        analysis=row["analysis"],
        suggested_next_action=row["suggested_next_action"],
        notes=row["notes"],
    )
