"""Session report assembly and serialization.

Reports are rebuilt from the store on demand, so a report over a resumed or
crashed session reflects exactly what was persisted. The best-so-far series
is monotone in the metric direction by construction.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .store import SearchStore


@dataclass(frozen=True)
class RoundRow:
    round_index: int
    action: str
    status: str
    winner_candidate_id: Optional[int]
    winner_value: Optional[float]
    best_so_far: Optional[float]
    holdout_value: Optional[float] = None


@dataclass(frozen=True)
class CandidateRow:
    candidate_id: int
    round_index: int
    action: str
    lineage_id: int
    parent_ids: tuple[int, ...]
    value: Optional[float]
    description: str


@dataclass
class SessionReport:
    metric_name: str
    direction: str
    phase: str
    run_status: str
    stop_reason: str
    rounds: list[RoundRow] = field(default_factory=list)
    candidates: list[CandidateRow] = field(default_factory=list)
    best_candidate_id: Optional[int] = None
    best_value: Optional[float] = None
    failure_count: int = 0
    holdout: list[dict] = field(default_factory=list)

    def completed_rounds(self) -> int:
        return sum(1 for row in self.rounds if row.status == "completed")


def build_report(store: SearchStore) -> SessionReport:
    state = store.session_state()
    primary = store.primary_metric()
    metric_name = primary.name if primary else ""
    direction = primary.direction if primary else ""
    report = SessionReport(
        metric_name=metric_name,
        direction=direction,
        phase=state.phase,
        run_status=state.run_status,
        stop_reason=state.stop_reason or "",
    )
    if primary is None:
        return report

    values = {
        cid: value for cid, _round, value in store.metric_history(primary.name)
    }
    holdout_values = {
        sample.candidate_id: sample.value for sample in store.holdout_metrics()
    }
    better = min if direction == "minimize" else max
    best_so_far: Optional[float] = None
    for rnd in store.rounds():
        winner_value = (
            values.get(rnd.winning_candidate_id)
            if rnd.winning_candidate_id is not None
            else None
        )
        if winner_value is not None:
            best_so_far = (
                winner_value
                if best_so_far is None
                else better(best_so_far, winner_value)
            )
        report.rounds.append(
            RoundRow(
                round_index=rnd.round_index,
                action=rnd.action,
                status=rnd.status,
                winner_candidate_id=rnd.winning_candidate_id,
                winner_value=winner_value,
                best_so_far=best_so_far,
                holdout_value=holdout_values.get(rnd.winning_candidate_id),
            )
        )
    for record in store.candidates():
        report.candidates.append(
            CandidateRow(
                candidate_id=record.candidate_id,
                round_index=record.round_index,
                action=record.action,
                lineage_id=record.lineage_id,
                parent_ids=tuple(record.parent_ids),
                value=values.get(record.candidate_id),
                description=record.description,
            )
        )
    best = store.best_candidate()
    if best is not None:
        report.best_candidate_id = best.candidate_id
        report.best_value = values.get(best.candidate_id)
    report.failure_count = len(store.failures())
    rounds_by_candidate = {
        row.candidate_id: row.round_index for row in report.candidates
    }
    for sample in store.holdout_metrics():
        report.holdout.append(
            {
                "round_index": rounds_by_candidate.get(sample.candidate_id),
                "candidate_id": sample.candidate_id,
                "metric_name": metric_name,
                "value": sample.value,
                "note": sample.failure_note or "",
            }
        )
    return report


def report_to_json(report: SessionReport) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True)


def report_to_csv(report: SessionReport) -> str:
    """Per-round progress table, one row per round."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "round_index",
            "action",
            "status",
            "winner_candidate_id",
            "winner_value",
            "best_so_far",
            "holdout_value",
        ]
    )
    for row in report.rounds:
        writer.writerow(
            [
                row.round_index,
                row.action,
                row.status,
                "" if row.winner_candidate_id is None else row.winner_candidate_id,
                "" if row.winner_value is None else repr(row.winner_value),
                "" if row.best_so_far is None else repr(row.best_so_far),
                "" if row.holdout_value is None else repr(row.holdout_value),
            ]
        )
    return buf.getvalue()


def report_to_text(report: SessionReport) -> str:
    lines = [
        f"metric: {report.metric_name} ({report.direction})",
        f"phase: {report.phase}  status: {report.run_status}",
    ]
    if report.stop_reason:
        lines.append(f"stop reason: {report.stop_reason}")
    lines.append(
        f"rounds: {len(report.rounds)} total,"
        f" {report.completed_rounds()} completed,"
        f" {report.failure_count} failure record(s)"
    )
    if report.best_candidate_id is not None:
        lines.append(
            f"best candidate: #{report.best_candidate_id}"
            f" value={report.best_value}"
        )
    for row in report.rounds:
        winner = (
            f"winner #{row.winner_candidate_id}={row.winner_value}"
            if row.winner_candidate_id is not None
            else "no winner"
        )
        lines.append(
            f"  round {row.round_index:>3} {row.action:<9} {row.status:<9} {winner}"
        )
    if report.holdout:
        lines.append("holdout evaluations:")
        for entry in report.holdout:
            shown = entry["value"] if entry["value"] is not None else f"n/a ({entry['note']})"
            lines.append(
                f"  round {entry['round_index']:>3} candidate"
                f" #{entry['candidate_id']} {entry['metric_name']}={shown}"
            )
    return "\n".join(lines) + "\n"
