"""Search-state bridge: the agent-facing face of the store.

Every bridge tool delegates to the corresponding store operation and renders
the result as compact text for the model. `submit_candidate` is the single
formal registration call; in holdout mode it additionally requires the
candidate root to contain `holdout_test_info.json` before accepting.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .agent import ToolOutcome
from .guard import WorkspaceGuard
from .store import (
    CandidateRecord,
    FailureRecord,
    MetricDefinition,
    MetricSample,
    NotFoundError,
    SearchStore,
    StoreError,
)

logger = logging.getLogger(__name__)

HOLDOUT_CONTRACT_NAME = "holdout_test_info.json"


@dataclass
class RoundContext:
    """What the bridge knows about the round it is serving."""

    round_index: int
    action: str
    parent_ids: list[int] = field(default_factory=list)
    holdout_required: bool = False


class StateBridge:
    """Store-backed tools for one worker's round."""

    def __init__(
        self, store: SearchStore, guard: WorkspaceGuard, context: RoundContext
    ) -> None:
        self.store = store
        self.guard = guard
        self.context = context
        self._pending_analysis: Optional[str] = None
        self.submitted_candidate_ids: list[int] = []

    # -- metric and evaluation tools -----------------------------------------

    def set_primary_metric(
        self,
        name: str,
        direction: str,
        description: str = "",
        target_value: Optional[float] = None,
    ) -> ToolOutcome:
        self.store.define_metric(
            MetricDefinition(
                name=name,
                direction=direction,
                description=description,
                target_value=target_value,
                is_primary=True,
            )
        )
        return ToolOutcome(text=f"primary metric set: {name} ({direction})")

    def log_evaluation(
        self, candidate_id: int, metric_name: str, value: float
    ) -> ToolOutcome:
        try:
            self.store.log_metric(MetricSample(candidate_id, metric_name, value))
        except NotFoundError as exc:
            defined = ", ".join(d.name for d in self.store.metric_definitions())
            return ToolOutcome(
                text=f"{exc}; defined metrics: {defined or '(none)'}", is_error=True
            )
        return ToolOutcome(
            text=f"logged {metric_name}={value} for candidate {candidate_id}"
        )

    # -- view tools ----------------------------------------------------------

    def view_search_history(self, top_n: int = 10) -> ToolOutcome:
        entries = self.store.query_history(top_n=top_n)
        if not entries:
            return ToolOutcome(text="no candidates submitted yet")
        header = "rank | cand | round | action | lineage | parents | value"
        lines = [header, "-" * len(header)]
        for rank, e in enumerate(entries, start=1):
            parents = ",".join(str(p) for p in e.parent_ids) or "-"
            lines.append(
                f"{rank:4d} | {e.candidate_id:4d} | {e.round_index:5d} |"
                f" {e.action:7s}| {e.lineage_id:7d} | {parents:7s} | {e.value:.6g}"
            )
        return ToolOutcome(text="\n".join(lines), structured={"rows": len(entries)})

    def view_candidate(self, candidate_id: int) -> ToolOutcome:
        record = self.store.candidate(candidate_id)
        metrics = self.store.metrics_for(candidate_id)
        holdout = self.store.holdout_metric_for(candidate_id)
        lines = [
            f"candidate {record.candidate_id} (round {record.round_index},"
            f" action {record.action})",
            f"lineage: {record.lineage_id}; parents: {record.parent_ids or '-'}",
            f"artifact: {record.artifact_path}",
            f"description: {record.description}",
            f"settings: {json.dumps(record.settings)}",
            f"metrics: {json.dumps(metrics)}",
        ]
        if record.analysis:
            lines.append(f"analysis: {record.analysis}")
        if holdout is not None:
            shown = holdout.value if holdout.value is not None else holdout.failure_note
            lines.append(f"holdout: {shown}")
        return ToolOutcome(text="\n".join(lines))

    def view_metric_history(self, metric_name: str) -> ToolOutcome:
        try:
            rows = self.store.metric_history(metric_name)
        except NotFoundError as exc:
            defined = ", ".join(d.name for d in self.store.metric_definitions())
            return ToolOutcome(
                text=f"{exc}; defined metrics: {defined or '(none)'}", is_error=True
            )
        if not rows:
            return ToolOutcome(text=f"no samples recorded for {metric_name}")
        lines = [f"cand | round | {metric_name}"]
        for candidate_id, round_index, value in rows:
            lines.append(f"{candidate_id:4d} | {round_index:5d} | {value:.6g}")
        return ToolOutcome(text="\n".join(lines), structured={"rows": len(rows)})

    # -- analysis, failures, submission ----------------------------------

    def analyze_results(self, analysis: str) -> ToolOutcome:
        """Attach a structured analysis to the candidate being prepared."""
        if not analysis or not analysis.strip():
            return ToolOutcome(text="analysis must be non-empty", is_error=True)
        self._pending_analysis = analysis
        return ToolOutcome(text="analysis recorded; it will be attached on submission")

    def record_failure(
        self,
        failing_code_path: str,
        error_message: str,
        parent_ids: Optional[list[int]] = None,
        settings: Optional[dict] = None,
        metadata: Optional[dict] = None,
    ) -> ToolOutcome:
        self.store.record_failure(
            FailureRecord(
                round_index=self.context.round_index,
                failing_code_path=failing_code_path,
                error_message=error_message,
                parent_ids=parent_ids if parent_ids is not None else list(self.context.parent_ids),
                settings=settings or {},
                metadata=metadata or {},
            )
        )
        return ToolOutcome(text=f"failure recorded for round {self.context.round_index}")

    def submit_candidate(
        self,
        description: str,
        artifact_path: str,
        metrics: Optional[dict] = None,
        settings: Optional[dict] = None,
        parent_ids: Optional[list[int]] = None,
        suggested_next_action: Optional[str] = None,
        notes: str = "",
    ) -> ToolOutcome:
        """Formally register the candidate built this round."""
        resolved = self.guard.resolve(artifact_path)
        relative = str(resolved.relative_to(self.guard.root))
        if self.context.holdout_required:
            contract = resolved.parent / HOLDOUT_CONTRACT_NAME
            if not contract.exists():
                return ToolOutcome(
                    text=(
                        f"submission rejected: holdout mode requires"
                        f" {HOLDOUT_CONTRACT_NAME} in the candidate root"
                        f" ({self.guard.relative(resolved.parent)}). Write it"
                        " (fields: files, main, command) and submit again."
                    ),
                    is_error=True,
                )
        record = CandidateRecord(
            round_index=self.context.round_index,
            action=self.context.action,
            description=description,
            artifact_path=relative,
            parent_ids=(
                parent_ids if parent_ids is not None else list(self.context.parent_ids)
            ),
            settings=settings or {},
            analysis=self._pending_analysis or "",
            suggested_next_action=suggested_next_action,
            notes=notes,
        )
        samples = [
            MetricSample(None, name, float(value))
            for name, value in (metrics or {}).items()
        ]
        try:
            candidate_id = self.store.submit_candidate(record, samples)
        except StoreError as exc:
            return ToolOutcome(text=f"submission rejected: {exc}", is_error=True)
        self._pending_analysis = None
        self.submitted_candidate_ids.append(candidate_id)
        return ToolOutcome(
            text=(
                f"candidate {candidate_id} registered (lineage"
                f" {record.lineage_id}, round {self.context.round_index})"
            ),
            structured={"candidate_id": candidate_id},
        )
