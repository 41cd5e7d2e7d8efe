"""Session lifecycle and round branching.

One controller drives a whole search session: a preparation stage, a
baseline round (round 0), then discovery rounds whose action is chosen from
ranked history through a fixed decision order: warmup, forced exploration,
majority suggestion, tier thresholds, generate fallback. Round execution is
delegated to a pluggable executor so the same branching logic drives both
agent-backed sessions and the LLM-free synthetic benchmark.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, Sequence

from .report import SessionReport, build_report
from .sampling import (
    SamplingConfig,
    build_evolve_pool,
    build_tune_pool,
    PoolEntry,
    sample_evolve_parents,
    sample_tune_parents,
)
from .store import FailureRecord, SearchStore, StateError, StoreError

logger = logging.getLogger(__name__)

SUGGESTION_ACTIONS = ("generate", "tune", "evolve")


class ControllerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerConfig:
    total_rounds: int = 20
    warmup_generate_rounds: int = 2
    forced_generate_every: Optional[int] = 5
    majority_window: int = 3
    min_excellent_for_tune: int = 1
    min_moderate_for_evolve: int = 2
    excellent_fraction: float = 0.9
    moderate_fraction: float = 0.5
    tune_workers: int = 2
    generate_workers: int = 1
    early_stop_patience: Optional[int] = None

    def __post_init__(self) -> None:
        if self.total_rounds < 0:
            raise ControllerError("total_rounds must be >= 0")
        if self.warmup_generate_rounds < 0:
            raise ControllerError("warmup_generate_rounds must be >= 0")
        if 0 < self.total_rounds <= self.warmup_generate_rounds:
            raise ControllerError("warmup_generate_rounds must be < total_rounds")
        if self.forced_generate_every is not None and self.forced_generate_every < 1:
            raise ControllerError("forced_generate_every must be positive")
        if self.majority_window < 1:
            raise ControllerError("majority_window must be positive")
        if not (0 < self.moderate_fraction <= self.excellent_fraction <= 1):
            raise ControllerError(
                "need 0 < moderate_fraction <= excellent_fraction <= 1"
            )
        if self.tune_workers < 1 or self.generate_workers < 1:
            raise ControllerError("worker counts must be positive")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ControllerError("early_stop_patience must be positive")


@dataclass(frozen=True)
class TierCounts:
    excellent: int
    moderate_or_better: int
    total: int

    def __post_init__(self) -> None:
        if not (0 <= self.excellent <= self.moderate_or_better <= self.total):
            raise ControllerError(
                f"tier counts must nest: {self.excellent} <="
                f" {self.moderate_or_better} <= {self.total}"
            )


@dataclass(frozen=True)
class RoundPlan:
    round_index: int
    action: str
    parents: tuple[int, ...] = ()
    workers: int = 1

    def __post_init__(self) -> None:
        arity_ok = {
            "baseline": len(self.parents) == 0,
            "generate": len(self.parents) == 0,
            "tune": len(self.parents) == self.workers >= 1,
            "evolve": len(self.parents) == 2 and self.workers == 1,
            "mutate": len(self.parents) == 1 and self.workers == 1,
        }
        if self.action not in arity_ok:
            raise ControllerError(f"unknown plan action: {self.action!r}")
        if not arity_ok[self.action]:
            raise ControllerError(
                f"plan violates parent arity: {self.action} with"
                f" {len(self.parents)} parent(s), {self.workers} worker(s)"
            )


@dataclass(frozen=True)
class CandidateSignal:
    """Recent-submission view used by the majority rule."""

    candidate_id: int
    value: float
    suggestion: Optional[str] = None


@dataclass
class RoundOutcome:
    """What a round executor reports back to the controller."""

    candidate_ids: list[int] = field(default_factory=list)
    summary: str = ""
    failure: Optional[str] = None
    failing_code_path: str = ""


class RoundExecutor(Protocol):
    def prepare(self, store: SearchStore) -> str: ...

    def run_round(self, plan: RoundPlan, store: SearchStore) -> RoundOutcome: ...


# -- tier computation ----------------------------------------------------


def improvement_share(
    value: float,
    direction: str,
    best: float,
    ref: float,
    baseline_anchored: bool,
) -> float:
    """Fractional position of `value` in the ref -> best improvement span.

    A zero or inverted span means no candidate improved on the reference:
    with a real baseline that makes every share 0, while a history-anchored
    reference (ref = worst) means all values are equal and count as 1.
    """
    sign = 1.0 if direction == "minimize" else -1.0
    span = sign * (ref - best)
    if span <= 0:
        return 0.0 if baseline_anchored else 1.0
    return sign * (ref - value) / span


def compute_tiers(
    history: Sequence,
    direction: str,
    cfg: ControllerConfig,
    baseline_value: Optional[float] = None,
) -> TierCounts:
    """Count excellent / moderate-or-better candidates in ranked history."""
    if not history:
        raise StateError("tier computation needs non-empty history")
    values = [entry.value for entry in history]
    best = min(values) if direction == "minimize" else max(values)
    if baseline_value is not None:
        ref = baseline_value
    else:
        ref = max(values) if direction == "minimize" else min(values)
    excellent = 0
    moderate = 0
    for value in values:
        share = improvement_share(
            value, direction, best, ref, baseline_anchored=baseline_value is not None
        )
        if share >= cfg.excellent_fraction:
            excellent += 1
        if share >= cfg.moderate_fraction:
            moderate += 1
    return TierCounts(excellent=excellent, moderate_or_better=moderate, total=len(values))


# -- action selection ----------------------------------------------------


def select_next_action(
    round_index: int,
    history: Sequence,
    tiers: Optional[TierCounts],
    signals: Sequence[CandidateSignal],
    cfg: ControllerConfig,
    sampling: SamplingConfig,
    direction: str,
    baseline_value: Optional[float] = None,
    rng: Optional[random.Random] = None,
) -> RoundPlan:
    """Pick the next round's action and parents. Total: always yields a plan.

    Decision order: warmup -> forced generate -> majority suggestion ->
    tune threshold -> evolve threshold (mutate when the pool is a single
    candidate) -> generate.
    """
    rng = rng or random.Random(sampling.rng_seed)

    def generate_plan() -> RoundPlan:
        return RoundPlan(
            round_index=round_index, action="generate", workers=cfg.generate_workers
        )

    if round_index <= cfg.warmup_generate_rounds:
        return generate_plan()
    if (
        cfg.forced_generate_every is not None
        and (round_index - cfg.warmup_generate_rounds) % cfg.forced_generate_every == 0
    ):
        return generate_plan()
    if not history or tiers is None:
        return generate_plan()

    def tune_plan() -> RoundPlan:
        pool = build_tune_pool(_pool_entries(history), direction)
        parents = sample_tune_parents(pool, cfg.tune_workers, sampling, rng=rng)
        return RoundPlan(
            round_index=round_index,
            action="tune",
            parents=tuple(p.candidate_id for p in parents),
            workers=len(parents),
        )

    def evolve_plan() -> RoundPlan:
        pool = build_evolve_pool(_pool_entries(history), direction)
        if len(pool) == 1:
            return RoundPlan(
                round_index=round_index,
                action="mutate",
                parents=(pool[0].candidate_id,),
                workers=1,
            )
        a, b = sample_evolve_parents(pool, sampling, rng=rng)
        return RoundPlan(
            round_index=round_index,
            action="evolve",
            parents=(a.candidate_id, b.candidate_id),
            workers=1,
        )

    preconditions: dict[str, Callable[[], bool]] = {
        "generate": lambda: True,
        "tune": lambda: tiers.excellent >= cfg.min_excellent_for_tune,
        "evolve": lambda: tiers.moderate_or_better >= cfg.min_moderate_for_evolve,
    }
    majority = _majority_suggestion(
        signals, cfg, direction, history, baseline_value
    )
    if majority is not None and preconditions[majority]():
        if majority == "generate":
            return generate_plan()
        if majority == "tune":
            return tune_plan()
        return evolve_plan()
    if tiers.excellent >= cfg.min_excellent_for_tune:
        return tune_plan()
    if tiers.moderate_or_better >= cfg.min_moderate_for_evolve:
        return evolve_plan()
    return generate_plan()


def _pool_entries(history: Sequence) -> list[PoolEntry]:
    return [
        PoolEntry(
            candidate_id=entry.candidate_id,
            lineage_id=entry.lineage_id,
            value=entry.value,
            round_index=entry.round_index,
        )
        for entry in history
    ]


def _majority_suggestion(
    signals: Sequence[CandidateSignal],
    cfg: ControllerConfig,
    direction: str,
    history: Sequence,
    baseline_value: Optional[float],
) -> Optional[str]:
    # strict majority among the recent moderate-or-better candidates
    if not signals or not history:
        return None
    values = [entry.value for entry in history]
    best = min(values) if direction == "minimize" else max(values)
    if baseline_value is not None:
        ref = baseline_value
    else:
        ref = max(values) if direction == "minimize" else min(values)
    recent = list(signals)[-cfg.majority_window :]
    strong = [
        s
        for s in recent
        if improvement_share(
            s.value, direction, best, ref, baseline_anchored=baseline_value is not None
        )
        >= cfg.moderate_fraction
    ]
    voted = [s.suggestion for s in strong if s.suggestion in SUGGESTION_ACTIONS]
    if not voted:
        return None
    for action in SUGGESTION_ACTIONS:
        if voted.count(action) * 2 > len(strong):
            return action
    return None


# -- early stopping --------------------------------------------------------


def check_early_stop(
    history: Sequence,
    completed_rounds: Sequence[int],
    patience: Optional[int],
) -> tuple[bool, str]:
    """Stop once the best primary value is `patience` completed rounds stale.

    `history` is ranked best-first with ties broken to the earlier round, so
    the head's round_index is the first round that achieved the best value.
    Failed rounds consume budget but do not advance the staleness count.
    """
    if patience is None or not history:
        return False, ""
    best_round = history[0].round_index
    stale = sum(1 for r in completed_rounds if r > best_round)
    if stale >= patience:
        return True, (
            f"early stop: best primary metric unimproved since round"
            f" {best_round} ({stale} completed rounds >= patience {patience})"
        )
    return False, ""


# -- session driver --------------------------------------------------------


def run_session(
    cfg: ControllerConfig,
    store: SearchStore,
    executor: RoundExecutor,
    sampling: Optional[SamplingConfig] = None,
    holdout: Optional[Callable[[RoundPlan, SearchStore], None]] = None,
    resume_from: Optional[int] = None,
    rng: Optional[random.Random] = None,
) -> SessionReport:
    """Drive preparation, baseline, and discovery rounds to completion.

    Agent failures mark their round failed and the loop proceeds; storage
    failures abort the session with a stop reason. Each round gets a fresh
    executor invocation; no conversational state crosses rounds.
    """
    sampling = sampling or SamplingConfig()
    rng = rng or random.Random(sampling.rng_seed)
    try:
        state = store.session_state()
        start_round = resume_from if resume_from is not None else 0
        if state.phase == "preparation":
            try:
                summary = executor.prepare(store)
            except StoreError:
                raise
            except Exception as exc:
                raise StateError(f"preparation failed: {exc}")
            store.set_preparation_summary(summary)
            if store.primary_metric() is None:
                raise StateError(
                    "preparation must define a primary metric before rounds start"
                )
            store.set_phase("baseline")
            start_round = 0
        if store.session_state().phase == "baseline":
            if start_round <= 0:
                _run_one_round(
                    RoundPlan(round_index=0, action="baseline"),
                    store,
                    executor,
                    holdout,
                )
                start_round = 1
            store.set_phase("discovery")
        direction = store.primary_metric().direction
        baseline_value = _baseline_value(store)
        for round_index in range(max(start_round, 1), cfg.total_rounds + 1):
            history = _ranked_history(store)
            tiers = (
                compute_tiers(history, direction, cfg, baseline_value)
                if history
                else None
            )
            plan = select_next_action(
                round_index,
                history,
                tiers,
                _recent_signals(store),
                cfg,
                sampling,
                direction,
                baseline_value,
                rng=rng,
            )
            _run_one_round(plan, store, executor, holdout)
            completed = [
                r.round_index
                for r in store.rounds()
                if r.status == "completed" and r.round_index >= 1
            ]
            stop, reason = check_early_stop(
                _ranked_history(store), completed, cfg.early_stop_patience
            )
            if stop:
                store.stop(reason)
                logger.info("session stopped: %s", reason)
                break
        store.set_phase("finished")
    except (StoreError, ControllerError) as exc:
        reason = f"session aborted: {exc}"
        logger.error(reason)
        try:
            store.stop(reason)
            store.set_phase("finished")
        except StoreError:
            pass
        return build_report(store)
    return build_report(store)


def _run_one_round(
    plan: RoundPlan,
    store: SearchStore,
    executor: RoundExecutor,
    holdout: Optional[Callable[[RoundPlan, SearchStore], None]],
) -> None:
    store.begin_round(plan.round_index, plan.action)
    try:
        outcome = executor.run_round(plan, store)
    except StoreError:
        raise
    except Exception as exc:  # round failure must not kill the session
        logger.warning("round %d failed: %s", plan.round_index, exc)
        store.record_failure(
            FailureRecord(
                round_index=plan.round_index,
                failing_code_path="",
                error_message=f"{type(exc).__name__}: {exc}",
                parent_ids=list(plan.parents),
            )
        )
        store.finish_round(plan.round_index, status="failed", summary=str(exc))
        return
    if outcome.failure:
        store.record_failure(
            FailureRecord(
                round_index=plan.round_index,
                failing_code_path=outcome.failing_code_path,
                error_message=outcome.failure,
                parent_ids=list(plan.parents),
            )
        )
        store.finish_round(
            plan.round_index, status="failed", summary=outcome.failure
        )
    else:
        store.finish_round(
            plan.round_index, status="completed", summary=outcome.summary
        )
    if holdout is not None:
        holdout(plan, store)


def _ranked_history(store: SearchStore) -> list:
    try:
        return store.query_history()
    except StateError:
        return []


def _baseline_value(store: SearchStore) -> Optional[float]:
    primary = store.primary_metric()
    if primary is None:
        return None
    try:
        baseline_round = store.round(0)
    except StoreError:
        return None
    if baseline_round.winning_candidate_id is None:
        return None
    metrics = store.metrics_for(baseline_round.winning_candidate_id)
    return metrics.get(primary.name)


def _recent_signals(store: SearchStore) -> list[CandidateSignal]:
    primary = store.primary_metric()
    if primary is None:
        return []
    signals = []
    for record in store.candidates():
        value = store.metrics_for(record.candidate_id).get(primary.name)
        if value is None:
            continue
        signals.append(
            CandidateSignal(
                candidate_id=record.candidate_id,
                value=value,
                suggestion=record.suggested_next_action,
            )
        )
    return signals
