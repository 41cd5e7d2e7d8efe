"""Agent-backed session execution: providers, prompts, and the round executor.

Each round (and each worker within a round) gets a fresh agent context and
its own provider instance; nothing conversational crosses round boundaries.
Workers run concurrently in disjoint subdirectories of the shared workspace
and serialize through the store's write lock.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Protocol

from .agent import Provider, run_agent_loop
from .bridge import HOLDOUT_CONTRACT_NAME, RoundContext, StateBridge
from .config import ProviderConfig, SessionConfig
from .controller import RoundOutcome, RoundPlan
from .guard import WorkspaceGuard
from .holdout import round_winner_hook
from .providers import ChatEndpointConfig, HttpChatProvider, ScriptedProvider
from .store import FailureRecord, SearchStore
from .toolset import build_registry

logger = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are an autonomous algorithm developer working inside a sandboxed"
    " workspace. You iterate on analysis code: you read and write files, run"
    " them through the environment manager, evaluate results against the"
    " session's primary metric, and register finished candidates with the"
    " submission tool. Work only inside the workspace. Prefer small runnable"
    " steps, inspect failures, and always submit your best candidate with an"
    " honest metric value before finishing. Record an analysis of each"
    " result and suggest what the next round should do (generate, tune, or"
    " evolve) when the history supports it."
)

ACTION_GUIDANCE = {
    "baseline": (
        "This is the baseline round. Evaluate the provided reference"
        " approach on the task data without improving it, so later rounds"
        " have an anchor value. Submit it as your candidate."
    ),
    "generate": (
        "Design a fresh approach from scratch. Do not copy a previous"
        " candidate; explore a genuinely different idea."
    ),
    "tune": (
        "Improve your assigned parent candidate by adjusting its parameters"
        " or small implementation details while keeping its core idea."
    ),
    "evolve": (
        "Combine the strengths of the two parent candidates into one new"
        " approach. Study both before writing the hybrid."
    ),
    "mutate": (
        "Make a targeted variation of the single parent candidate:"
        " keep its core idea but change one meaningful design choice."
    ),
}


class ProviderFactory(Protocol):
    def preparation(self) -> Provider: ...

    def worker(self, round_index: int, worker_index: int) -> Provider: ...

    def holdout(self, round_index: int) -> Provider: ...


class ScriptedProviderFactory:
    """Transcripts resolved by naming convention inside one directory.

    preparation.json, round_NNN_worker_NN.json, holdout_round_NNN.json.
    A missing worker or holdout transcript plays as an empty script (the
    agent stops immediately); a missing preparation transcript is an error
    because no session can start without it.
    """

    def __init__(self, transcript_dir: Path) -> None:
        self.transcript_dir = Path(transcript_dir)

    def preparation(self) -> Provider:
        return ScriptedProvider.from_file(self.transcript_dir / "preparation.json")

    def worker(self, round_index: int, worker_index: int) -> Provider:
        return self._load(f"round_{round_index:03d}_worker_{worker_index:02d}.json")

    def holdout(self, round_index: int) -> Provider:
        return self._load(f"holdout_round_{round_index:03d}.json")

    def _load(self, name: str) -> Provider:
        path = self.transcript_dir / name
        if not path.is_file():
            logger.warning("no transcript %s; playing an empty script", path)
            return ScriptedProvider([], name=str(path))
        return ScriptedProvider.from_file(path)


class HttpProviderFactory:
    """A fresh HTTP provider per agent run; connections stay independent."""

    def __init__(self, cfg: ProviderConfig) -> None:
        self._endpoint = ChatEndpointConfig(
            base_url=cfg.base_url,
            model=cfg.model,
            api_key_env=cfg.api_key_env,
            timeout=cfg.timeout,
            temperature=cfg.temperature,
        )

    def preparation(self) -> Provider:
        return HttpChatProvider(self._endpoint)

    def worker(self, round_index: int, worker_index: int) -> Provider:
        return HttpChatProvider(self._endpoint)

    def holdout(self, round_index: int) -> Provider:
        return HttpChatProvider(self._endpoint)


def make_provider_factory(cfg: ProviderConfig) -> ProviderFactory:
    if cfg.kind == "scripted":
        return ScriptedProviderFactory(cfg.transcript_dir)
    return HttpProviderFactory(cfg)


def preparation_prompt(task_text: str, data_rel: str, holdout_note: str) -> str:
    lines = [
        "Preparation stage. Inspect the workspace and set the session up:",
        f"1. Read the task data under {data_rel}/ and understand its format.",
        "2. Define the session's primary metric with set_primary_metric",
        "   (name, direction, and what it measures).",
        "3. Build a minimal evaluation harness: a script that scores a",
        "   candidate on the task data and prints the metric.",
        "4. Finish with a short summary of the workspace, the data, and how",
        "   evaluation works.",
        "",
        "Task description:",
        task_text.strip(),
    ]
    if holdout_note:
        lines += ["", holdout_note]
    return "\n".join(lines)


def round_prompt(
    plan: RoundPlan,
    worker_dir: str,
    task_text: str,
    parents_block: str,
    holdout_required: bool,
) -> str:
    lines = [
        f"Round {plan.round_index}: action = {plan.action}.",
        ACTION_GUIDANCE[plan.action],
        f"Write all new files under {worker_dir}/ (your private area for"
        " this round). You may read earlier rounds' files but not modify"
        " them.",
        "Consult view_search_history before designing anything.",
        "Evaluate your candidate with the session harness and log the score"
        " with log_evaluation, then register it with submit_candidate"
        " (description, artifact path, metrics, settings, and a"
        " suggested_next_action if the history supports one).",
    ]
    if parents_block:
        lines += ["", "Assigned parent candidate(s):", parents_block]
    if holdout_required:
        lines += [
            "",
            f"Holdout testing is enabled: before submitting, write"
            f" {HOLDOUT_CONTRACT_NAME} next to your artifact with fields"
            " files (relative paths), main (one of files), and command"
            " (how to run the evaluation). A separate holdout data folder"
            " exists outside this workspace; you never see its contents.",
        ]
    lines += ["", "Task description:", task_text.strip()]
    return "\n".join(lines)


def _parents_block(store: SearchStore, parent_ids) -> str:
    primary = store.primary_metric()
    blocks = []
    for pid in parent_ids:
        candidate = store.candidate(pid)
        value = store.metrics_for(pid).get(primary.name) if primary else None
        shown = "n/a" if value is None else f"{value}"
        blocks.append(
            f"- candidate {pid} ({candidate.action}, round"
            f" {candidate.round_index}): {primary.name if primary else 'metric'}"
            f" = {shown}\n"
            f"  artifact: {candidate.artifact_path}\n"
            f"  description: {candidate.description or '(none)'}"
        )
        if candidate.analysis:
            blocks.append(f"  analysis: {candidate.analysis[:400]}")
    return "\n".join(blocks)


class AgentRoundExecutor:
    """Drives development agents for preparation, baseline, and discovery."""

    def __init__(self, cfg: SessionConfig, factory: Optional[ProviderFactory] = None):
        self.cfg = cfg
        self.factory = factory or make_provider_factory(cfg.provider)
        self._task_text: Optional[str] = None
        self._guard: Optional[WorkspaceGuard] = None

    @property
    def guard(self) -> WorkspaceGuard:
        if self._guard is None:
            self._guard = WorkspaceGuard.create(self.cfg.workspace_dir)
        return self._guard

    @property
    def task_text(self) -> str:
        if self._task_text is None:
            self._task_text = Path(self.cfg.task_prompt_path).read_text()
        return self._task_text

    def _registry(self, store: SearchStore, context: RoundContext):
        bridge = StateBridge(store, self.guard, context)
        registry = build_registry(
            self.guard,
            bridge,
            exec_binary=self.cfg.exec_binary,
            offline_search=self.cfg.offline_search,
        )
        return registry, bridge

    def prepare(self, store: SearchStore) -> str:
        context = RoundContext(round_index=-1, action="preparation")
        registry, _bridge = self._registry(store, context)
        holdout_note = ""
        if self.cfg.holdout_dir is not None:
            holdout_note = (
                "A separate holdout data folder exists outside this"
                " workspace for blind testing; you will never see its"
                " contents. Candidates must ship a"
                f" {HOLDOUT_CONTRACT_NAME} describing how to run their"
                " evaluation."
            )
        task = preparation_prompt(self.task_text, "data", holdout_note)
        run = run_agent_loop(
            SYSTEM_PROMPT,
            task,
            registry,
            self.factory.preparation(),
            turn_budget=self.cfg.turn_budget,
        )
        if run.status != "completed":
            raise RuntimeError(
                f"preparation agent {run.status}: {run.failure_reason or 'no detail'}"
            )
        return run.final_text or "preparation complete"

    def run_round(self, plan: RoundPlan, store: SearchStore) -> RoundOutcome:
        workers = range(plan.workers)
        if plan.workers == 1:
            results = [self._run_worker(plan, store, 0)]
        else:
            with ThreadPoolExecutor(max_workers=plan.workers) as pool:
                results = list(
                    pool.map(lambda w: self._run_worker(plan, store, w), workers)
                )
        candidate_ids = [cid for ids, _err in results for cid in ids]
        errors = [(w, err) for w, (_ids, err) in enumerate(results) if err]
        if not candidate_ids:
            detail = "; ".join(err for _w, err in errors)
            return RoundOutcome(
                failure=detail or "no candidates were submitted",
                failing_code_path=f"round_{plan.round_index:03d}",
            )
        # partial failures: keep the round but leave a trace per worker
        for worker_index, err in errors:
            store.record_failure(
                FailureRecord(
                    round_index=plan.round_index,
                    failing_code_path=self._worker_rel(plan.round_index, worker_index),
                    error_message=err,
                    parent_ids=list(self._worker_parents(plan, worker_index)),
                )
            )
        summary = f"{len(candidate_ids)} candidate(s) from {plan.workers} worker(s)"
        if errors:
            summary += f"; {len(errors)} worker(s) failed"
        return RoundOutcome(candidate_ids=candidate_ids, summary=summary)

    @staticmethod
    def _worker_rel(round_index: int, worker_index: int) -> str:
        return f"round_{round_index:03d}/worker_{worker_index:02d}"

    @staticmethod
    def _worker_parents(plan: RoundPlan, worker_index: int) -> tuple[int, ...]:
        if plan.action == "tune":
            return (plan.parents[worker_index],)
        return tuple(plan.parents)

    def _run_worker(
        self, plan: RoundPlan, store: SearchStore, worker_index: int
    ) -> tuple[list[int], Optional[str]]:
        worker_rel = self._worker_rel(plan.round_index, worker_index)
        (Path(self.cfg.workspace_dir) / worker_rel).mkdir(
            parents=True, exist_ok=True
        )
        parents = self._worker_parents(plan, worker_index)
        context = RoundContext(
            round_index=plan.round_index,
            action=plan.action,
            parent_ids=list(parents),
            holdout_required=self.cfg.holdout_dir is not None,
        )
        registry, bridge = self._registry(store, context)
        task = round_prompt(
            plan,
            worker_rel,
            self.task_text,
            _parents_block(store, parents),
            holdout_required=self.cfg.holdout_dir is not None,
        )
        try:
            run = run_agent_loop(
                SYSTEM_PROMPT,
                task,
                registry,
                self.factory.worker(plan.round_index, worker_index),
                turn_budget=self.cfg.turn_budget,
            )
        except Exception as exc:  # worker crash must not sink sibling workers
            return bridge.submitted_candidate_ids, (
                f"worker {worker_index}: {type(exc).__name__}: {exc}"
            )
        error = None
        if run.status != "completed":
            error = (
                f"worker {worker_index} {run.status}:"
                f" {run.failure_reason or 'no detail'}"
            )
        elif not bridge.submitted_candidate_ids:
            error = f"worker {worker_index} finished without submitting a candidate"
        return bridge.submitted_candidate_ids, error


def make_holdout_hook(cfg: SessionConfig, store: SearchStore, factory: ProviderFactory):
    """Holdout evaluation hook for run_session, or None when disabled."""
    if cfg.holdout_dir is None:
        return None
    prompt_text = Path(cfg.holdout_prompt_path).read_text()
    return round_winner_hook(
        store,
        cfg.holdout_dir,
        factory.holdout,
        prompt_text=prompt_text,
        turn_budget=cfg.holdout_turn_budget,
        exec_binary=cfg.exec_binary,
    )
