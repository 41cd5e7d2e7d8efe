"""Post-round holdout evaluation with strict data isolation.

Held-out data never enters the search workspace except inside a temporary
subdirectory that exists only for the duration of one evaluation and is
removed on every exit path. The evaluating agent is separate from the
development agent, sees a copy of the candidate files plus the holdout
data, and reports through a dedicated submission tool rather than stdout.
"""

from __future__ import annotations

import json
import logging
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .agent import Provider, ToolOutcome, ToolSchema, run_agent_loop
from .bridge import HOLDOUT_CONTRACT_NAME
from .guard import WorkspaceGuard
from .store import HoldoutMetricSample, SearchStore, StoreError
from .toolset import build_registry

logger = logging.getLogger(__name__)

DEFAULT_HOLDOUT_TURN_BUDGET = 20

SYSTEM_PROMPT = (
    "You evaluate a frozen candidate algorithm on held-out data inside an"
    " isolated workspace. The algorithm files are read-only: do not change"
    " their logic. You may adjust only environment details or command"
    " invocation (working directory, interpreter, data paths, installing a"
    " missing dependency). Run the recorded execution command, extract the"
    " resulting metric, and report it with the submit_holdout_metric tool."
    " If evaluation is impossible, submit a null value with a note"
    " explaining why. If you had to install anything, flag it in the note."
)


class ContractError(RuntimeError):
    """The candidate's holdout contract is missing or unusable."""


@dataclass(frozen=True)
class HoldoutContract:
    files: tuple[str, ...]
    main: str
    command: str

    def __post_init__(self) -> None:
        if not self.files:
            raise ContractError("contract lists no files")
        if self.main not in self.files:
            raise ContractError(
                f"main {self.main!r} is not among the listed files"
            )
        if not self.command.strip():
            raise ContractError("contract command is empty")


@dataclass(frozen=True)
class HoldoutResult:
    """Numeric metric, or an explicit null with a failure note.

    A note may also accompany a successful metric (for example to flag an
    invocation fix or an installed dependency).
    """

    metric: Optional[float] = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.metric is None and not self.note:
            raise ValueError("a null holdout metric requires a failure note")


def parse_contract(candidate_root: Path) -> HoldoutContract:
    """Read and validate `holdout_test_info.json` at the candidate root."""
    path = Path(candidate_root) / HOLDOUT_CONTRACT_NAME
    if not path.is_file():
        raise ContractError(
            f"{HOLDOUT_CONTRACT_NAME} not found at the candidate root;"
            " write it with fields files (list), main (one of files), and"
            " command (how to run the evaluation)"
        )
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ContractError(f"{HOLDOUT_CONTRACT_NAME} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ContractError(f"{HOLDOUT_CONTRACT_NAME} must hold a JSON object")
    files = data.get("files")
    main = data.get("main")
    command = data.get("command")
    if not isinstance(files, list) or not all(isinstance(f, str) for f in files):
        raise ContractError("field 'files' must be a list of relative paths")
    if not isinstance(main, str):
        raise ContractError("field 'main' must be a string")
    if not isinstance(command, str):
        raise ContractError("field 'command' must be a string")
    contract = HoldoutContract(files=tuple(files), main=main, command=command)
    root = Path(candidate_root).resolve()
    missing = []
    for rel in contract.files:
        target = (root / rel).resolve()
        if root != target and root not in target.parents:
            raise ContractError(f"file {rel!r} escapes the candidate root")
        if not target.is_file():
            missing.append(rel)
    if missing:
        raise ContractError(f"listed files do not exist: {', '.join(missing)}")
    return contract


def run_holdout(
    candidate_root: Path,
    contract: HoldoutContract,
    holdout_dir: Path,
    provider: Provider,
    prompt_text: str = "",
    turn_budget: int = DEFAULT_HOLDOUT_TURN_BUDGET,
    exec_binary: str = "uv",
) -> HoldoutResult:
    """Evaluate one candidate against held-out data in a throwaway workspace.

    The temporary directory lives inside the candidate root and is deleted
    unconditionally before returning, success or not.
    """
    candidate_root = Path(candidate_root).resolve()
    holdout_dir = Path(holdout_dir).resolve()
    if not holdout_dir.is_dir():
        return HoldoutResult(
            metric=None, note=f"holdout data directory missing: {holdout_dir}"
        )
    temp_dir: Optional[Path] = None
    try:
        temp_dir = Path(
            tempfile.mkdtemp(prefix="holdout_run_", dir=candidate_root)
        )
        data_dest = temp_dir / holdout_dir.name
        shutil.copytree(holdout_dir, data_dest)
        for rel in contract.files:
            dest = temp_dir / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copy2(candidate_root / rel, dest)
    except OSError as exc:
        _cleanup(temp_dir)
        return HoldoutResult(metric=None, note=f"holdout setup failed: {exc}")

    try:
        guard = WorkspaceGuard.create(temp_dir)
        registry = build_registry(
            guard, bridge=None, exec_binary=exec_binary, include_search=False
        )
        submissions: list[HoldoutResult] = []
        registry.register(
            ToolSchema(
                name="submit_holdout_metric",
                description=(
                    "Report the holdout evaluation outcome: a numeric metric,"
                    " or a null value plus a note explaining the failure."
                ),
                parameters={
                    "type": "object",
                    "properties": {
                        "value": {"type": ["number", "null"]},
                        "note": {"type": "string"},
                    },
                    "required": ["value"],
                },
            ),
            lambda args: _accept_submission(args, submissions),
        )
        task = _task_prompt(contract, holdout_dir.name, prompt_text)
        run = run_agent_loop(
            SYSTEM_PROMPT, task, registry, provider, turn_budget=turn_budget
        )
        if submissions:
            return submissions[-1]
        if run.status == "budget_exhausted":
            note = "holdout agent exhausted its turn budget without submitting"
        elif run.status == "provider_error":
            note = f"holdout agent provider failed: {run.failure_reason}"
        else:
            note = "holdout agent finished without submitting a metric"
        return HoldoutResult(metric=None, note=note)
    finally:
        _cleanup(temp_dir)


def _accept_submission(args: dict, submissions: list[HoldoutResult]) -> ToolOutcome:
    value = args.get("value")
    note = args.get("note", "") or ""
    if value is None and not note.strip():
        return ToolOutcome(
            text="a null value needs a note explaining the failure",
            is_error=True,
        )
    if value is not None:
        try:
            value = float(value)
        except (TypeError, ValueError):
            return ToolOutcome(
                text=f"value must be numeric or null, got {value!r}",
                is_error=True,
            )
    submissions.append(HoldoutResult(metric=value, note=note.strip()))
    shown = "null" if value is None else repr(value)
    return ToolOutcome(text=f"holdout metric recorded: {shown}")


def _task_prompt(contract: HoldoutContract, data_dir_name: str, extra: str) -> str:
    lines = [
        "Evaluate the candidate algorithm on the held-out data in this workspace.",
        f"Held-out data directory: {data_dir_name}/",
        f"Algorithm files (read-only): {', '.join(contract.files)}",
        f"Entry point: {contract.main}",
        f"Recorded execution command: {contract.command}",
        "Use the recorded execution command. If it fails, adjust only",
        "environment or invocation details; never edit the algorithm logic.",
        "When you have a metric, call submit_holdout_metric. If evaluation",
        "cannot succeed, call it with value null and an explanatory note.",
    ]
    if extra.strip():
        lines += ["", "Holdout data description:", extra.strip()]
    return "\n".join(lines)


def _cleanup(temp_dir: Optional[Path]) -> None:
    if temp_dir is None:
        return
    try:
        shutil.rmtree(temp_dir)
    except FileNotFoundError:
        pass
    except OSError as exc:
        logger.warning("holdout cleanup left residue at %s: %s", temp_dir, exc)


def evaluate_candidate(
    store: SearchStore,
    candidate_id: int,
    holdout_dir: Path,
    provider: Provider,
    prompt_text: str = "",
    turn_budget: int = DEFAULT_HOLDOUT_TURN_BUDGET,
    exec_binary: str = "uv",
) -> HoldoutResult:
    """Parse the candidate's contract, run holdout, and persist the outcome.

    Contract problems become a recorded null result, not a crash.
    """
    candidate = store.candidate(candidate_id)
    candidate_root = (store.root / candidate.artifact_path).parent
    try:
        contract = parse_contract(candidate_root)
    except ContractError as exc:
        result = HoldoutResult(metric=None, note=f"contract error: {exc}")
    else:
        result = run_holdout(
            candidate_root,
            contract,
            holdout_dir,
            provider,
            prompt_text=prompt_text,
            turn_budget=turn_budget,
            exec_binary=exec_binary,
        )
    # the store keeps value and failure note mutually exclusive; a note on a
    # successful run stays in the HoldoutResult and the agent transcript
    store.record_holdout_metric(
        HoldoutMetricSample(
            candidate_id=candidate_id,
            value=result.metric,
            failure_note=(result.note or None) if result.metric is None else None,
        )
    )
    return result


def round_winner_hook(
    store: SearchStore,
    holdout_dir: Path,
    provider_for_round: Callable[[int], Provider],
    prompt_text: str = "",
    turn_budget: int = DEFAULT_HOLDOUT_TURN_BUDGET,
    exec_binary: str = "uv",
) -> Callable:
    """Controller hook: evaluate each round's winner after the round closes."""

    def hook(plan, store_: SearchStore) -> None:
        try:
            winner = store_.round(plan.round_index).winning_candidate_id
        except StoreError:
            return
        if winner is None:
            return
        if store_.holdout_metric_for(winner) is not None:
            return
        provider = provider_for_round(plan.round_index)
        evaluate_candidate(
            store_,
            winner,
            holdout_dir,
            provider,
            prompt_text=prompt_text,
            turn_budget=turn_budget,
            exec_binary=exec_binary,
        )

    return hook
