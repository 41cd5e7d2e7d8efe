"""Provider factories, prompts, and the agent-backed round executor."""

import json
import shutil
from pathlib import Path

import pytest

from evosearch.bridge import HOLDOUT_CONTRACT_NAME
from evosearch.config import ProviderConfig, SessionConfig
from evosearch.controller import ControllerConfig, RoundPlan
from evosearch.providers import ScriptedProvider, TranscriptError
from evosearch.sampling import SamplingConfig
from evosearch.session import (
    ACTION_GUIDANCE,
    AgentRoundExecutor,
    HttpProviderFactory,
    ScriptedProviderFactory,
    make_provider_factory,
    preparation_prompt,
    round_prompt,
)
from evosearch.store import (
    CandidateRecord,
    MetricDefinition,
    MetricSample,
    open_or_create,
)

DEMO = Path(__file__).parent / "data" / "demo"


@pytest.fixture
def workspace(tmp_path):
    ws = tmp_path / "workspace"
    ws.mkdir()
    shutil.copytree(DEMO / "data", ws / "data")
    return ws


@pytest.fixture
def store(workspace):
    st = open_or_create(workspace / "state.db")
    yield st
    st.close()


def demo_config(workspace, transcript_dir=None, turn_budget=30) -> SessionConfig:
    return SessionConfig(
        workspace_dir=workspace,
        task_prompt_path=DEMO / "task.md",
        data_dir=DEMO / "data",
        provider=ProviderConfig(
            kind="scripted",
            transcript_dir=transcript_dir or DEMO / "transcripts",
        ),
        turn_budget=turn_budget,
        controller=ControllerConfig(
            total_rounds=5, warmup_generate_rounds=2, forced_generate_every=3
        ),
        sampling=SamplingConfig(stochastic=False),
    )


def seed_round(store, workspace, round_index, action, value, parents=()):
    """Complete one synthetic round so later plans have real parents."""
    store.begin_round(round_index, action)
    rel = f"round_{round_index:03d}/seed/algo.py"
    (workspace / rel).parent.mkdir(parents=True, exist_ok=True)
    (workspace / rel).write_text("def predict(history):\n    return 0.0\n")
    cid = store.submit_candidate(
        CandidateRecord(
            round_index=round_index,
            action=action,
            description=f"seed {round_index}",
            artifact_path=rel,
            parent_ids=list(parents),
        ),
        [MetricSample(None, "mse", value)],
    )
    store.finish_round(round_index, status="completed")
    return cid


class TestScriptedProviderFactory:
    def test_worker_naming_convention(self):
        factory = ScriptedProviderFactory(DEMO / "transcripts")
        provider = factory.worker(3, 1)
        assert isinstance(provider, ScriptedProvider)
        assert provider.turns_total > 0
        assert "round_003_worker_01" in provider.name

    def test_missing_worker_transcript_plays_empty(self, caplog):
        factory = ScriptedProviderFactory(DEMO / "transcripts")
        with caplog.at_level("WARNING"):
            provider = factory.worker(99, 0)
        assert provider.turns_total == 0
        assert "round_099_worker_00" in caplog.text

    def test_missing_preparation_transcript_is_an_error(self, tmp_path):
        factory = ScriptedProviderFactory(tmp_path)
        with pytest.raises(TranscriptError):
            factory.preparation()

    def test_factory_dispatch_by_kind(self):
        scripted = make_provider_factory(
            ProviderConfig(kind="scripted", transcript_dir=DEMO / "transcripts")
        )
        assert isinstance(scripted, ScriptedProviderFactory)
        http = make_provider_factory(
            ProviderConfig(kind="http", base_url="http://localhost:1", model="m")
        )
        assert isinstance(http, HttpProviderFactory)


class TestPrompts:
    def test_preparation_prompt_mentions_metric_and_data(self):
        text = preparation_prompt("Solve the task.", "data", "")
        assert "set_primary_metric" in text
        assert "data/" in text
        assert "Solve the task." in text

    def test_round_prompt_carries_action_guidance(self):
        plan = RoundPlan(round_index=3, action="evolve", parents=(2, 3), workers=1)
        text = round_prompt(plan, "round_003/worker_00", "Task.", "- parents", False)
        assert ACTION_GUIDANCE["evolve"] in text
        assert "round_003/worker_00" in text
        assert "- parents" in text
        assert HOLDOUT_CONTRACT_NAME not in text

    def test_round_prompt_adds_holdout_contract_requirement(self):
        plan = RoundPlan(round_index=1, action="generate")
        text = round_prompt(plan, "round_001/worker_00", "Task.", "", True)
        assert HOLDOUT_CONTRACT_NAME in text

    def test_guidance_covers_every_action(self):
        assert set(ACTION_GUIDANCE) == {
            "baseline",
            "generate",
            "tune",
            "evolve",
            "mutate",
        }


class TestPrepare:
    def test_preparation_defines_metric_and_returns_summary(self, workspace, store):
        executor = AgentRoundExecutor(demo_config(workspace))
        summary = executor.prepare(store)
        assert "mse" in summary
        primary = store.primary_metric()
        assert primary.name == "mse" and primary.direction == "minimize"
        assert (workspace / "evaluate.py").is_file()

    def test_preparation_budget_exhaustion_raises(self, workspace, store):
        executor = AgentRoundExecutor(demo_config(workspace, turn_budget=2))
        with pytest.raises(RuntimeError, match="budget"):
            executor.prepare(store)


class TestRunRound:
    def test_baseline_round_submits_reference_candidate(self, workspace, store):
        executor = AgentRoundExecutor(demo_config(workspace))
        executor.prepare(store)
        store.begin_round(0, "baseline")
        outcome = executor.run_round(RoundPlan(round_index=0, action="baseline"), store)
        assert outcome.failure is None
        assert len(outcome.candidate_ids) == 1
        cid = outcome.candidate_ids[0]
        assert store.metrics_for(cid)["mse"] == pytest.approx(1.25)
        assert (workspace / store.candidate(cid).artifact_path).is_file()

    def test_tune_fan_out_assigns_one_parent_per_worker(self, workspace, store):
        store.define_metric(
            MetricDefinition(name="mse", direction="minimize", is_primary=True)
        )
        ids = [
            seed_round(store, workspace, 0, "baseline", 1.25),
            seed_round(store, workspace, 1, "generate", 0.90),
            seed_round(store, workspace, 2, "generate", 0.80),
        ]
        executor = AgentRoundExecutor(demo_config(workspace))
        plan = RoundPlan(
            round_index=3, action="tune", parents=(ids[2], ids[1]), workers=2
        )
        store.begin_round(3, "tune")
        outcome = executor.run_round(plan, store)
        assert outcome.failure is None
        assert len(outcome.candidate_ids) == 2
        by_parent = {
            tuple(store.candidate(cid).parent_ids): store.metrics_for(cid)["mse"]
            for cid in outcome.candidate_ids
        }
        assert by_parent[(ids[2],)] == pytest.approx(0.55)
        assert by_parent[(ids[1],)] == pytest.approx(0.70)
        # tune children stay in their parent's lineage
        for cid in outcome.candidate_ids:
            record = store.candidate(cid)
            assert record.lineage_id == store.candidate(record.parent_ids[0]).lineage_id

    def test_worker_without_transcript_fails_round(self, workspace, store, tmp_path):
        transcripts = tmp_path / "only_prep"
        transcripts.mkdir()
        shutil.copy(DEMO / "transcripts" / "preparation.json", transcripts)
        executor = AgentRoundExecutor(demo_config(workspace, transcript_dir=transcripts))
        executor.prepare(store)
        store.begin_round(0, "baseline")
        outcome = executor.run_round(RoundPlan(round_index=0, action="baseline"), store)
        assert outcome.candidate_ids == []
        assert "without submitting" in outcome.failure
        assert outcome.failing_code_path == "round_000"

    def test_partial_worker_failure_keeps_round_and_records_it(
        self, workspace, store, tmp_path
    ):
        transcripts = tmp_path / "partial"
        shutil.copytree(DEMO / "transcripts", transcripts)
        (transcripts / "round_003_worker_01.json").unlink()
        store.define_metric(
            MetricDefinition(name="mse", direction="minimize", is_primary=True)
        )
        ids = [
            seed_round(store, workspace, 0, "baseline", 1.25),
            seed_round(store, workspace, 1, "generate", 0.90),
            seed_round(store, workspace, 2, "generate", 0.80),
        ]
        executor = AgentRoundExecutor(demo_config(workspace, transcript_dir=transcripts))
        store.begin_round(3, "tune")
        outcome = executor.run_round(
            RoundPlan(round_index=3, action="tune", parents=(ids[2], ids[1]), workers=2),
            store,
        )
        assert len(outcome.candidate_ids) == 1
        assert "1 worker(s) failed" in outcome.summary
        failures = store.failures()
        assert len(failures) == 1
        assert failures[0].failing_code_path == "round_003/worker_01"
        assert failures[0].parent_ids == [ids[1]]

    def test_each_worker_gets_a_fresh_provider(self, workspace, store):
        calls = []

        class Recording(ScriptedProviderFactory):
            def worker(self, round_index, worker_index):
                calls.append((round_index, worker_index))
                return super().worker(round_index, worker_index)

        executor = AgentRoundExecutor(
            demo_config(workspace),
            factory=Recording(DEMO / "transcripts"),
        )
        executor.prepare(store)
        store.begin_round(0, "baseline")
        executor.run_round(RoundPlan(round_index=0, action="baseline"), store)
        store.finish_round(0, status="completed")
        store.begin_round(1, "generate")
        executor.run_round(RoundPlan(round_index=1, action="generate"), store)
        assert calls == [(0, 0), (1, 0)]

    def test_worker_directories_are_private_per_round(self, workspace, store):
        executor = AgentRoundExecutor(demo_config(workspace))
        executor.prepare(store)
        store.begin_round(0, "baseline")
        executor.run_round(RoundPlan(round_index=0, action="baseline"), store)
        assert (workspace / "round_000" / "worker_00").is_dir()


class TestWorkspaceDataCopy:
    def test_transcripts_reference_only_workspace_paths(self):
        # scripted sessions must never reach outside the guarded workspace
        for path in sorted((DEMO / "transcripts").glob("*.json")):
            for turn in json.loads(path.read_text()):
                for call in turn.get("tool_calls", []):
                    target = call["arguments"].get("path", "")
                    assert not str(target).startswith("/")
                    assert ".." not in str(target)
