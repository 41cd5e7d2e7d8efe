"""System-level acceptance checks, one test per release criterion.

Each test exercises a full behavioral contract end to end: sampler
distribution fidelity, crossover penalty semantics, the toy-landscape
temperature ablation, the scripted demo session, holdout isolation,
crash recovery, path-guard soundness, renderer percentile windows, and
holdout metric plumbing. Thresholds and draw counts are part of the
contract; do not relax them to make a failing build pass.
"""

import hashlib
import json
import math
import os
import random
import shutil
import sqlite3
import statistics
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from evosearch import toybench
from evosearch.agent import ProviderTurn, ToolCall
from evosearch.cli import EXIT_OK, main
from evosearch.guard import GuardRejection, WorkspaceGuard
from evosearch.holdout import evaluate_candidate, round_winner_hook
from evosearch.providers import ScriptedProvider
from evosearch.render import DisplayBounds, ImageBuffer, RenderSpec, display_bounds, render_bytes
from evosearch.sampling import (
    RankedCandidate,
    SamplingConfig,
    gibbs_distribution,
    gibbs_weights,
    sample_evolve_parents,
    sample_tune_parents,
)
from evosearch.store import (
    CandidateRecord,
    MetricDefinition,
    MetricSample,
    open_or_create,
)

DEMO = Path(__file__).parent / "data" / "demo"


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def make_pool(ranks_lineages) -> list[RankedCandidate]:
    return [
        RankedCandidate(candidate_id=rank, lineage_id=lineage, rank=rank, value=float(rank))
        for rank, lineage in ranks_lineages
    ]


def write_demo_toml(tmp_path, transcript_dir=None, exec_binary="/bin/sh") -> Path:
    transcripts = Path(transcript_dir) if transcript_dir else DEMO / "transcripts"
    path = tmp_path / "session.toml"
    path.write_text(
        "[session]\n"
        f'workspace_dir = "{tmp_path / "workspace"}"\n'
        f'task_prompt_path = "{DEMO / "task.md"}"\n'
        f'data_dir = "{DEMO / "data"}"\n'
        f'exec_binary = "{exec_binary}"\n'
        "turn_budget = 30\n"
        "\n[controller]\n"
        "total_rounds = 5\n"
        "warmup_generate_rounds = 2\n"
        "forced_generate_every = 3\n"
        "\n[sampling]\n"
        "stochastic = false\n"
        "\n[provider]\n"
        'kind = "scripted"\n'
        f'transcript_dir = "{transcripts}"\n'
    )
    return path


def test_sampler_fidelity_pools_2_to_6():
    """Empirical pick frequencies match the analytic rank distribution."""
    draws = 100_000
    start = time.perf_counter()
    for size in range(2, 7):
        for tau in (1.0, 5.0):
            pool = make_pool((r, r) for r in range(1, size + 1))
            cfg = SamplingConfig(tau=tau, stochastic=True)
            rng = random.Random(9_000 + size * 10 + int(tau))
            counts = Counter()
            for _ in range(draws):
                counts[sample_tune_parents(pool, 1, cfg, rng)[0].candidate_id] += 1
            analytic = gibbs_distribution(list(range(1, size + 1)), tau)
            for rank, expected in enumerate(analytic, start=1):
                observed = counts[rank] / draws
                assert abs(observed - expected) <= 0.01, (
                    f"pool {size}, tau {tau}, rank {rank}:"
                    f" observed {observed:.4f} vs analytic {expected:.4f}"
                )
    assert time.perf_counter() - start < 10.0


def test_penalty_semantics():
    """Same-lineage penalty: hard exclusion at 0, identity at 1, worked case."""
    # lambda = 0 with two lineages present: cross-lineage always, 1e4 draws
    pool = make_pool([(1, 1), (2, 2), (3, 1), (4, 2)])
    zero = SamplingConfig(tau=5.0, lambda_penalty=0.0)
    rng = random.Random(101)
    for _ in range(10_000):
        first, second = sample_evolve_parents(pool, zero, rng)
        assert first.lineage_id != second.lineage_id

    # lambda = 1 reproduces the unpenalized without-replacement distribution
    draws = 100_000
    ident = SamplingConfig(tau=5.0, lambda_penalty=1.0)
    rng = random.Random(202)
    counts = Counter()
    for _ in range(draws):
        counts[sample_evolve_parents(pool, ident, rng)[1].candidate_id] += 1
    weights = gibbs_weights([1, 2, 3, 4], 5.0)
    total = sum(weights)
    for j in range(4):
        expected = sum(
            (weights[i] / total) * (weights[j] / (total - weights[i]))
            for i in range(4)
            if i != j
        )
        observed = counts[j + 1] / draws
        assert abs(observed - expected) <= 0.01, (
            f"candidate {j + 1}: observed {observed:.4f} vs analytic {expected:.4f}"
        )

    # three-candidate worked case: A1/A2 share a lineage, B1 stands alone;
    # tau=5, lambda=0.5, first pick = A1 => P(second = B1) = w3 / (0.5*w2 + w3)
    trio = make_pool([(1, 1), (2, 1), (3, 2)])
    half = SamplingConfig(tau=5.0, lambda_penalty=0.5)
    rng = random.Random(303)
    w = gibbs_weights([1, 2, 3], 5.0)
    expected = w[2] / (0.5 * w[1] + w[2])
    hits = conditioned = 0
    for _ in range(draws):
        first, second = sample_evolve_parents(trio, half, rng)
        if first.candidate_id == 1:
            conditioned += 1
            hits += second.candidate_id == 3
    assert conditioned > 30_000
    assert abs(hits / conditioned - expected) <= 0.01


def test_toy_temperature_ablation():
    """Stochastic sampling escapes the deterministic stall on the toy landscape."""
    start = time.perf_counter()
    landscape, inits = toybench.reference_scenario()
    results = toybench.run_trials(landscape, inits, taus=(5.0, 0.0), trials=20)
    by_tau = {}
    for result in results:
        by_tau.setdefault(result.tau, []).append(result)
    medians = {
        tau: statistics.median(toybench.effective_rounds(r) for r in rs)
        for tau, rs in by_tau.items()
    }
    rates = {
        tau: sum(
            1
            for r in rs
            if r.rounds_to_discovery is not None and r.rounds_to_discovery <= 10
        )
        / len(rs)
        for tau, rs in by_tau.items()
    }
    assert len(by_tau[5.0]) == len(by_tau[0.0]) == 20
    assert medians[5.0] < medians[0.0], f"medians: {medians}"
    assert rates[5.0] > rates[0.0], f"10-round discovery rates: {rates}"
    assert time.perf_counter() - start < 60.0


def test_end_to_end_scripted_session(tmp_path):
    """Six-round scripted demo: actions, lineage DAG, monotone best-so-far."""
    # the demo transcripts never invoke the environment manager, so a missing
    # binary must not block the controller / store / sampler paths
    config = write_demo_toml(tmp_path, exec_binary=str(tmp_path / "absent-env-tool"))
    assert main(["run", str(config)]) == EXIT_OK

    store = open_or_create(tmp_path / "workspace" / "state.db")
    rounds = store.rounds()
    assert [r.action for r in rounds] == [
        "baseline",
        "generate",
        "generate",
        "tune",
        "evolve",
        "generate",
    ]
    assert rounds[0].action == "baseline" and rounds[0].round_index == 0
    assert all(r.status == "completed" for r in rounds)

    by_id = {c.candidate_id: c for c in store.candidates()}
    for cand in by_id.values():
        for pid in cand.parent_ids:
            assert by_id[pid].round_index < cand.round_index
        if cand.action in ("generate", "baseline"):
            assert cand.parent_ids == [] and cand.lineage_id == cand.candidate_id
        elif cand.action == "tune":
            assert len(cand.parent_ids) == 1
            assert cand.lineage_id == by_id[cand.parent_ids[0]].lineage_id
        elif cand.action == "evolve":
            assert len(cand.parent_ids) == 2
            assert cand.lineage_id == cand.candidate_id

    report = json.loads((tmp_path / "workspace" / "report.json").read_text())
    series = [
        row["best_so_far"] for row in report["rounds"] if row["best_so_far"] is not None
    ]
    assert len(series) == 6
    assert series == sorted(series, reverse=True)  # minimized metric
    store.close()


def test_holdout_isolation(tmp_path):
    """Holdout data never lands in the workspace; artifacts stay untouched."""
    workspace = tmp_path / "workspace"
    workspace.mkdir()
    holdout_dir = tmp_path / "holdout_data"
    holdout_dir.mkdir()
    (holdout_dir / "labels.csv").write_text("x,y\n1.5,2.5\n3.5,4.5\n")
    (holdout_dir / "truth.json").write_text('{"withheld": "holdout-only-f37a"}')
    holdout_hashes = {sha256(p) for p in holdout_dir.iterdir()}
    leak_content = (holdout_dir / "labels.csv").read_text()

    store = open_or_create(workspace / "state.db")
    store.define_metric(
        MetricDefinition(name="mse", direction="minimize", is_primary=True)
    )

    def seed_candidate(round_index: int, value: float) -> int:
        store.begin_round(round_index, "generate" if round_index else "baseline")
        rel = f"round_{round_index:03d}/worker_00"
        root = workspace / rel
        root.mkdir(parents=True)
        (root / "algo.py").write_text(f"print('metric: {value}')\n")
        (root / "holdout_test_info.json").write_text(
            json.dumps({"files": ["algo.py"], "main": "algo.py", "command": "run algo.py"})
        )
        cid = store.submit_candidate(
            CandidateRecord(
                round_index=round_index,
                action="generate" if round_index else "baseline",
                description=f"candidate {round_index}",
                artifact_path=f"{rel}/algo.py",
            ),
            [MetricSample(None, "mse", value)],
        )
        store.finish_round(round_index, status="completed")
        return cid

    def assert_workspace_clean():
        for path in workspace.rglob("*"):
            if path.is_file():
                assert sha256(path) not in holdout_hashes, f"holdout leak at {path}"
        assert list(workspace.rglob("holdout_run_*")) == []

    def provider_for_round(round_index: int) -> ScriptedProvider:
        # the agent reads the held-out data and even copies it inside its
        # throwaway workspace; cleanup must erase every trace
        return ScriptedProvider(
            [
                {"tool_calls": [{"name": "read_file", "arguments": {"path": "holdout_data/labels.csv"}}]},
                {"tool_calls": [{"name": "write_file", "arguments": {"path": "leak.csv", "content": leak_content}}]},
                {"tool_calls": [{"name": "submit_holdout_metric", "arguments": {"value": 0.5 + round_index}}]},
                {"final": "evaluated"},
            ],
            name=f"holdout_round_{round_index:03d}",
        )

    hook = round_winner_hook(
        store, holdout_dir, provider_for_round, exec_binary="/nonexistent-env-tool"
    )
    artifact_hashes = {}
    for round_index in range(3):
        cid = seed_candidate(round_index, 1.0 - 0.1 * round_index)
        root = workspace / f"round_{round_index:03d}" / "worker_00"
        artifact_hashes[cid] = {p.name: sha256(p) for p in root.iterdir()}
        hook(SimpleNamespace(round_index=round_index), store)
        recorded = store.holdout_metric_for(cid)
        assert recorded is not None and recorded.value == pytest.approx(0.5 + round_index)
        assert_workspace_clean()
        for name, digest in artifact_hashes[cid].items():
            assert sha256(root / name) == digest, f"{name} modified by holdout run"

    # forced failure mid-run, after the leak file exists in the temp dir
    class LeakThenExplode:
        def __init__(self):
            self.calls = 0

        def next_turn(self, messages, tools):
            self.calls += 1
            if self.calls == 1:
                return ProviderTurn(
                    tool_calls=(
                        ToolCall(
                            name="write_file",
                            arguments={"path": "leak.csv", "content": leak_content},
                            call_id="c1",
                        ),
                    )
                )
            raise RuntimeError("simulated provider crash")

    cid = seed_candidate(3, 0.6)
    with pytest.raises(RuntimeError, match="simulated provider crash"):
        evaluate_candidate(
            store, cid, holdout_dir, LeakThenExplode(), exec_binary="/nonexistent"
        )
    assert_workspace_clean()
    store.close()


def test_crash_recovery(tmp_path):
    """SIGKILL mid-round, reopen, resume: failed round, artifacts untouched."""
    transcripts = tmp_path / "transcripts"
    shutil.copytree(DEMO / "transcripts", transcripts)
    slow_path = transcripts / "round_004_worker_00.json"
    slow = json.loads(slow_path.read_text())
    slow.insert(
        0,
        {
            "tool_calls": [
                {
                    "name": "run_env_command",
                    "arguments": {"subcommand": "run", "arguments": ["sleep", "45"]},
                }
            ]
        },
    )
    slow_path.write_text(json.dumps(slow))
    shim = tmp_path / "envshim"
    shim.write_text('#!/bin/sh\nshift\nexec "$@"\n')
    shim.chmod(0o755)
    config = write_demo_toml(tmp_path, transcript_dir=transcripts, exec_binary=str(shim))
    workspace = tmp_path / "workspace"
    db = workspace / "state.db"

    proc = subprocess.Popen(
        [sys.executable, "-m", "evosearch.cli", "run", str(config)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 60
        while time.time() < deadline:
            if db.exists():
                try:
                    conn = sqlite3.connect(db, timeout=1)
                    row = conn.execute(
                        "SELECT status FROM rounds WHERE round_index = 4"
                    ).fetchone()
                    conn.close()
                    if row is not None and row[0] == "running":
                        break
                except sqlite3.OperationalError:
                    pass
            if proc.poll() is not None:
                pytest.fail("run finished before round 4 started")
            time.sleep(0.05)
        else:
            pytest.fail("round 4 never reached running state")
    finally:
        proc.kill()
        proc.wait(timeout=10)

    store = open_or_create(db)
    prior_artifacts = [
        workspace / c.artifact_path for c in store.candidates() if c.round_index < 4
    ]
    store.close()
    assert len(prior_artifacts) == 5  # baseline + 2 generates + 2 tunes
    snapshot = {p: sha256(p) for p in prior_artifacts}

    assert main(["resume", str(workspace)]) == EXIT_OK
    for path, digest in snapshot.items():
        assert sha256(path) == digest, f"{path} changed across crash recovery"
    store = open_or_create(db)
    rounds = {r.round_index: r for r in store.rounds()}
    assert rounds[4].status == "failed"
    assert rounds[5].status == "completed"
    assert store.session_state().phase == "finished"
    store.close()


def test_path_guard_suite(tmp_path):
    """Guard verdicts: fixture escapes, fixture accepts, randomized oracle."""
    root = tmp_path / "root"
    (root / "sub" / "deep").mkdir(parents=True)
    (root / "file.txt").write_text("inside\n")
    (root / "sub" / "inner.txt").write_text("inside\n")
    outside = tmp_path / "outside"
    outside.mkdir()
    (outside / "secret.txt").write_text("outside\n")
    (root / "sneaky_link").symlink_to(outside / "secret.txt")
    (root / "dir_link").symlink_to(outside)
    (root / "good_link").symlink_to(root / "file.txt")
    guard = WorkspaceGuard.create(root)

    escapes = [
        "..",
        "../",
        "../outside/secret.txt",
        "sub/../..",
        "sub/deep/../../..",
        "sub/../../outside",
        "/etc/passwd",
        str(outside / "secret.txt"),
        "sneaky_link",
        "dir_link",
        "dir_link/secret.txt",
        "sub/./../../outside/.",
    ]
    for candidate in escapes:
        with pytest.raises(GuardRejection):
            guard.resolve(candidate)

    accepts = [
        ".",
        "file.txt",
        "sub",
        "sub/inner.txt",
        "sub/deep",
        "sub/../file.txt",
        "sub/./deep/..",
        "good_link",
        "brand_new.txt",
        "sub/deep/not_yet_written.bin",
        str(root / "file.txt"),
    ]
    for candidate in accepts:
        resolved = guard.resolve(candidate)
        assert resolved == guard.root or guard.root in resolved.parents

    # randomized agreement with the brute-force canonicalization oracle
    real_root = os.path.realpath(root)
    segments = [
        "a",
        "b",
        "..",
        ".",
        "sub",
        "deep",
        "file.txt",
        "inner.txt",
        "outside",
        "secret.txt",
        "sneaky_link",
        "dir_link",
        "good_link",
        "ghost",
    ]
    rng = random.Random(1777)
    for _ in range(1000):
        candidate = "/".join(
            rng.choice(segments) for _ in range(rng.randint(1, 6))
        )
        if rng.random() < 0.1:
            candidate = "/" + candidate
        joined = candidate if os.path.isabs(candidate) else os.path.join(real_root, candidate)
        resolved = os.path.realpath(joined)
        contained = resolved == real_root or resolved.startswith(real_root + os.sep)
        if contained:
            assert guard.resolve(candidate) == Path(resolved), candidate
        else:
            with pytest.raises(GuardRejection):
                guard.resolve(candidate)


def test_renderer_oracle():
    """display_bounds matches a sort-based percentile oracle exactly."""
    rng = np.random.default_rng(4242)
    for _ in range(1000):
        height = int(rng.integers(1, 12))
        width = int(rng.integers(1, 12))
        pixels = rng.normal(0.0, 100.0, (height, width))
        if rng.random() < 0.3:
            mask = rng.random((height, width)) < 0.2
            pixels[mask] = np.nan
        if not np.isfinite(pixels).any():
            pixels[0, 0] = 0.0
        p_low = float(rng.uniform(0.0, 49.0))
        p_high = float(rng.uniform(p_low + 1.0, 100.0))
        bounds = display_bounds(ImageBuffer(pixels), p_low, p_high)
        finite = np.sort(pixels[np.isfinite(pixels)], kind="stable")
        n = len(finite)
        oracle_low = float(finite[max(1, math.ceil(p_low / 100.0 * n)) - 1])
        oracle_high = float(finite[max(1, math.ceil(p_high / 100.0 * n)) - 1])
        assert bounds == DisplayBounds(
            v_low=oracle_low,
            v_high=oracle_high,
            degenerate=not (oracle_low < oracle_high),
        )

    # one wild outlier must not stretch the display window
    pixels = np.linspace(10.0, 20.0, 400).reshape(20, 20)
    clean = display_bounds(ImageBuffer(pixels.copy()), 1.0, 99.0)
    pixels[0, 0] = 1e12
    spiked = display_bounds(ImageBuffer(pixels), 1.0, 99.0)
    assert spiked.v_high < 1e6
    assert spiked.v_high == pytest.approx(clean.v_high, rel=0.01)

    # log(1 + I) rendering is byte-deterministic on a fixed image
    grid = np.outer(np.linspace(0.0, 1e5, 64), np.linspace(1.0, 2.0, 64))
    spec = RenderSpec(log_scale=True)
    first = render_bytes(ImageBuffer(grid.copy()), spec)
    second = render_bytes(ImageBuffer(grid.copy()), spec)
    assert first == second
    assert first[:8] == b"\x89PNG\r\n\x1a\n"


def test_holdout_metric_plumbing(tmp_path):
    """A fixed holdout score reaches the stored holdout metrics unaltered."""
    workspace = tmp_path / "workspace"
    (workspace / "round_000" / "worker_00").mkdir(parents=True)
    holdout_dir = tmp_path / "holdout_data"
    holdout_dir.mkdir()
    (holdout_dir / "test.csv").write_text("t,y\n1,2.0\n2,2.5\n")

    store = open_or_create(workspace / "state.db")
    store.define_metric(
        MetricDefinition(name="f1", direction="maximize", is_primary=True)
    )
    store.begin_round(0, "baseline")
    root = workspace / "round_000" / "worker_00"
    (root / "algo.py").write_text("print('metric: 0.788')\n")
    (root / "holdout_test_info.json").write_text(
        json.dumps({"files": ["algo.py"], "main": "algo.py", "command": "run algo.py"})
    )
    cid = store.submit_candidate(
        CandidateRecord(
            round_index=0,
            action="baseline",
            description="reference detector",
            artifact_path="round_000/worker_00/algo.py",
        ),
        [MetricSample(None, "f1", 0.298)],
    )
    store.finish_round(0, status="completed")

    provider = ScriptedProvider(
        [
            {"tool_calls": [{"name": "list_files", "arguments": {"path": "."}}]},
            {"tool_calls": [{"name": "read_file", "arguments": {"path": "holdout_data/test.csv"}}]},
            {"tool_calls": [{"name": "submit_holdout_metric", "arguments": {"value": 0.788}}]},
            {"final": "holdout f1 0.788"},
        ],
        name="holdout_round_000",
    )
    result = evaluate_candidate(
        store, cid, holdout_dir, provider, exec_binary="/nonexistent-env-tool"
    )
    assert result.metric == 0.788

    stored = store.holdout_metric_for(cid)
    assert stored is not None
    assert stored.value == 0.788
    assert stored.failure_note is None
    assert [s.value for s in store.holdout_metrics()] == [0.788]
    store.close()
