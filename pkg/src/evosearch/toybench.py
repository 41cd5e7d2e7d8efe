"""Synthetic 2-D benchmark for sampler temperature ablations.

A Gaussian-KDE landscape over [0, 100]^2 stands in for a real evaluation
harness, and a greedy hill-climbing policy stands in for an agent. Each
trial drives the real controller (`select_next_action`) and the real
parent sampler over three seeded lineages, so the measured difference
between temperatures isolates the sampler's contribution.

The reference scenario is calibrated by seed search: the seed and the
three initial points were chosen so the landscape's grid argmax lands
near (57, 38), two high-value starts sit on a distant local hill where
greedy walks stall, and the point closest to the maximum sits in a
low-value basin entrance that deterministic top-k selection never picks.
"""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .controller import ControllerConfig, compute_tiers, select_next_action
from .sampling import SamplingConfig

DEFAULT_BANDWIDTH = 8.0
GRID_STEP = 0.5
MOVE_STEP = 2.0
MAX_MOVES_PER_ROUND = 4
DEFAULT_TOLERANCE = 2.0
DEFAULT_ROUNDS_CAP = 30

# calibrated: the unique seed in 0..299 whose 0.5-grid argmax is unique
# and lies within distance 3 of (57, 38) at the default bandwidth
REFERENCE_SEED = 15
# (x, y) starts: two on the far north-east hill, one low-value point
# nearest the maximum
REFERENCE_INIT_XY = ((70.0, 82.0), (80.0, 78.0), (41.0, 42.0))


@dataclass
class Landscape:
    """Normalized KDE surface over [0, 100]^2 with a grid-located maximum."""

    points: np.ndarray
    bandwidth: float
    scale: float
    peak: tuple[float, float]
    grid_step: float = GRID_STEP

    def value(self, x: float, y: float) -> float:
        d2 = (self.points[:, 0] - x) ** 2 + (self.points[:, 1] - y) ** 2
        raw = np.exp(-d2 / (2.0 * self.bandwidth**2)).sum()
        return float(raw * self.scale)

    def grid_axis(self) -> np.ndarray:
        return np.arange(0.0, 100.0 + self.grid_step / 2.0, self.grid_step)

    def value_grid(self) -> np.ndarray:
        """Values at every grid node, shape (len(axis), len(axis)), x-major."""
        axis = self.grid_axis()
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        d2 = (xx.ravel()[:, None] - self.points[:, 0][None, :]) ** 2 + (
            yy.ravel()[:, None] - self.points[:, 1][None, :]
        ) ** 2
        raw = np.exp(-d2 / (2.0 * self.bandwidth**2)).sum(axis=1)
        return (raw * self.scale).reshape(xx.shape)


@dataclass(frozen=True)
class SearchPoint:
    """One evaluated location; field names line up with the sampler pools."""

    candidate_id: int
    lineage_id: int
    round_index: int
    x: float
    y: float
    value: float


@dataclass(frozen=True)
class TrialResult:
    tau: float
    seed: int
    rounds_to_discovery: Optional[int]
    censored: bool


def build_landscape(seed: int, bandwidth: float = DEFAULT_BANDWIDTH) -> Landscape:
    """Seeded 100-point KDE landscape, normalized so the grid maximum is 10."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 100.0, size=(100, 2))
    probe = Landscape(points=pts, bandwidth=bandwidth, scale=1.0, peak=(0.0, 0.0))
    grid = probe.value_grid()
    axis = probe.grid_axis()
    flat = int(grid.argmax())
    i, j = divmod(flat, grid.shape[1])
    scale = 10.0 / float(grid[i, j])
    return Landscape(
        points=pts,
        bandwidth=bandwidth,
        scale=scale,
        peak=(float(axis[i]), float(axis[j])),
    )


def reference_scenario() -> tuple[Landscape, list[SearchPoint]]:
    """The calibrated landscape plus its three starting points (round 0)."""
    landscape = build_landscape(REFERENCE_SEED)
    return landscape, make_init_points(landscape, REFERENCE_INIT_XY)


def make_init_points(
    landscape: Landscape, coords: Iterable[tuple[float, float]]
) -> list[SearchPoint]:
    """Round-0 points, one fresh lineage each."""
    return [
        SearchPoint(
            candidate_id=i,
            lineage_id=i,
            round_index=0,
            x=float(x),
            y=float(y),
            value=landscape.value(x, y),
        )
        for i, (x, y) in enumerate(coords)
    ]


def _clamp(v: float) -> float:
    return min(100.0, max(0.0, v))


MovePolicy = Callable[[Landscape, float, float], Optional[tuple[float, float]]]


def greedy_step(
    landscape: Landscape, x: float, y: float, step: float = MOVE_STEP
) -> Optional[tuple[float, float]]:
    """Best improving cardinal step of the given length, or None to stop."""
    current = landscape.value(x, y)
    best: Optional[tuple[float, float, float]] = None
    for dx, dy in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
        nx, ny = _clamp(x + dx), _clamp(y + dy)
        v = landscape.value(nx, ny)
        if v > current and (best is None or v > best[0]):
            best = (v, nx, ny)
    if best is None:
        return None
    return best[1], best[2]


def walk(
    landscape: Landscape,
    x: float,
    y: float,
    policy: MovePolicy = greedy_step,
    max_moves: int = MAX_MOVES_PER_ROUND,
) -> tuple[float, float]:
    """Apply up to max_moves sequential policy moves, clamped to the domain."""
    for _ in range(max_moves):
        nxt = policy(landscape, x, y)
        if nxt is None:
            return x, y
        x, y = _clamp(nxt[0]), _clamp(nxt[1])
    return x, y


def scripted_round(
    landscape: Landscape,
    point: SearchPoint,
    candidate_id: int,
    round_index: int,
    policy: MovePolicy = greedy_step,
) -> SearchPoint:
    """One agent-free refinement round: a short walk that keeps the lineage."""
    x, y = walk(landscape, point.x, point.y, policy=policy)
    return SearchPoint(
        candidate_id=candidate_id,
        lineage_id=point.lineage_id,
        round_index=round_index,
        x=x,
        y=y,
        value=landscape.value(x, y),
    )


def _trial_config(rounds_cap: int) -> ControllerConfig:
    return ControllerConfig(
        total_rounds=rounds_cap,
        warmup_generate_rounds=0,
        forced_generate_every=None,
        tune_workers=2,
    )


def _best(points: Sequence[SearchPoint]) -> SearchPoint:
    return max(points, key=lambda p: (p.value, -p.round_index, -p.candidate_id))


def run_trial(
    landscape: Landscape,
    init_points: Sequence[SearchPoint],
    tau: float,
    seed: int,
    rounds_cap: int = DEFAULT_ROUNDS_CAP,
    tolerance: float = DEFAULT_TOLERANCE,
    policy: MovePolicy = greedy_step,
    visited: Optional[list[SearchPoint]] = None,
) -> TrialResult:
    """One seeded search trial; fully deterministic in (seed, tau).

    Discovery is the first round whose best-so-far point lies within
    `tolerance` of the landscape maximum; the initial points count as
    round 0. Trials that never discover are censored at rounds_cap.
    """
    points = list(init_points)
    if visited is not None:
        visited.extend(points)
    by_id = {p.candidate_id: p for p in points}
    next_id = max(by_id) + 1
    next_lineage = max(p.lineage_id for p in points) + 1

    def discovered() -> bool:
        b = _best(points)
        return math.dist((b.x, b.y), landscape.peak) <= tolerance

    if discovered():
        return TrialResult(tau=tau, seed=seed, rounds_to_discovery=0, censored=False)

    rng = random.Random(f"{seed}:{tau}")
    sampling = SamplingConfig(tau=tau, stochastic=tau > 0)
    cfg = _trial_config(rounds_cap)
    for round_index in range(1, rounds_cap + 1):
        tiers = compute_tiers(points, "maximize", cfg)
        plan = select_next_action(
            round_index, points, tiers, [], cfg, sampling, "maximize", rng=rng
        )
        children: list[SearchPoint] = []
        if plan.action == "generate":
            for _ in range(plan.workers):
                x, y = rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)
                children.append(
                    SearchPoint(
                        candidate_id=next_id,
                        lineage_id=next_lineage,
                        round_index=round_index,
                        x=x,
                        y=y,
                        value=landscape.value(x, y),
                    )
                )
                next_id += 1
                next_lineage += 1
        elif plan.action in ("tune", "mutate"):
            for pid in plan.parents:
                children.append(
                    scripted_round(
                        landscape, by_id[pid], next_id, round_index, policy=policy
                    )
                )
                next_id += 1
        elif plan.action == "evolve":
            a, b = (by_id[pid] for pid in plan.parents)
            mid = SearchPoint(
                candidate_id=next_id,
                lineage_id=next_lineage,
                round_index=round_index,
                x=_clamp((a.x + b.x) / 2.0),
                y=_clamp((a.y + b.y) / 2.0),
                value=0.0,
            )
            children.append(
                scripted_round(landscape, mid, next_id, round_index, policy=policy)
            )
            next_id += 1
            next_lineage += 1
        for child in children:
            points.append(child)
            by_id[child.candidate_id] = child
        if visited is not None:
            visited.extend(children)
        if discovered():
            return TrialResult(
                tau=tau, seed=seed, rounds_to_discovery=round_index, censored=False
            )
    return TrialResult(tau=tau, seed=seed, rounds_to_discovery=None, censored=True)


def run_trials(
    landscape: Landscape,
    init_points: Sequence[SearchPoint],
    taus: Sequence[float],
    trials: int,
    rounds_cap: int = DEFAULT_ROUNDS_CAP,
    tolerance: float = DEFAULT_TOLERANCE,
    policy: MovePolicy = greedy_step,
) -> list[TrialResult]:
    """Seeded trial grid over the given temperatures; seeds are 0..trials-1."""
    results = []
    for tau in taus:
        for seed in range(trials):
            results.append(
                run_trial(
                    landscape,
                    init_points,
                    tau,
                    seed,
                    rounds_cap=rounds_cap,
                    tolerance=tolerance,
                    policy=policy,
                )
            )
    return results


def effective_rounds(result: TrialResult, rounds_cap: int = DEFAULT_ROUNDS_CAP) -> int:
    """Rounds-to-discovery with censored trials scored one past the cap."""
    if result.censored or result.rounds_to_discovery is None:
        return rounds_cap + 1
    return result.rounds_to_discovery


def trials_to_csv(results: Sequence[TrialResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau", "seed", "rounds_to_discovery", "censored"])
    for r in results:
        writer.writerow(
            [
                repr(r.tau),
                r.seed,
                "" if r.rounds_to_discovery is None else r.rounds_to_discovery,
                str(r.censored).lower(),
            ]
        )
    return buf.getvalue()


def summarize(
    results: Sequence[TrialResult], rounds_cap: int = DEFAULT_ROUNDS_CAP
) -> str:
    """Per-temperature comparison table (censored trials scored past the cap)."""
    lines = ["temperature ablation summary"]
    for tau in sorted({r.tau for r in results}):
        rows = [r for r in results if r.tau == tau]
        discovered = [r for r in rows if not r.censored]
        within10 = sum(
            1 for r in discovered if (r.rounds_to_discovery or 0) <= 10
        )
        median = statistics.median(effective_rounds(r, rounds_cap) for r in rows)
        lines.append(
            f"  tau={tau:g}: trials={len(rows)} discovered={len(discovered)} "
            f"within_10_rounds={within10} median_rounds={median:g}"
        )
    return "\n".join(lines) + "\n"
