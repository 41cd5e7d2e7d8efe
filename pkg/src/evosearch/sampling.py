"""Lineage-aware stochastic parent selection.

Candidates are ranked by the primary metric inside an eligible pool and
assigned the unnormalized weight ``w_i = exp(-(rank_i - 1) / tau)``.
Parents are drawn from the normalized distribution, without replacement
when several workers need distinct parents, and with a multiplicative
same-lineage penalty ``lambda ** m_i`` when picking crossover partners
(``m_i`` counts already-selected parents sharing candidate i's lineage).
With stochastic sampling disabled the pool degenerates to deterministic
top-k selection.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Iterable, Sequence


class SamplingError(ValueError):
    """Invalid sampling parameters or pool."""


class EmptyPoolError(SamplingError):
    """The eligible pool contains no candidates."""


class InsufficientPoolError(SamplingError):
    """Crossover needs at least two candidates; caller should fall back to mutate."""


@dataclass(frozen=True)
class SamplingConfig:
    """Knobs for stochastic parent selection.

    tau: temperature; larger values spread probability mass across ranks.
    lambda_penalty: same-lineage crossover penalty in [0, 1].
    stochastic: when False, fall back to deterministic top-k selection.
    top_k: pool prefix used by the deterministic fallback.
    rng_seed: seeds the default random source for reproducible draws.
    """

    tau: float = 5.0
    lambda_penalty: float = 0.5
    stochastic: bool = True
    top_k: int = 3
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        if self.stochastic and self.tau <= 0:
            raise SamplingError(f"tau must be > 0 when stochastic, got {self.tau}")
        if not 0.0 <= self.lambda_penalty <= 1.0:
            raise SamplingError(
                f"lambda_penalty must be in [0, 1], got {self.lambda_penalty}"
            )
        if self.top_k < 1:
            raise SamplingError(f"top_k must be >= 1, got {self.top_k}")


@dataclass
class PoolEntry:
    """Minimal candidate view needed to build a sampling pool."""

    candidate_id: int
    lineage_id: int
    value: float
    round_index: int = 0


@dataclass
class RankedCandidate:
    """A pool member after ranking; ``rank`` 1 is best under the primary metric."""

    candidate_id: int
    lineage_id: int
    rank: int
    value: float
    round_index: int = 0
    weight: float = field(default=0.0, compare=False)


def gibbs_weights(ranks: Sequence[int], tau: float) -> list[float]:
    """Unnormalized rank weights exp(-(r - 1) / tau)."""
    if tau <= 0:
        raise SamplingError(f"tau must be > 0, got {tau}")
    if not ranks:
        raise EmptyPoolError("cannot weight an empty pool")
    return [math.exp(-(r - 1) / tau) for r in ranks]


def gibbs_distribution(ranks: Sequence[int], tau: float) -> list[float]:
    """Normalized selection probabilities over consecutive ranks 1..n."""
    _check_ranks(ranks)
    weights = gibbs_weights(ranks, tau)
    total = sum(weights)
    return [w / total for w in weights]


def _check_ranks(ranks: Sequence[int]) -> None:
    if not ranks:
        raise EmptyPoolError("cannot weight an empty pool")
    if sorted(ranks) != list(range(1, len(ranks) + 1)):
        raise SamplingError(f"ranks must be the consecutive integers 1..n, got {ranks}")


def _better_key(direction: str):
    if direction == "minimize":
        sign = 1.0
    elif direction == "maximize":
        sign = -1.0
    else:
        raise SamplingError(f"unknown metric direction: {direction!r}")
    return lambda c: (sign * c.value, c.round_index, c.candidate_id)


def _rank(entries: list, direction: str) -> list[RankedCandidate]:
    ordered = sorted(entries, key=_better_key(direction))
    return [
        RankedCandidate(
            candidate_id=e.candidate_id,
            lineage_id=e.lineage_id,
            rank=i + 1,
            value=e.value,
            round_index=e.round_index,
        )
        for i, e in enumerate(ordered)
    ]


def build_tune_pool(candidates: Iterable, direction: str) -> list[RankedCandidate]:
    """One representative per lineage: its best member under the primary metric.

    Ties inside a lineage break toward the earlier round, then the lower
    candidate id. The representatives are re-ranked 1..L.
    """
    key = _better_key(direction)
    best: dict[int, object] = {}
    for cand in candidates:
        incumbent = best.get(cand.lineage_id)
        if incumbent is None or key(cand) < key(incumbent):
            best[cand.lineage_id] = cand
    if not best:
        raise EmptyPoolError("no candidates to build a tune pool from")
    return _rank(list(best.values()), direction)


def build_evolve_pool(
    candidates: Iterable, direction: str, per_lineage: int = 3
) -> list[RankedCandidate]:
    """Broader crossover pool keeping up to ``per_lineage`` best members per lineage.

    Ranks are global over the pooled candidates, not per lineage.
    """
    if per_lineage < 1:
        raise SamplingError(f"per_lineage must be >= 1, got {per_lineage}")
    key = _better_key(direction)
    by_lineage: dict[int, list] = {}
    for cand in candidates:
        by_lineage.setdefault(cand.lineage_id, []).append(cand)
    kept = []
    for members in by_lineage.values():
        members.sort(key=key)
        kept.extend(members[:per_lineage])
    if not kept:
        raise EmptyPoolError("no candidates to build an evolve pool from")
    return _rank(kept, direction)


def _resolve_rng(cfg: SamplingConfig, rng: random.Random | None) -> random.Random:
    if rng is not None:
        return rng
    return random.Random(cfg.rng_seed)


def _draw(pool: list[RankedCandidate], weights: list[float], rng: random.Random) -> int:
    """Index of one weighted draw; assumes sum(weights) > 0.

    bisect_right keeps zero-weight entries strictly unselectable even when
    the uniform draw lands exactly on a cumulative boundary.
    """
    cumulative = list(accumulate(weights))
    x = rng.random() * cumulative[-1]
    return min(bisect_right(cumulative, x), len(cumulative) - 1)


def sample_tune_parents(
    pool: Sequence[RankedCandidate],
    workers: int,
    cfg: SamplingConfig,
    rng: random.Random | None = None,
) -> list[RankedCandidate]:
    """Assign min(workers, |pool|) distinct parents, one per worker.

    Stochastic mode draws sequentially without replacement, renormalizing
    the remaining weights after each draw. Deterministic mode returns the
    top min(workers, top_k) representatives by rank.
    """
    if not pool:
        raise EmptyPoolError("tune pool is empty")
    if workers < 1:
        raise SamplingError(f"workers must be >= 1, got {workers}")
    ordered = sorted(pool, key=lambda c: c.rank)
    if not cfg.stochastic:
        return ordered[: min(workers, cfg.top_k)]
    rng = _resolve_rng(cfg, rng)
    remaining = list(ordered)
    weights = gibbs_weights([c.rank for c in remaining], cfg.tau)
    for cand, w in zip(remaining, weights):
        cand.weight = w
    chosen: list[RankedCandidate] = []
    while remaining and len(chosen) < workers:
        idx = _draw(remaining, weights, rng)
        chosen.append(remaining.pop(idx))
        weights.pop(idx)
    return chosen


def sample_evolve_parents(
    pool: Sequence[RankedCandidate],
    cfg: SamplingConfig,
    rng: random.Random | None = None,
) -> tuple[RankedCandidate, RankedCandidate]:
    """Pick two distinct crossover parents from a multi-per-lineage pool.

    The first parent follows the plain rank distribution. Before the second
    draw every remaining candidate i is reweighted by lambda ** m_i, where
    m_i counts already-selected parents from i's lineage, biasing crossover
    toward combining different lineages. If the penalty zeroes out every
    remaining weight (single-lineage pool with lambda = 0) the second draw
    falls back to the unpenalized distribution.
    """
    if len(pool) < 2:
        raise InsufficientPoolError(
            "crossover needs at least 2 candidates; fall back to mutate"
        )
    ordered = sorted(pool, key=lambda c: c.rank)
    if not cfg.stochastic:
        return ordered[0], ordered[1]
    rng = _resolve_rng(cfg, rng)
    weights = gibbs_weights([c.rank for c in ordered], cfg.tau)
    for cand, w in zip(ordered, weights):
        cand.weight = w
    first_idx = _draw(ordered, weights, rng)
    first = ordered[first_idx]
    remaining = ordered[:first_idx] + ordered[first_idx + 1 :]
    base = weights[:first_idx] + weights[first_idx + 1 :]
    penalized = [
        w * cfg.lambda_penalty ** (1 if c.lineage_id == first.lineage_id else 0)
        for c, w in zip(remaining, base)
    ]
    if sum(penalized) <= 0.0:
        penalized = base
    second = remaining[_draw(remaining, penalized, rng)]
    return first, second
