"""KDE landscape, greedy walks, and the temperature ablation."""

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evosearch.toybench import (
    DEFAULT_ROUNDS_CAP,
    REFERENCE_INIT_XY,
    REFERENCE_SEED,
    Landscape,
    SearchPoint,
    TrialResult,
    build_landscape,
    effective_rounds,
    greedy_step,
    make_init_points,
    reference_scenario,
    run_trial,
    run_trials,
    scripted_round,
    summarize,
    trials_to_csv,
    walk,
)


@pytest.fixture(scope="module")
def reference():
    return reference_scenario()


class TestLandscape:
    def test_fixed_seed_is_deterministic(self):
        a = build_landscape(7)
        b = build_landscape(7)
        probe_rng = np.random.default_rng(123)
        for x, y in probe_rng.uniform(0.0, 100.0, size=(100, 2)):
            assert a.value(x, y) == b.value(x, y)
        assert a.peak == b.peak
        assert a.scale == b.scale

    def test_grid_max_is_ten_after_normalization(self, reference):
        landscape, _ = reference
        assert landscape.value_grid().max() == pytest.approx(10.0, abs=1e-9)

    def test_values_bounded_by_ten_on_grid(self, reference):
        landscape, _ = reference
        grid = landscape.value_grid()
        assert grid.min() >= 0.0
        assert grid.max() <= 10.0 + 1e-9

    def test_reference_peak_near_expected_spot(self, reference):
        landscape, _ = reference
        assert math.dist(landscape.peak, (57.0, 38.0)) <= 3.0

    def test_reference_peak_is_unique_on_grid(self, reference):
        landscape, _ = reference
        grid = landscape.value_grid()
        assert int((grid == grid.max()).sum()) == 1

    def test_peak_matches_grid_argmax(self, reference):
        landscape, _ = reference
        axis = landscape.grid_axis()
        grid = landscape.value_grid()
        i, j = divmod(int(grid.argmax()), grid.shape[1])
        assert landscape.peak == (axis[i], axis[j])

    def test_grid_axis_spacing(self, reference):
        landscape, _ = reference
        axis = landscape.grid_axis()
        assert len(axis) == 201
        assert axis[0] == 0.0 and axis[-1] == 100.0


class TestReferenceInits:
    def test_three_points_with_fresh_lineages(self, reference):
        _, inits = reference
        assert len(inits) == 3
        assert sorted(p.lineage_id for p in inits) == [0, 1, 2]
        assert all(p.round_index == 0 for p in inits)

    def test_lowest_value_point_is_nearest_the_maximum(self, reference):
        landscape, inits = reference
        by_value = sorted(inits, key=lambda p: p.value)
        by_distance = sorted(
            inits, key=lambda p: math.dist((p.x, p.y), landscape.peak)
        )
        assert by_value[0] is by_distance[0]

    def test_far_points_start_on_a_distant_hill(self, reference):
        landscape, inits = reference
        far = sorted(inits, key=lambda p: p.value)[1:]
        for p in far:
            assert math.dist((p.x, p.y), landscape.peak) > 30.0


class TestScriptedRound:
    def test_point_at_maximum_is_a_fixed_point(self, reference):
        landscape, _ = reference
        start = SearchPoint(0, 0, 0, *landscape.peak, landscape.value(*landscape.peak))
        moved = scripted_round(landscape, start, candidate_id=1, round_index=1)
        assert (moved.x, moved.y) == (start.x, start.y)

    def test_one_eastward_move_reaches_maximum_from_two_west(self, reference):
        landscape, _ = reference
        px, py = landscape.peak
        start = SearchPoint(0, 0, 0, px - 2.0, py, landscape.value(px - 2.0, py))
        moved = scripted_round(landscape, start, candidate_id=1, round_index=1)
        assert (moved.x, moved.y) == (px, py)

    @given(
        x=st.floats(min_value=0.0, max_value=100.0),
        y=st.floats(min_value=0.0, max_value=100.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_round_displacement_bounded_in_l1(self, x, y):
        landscape = build_landscape(REFERENCE_SEED)
        nx, ny = walk(landscape, x, y)
        assert abs(nx - x) + abs(ny - y) <= 8.0 + 1e-9

    @given(
        x=st.floats(min_value=0.0, max_value=100.0),
        y=st.floats(min_value=0.0, max_value=100.0),
    )
    @settings(max_examples=40, deadline=None)
    def test_walk_stays_in_domain_and_never_worsens(self, x, y):
        landscape = build_landscape(REFERENCE_SEED)
        nx, ny = walk(landscape, x, y)
        assert 0.0 <= nx <= 100.0 and 0.0 <= ny <= 100.0
        assert landscape.value(nx, ny) >= landscape.value(x, y)

    def test_lineage_is_inherited(self, reference):
        landscape, inits = reference
        moved = scripted_round(landscape, inits[2], candidate_id=9, round_index=4)
        assert moved.lineage_id == inits[2].lineage_id
        assert moved.candidate_id == 9
        assert moved.round_index == 4


class TestTrials:
    def test_single_init_at_maximum_discovers_at_round_zero(self, reference):
        landscape, _ = reference
        init = make_init_points(landscape, [landscape.peak])
        for tau in (0.0, 5.0):
            result = run_trial(landscape, init, tau=tau, seed=0)
            assert result.rounds_to_discovery == 0
            assert not result.censored

    def test_trial_is_reproducible_per_seed_and_tau(self, reference):
        landscape, inits = reference
        seen_a: list[SearchPoint] = []
        seen_b: list[SearchPoint] = []
        a = run_trial(landscape, inits, tau=5.0, seed=3, visited=seen_a)
        b = run_trial(landscape, inits, tau=5.0, seed=3, visited=seen_b)
        assert a == b
        assert seen_a == seen_b

    def test_different_seeds_can_differ(self, reference):
        landscape, inits = reference
        rounds = {
            run_trial(landscape, inits, tau=5.0, seed=s).rounds_to_discovery
            for s in range(8)
        }
        assert len(rounds) > 1

    def test_every_visited_point_stays_in_domain(self, reference):
        landscape, inits = reference
        seen: list[SearchPoint] = []
        run_trial(landscape, inits, tau=5.0, seed=1, visited=seen)
        assert seen
        for p in seen:
            assert 0.0 <= p.x <= 100.0 and 0.0 <= p.y <= 100.0

    def test_deterministic_mode_trials_are_identical(self, reference):
        landscape, inits = reference
        results = [run_trial(landscape, inits, tau=0.0, seed=s) for s in range(5)]
        baseline = (results[0].rounds_to_discovery, results[0].censored)
        for r in results[1:]:
            assert (r.rounds_to_discovery, r.censored) == baseline

    def test_temperature_effect_is_directional(self, reference):
        landscape, inits = reference
        trials = 20
        results = run_trials(landscape, inits, taus=(0.0, 5.0), trials=trials)
        cold = [r for r in results if r.tau == 0.0]
        hot = [r for r in results if r.tau == 5.0]
        assert len(cold) == len(hot) == trials
        median_cold = statistics.median(effective_rounds(r) for r in cold)
        median_hot = statistics.median(effective_rounds(r) for r in hot)
        assert median_hot < median_cold
        rate10_cold = sum(
            1 for r in cold if not r.censored and r.rounds_to_discovery <= 10
        ) / len(cold)
        rate10_hot = sum(
            1 for r in hot if not r.censored and r.rounds_to_discovery <= 10
        ) / len(hot)
        assert rate10_hot > rate10_cold


class TestSerialization:
    def test_csv_layout(self):
        rows = [
            TrialResult(tau=0.0, seed=0, rounds_to_discovery=None, censored=True),
            TrialResult(tau=5.0, seed=0, rounds_to_discovery=3, censored=False),
        ]
        text = trials_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "tau,seed,rounds_to_discovery,censored"
        assert lines[1] == "0.0,0,,true"
        assert lines[2] == "5.0,0,3,false"

    def test_summary_has_one_line_per_temperature(self):
        rows = [
            TrialResult(tau=0.0, seed=0, rounds_to_discovery=None, censored=True),
            TrialResult(tau=0.0, seed=1, rounds_to_discovery=13, censored=False),
            TrialResult(tau=5.0, seed=0, rounds_to_discovery=3, censored=False),
        ]
        text = summarize(rows)
        assert "tau=0:" in text and "tau=5:" in text
        assert "trials=2" in text and "trials=1" in text

    def test_effective_rounds_scores_censoring_past_the_cap(self):
        censored = TrialResult(tau=0.0, seed=0, rounds_to_discovery=None, censored=True)
        found = TrialResult(tau=5.0, seed=0, rounds_to_discovery=4, censored=False)
        assert effective_rounds(censored) == DEFAULT_ROUNDS_CAP + 1
        assert effective_rounds(censored, rounds_cap=10) == 11
        assert effective_rounds(found) == 4


def test_reference_constants_are_frozen():
    assert REFERENCE_SEED == 15
    assert REFERENCE_INIT_XY == ((70.0, 82.0), (80.0, 78.0), (41.0, 42.0))
