"""Objective, optimizer, grid benchmark and OD scaling.

Frozen objective values come from a straight-line reimplementation on the
fixed five-segment network with ground truth {P1: 600 s, P2: 500 s,
P3: 130 s} and weights {1, 2, 0.5}; the frozen derivative is a central
finite difference from the same script.
"""

import numpy as np
import pytest

from helpers import (
    build_fixed_network,
    fixed_params,
    ground_truth_at,
    make_random_instance,
)

from odscale.errors import (
    EmptyGrid,
    EmptyGroundTruth,
    UnknownPath,
    XOutOfBounds,
)
from odscale.estimate import (
    EstimateOptions,
    GridSpec,
    GroundTruth,
    apply_scaling,
    estimate,
    grid_search_benchmark,
    objective,
)
from odscale.flow import ModelParams
from odscale.network import ODPair, Path, Segment, build_snapshot

# [DERIVED] objective oracle on the fixed instance, hours squared
F_AT_07 = 0.001215962687225064
FPRIME_AT_07_FD = -0.010661517233293005
F_GRID = {
    0.2: 0.012024607912985577,
    0.5: 0.005868757495397124,
    0.7: 0.001215962687225064,
    0.9: 0.0005553104903255453,
    1.1: 0.00041630994312351756,
}


def single_segment_instance(lanes=2, kappa=0.5, x_upper=10.0):
    """One segment, one path, one OD; clamps at x = lanes/(kappa*c)."""
    snap = build_snapshot(
        [Segment("s", 1.0, lanes, 100.0, 20.0)],
        [Path("p", ("s",))],
        [ODPair("o", "p", 10.0)],
    )
    params = ModelParams(kappa=kappa, k_jam=80.0, alpha1=2.0, alpha2=2.0,
                         x_lower=0.1, x_upper=x_upper)
    return snap, params


class TestGroundTruth:
    def test_weight_defaults_to_one(self):
        gt = GroundTruth(travel_times={"p": 10.0}, weights={"q": 2.0})
        assert gt.weight_of("p") == 1.0
        assert gt.weight_of("q") == 2.0

    def test_nonpositive_travel_time_rejected(self):
        with pytest.raises(ValueError):
            GroundTruth(travel_times={"p": 0.0})
        with pytest.raises(ValueError):
            GroundTruth(travel_times={"p": -3.0})

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            GroundTruth(travel_times={"p": 10.0}, weights={"p": -1.0})


class TestObjective:
    def test_frozen_value(self, network, params, ground_truth):
        f, _ = objective(network, params, ground_truth, 0.7)
        np.testing.assert_allclose(f, F_AT_07, rtol=1e-12)

    def test_frozen_grid_values(self, network, params, ground_truth):
        for x, expected in F_GRID.items():
            f, _ = objective(network, params, ground_truth, x)
            np.testing.assert_allclose(f, expected, rtol=1e-12)

    def test_derivative_matches_central_differences(self, network, params,
                                                    ground_truth):
        _, fp = objective(network, params, ground_truth, 0.7)
        np.testing.assert_allclose(fp, FPRIME_AT_07_FD, rtol=1e-6)

    def test_derivative_on_random_instances(self):
        """Exact gradient vs central differences, multi-path instances."""
        rng = np.random.default_rng(5)
        for _ in range(15):
            snap, params, x_ref = make_random_instance(
                rng, n_path_range=(5, 12))
            gt = ground_truth_at(snap, params, 0.8 * x_ref, rng=rng,
                                 noise_frac=0.05)
            x = float(rng.uniform(0.15, 0.95)) * x_ref
            x = max(x, params.x_lower + 0.01)
            h = 6e-6 * max(1.0, x)
            _, fp = objective(snap, params, gt, x)
            f_hi, _ = objective(snap, params, gt, x + h)
            f_lo, _ = objective(snap, params, gt, x - h)
            fd = (f_hi - f_lo) / (2.0 * h)
            np.testing.assert_allclose(fp, fd, rtol=1e-6, atol=1e-14)

    def test_two_second_error_is_four_seconds_squared(self):
        """One path, unit weight, 10 s truth vs 12 s model: 4 s^2."""
        snap = build_snapshot(
            [Segment("s", 0.4, 2, 120.0, 20.0)],
            [Path("p", ("s",))],
            [ODPair("o", "p", 0.0)],  # free flow: 0.4 km at 120 km/h = 12 s
        )
        params = ModelParams(kappa=0.5, x_lower=0.1, x_upper=10.0)
        gt = GroundTruth(travel_times={"p": 10.0})
        f_h2, fp = objective(snap, params, gt, 1.0)
        assert f_h2 * 3600.0 ** 2 == pytest.approx(4.0, rel=1e-12)
        assert fp == 0.0

    def test_perfect_fit_is_zero(self, network, params):
        gt = ground_truth_at(network, params, 0.7)
        f, _ = objective(network, params, gt, 0.7)
        assert f <= 1e-30

    def test_mean_and_weights(self, network, params):
        """Doubling every weight leaves the weighted mean objective doubled."""
        gt1 = GroundTruth(travel_times={"P1": 600.0, "P2": 500.0})
        gt2 = GroundTruth(travel_times={"P1": 600.0, "P2": 500.0},
                          weights={"P1": 2.0, "P2": 2.0})
        f1, _ = objective(network, params, gt1, 0.7)
        f2, _ = objective(network, params, gt2, 0.7)
        np.testing.assert_allclose(f2, 2.0 * f1, rtol=1e-14)

    def test_x_outside_bounds_rejected(self, network, params, ground_truth):
        with pytest.raises(XOutOfBounds):
            objective(network, params, ground_truth, params.x_upper + 1.0)

    def test_unknown_path_rejected(self, network, params):
        gt = GroundTruth(travel_times={"P9": 100.0})
        with pytest.raises(UnknownPath):
            objective(network, params, gt, 0.7)

    def test_empty_ground_truth_rejected(self, network, params):
        with pytest.raises(EmptyGroundTruth):
            objective(network, params, GroundTruth(travel_times={}), 0.7)

    def test_all_zero_weights_rejected(self, network, params):
        gt = GroundTruth(travel_times={"P1": 600.0},
                         weights={"P1": 0.0})
        with pytest.raises(EmptyGroundTruth):
            objective(network, params, gt, 0.7)


class TestEstimate:
    def test_round_trip_recovery(self, network, params):
        """Truth generated at x0 = 0.73 is recovered almost exactly."""
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt)
        np.testing.assert_allclose(result.x_star, 0.73, rtol=1e-6)
        assert result.objective_value <= 1e-12
        assert result.converged

    def test_round_trip_on_random_instances(self):
        rng = np.random.default_rng(21)
        for _ in range(8):
            snap, params, x_ref = make_random_instance(rng)
            x0 = float(rng.uniform(0.3, 0.95)) * x_ref
            x0 = max(x0, params.x_lower + 0.5)
            gt = ground_truth_at(snap, params, x0)
            result = estimate(snap, params, gt)
            np.testing.assert_allclose(result.x_star, x0, rtol=1e-5)
            assert result.objective_value <= 1e-10

    def test_boundary_optimum_at_lower_bound(self, network, params):
        """Truth faster than free flow pushes the optimum to x_lower."""
        free = ground_truth_at(network, params, params.x_lower)
        gt = GroundTruth(travel_times={
            pid: 0.9 * tt for pid, tt in free.travel_times.items()
        })
        result = estimate(network, params, gt)
        assert result.x_star == params.x_lower
        assert result.converged

    def test_x_star_within_bounds(self):
        rng = np.random.default_rng(31)
        for _ in range(5):
            snap, params, x_ref = make_random_instance(rng)
            gt = ground_truth_at(snap, params, 0.7 * x_ref, rng=rng,
                                 noise_frac=0.1)
            result = estimate(snap, params, gt)
            assert params.x_lower <= result.x_star <= params.x_upper

    def test_trace_records_every_evaluation(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt)
        assert result.iterations == len(result.trace) > 0
        for x, f, fp in result.trace:
            assert params.x_lower <= x <= params.x_upper
            assert np.isfinite(f) and np.isfinite(fp)
        assert any(x == result.x_star for x, _, _ in result.trace)

    def test_deterministic(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        r1 = estimate(network, params, gt)
        r2 = estimate(network, params, gt)
        assert r1.x_star == r2.x_star
        assert r1.objective_value == r2.objective_value
        assert r1.trace == r2.trace

    def test_result_carries_upscaled_od(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt)
        for oid, od in network.od_pairs.items():
            assert result.upscaled_od[oid] == pytest.approx(
                result.x_star * od.subsample_demand_vph)

    def test_predicted_times_in_seconds(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt)
        for pid, tt in gt.travel_times.items():
            assert result.predicted_travel_times[pid] == pytest.approx(
                tt, rel=1e-5)

    def test_predicted_counts_cover_all_segments(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt)
        assert set(result.predicted_counts) == set(network.segments)
        assert all(q >= 0 for q in result.predicted_counts.values())

    def test_single_start_works(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        result = estimate(network, params, gt,
                          EstimateOptions(n_starts=1))
        np.testing.assert_allclose(result.x_star, 0.73, rtol=1e-6)

    def test_beats_fine_grid(self, network, params, ground_truth):
        """Optimizer never loses to a dense grid on the same objective."""
        result = estimate(network, params, ground_truth)
        x_bench, curve = grid_search_benchmark(
            network, params, ground_truth, GridSpec(num_points=100_001))
        f_grid = min(f for _, f in curve)
        assert result.objective_value <= f_grid + 1e-9 * (1.0 + f_grid)
        assert abs(result.x_star - x_bench) <= (
            (params.x_upper - params.x_lower) / 100_000)


class TestGridSearchBenchmark:
    def test_argmin_on_coarse_grid(self):
        """Truth planted at x = 2 makes the middle of {1, 2, 3} the argmin."""
        # kappa 0.05 keeps the segment unclamped until x = 4
        snap, params = single_segment_instance(kappa=0.05)
        gt = ground_truth_at(snap, params, 2.0)
        x_bench, curve = grid_search_benchmark(
            snap, params, gt, GridSpec(x_lower=1.0, x_upper=3.0, num_points=3))
        assert [x for x, _ in curve] == [1.0, 2.0, 3.0]
        assert x_bench == 2.0
        fs = [f for _, f in curve]
        assert fs[1] < fs[0] and fs[1] < fs[2]

    def test_tie_breaks_toward_smaller_x(self):
        """On a saturated plateau every grid value ties; smallest x wins."""
        snap, params = single_segment_instance(lanes=2, kappa=0.5)
        # clamp point: kappa * x * c / lanes = 1 at x = 0.4; beyond it the
        # objective is flat
        gt = GroundTruth(travel_times={"p": 100.0})
        x_bench, curve = grid_search_benchmark(
            snap, params, gt, GridSpec(x_lower=1.0, x_upper=3.0, num_points=5))
        fs = [f for _, f in curve]
        assert len(set(fs)) == 1
        assert x_bench == 1.0

    def test_benchmark_within_one_step_of_truth(self, network, params):
        gt = ground_truth_at(network, params, 0.73)
        spec = GridSpec(num_points=2001)
        step = (params.x_upper - params.x_lower) / 2000
        x_bench, _ = grid_search_benchmark(network, params, gt, spec)
        assert abs(x_bench - 0.73) <= step

    def test_curve_matches_pointwise_objective(self, network, params,
                                               ground_truth):
        _, curve = grid_search_benchmark(
            network, params, ground_truth, GridSpec(num_points=9))
        for x, f in curve[::3]:
            f_ref, _ = objective(network, params, ground_truth, x)
            np.testing.assert_allclose(f, f_ref, rtol=1e-12)


class TestGridSpec:
    def test_num_points_resolves_inclusive_linspace(self, params):
        xs = GridSpec(num_points=5).resolve(params)
        np.testing.assert_allclose(xs, np.linspace(0.1, 2.0, 5))

    def test_step_resolves_arithmetic_sequence(self, params):
        xs = GridSpec(x_lower=0.0, x_upper=1.0, step=0.3).resolve(params)
        np.testing.assert_allclose(xs, [0.0, 0.3, 0.6, 0.9])

    def test_bounds_default_to_params(self, params):
        xs = GridSpec(num_points=2).resolve(params)
        assert xs[0] == params.x_lower and xs[-1] == params.x_upper

    @pytest.mark.parametrize("spec", [
        GridSpec(),
        GridSpec(num_points=0),
        GridSpec(step=0.0),
        GridSpec(step=-0.5),
        GridSpec(x_lower=-1.0, num_points=3),
        GridSpec(x_lower=5.0, x_upper=1.0, num_points=3),
    ])
    def test_invalid_specs_rejected(self, spec, params):
        with pytest.raises(EmptyGrid):
            spec.resolve(params)


class TestApplyScaling:
    def test_identity_at_one(self, network):
        scaled = apply_scaling(network.od_pairs, 1.0)
        assert scaled == dict(network.od_pairs)

    def test_zero_empties_demand(self, network):
        scaled = apply_scaling(network.od_pairs, 0.0)
        assert all(od.subsample_demand_vph == 0.0 for od in scaled.values())

    def test_documented_example(self):
        pairs = [ODPair("o1", "p", 100.0), ODPair("o2", "p", 50.0)]
        scaled = apply_scaling(pairs, 2.5)
        assert scaled["o1"].subsample_demand_vph == 250.0
        assert scaled["o2"].subsample_demand_vph == 125.0
        assert scaled["o1"].path_id == "p"

    def test_negative_factor_rejected(self, network):
        with pytest.raises(ValueError):
            apply_scaling(network.od_pairs, -0.5)

    def test_accepts_mapping_and_iterable(self, network):
        from_map = apply_scaling(network.od_pairs, 2.0)
        from_iter = apply_scaling(list(network.od_pairs.values()), 2.0)
        assert from_map == from_iter
