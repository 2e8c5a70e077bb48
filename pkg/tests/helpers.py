"""Shared builders for test instances.

The fixed five-segment network mirrors the hand-derived oracle values
frozen in the flow and estimator tests; random instances are used for
property and equivalence checks. Random networks keep paths as
contiguous slices of the segment list so no path repeats a segment.
"""

from __future__ import annotations

import numpy as np

from odscale.estimate import GroundTruth
from odscale.flow import SECONDS_PER_HOUR, ModelParams, load_network
from odscale.network import (
    NetworkSnapshot,
    ODPair,
    Path,
    Segment,
    build_snapshot,
    segment_demand_coefficients,
)


def build_fixed_network() -> NetworkSnapshot:
    """Five segments, three paths, four ODs; matches the oracle sheet."""
    segments = [
        Segment("A", 1.2, 3, 110.0, 30.0),
        Segment("B", 0.8, 2, 100.0, 25.0),
        Segment("C", 2.5, 4, 120.0, 35.0),
        Segment("D", 1.0, 2, 90.0, 20.0),
        Segment("E", 3.1, 3, 105.0, 28.0),
    ]
    paths = [
        Path("P1", ("A", "B", "C")),
        Path("P2", ("C", "D")),
        Path("P3", ("E",)),
    ]
    ods = [
        ODPair("od1", "P1", 50.0),
        ODPair("od2", "P2", 80.0),
        ODPair("od3", "P3", 40.0),
        ODPair("od4", "P1", 30.0),
    ]
    return build_snapshot(segments, paths, ods)


def fixed_params() -> ModelParams:
    return ModelParams(kappa=0.03, k_jam=100.0, alpha1=2.0, alpha2=3.0,
                       x_lower=0.1, x_upper=2.0)


def make_random_instance(rng: np.random.Generator,
                         n_seg_range: tuple[int, int] = (5, 50),
                         n_path_range: tuple[int, int] = (3, 20),
                         alpha_range: tuple[float, float] = (1.0, 4.0),
                         x_ref_range: tuple[float, float] = (2.0, 50.0),
                         peak_ratio: float = 0.9,
                         ) -> tuple[NetworkSnapshot, ModelParams, float]:
    """Random network plus params scaled to a reference factor.

    kappa is set so the busiest segment sits at ``peak_ratio`` of jam
    density when x equals the returned reference factor; every segment's
    clamp point therefore lies at x >= x_ref / peak_ratio.
    """
    n_seg = int(rng.integers(n_seg_range[0], n_seg_range[1] + 1))
    n_path = int(rng.integers(n_path_range[0], n_path_range[1] + 1))

    segments = [
        Segment(
            id=f"s{i}",
            length_km=float(rng.uniform(0.3, 4.0)),
            lanes=int(rng.integers(1, 6)),
            v_max_kmh=float(rng.uniform(80.0, 130.0)),
            v_min_kmh=float(rng.uniform(15.0, 45.0)),
        )
        for i in range(n_seg)
    ]
    paths = []
    ods = []
    for j in range(n_path):
        length = int(rng.integers(1, min(7, n_seg) + 1))
        start = int(rng.integers(0, n_seg - length + 1))
        pid = f"p{j}"
        paths.append(Path(pid, tuple(f"s{i}" for i in range(start, start + length))))
        for k in range(int(rng.integers(1, 3))):
            ods.append(ODPair(f"od{j}_{k}", pid, float(rng.uniform(20.0, 200.0))))

    snapshot = build_snapshot(segments, paths, ods)
    coefficients = segment_demand_coefficients(snapshot)
    x_ref = float(rng.uniform(*x_ref_range))
    peak = max(
        coefficients[s.id] / s.lanes for s in segments if coefficients[s.id] > 0
    )
    params = ModelParams(
        kappa=peak_ratio / (x_ref * peak),
        k_jam=100.0,
        alpha1=float(rng.uniform(*alpha_range)),
        alpha2=float(rng.uniform(*alpha_range)),
        x_lower=1.0,
        x_upper=100.0,
    )
    return snapshot, params, x_ref


def ground_truth_at(snapshot: NetworkSnapshot, params: ModelParams,
                    x0: float, rng: np.random.Generator | None = None,
                    noise_frac: float = 0.0) -> GroundTruth:
    """Ground truth generated by the model itself at x0, seconds."""
    coefficients = segment_demand_coefficients(snapshot)
    state = load_network(snapshot, params, coefficients, x0)
    times = {}
    for pid, t in state.t.items():
        tt = t * SECONDS_PER_HOUR
        if noise_frac > 0.0:
            tt = max(tt * (1.0 + noise_frac * float(rng.standard_normal())), 1e-3)
        times[pid] = tt
    return GroundTruth(travel_times=times)
