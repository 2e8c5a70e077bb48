"""Random scenario generation for tests and benchmarks.

The generator builds linear mainline corridors with ramps at every
segment boundary; each OD pair travels one contiguous ramp-to-ramp run
of a corridor. Ground-truth travel times come from the flow model
itself, evaluated at a known true scaling factor and optionally
perturbed by multiplicative Gaussian noise, so estimation quality on a
generated scenario is measurable against the factor that produced it.

kappa is not free: it is chosen so the busiest segment reaches 90% of
jam density at the true factor, keeping the optimum interior and the
model sensitive to x around it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from . import io as scenario_io
from .errors import InfeasibleSpec
from .estimate import EstimateOptions
from .flow import ModelParams, load_network
from .network import ODPair, Path, Segment, build_snapshot, segment_demand_coefficients

SCHEMA_VERSION = 1

_TARGET_PEAK_DENSITY_RATIO = 0.9


@dataclass(frozen=True)
class SyntheticSpec:
    """Knobs for one generated scenario."""

    segment_count: int
    od_count: int
    path_len_range: tuple[int, int]
    true_x: float
    noise_std_fraction: float
    rng_seed: int
    demand_range: tuple[float, float] = (20.0, 200.0)
    x_lower: float = 1.0
    x_upper: float = 100.0
    sensor_count: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.path_len_range
        if self.segment_count < 1:
            raise InfeasibleSpec(f"segment_count = {self.segment_count}")
        if self.od_count < 1:
            raise InfeasibleSpec(f"od_count = {self.od_count}")
        if not (1 <= lo <= hi):
            raise InfeasibleSpec(f"path length range [{lo}, {hi}]")
        if hi > self.segment_count:
            raise InfeasibleSpec(
                f"path length range [{lo}, {hi}] exceeds "
                f"{self.segment_count} segments"
            )
        if not (self.x_lower <= self.true_x <= self.x_upper):
            raise InfeasibleSpec(
                f"true_x = {self.true_x} outside bounds "
                f"[{self.x_lower}, {self.x_upper}]"
            )
        if self.noise_std_fraction < 0:
            raise InfeasibleSpec(
                f"noise_std_fraction = {self.noise_std_fraction}"
            )
        dlo, dhi = self.demand_range
        if not (0 < dlo <= dhi):
            raise InfeasibleSpec(f"demand range [{dlo}, {dhi}]")
        if not (0 <= self.sensor_count <= self.segment_count):
            raise InfeasibleSpec(f"sensor_count = {self.sensor_count}")


def _corridors(segment_ids: list[str], max_path_len: int) -> list[list[str]]:
    """Split the segment list into up to 4 equally sized mainlines.

    Every corridor must fit the longest allowed path.
    """
    n = len(segment_ids)
    n_corr = max(1, min(4, n // max(1, 2 * max_path_len)))
    size = n // n_corr
    corridors = []
    for i in range(n_corr):
        start = i * size
        end = n if i == n_corr - 1 else (i + 1) * size
        corridors.append(segment_ids[start:end])
    return corridors


def generate_synthetic(spec: SyntheticSpec, out_dir: FsPath,
                       hour: str = "h00") -> scenario_io.ScenarioBundle:
    """Write one scenario under out_dir and return its bundle.

    Fixed seed and spec give byte-identical files.
    """
    rng = np.random.default_rng(spec.rng_seed)
    out_dir = FsPath(out_dir)

    width = max(3, len(str(spec.segment_count - 1)))
    seg_ids = [f"s{i:0{width}d}" for i in range(spec.segment_count)]
    lengths = rng.uniform(0.5, 3.0, spec.segment_count)
    lanes = rng.integers(2, 6, spec.segment_count)
    v_max = rng.uniform(90.0, 120.0, spec.segment_count)
    v_min = rng.uniform(20.0, 40.0, spec.segment_count)
    segments = [
        Segment(id=sid, length_km=float(lengths[i]), lanes=int(lanes[i]),
                v_max_kmh=float(v_max[i]), v_min_kmh=float(v_min[i]))
        for i, sid in enumerate(seg_ids)
    ]

    corridors = _corridors(seg_ids, spec.path_len_range[1])
    pwidth = max(2, len(str(spec.od_count - 1)))
    paths = []
    od_pairs = []
    for j in range(spec.od_count):
        corridor = corridors[int(rng.integers(0, len(corridors)))]
        max_len = min(spec.path_len_range[1], len(corridor))
        min_len = min(spec.path_len_range[0], max_len)
        length = int(rng.integers(min_len, max_len + 1))
        start = int(rng.integers(0, len(corridor) - length + 1))
        pid = f"p{j:0{pwidth}d}"
        paths.append(Path(id=pid, segment_ids=tuple(corridor[start:start + length])))
        demand = float(rng.uniform(*spec.demand_range))
        od_pairs.append(ODPair(id=f"od{j:0{pwidth}d}", path_id=pid,
                               subsample_demand_vph=demand))

    snapshot = build_snapshot(segments, paths, od_pairs)
    coefficients = segment_demand_coefficients(snapshot)

    # pin the busiest segment at 90% jam density when x = true_x; the
    # density ratio is kappa*x*c/n, so k_jam drops out of the choice
    k_jam = 100.0
    peak = max(
        coefficients[s.id] / s.lanes for s in segments if coefficients[s.id] > 0
    )
    kappa = _TARGET_PEAK_DENSITY_RATIO / (spec.true_x * peak)
    params = ModelParams(kappa=kappa, k_jam=k_jam,
                         x_lower=spec.x_lower, x_upper=spec.x_upper)

    state = load_network(snapshot, params, coefficients, spec.true_x)
    times_s = {}
    for pid in (p.id for p in paths):
        tt = state.t[pid] * 3600.0
        if spec.noise_std_fraction > 0:
            tt *= 1.0 + spec.noise_std_fraction * float(rng.standard_normal())
            tt = max(tt, 1e-3)  # noise must not push a time to or below zero
        times_s[pid] = tt

    hour_dir = out_dir / scenario_io.HOURS_DIR / hour
    scenario_io.write_segments(out_dir / scenario_io.SEGMENTS_FILE, segments)
    scenario_io.write_paths(out_dir / scenario_io.PATHS_FILE, paths)
    options = EstimateOptions()
    scenario_io.write_config(out_dir / scenario_io.CONFIG_FILE, params, options)
    scenario_io.write_od(hour_dir / scenario_io.OD_FILE, od_pairs)
    scenario_io.write_ground_truth(hour_dir / scenario_io.GT_FILE, times_s)

    sensors_path = None
    if spec.sensor_count > 0:
        chosen = rng.choice(spec.segment_count, size=spec.sensor_count,
                            replace=False)
        counts = {}
        for idx in sorted(int(i) for i in chosen):
            sid = seg_ids[idx]
            q = snapshot.segments[sid].lanes * state.k[sid] * state.v[sid]
            if spec.noise_std_fraction > 0:
                q *= 1.0 + spec.noise_std_fraction * float(rng.standard_normal())
                q = max(q, 0.0)
            counts[sid] = q
        sensors_path = hour_dir / scenario_io.SENSORS_FILE
        scenario_io.write_sensors(sensors_path, counts)

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": spec.rng_seed,
        "true_x": spec.true_x,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )

    return scenario_io.ScenarioBundle(
        segments_path=out_dir / scenario_io.SEGMENTS_FILE,
        paths_path=out_dir / scenario_io.PATHS_FILE,
        od_path=hour_dir / scenario_io.OD_FILE,
        gt_path=hour_dir / scenario_io.GT_FILE,
        params=params, options=options, hour=hour,
        sensors_path=sensors_path,
    )
