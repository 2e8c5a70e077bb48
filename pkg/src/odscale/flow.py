"""Analytical macroscopic network model.

Given a demand scaling factor x, maps segment demand coefficients through
a linear loading step, a linear demand-to-density step and a nonlinear
fundamental diagram to segment speeds, then sums segment travel times
along each path. The exact derivative of every path travel time with
respect to x is computed alongside.

All lengths are km, speeds km/h, densities veh/km/lane, demands veh/h.
Travel times are held in hours internally; interfaces that face files or
reports use seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels
from .errors import InvalidParams, NonFiniteResult, XOutOfBounds
from .network import NetworkSnapshot

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class ModelParams:
    """Fundamental-diagram and scaling constants shared by all segments.

    ``kappa`` converts segment demand to per-lane density (k_i =
    kappa * k_jam * lam_i / n_i) and is scenario-specific with no
    meaningful default. A single jam density and a single pair of power
    coefficients apply network-wide. ``alpha1``/``alpha2`` must be >= 1 so
    the speed derivative stays finite at the empty and jammed ends of the
    density range.
    """

    kappa: float
    k_jam: float = 100.0
    alpha1: float = 2.0
    alpha2: float = 2.0
    x_lower: float = 1.0
    x_upper: float = 100.0

    def __post_init__(self) -> None:
        if not (self.k_jam > 0 and np.isfinite(self.k_jam)):
            raise InvalidParams(f"k_jam must be positive, got {self.k_jam}")
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise InvalidParams(f"kappa must be positive, got {self.kappa}")
        if not (self.alpha1 >= 1 and np.isfinite(self.alpha1)):
            raise InvalidParams(f"alpha1 must be >= 1, got {self.alpha1}")
        if not (self.alpha2 >= 1 and np.isfinite(self.alpha2)):
            raise InvalidParams(f"alpha2 must be >= 1, got {self.alpha2}")
        if not (0 <= self.x_lower < self.x_upper):
            raise InvalidParams(
                f"bounds must satisfy 0 <= x_lower < x_upper, got "
                f"[{self.x_lower}, {self.x_upper}]"
            )


@dataclass(frozen=True)
class FlowState:
    """Model quantities at one scaling factor.

    Mappings are keyed by segment id (lam, k, v) and path id (t, dt_dx);
    travel times t and their derivatives dt_dx are in hours.
    """

    x: float
    lam: Mapping[str, float]
    k: Mapping[str, float]
    v: Mapping[str, float]
    t: Mapping[str, float]
    dt_dx: Mapping[str, float]


@dataclass(frozen=True)
class ModelArrays:
    """Snapshot compiled to flat arrays for the kernels.

    Paths are stored CSR-style: ``segidx[indptr[p]:indptr[p+1]]`` are the
    segment indices of path number p. Built once and reused across the
    many evaluations an estimation run performs.
    """

    seg_ids: tuple[str, ...]
    path_ids: tuple[str, ...]
    c: np.ndarray
    lanes: np.ndarray
    length: np.ndarray
    v_min: np.ndarray
    v_max: np.ndarray
    indptr: np.ndarray
    segidx: np.ndarray
    path_pos: dict[str, int] = field(repr=False)


def build_model_arrays(
    snapshot: NetworkSnapshot, coefficients: Mapping[str, float]
) -> ModelArrays:
    """Flatten a snapshot plus demand coefficients into kernel arrays."""
    seg_ids = tuple(snapshot.segments)
    seg_pos = {sid: i for i, sid in enumerate(seg_ids)}
    segs = [snapshot.segments[sid] for sid in seg_ids]

    path_ids = tuple(snapshot.paths)
    indptr = np.zeros(len(path_ids) + 1, dtype=np.int64)
    segidx_parts = []
    for i, pid in enumerate(path_ids):
        members = snapshot.paths[pid].segment_ids
        indptr[i + 1] = indptr[i] + len(members)
        segidx_parts.extend(seg_pos[sid] for sid in members)

    return ModelArrays(
        seg_ids=seg_ids,
        path_ids=path_ids,
        c=np.array([coefficients.get(sid, 0.0) for sid in seg_ids]),
        lanes=np.array([float(s.lanes) for s in segs]),
        length=np.array([s.length_km for s in segs]),
        v_min=np.array([s.v_min_kmh for s in segs]),
        v_max=np.array([s.v_max_kmh for s in segs]),
        indptr=indptr,
        segidx=np.array(segidx_parts, dtype=np.int64),
        path_pos={pid: i for i, pid in enumerate(path_ids)},
    )


def _check_bounds(params: ModelParams, x: float) -> None:
    if not (params.x_lower <= x <= params.x_upper):
        raise XOutOfBounds(
            f"x = {x} outside [{params.x_lower}, {params.x_upper}]"
        )


def _segment_state(arrays: ModelArrays, params: ModelParams, x: float):
    return kernels.segment_state(
        arrays.c, arrays.lanes, arrays.v_min, arrays.v_max,
        params.k_jam, params.kappa, params.alpha1, params.alpha2, x,
    )


def _path_times(arrays: ModelArrays, v: np.ndarray) -> np.ndarray:
    return kernels.path_sums(arrays.length / v, arrays.indptr, arrays.segidx)


def _path_time_grads(arrays: ModelArrays, params: ModelParams, x: float) -> np.ndarray:
    seg_grads = kernels.segment_time_grads(
        arrays.c, arrays.lanes, arrays.length, arrays.v_min, arrays.v_max,
        params.k_jam, params.kappa, params.alpha1, params.alpha2, x,
    )
    return kernels.path_sums(seg_grads, arrays.indptr, arrays.segidx)


def load_network(
    snapshot: NetworkSnapshot,
    params: ModelParams,
    coefficients: Mapping[str, float],
    x: float,
) -> FlowState:
    """Evaluate the full network model at scaling factor x.

    Raises XOutOfBounds if x violates the configured bounds and
    NonFiniteResult if any produced quantity is NaN or infinite.
    """
    _check_bounds(params, x)
    arrays = build_model_arrays(snapshot, coefficients)
    lam, k, v = _segment_state(arrays, params, x)
    t = _path_times(arrays, v)
    dt = _path_time_grads(arrays, params, x)
    for name, values in (("lambda", lam), ("density", k), ("speed", v),
                         ("travel time", t), ("travel time derivative", dt)):
        if not np.all(np.isfinite(values)):
            raise NonFiniteResult(f"non-finite {name} at x = {x}")
    return FlowState(
        x=x,
        lam=dict(zip(arrays.seg_ids, lam.tolist())),
        k=dict(zip(arrays.seg_ids, k.tolist())),
        v=dict(zip(arrays.seg_ids, v.tolist())),
        t=dict(zip(arrays.path_ids, t.tolist())),
        dt_dx=dict(zip(arrays.path_ids, dt.tolist())),
    )


def travel_time_derivative(
    snapshot: NetworkSnapshot,
    params: ModelParams,
    coefficients: Mapping[str, float],
    x: float,
) -> dict[str, float]:
    """Exact dt_p/dx for every path, in hours per unit scaling factor."""
    _check_bounds(params, x)
    arrays = build_model_arrays(snapshot, coefficients)
    dt = _path_time_grads(arrays, params, x)
    if not np.all(np.isfinite(dt)):
        raise NonFiniteResult(f"non-finite travel time derivative at x = {x}")
    return dict(zip(arrays.path_ids, dt.tolist()))


def segment_counts(state: FlowState, snapshot: NetworkSnapshot) -> dict[str, float]:
    """Model-implied hourly counts q_i = n_i * k_i * v_i per segment."""
    return {
        sid: seg.lanes * state.k[sid] * state.v[sid]
        for sid, seg in snapshot.segments.items()
    }
