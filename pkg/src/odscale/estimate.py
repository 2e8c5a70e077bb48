"""Scaling-factor estimation.

Minimizes the mean weighted squared error between model path travel times
and ground-truth travel times over the scalar upscaling factor x, within
bounds. The objective derivative is exact (no finite differences inside
the optimizer). A fine-grid search is provided as the benchmark oracle.

The optimizer is deliberately simple and deterministic: golden-section
bracketing from several equally spaced seeds, followed by a safeguarded
secant polish on the derivative, returning the best point ever evaluated.
Ties on the objective break toward smaller x, the conservative demand
estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import kernels
from .errors import (
    EmptyGrid,
    EmptyGroundTruth,
    NonFiniteResult,
    UnknownPath,
    XOutOfBounds,
)
from .flow import (
    SECONDS_PER_HOUR,
    ModelArrays,
    ModelParams,
    build_model_arrays,
)
from .network import NetworkSnapshot, ODPair, segment_demand_coefficients

_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # golden-section interior ratio


@dataclass(frozen=True)
class GroundTruth:
    """Observed per-path travel times (seconds) and error-term weights.

    Weights default to 1 for any path not listed. ``sensor_counts`` holds
    optional per-segment hourly counts used exclusively for validation;
    estimation never reads them.
    """

    travel_times: Mapping[str, float]
    weights: Mapping[str, float] = field(default_factory=dict)
    sensor_counts: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        for pid, tt in self.travel_times.items():
            if not tt > 0:
                raise ValueError(f"travel time for path {pid!r} must be > 0")
        for pid, w in self.weights.items():
            if w < 0:
                raise ValueError(f"weight for path {pid!r} must be >= 0")

    def weight_of(self, path_id: str) -> float:
        return self.weights.get(path_id, 1.0)


@dataclass(frozen=True)
class EstimateOptions:
    """Optimizer tolerances and iteration caps.

    ``tol_x`` defaults to 1e-8 of the bound interval width; the iteration
    cap applies per start.
    """

    n_starts: int = 8
    max_iterations: int = 200
    tol_g: float = 1e-10
    tol_f: float = 1e-12
    tol_x: float | None = None


@dataclass(frozen=True)
class GridSpec:
    """Grid definition: bounds plus either a point count or a step size.

    Bounds default to the model's [x_lower, x_upper].
    """

    x_lower: float | None = None
    x_upper: float | None = None
    num_points: int | None = None
    step: float | None = None

    def resolve(self, params: ModelParams) -> np.ndarray:
        lo = params.x_lower if self.x_lower is None else self.x_lower
        hi = params.x_upper if self.x_upper is None else self.x_upper
        if lo < 0 or hi < lo:
            raise EmptyGrid(f"invalid grid bounds [{lo}, {hi}]")
        if self.num_points is not None:
            if self.num_points < 1:
                raise EmptyGrid(f"num_points = {self.num_points}")
            return np.linspace(lo, hi, self.num_points)
        if self.step is not None:
            if self.step <= 0:
                raise EmptyGrid(f"step = {self.step}")
            n = int(math.floor((hi - lo) / self.step + 1e-9)) + 1
            return lo + self.step * np.arange(n)
        raise EmptyGrid("grid spec defines neither step nor point count")


@dataclass(frozen=True)
class EstimationResult:
    """Optimal scaling factor with the quantities derived from it.

    ``objective_value`` is in hours squared; predicted travel times are
    reported in seconds. ``trace`` records every (x, f, f') evaluation the
    optimizer performed, in order.
    """

    x_star: float
    objective_value: float
    iterations: int
    converged: bool
    upscaled_od: dict[str, float]
    predicted_travel_times: dict[str, float]
    predicted_counts: dict[str, float]
    trace: tuple[tuple[float, float, float], ...]


class _Objective:
    """Objective/derivative evaluator bound to one problem instance."""

    def __init__(self, snapshot: NetworkSnapshot, params: ModelParams,
                 gt: GroundTruth):
        if not gt.travel_times:
            raise EmptyGroundTruth("ground truth defines no paths")
        for pid in gt.travel_times:
            if pid not in snapshot.paths:
                raise UnknownPath(f"ground-truth path {pid!r} not in network")
        self.params = params
        self.coefficients = segment_demand_coefficients(snapshot)
        self.arrays = build_model_arrays(snapshot, self.coefficients)

        gt_ids = tuple(gt.travel_times)
        weights = np.array([gt.weight_of(pid) for pid in gt_ids])
        if not np.any(weights > 0):
            raise EmptyGroundTruth("all ground-truth weights are zero")
        rows = [self.arrays.path_pos[pid] for pid in gt_ids]
        indptr, segidx = self.arrays.indptr, self.arrays.segidx
        counts = [int(indptr[r + 1] - indptr[r]) for r in rows]
        self.sub_indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.sub_indptr[1:])
        self.sub_segidx = (
            np.concatenate([segidx[indptr[r]:indptr[r + 1]] for r in rows])
            if rows else np.zeros(0, dtype=np.int64)
        )
        self.gt_hours = (
            np.array([gt.travel_times[pid] for pid in gt_ids]) / SECONDS_PER_HOUR
        )
        self.weights = weights
        self.trace: list[tuple[float, float, float]] = []

    def __call__(self, x: float) -> tuple[float, float]:
        a, p = self.arrays, self.params
        f, fp = kernels.objective_with_grad(
            x, a.c, a.lanes, a.length, a.v_min, a.v_max,
            p.k_jam, p.kappa, p.alpha1, p.alpha2,
            self.sub_indptr, self.sub_segidx, self.gt_hours, self.weights,
        )
        if not (math.isfinite(f) and math.isfinite(fp)):
            raise NonFiniteResult(f"objective non-finite at x = {x}")
        self.trace.append((x, f, fp))
        return f, fp

    def batch(self, xs: np.ndarray) -> np.ndarray:
        a, p = self.arrays, self.params
        values = kernels.objective_batch(
            xs, a.c, a.lanes, a.length, a.v_min, a.v_max,
            p.k_jam, p.kappa, p.alpha1, p.alpha2,
            self.sub_indptr, self.sub_segidx, self.gt_hours, self.weights,
        )
        if not np.all(np.isfinite(values)):
            raise NonFiniteResult("objective non-finite on grid")
        return values

    def path_times_hours(self, x: float) -> np.ndarray:
        """Travel times of all network paths at x (hours)."""
        a, p = self.arrays, self.params
        _, _, v = kernels.segment_state(
            a.c, a.lanes, a.v_min, a.v_max,
            p.k_jam, p.kappa, p.alpha1, p.alpha2, x,
        )
        return kernels.path_sums(a.length / v, a.indptr, a.segidx)

    def segment_counts(self, x: float) -> np.ndarray:
        """Model counts n*k*v for all segments at x (veh/h)."""
        a, p = self.arrays, self.params
        _, k, v = kernels.segment_state(
            a.c, a.lanes, a.v_min, a.v_max,
            p.k_jam, p.kappa, p.alpha1, p.alpha2, x,
        )
        return a.lanes * k * v


def objective(snapshot: NetworkSnapshot, params: ModelParams,
              gt: GroundTruth, x: float) -> tuple[float, float]:
    """Objective value (h^2) and exact derivative at one scaling factor."""
    if not (params.x_lower <= x <= params.x_upper):
        raise XOutOfBounds(f"x = {x} outside [{params.x_lower}, {params.x_upper}]")
    return _Objective(snapshot, params, gt)(x)


@dataclass
class _StartResult:
    x: float
    f: float
    g: float
    converged: bool


def _better(f1: float, x1: float, f2: float, x2: float) -> bool:
    """True when (f1, x1) beats (f2, x2): lower f, ties toward smaller x."""
    return f1 < f2 or (f1 == f2 and x1 < x2)


class _BestTracker:
    """Budgeted evaluator that remembers the best point it has seen."""

    def __init__(self, fun, max_evals: int):
        self._fun = fun
        self.remaining = max_evals
        self.x = math.nan
        self.f = math.inf
        self.g = math.nan

    def __call__(self, x: float) -> tuple[float, float]:
        self.remaining -= 1
        f, g = self._fun(x)
        if _better(f, x, self.f, self.x):
            self.x, self.f, self.g = x, f, g
        return f, g

    def result(self, converged: bool) -> _StartResult:
        return _StartResult(self.x, self.f, self.g, converged)


def _local_minimize(fun, lo: float, hi: float, x0: float, tol_x: float,
                    tol_g: float, tol_f: float, max_iter: int) -> _StartResult:
    """Descend from one seed; golden section plus secant polish on f'."""
    ev = _BestTracker(fun, max_iter)
    f0, g0 = ev(x0)
    if abs(g0) <= tol_g:
        return ev.result(True)

    # walk downhill with doubling steps until the objective turns upward
    direction = -1.0 if g0 > 0 else 1.0
    step = (hi - lo) / 64.0
    xs = [x0]
    fs = [f0]
    gs = [g0]
    bracket = None
    while ev.remaining > 0:
        xn = min(max(xs[-1] + direction * step, lo), hi)
        if xn == xs[-1]:
            # pinned against a bound while still pointing downhill: the
            # bound is the local optimum (projected gradient is zero)
            return ev.result(True)
        fn, gn = ev(xn)
        xs.append(xn)
        fs.append(fn)
        gs.append(gn)
        if fn > fs[-2] or gn * direction > 0:
            left = xs[-3] if len(xs) >= 3 else xs[-2]
            bracket = tuple(sorted((left, xs[-1])))
            break
        if xn == lo or xn == hi:
            return ev.result(abs(gn) <= tol_g)
        step *= 2.0
    if bracket is None:
        return ev.result(False)

    a, b = bracket
    ga, gb = None, None
    # interior golden triple (a, m, b); reuse the walk point when it is
    # strictly inside, otherwise probe fresh
    if a < xs[-2] < b:
        m, fm, gm = xs[-2], fs[-2], gs[-2]
    else:
        m = a + _INV_PHI2 * (b - a)
        fm, gm = ev(m)

    converged = False
    while ev.remaining > 0:
        if b - a <= tol_x or abs(gm) <= tol_g:
            converged = True
            break
        if (m - a) > (b - m):
            xp = m - _INV_PHI2 * (m - a)
        else:
            xp = m + _INV_PHI2 * (b - m)
        fp_, gp_ = ev(xp)
        if _better(fp_, xp, fm, m):
            if xp > m:
                a, ga = m, gm
            else:
                b, gb = m, gm
            f_prev, (m, fm, gm) = fm, (xp, fp_, gp_)
        else:
            if xp > m:
                b, gb = xp, gp_
            else:
                a, ga = xp, gp_
            f_prev = fm
        if abs(f_prev - fm) <= tol_f * (1.0 + abs(fm)) and b - a <= math.sqrt(tol_x):
            converged = True
            break

    return _polish(ev, a, ga, b, gb, m, gm, tol_g, converged)


def _polish(ev: _BestTracker, a: float, ga: float | None, b: float,
            gb: float | None, m: float, gm: float, tol_g: float,
            converged: bool) -> _StartResult:
    """Illinois secant on f' around the golden interval's best point.

    Runs only when a derivative sign change brackets a stationary point;
    otherwise the golden result stands.
    """
    if abs(gm) <= tol_g:
        return ev.result(True)
    if ev.remaining <= 2 or not (a < m < b):
        return ev.result(converged)
    if ga is None:
        _, ga = ev(a)
    if gb is None:
        _, gb = ev(b)
    if ga < 0.0 < gm or gm < 0.0 < ga:
        xa, va, xb, vb = a, ga, m, gm
    elif gm < 0.0 < gb or gb < 0.0 < gm:
        xa, va, xb, vb = m, gm, b, gb
    else:
        return ev.result(converged)
    if va > 0.0:  # orient so the derivative rises from xa to xb
        xa, xb, va, vb = xb, xa, vb, va
    side = 0
    while ev.remaining > 0:
        denom = vb - va
        if denom == 0.0:
            break
        x_new = xb - vb * (xb - xa) / denom
        if not (min(xa, xb) < x_new < max(xa, xb)):
            x_new = 0.5 * (xa + xb)
        _, g_new = ev(x_new)
        if abs(g_new) <= tol_g:
            return ev.result(True)
        if abs(xb - xa) <= abs(x_new) * 4e-16:
            break
        if g_new < 0.0:
            if side == -1:
                vb *= 0.5
            xa, va, side = x_new, g_new, -1
        else:
            if side == 1:
                va *= 0.5
            xb, vb, side = x_new, g_new, 1
    return ev.result(converged)


def estimate(snapshot: NetworkSnapshot, params: ModelParams, gt: GroundTruth,
             options: EstimateOptions | None = None) -> EstimationResult:
    """Find the scaling factor minimizing the travel-time error.

    Runs ``options.n_starts`` local searches from equally spaced seeds
    across [x_lower, x_upper] and returns the best point evaluated
    anywhere, with ties broken toward smaller x. When every start exhausts
    its iteration cap without meeting a tolerance the result is still
    returned with ``converged=False``.
    """
    opts = options or EstimateOptions()
    obj = _Objective(snapshot, params, gt)
    lo, hi = params.x_lower, params.x_upper
    tol_x = opts.tol_x if opts.tol_x is not None else 1e-8 * (hi - lo)

    seeds = np.linspace(lo, hi, opts.n_starts) if opts.n_starts > 1 else [0.5 * (lo + hi)]
    winner: _StartResult | None = None
    for seed in seeds:
        res = _local_minimize(obj, lo, hi, float(seed), tol_x,
                              opts.tol_g, opts.tol_f, opts.max_iterations)
        if winner is None or _better(res.f, res.x, winner.f, winner.x):
            winner = res
    assert winner is not None

    x_star, f_star, g_star = winner.x, winner.f, winner.g
    if lo < x_star < hi:
        projected_g = g_star
    elif x_star == lo:
        projected_g = min(g_star, 0.0)
    else:
        projected_g = max(g_star, 0.0)
    converged = winner.converged or abs(projected_g) <= opts.tol_g

    t_hours = obj.path_times_hours(x_star)
    counts = obj.segment_counts(x_star)
    arrays = obj.arrays
    return EstimationResult(
        x_star=x_star,
        objective_value=f_star,
        iterations=len(obj.trace),
        converged=converged,
        upscaled_od={
            oid: x_star * od.subsample_demand_vph
            for oid, od in snapshot.od_pairs.items()
        },
        predicted_travel_times=dict(
            zip(arrays.path_ids, (t_hours * SECONDS_PER_HOUR).tolist())
        ),
        predicted_counts=dict(zip(arrays.seg_ids, counts.tolist())),
        trace=tuple(obj.trace),
    )


def grid_search_benchmark(
    snapshot: NetworkSnapshot, params: ModelParams, gt: GroundTruth,
    grid_spec: GridSpec,
) -> tuple[float, list[tuple[float, float]]]:
    """Exhaustive objective evaluation on a grid; the benchmark oracle.

    Returns the argmin (ties toward smaller x) and the full (x, f) curve.
    """
    xs = grid_spec.resolve(params)
    if len(xs) == 0:
        raise EmptyGrid("grid resolved to no points")
    obj = _Objective(snapshot, params, gt)
    values = obj.batch(xs)
    x_bench = float(xs[int(np.argmin(values))])
    return x_bench, list(zip(xs.tolist(), values.tolist()))


def apply_scaling(
    od_pairs: Mapping[str, ODPair] | Iterable[ODPair], x: float
) -> dict[str, ODPair]:
    """Uniformly upscale every OD demand by x, preserving structure."""
    if x < 0:
        raise ValueError(f"scaling factor must be >= 0, got {x}")
    pairs = od_pairs.values() if isinstance(od_pairs, Mapping) else od_pairs
    return {
        od.id: ODPair(
            id=od.id, path_id=od.path_id,
            subsample_demand_vph=x * od.subsample_demand_vph,
        )
        for od in pairs
    }
