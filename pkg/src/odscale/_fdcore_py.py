"""Pure-numpy implementation of the fundamental-diagram kernels.

Mirrors the compiled extension ``odscale._fdcore`` function for function;
the selector in :mod:`odscale.kernels` picks whichever is available. All
inputs are contiguous float64/int64 arrays; travel times are in hours.

Clamping rules: the density ratio r = k/k_jam is clamped to [0, 1] (the
speed sits on the v_min plateau beyond jam density) and the speed response
is clipped into [0, 1] so that v never leaves [v_min, v_max] even under
floating-point rounding of the power functions.
"""

from __future__ import annotations

import numpy as np

# rows-per-chunk budget for batched grid evaluation, ~32 MB of float64
_CHUNK_CELLS = 4_000_000


def segment_state(c, lanes, v_min, v_max, k_jam, kappa, a1, a2, x):
    """Segment demand, per-lane density and speed at scaling factor x.

    Returns (lam, k, v): lam_i = x*c_i [veh/h], k_i = kappa*k_jam*lam_i/n_i
    [veh/km/lane], v_i from the fundamental diagram [km/h].
    """
    lam = x * c
    k = kappa * k_jam * lam / lanes
    r = np.minimum(k / k_jam, 1.0)
    resp = np.clip(1.0 - np.power(r, a1), 0.0, 1.0)
    v = v_min + (v_max - v_min) * np.clip(np.power(resp, a2), 0.0, 1.0)
    v = np.clip(v, v_min, v_max)
    return lam, k, v


def segment_time_grads(c, lanes, length, v_min, v_max, k_jam, kappa, a1, a2, x):
    """d(l_i / v_i)/dx per segment, in hours per unit scaling factor.

    Zero wherever the density ratio is clamped (r >= 1); elsewhere
    (l/v^2) * (v_max-v_min) * a1*a2 * r^(a1-1) * (1-r^a1)^(a2-1) * kappa*c/n.
    """
    _, _, v = segment_state(c, lanes, v_min, v_max, k_jam, kappa, a1, a2, x)
    r = np.minimum(kappa * x * c / lanes, 1.0)
    u = np.clip(1.0 - np.power(r, a1), 0.0, 1.0)
    interior = r < 1.0
    grads = np.zeros_like(c)
    if np.any(interior):
        ri = r[interior]
        ui = u[interior]
        grads[interior] = (
            (length[interior] / (v[interior] * v[interior]))
            * (v_max[interior] - v_min[interior])
            * a1 * a2
            * np.power(ri, a1 - 1.0)
            * np.power(ui, a2 - 1.0)
            * kappa * c[interior] / lanes[interior]
        )
    return grads


def path_sums(values, indptr, segidx):
    """Sum per-segment values along each path (CSR layout)."""
    gathered = values[segidx]
    if len(indptr) == 1:
        return np.zeros(0)
    return np.add.reduceat(gathered, indptr[:-1])


def objective_with_grad(x, c, lanes, length, v_min, v_max, k_jam, kappa,
                        a1, a2, indptr, segidx, gt_hours, weights):
    """Mean weighted squared travel-time error and its x-derivative.

    f(x)  = (1/|P|) sum_p w_p (gt_p - t_p(x))^2        [h^2]
    f'(x) = (2/|P|) sum_p w_p (t_p(x) - gt_p) t_p'(x)  [h^2 per unit x]
    """
    _, _, v = segment_state(c, lanes, v_min, v_max, k_jam, kappa, a1, a2, x)
    t = path_sums(length / v, indptr, segidx)
    g = path_sums(
        segment_time_grads(c, lanes, length, v_min, v_max, k_jam, kappa, a1, a2, x),
        indptr, segidx,
    )
    resid = t - gt_hours
    n = len(gt_hours)
    f = float(np.sum(weights * resid * resid) / n)
    fp = float(2.0 * np.sum(weights * resid * g) / n)
    return f, fp


def objective_batch(xs, c, lanes, length, v_min, v_max, k_jam, kappa,
                    a1, a2, indptr, segidx, gt_hours, weights):
    """Objective values for a whole array of scaling factors.

    Vectorized over chunks of xs to bound peak memory; used by the
    grid-search benchmark oracle.
    """
    xs = np.asarray(xs, dtype=np.float64)
    out = np.empty(len(xs))
    n_paths = len(gt_hours)
    cells = max(len(segidx) + len(c), 1)
    chunk = max(1, _CHUNK_CELLS // cells)
    dv = v_max - v_min
    cn = kappa * c / lanes
    for start in range(0, len(xs), chunk):
        xc = xs[start:start + chunk]
        r = np.minimum(np.outer(xc, cn), 1.0)
        resp = np.clip(1.0 - np.power(r, a1), 0.0, 1.0)
        v = v_min + dv * np.clip(np.power(resp, a2), 0.0, 1.0)
        np.clip(v, v_min, v_max, out=v)
        seg_t = length / v
        t = np.add.reduceat(seg_t[:, segidx], indptr[:-1], axis=1)
        resid = t - gt_hours
        out[start:start + chunk] = resid * resid @ weights / n_paths
    return out
