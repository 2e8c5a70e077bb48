"""Compare the compiled and pure-python kernel backends.

Times the hot operations (single objective/derivative evaluation and a
grid sweep) on a large synthetic instance and prints a table with the
speedup. Run after installing the package:

    python benchmarks/kernel_benchmark.py [--segments N] [--ods N]
"""

from __future__ import annotations

import argparse
import statistics
import sys
import tempfile
import time

import numpy as np


def _load_backends():
    backends = {}
    from odscale import _fdcore_py

    backends["python"] = _fdcore_py
    try:
        from odscale import _fdcore

        backends["compiled"] = _fdcore
    except ImportError:
        pass
    return backends


def _build_instance(n_segments: int, n_ods: int, seed: int):
    from odscale.estimate import _Objective
    from odscale.io import parse_scenario
    from odscale.synthetic import SyntheticSpec, generate_synthetic

    spec = SyntheticSpec(
        segment_count=n_segments, od_count=n_ods,
        path_len_range=(3, 12), true_x=9.0,
        noise_std_fraction=0.05, rng_seed=seed,
    )
    with tempfile.TemporaryDirectory() as tmp:
        bundle = generate_synthetic(spec, tmp)
        snapshot, params, gt = parse_scenario(bundle)
    return _Objective(snapshot, params, gt)


def _time(fn, repeats: int = 7) -> float:
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--segments", type=int, default=16000)
    parser.add_argument("--ods", type=int, default=1800)
    parser.add_argument("--grid-points", type=int, default=20000)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    backends = _load_backends()
    if "compiled" not in backends:
        print("compiled backend not available; benchmarking python only")

    obj = _build_instance(args.segments, args.ods, args.seed)
    a, p = obj.arrays, obj.params
    xs = np.linspace(p.x_lower, p.x_upper, args.grid_points)
    kernel_args = (
        a.c, a.lanes, a.length, a.v_min, a.v_max,
        p.k_jam, p.kappa, p.alpha1, p.alpha2,
        obj.sub_indptr, obj.sub_segidx, obj.gt_hours, obj.weights,
    )

    print(f"instance: {args.segments} segments, {args.ods} ODs, "
          f"{args.grid_points}-point grid")
    results: dict[str, dict[str, float]] = {}
    for name, mod in backends.items():
        single = _time(lambda: mod.objective_with_grad(5.0, *kernel_args))
        batch = _time(lambda: mod.objective_batch(xs, *kernel_args), repeats=3)
        results[name] = {"objective_with_grad": single,
                         "objective_batch": batch}

    header = f"{'operation':<22}" + "".join(f"{n:>14}" for n in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op in ("objective_with_grad", "objective_batch"):
        line = f"{op:<22}"
        for name in results:
            line += f"{results[name][op] * 1e3:>12.3f}ms"
        if len(results) == 2:
            ratio = results["python"][op] / results["compiled"][op]
            line += f"{ratio:>9.1f}x"
        print(line)

    if len(results) == 2:
        f1, g1 = backends["python"].objective_with_grad(5.0, *kernel_args)
        f2, g2 = backends["compiled"].objective_with_grad(5.0, *kernel_args)
        rel = abs(f1 - f2) / max(abs(f1), 1e-300)
        print(f"backend agreement: |Δf|/f = {rel:.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
