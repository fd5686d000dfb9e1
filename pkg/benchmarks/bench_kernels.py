"""Benchmark the JIT-compiled grid kernels against the pure-numpy fallback.

Runs itself twice in subprocesses -- once with numba enabled, once with
ROBUSTLRT_NO_NUMBA=1 -- times the two hot kernels and a full threshold
solve on each backend, and prints a comparison table.

    python3 benchmarks/bench_kernels.py            # compare both backends
    python3 benchmarks/bench_kernels.py --child    # (internal) time one
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time


def _time(fn, repeats: int = 7) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def child() -> None:
    import numpy as np

    from robustlrt import density, kernels
    from robustlrt.divergence import DivergenceSpec
    from robustlrt.lfd_solver import solve_thresholds

    backend = "numpy" if kernels._region_masses_nb is None else "numba"

    noise = density.gaussian_mixture([(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)])
    nominals = (noise, density.shifted(noise, 1.0))
    spec = DivergenceSpec(alpha=4.0, rho=1.0, eps0=0.02, eps1=0.03)

    results = {"backend": backend}
    for n in (4001, 40001):
        grid = density.make_grid(-8.0, 9.0, n)
        f0 = density.evaluate(nominals[0], grid.points)
        f1 = density.evaluate(nominals[1], grid.points)
        l = density.ratio_values(f0, f1)
        # warm-up triggers JIT compilation so timings measure steady state
        kernels.region_masses(l, f0, f1, grid.points, 0.6, 1.6)
        kernels.i2_power_integrals(l, f0, f1, grid.points, 0.6, 1.6,
                                   1.0, 3.0, 4.0, 0.2, 0.2, 4.2)
        results[f"region_masses_n{n}"] = _time(
            lambda: kernels.region_masses(l, f0, f1, grid.points, 0.6, 1.6))
        results[f"i2_power_n{n}"] = _time(
            lambda: kernels.i2_power_integrals(l, f0, f1, grid.points, 0.6, 1.6,
                                               1.0, 3.0, 4.0, 0.2, 0.2, 4.2))
    grid = density.make_grid(-8.0, 9.0, 4001)
    solve_thresholds(spec, nominals, grid)  # warm-up
    results["solve_n4001"] = _time(
        lambda: solve_thresholds(spec, nominals, grid), repeats=3)
    print(json.dumps(results))


def main() -> None:
    if "--child" in sys.argv:
        child()
        return
    here = os.path.abspath(__file__)
    runs = {}
    for label, env_extra in (("numba", {}), ("numpy", {"ROBUSTLRT_NO_NUMBA": "1"})):
        env = dict(os.environ, **env_extra)
        out = subprocess.run([sys.executable, here, "--child"], env=env,
                             capture_output=True, text=True, check=True)
        runs[label] = json.loads(out.stdout.strip().splitlines()[-1])
        assert runs[label]["backend"] == label, runs[label]
    keys = [k for k in runs["numba"] if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for k in keys:
        tn, tp = runs["numba"][k], runs["numpy"][k]
        print(f"{k:<{width}}  {tn * 1e3:>8.3f}ms  {tp * 1e3:>8.3f}ms  {tp / tn:>7.1f}x")


if __name__ == "__main__":
    main()
