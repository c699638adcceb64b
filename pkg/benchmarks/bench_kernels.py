"""Compare the compiled and NumPy kernel backends on the fused objective kernel.

Usage: python3 benchmarks/bench_kernels.py [--realizations N] [--years M] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from resopt import _kernels_py, fixtures, kernels
from resopt.reservoir import ReservoirConfig
from resopt.synthgen import GenConfig, fit, generate
from resopt.thresholds import flood_threshold, percent_of_maf


def _args(cfg: ReservoirConfig, ens):
    st, hd = cfg.tables()
    cyc = ens.template().cycle_index()
    return (ens.flows, cyc, cfg.mef.values, cfg.demand, cfg.flood.cycle(), 0.5 * cfg.live_capacity,
            cfg.live_capacity, cfg.hp_release_cap, cfg.ns_denominator, np.array([0.6]),
            np.array([0.3]), True, st, hd, cfg.efficiency, cfg.specific_weight,
            cfg.hp_power_cap, 0.0, 0.0, False)


def _time(fn, args, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--realizations", type=int, default=100)
    ap.add_argument("--years", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--hv-points", type=int, default=100)
    ap.add_argument("--hv-samples", type=int, default=200_000)
    a = ap.parse_args()

    hist = fixtures.ns_like_inflow()
    ens = generate(fit(hist), GenConfig(seed=1, realizations=a.realizations, years=a.years))
    cfg = ReservoirConfig(mef=percent_of_maf(hist, 0.3), flood=flood_threshold(fixtures.ns_like_releases(hist)),
                          demand=fixtures.ns_like_demand(),
                          elevation_storage=fixtures.NS_LIKE_HEAD_CURVE).with_max_inflow(ens.flows)
    args = _args(cfg, ens)
    steps = ens.flows.size
    available = kernels.backends()
    print(f"objective kernel: {a.realizations} realizations x {ens.steps} days ({steps:,} steps)")
    results = {}
    for name, mod in available.items():
        dt = _time(mod.objective_sums, args, a.repeat)
        results[name] = dt
        print(f"  {name:8s} {dt * 1e3:9.2f} ms  {dt / steps * 1e9:7.2f} ns/step")
    if "cython" in results:
        ref = _kernels_py.objective_sums(*args)
        got = available["cython"].objective_sums(*args)
        print(f"  speedup {results['python'] / results['cython']:.1f}x, "
              f"max rel diff {np.max(np.abs(got - ref) / np.maximum(np.abs(ref), 1e-12)):.2e}")

    rng = np.random.default_rng(0)
    pts = rng.random((a.hv_points, 4))
    samples = rng.random((a.hv_samples, 4))
    print(f"dominance count: {a.hv_points} points x {a.hv_samples:,} samples")
    for name, mod in available.items():
        dt = _time(mod.dominated_count, (pts, samples, 1), a.repeat)
        print(f"  {name:8s} {dt * 1e3:9.2f} ms")


if __name__ == "__main__":
    main()
