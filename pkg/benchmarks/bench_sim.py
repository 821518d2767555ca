"""Benchmark the compiled simulation kernel against the pure-Python fallback.

Both kernels consume the same random number stream and produce bit-identical
output, so this measures raw event-loop speed only.

Usage: python benchmarks/bench_sim.py [--horizon H] [--reps K]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from erlangr.sim import run_stationary_python
from erlangr.sim._kernel_py import HOLDING

try:
    from erlangr.sim import _kernel_cy

    COMPILED = _kernel_cy.run_stationary
except ImportError:
    COMPILED = None


def run(kernel, horizon: float, seed: int) -> tuple[float, float]:
    rng = np.random.Generator(np.random.Philox(seed))
    t0 = time.perf_counter()
    raw = kernel(HOLDING, 2.0, 1.0, 0.25, 0.75, 11, 37, horizon, 0.1 * horizon, rng)
    elapsed = time.perf_counter() - t0
    # Event count proxy: arrivals + departures + content cycles scale with horizon.
    events = raw["arrivals"] + raw["departed_all"]
    return elapsed, events


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=float, default=50_000.0)
    ap.add_argument("--reps", type=int, default=3)
    args = ap.parse_args()

    for name, kernel in (("python", run_stationary_python), ("compiled", COMPILED)):
        if kernel is None:
            print(f"{name:>9}: unavailable")
            continue
        best = min(run(kernel, args.horizon, 1 + i)[0] for i in range(args.reps))
        print(f"{name:>9}: {best:8.3f} s  (horizon {args.horizon:g}, best of {args.reps})")
    if COMPILED is not None:
        t_py = min(run(run_stationary_python, args.horizon, 1 + i)[0] for i in range(args.reps))
        t_cy = min(run(COMPILED, args.horizon, 1 + i)[0] for i in range(args.reps))
        print(f"  speedup: {t_py / t_cy:.1f}x")


if __name__ == "__main__":
    main()
