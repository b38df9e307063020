#!/usr/bin/env python3
"""Compare iteration counts with and without Chebyshev acceleration.

Runs the lattice-drag scenario twice at the same tolerance and reports the
per-step iteration statistics for each configuration.
"""

import argparse
import os

import numpy as np

from condsim.harness import RunConfig, load_scenario, run

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SCENARIO = os.path.join(HERE, "..", "scenarios", "lattice_drag.json")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default=DEFAULT_SCENARIO)
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--kv", type=float, default=1e5)
    ap.add_argument("--max-iters", type=int, default=4000)
    args = ap.parse_args()

    s = load_scenario(args.scenario)
    stats = {}
    for accelerated in (False, True):
        cfg = RunConfig(residual_tol=args.tol, chebyshev=accelerated,
                        kv=args.kv, max_iters=args.max_iters)
        res = run(s, cfg)
        iters = np.array([r.iters for r in res.rows])
        solve = np.array([r.solve_ms for r in res.rows])
        stats[accelerated] = (iters, solve)
        label = "chebyshev" if accelerated else "plain"
        print(f"{label:>10}: iters mean {iters.mean():7.1f} "
              f"max {iters.max():5d}  solve mean {solve.mean():7.2f} ms")
    speedup = stats[False][0].mean() / stats[True][0].mean()
    print(f"iteration-count ratio (plain / chebyshev): {speedup:.2f}")


if __name__ == "__main__":
    main()
