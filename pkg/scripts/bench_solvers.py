#!/usr/bin/env python3
"""Benchmark solver-time scaling over lattice sizes.

Fits log(mean solve time) against log(DOF) for the nodal solver and the
impulse-space baselines and prints the growth exponents.
"""

import argparse
import os

from condsim.harness import RunConfig, bench_scaling, load_scenario

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SCENARIO = os.path.join(HERE, "..", "scenarios", "lattice_drag.json")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default=DEFAULT_SCENARIO)
    ap.add_argument("--cond-sizes", default="300,600,1200,2400,4800")
    ap.add_argument("--baseline-sizes", default="300,600,1200")
    ap.add_argument("--steps", type=int, default=5, help="steps per size point")
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--skip-baselines", action="store_true")
    args = ap.parse_args()

    s = load_scenario(args.scenario)
    runs = [("cond", [int(x) for x in args.cond_sizes.split(",")],
             RunConfig(residual_tol=args.tol, chebyshev=True, kv=1e5, max_iters=4000))]
    if not args.skip_baselines:
        sizes = [int(x) for x in args.baseline_sizes.split(",")]
        for name in ("pgs", "apgd"):
            runs.append((name, sizes,
                         RunConfig(solver=name, residual_tol=args.tol,
                                   kv=1e5, max_iters=4000)))

    for name, sizes, cfg in runs:
        result = bench_scaling(s, sizes, cfg, steps_cap=args.steps)
        print(f"solver {name}:")
        for p in result.points:
            print(f"  n={p.n:5d}  solve {1e3 * p.mean_solve_s:9.2f} ms"
                  f"  iters {p.mean_iters:7.1f}")
        print(f"  exponent {result.exponent:.3f}  R^2 {result.r_squared:.4f}")


if __name__ == "__main__":
    main()
