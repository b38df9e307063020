"""Command-line interface: run a scenario, benchmark scaling, or self-verify.

Exit codes: 0 success, 2 scenario validation error, 3 divergence in any step,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ScenarioValidationError
from .harness import (
    RunConfig,
    bench_scaling,
    load_scenario,
    report_csv,
    run,
    thread_budget,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

_OPERATOR_MAP = {"strict": "strict", "proximal": "proximal", "anisotropic": "strict-anisotropic"}


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=["cond", "pgs", "apgd"], default="cond")
    p.add_argument("--operator", choices=["strict", "proximal", "anisotropic"], default="strict")
    p.add_argument(
        "--step-matrix", choices=["frobenius", "bb1", "bb2", "bb-alt"], default="frobenius"
    )
    p.add_argument("--residual-tol", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--chebyshev", choices=["on", "off"], default="off")
    p.add_argument("--kv", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("--scenario", required=True)
    _add_solver_args(p_run)

    p_bench = sub.add_parser("bench", help="scaling benchmark over lattice sizes")
    p_bench.add_argument("--scenario", required=True)
    p_bench.add_argument("--sizes", required=True, help="comma-separated DOF counts, ascending")
    _add_solver_args(p_bench)

    sub.add_parser("verify", help="run the built-in property checks")
    return parser


def _run_cfg(args) -> RunConfig:
    return RunConfig(
        solver=args.solver,
        operator=_OPERATOR_MAP[args.operator],
        step_strategy=args.step_matrix,
        residual_tol=args.residual_tol,
        max_iters=args.max_iter,
        chebyshev=args.chebyshev == "on",
        kv=args.kv,
        seed=args.seed,
    )


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run(scenario, _run_cfg(args))
    if args.out:
        report_csv(result.rows, args.out)
    else:
        last = result.rows[-1] if result.rows else None
        print(f"steps={len(result.rows)} threads<={thread_budget()}")
        if last is not None:
            print(
                f"final: iters={last.iters} residual={last.residual:.3e} "
                f"max_pen_m={last.max_pen_m:.3e} ke_J={last.ke_J:.6e}"
            )
    if result.any_diverged:
        print("warning: divergence fallback used on at least one step", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_bench(args) -> int:
    scenario = load_scenario(args.scenario)
    try:
        sizes = [int(x) for x in args.sizes.split(",") if x]
    except ValueError:
        raise ScenarioValidationError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    if sizes != sorted(sizes):
        raise ScenarioValidationError("--sizes must be ascending")
    res = bench_scaling(scenario, sizes, _run_cfg(args))
    lines = ["n,mean_solve_s,mean_dyn_s,mean_iters"]
    for p in res.points:
        lines.append(
            f"{p.n},{p.mean_solve_s:.17g},{p.mean_dyn_s:.17g},{p.mean_iters:.17g}"
        )
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if res.exponent is not None:
        print(f"fit: exponent={res.exponent:.4f} r_squared={res.r_squared:.4f}")
    else:
        print("fit: exponent=absent (need at least two sizes)")
    return EXIT_OK


def _check(name: str, ok: bool, failures: list) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    if not ok:
        failures.append(name)


def cmd_verify(_args) -> int:
    """Quick self-contained property checks on random inputs."""
    from .contacts import AugmentedDynamics, contact_frame
    from .solver import (
        project_proximal,
        project_strict,
        project_strict_anisotropic,
    )
    from .testing import random_contact_augmentation

    rng = np.random.default_rng(7)
    failures: list = []

    ok = True
    for _ in range(200):
        n = rng.standard_normal(3)
        if np.linalg.norm(n) < 1e-6:
            continue
        r = contact_frame(n)
        ok &= np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        ok &= np.allclose(r[0], n / np.linalg.norm(n), atol=1e-12)
    _check("contact frames orthonormal with first row = normal", ok, failures)

    ok = True
    for _ in range(500):
        lam = 5.0 * rng.standard_normal(3)
        mu = float(rng.uniform(0.05, 1.5))
        for proj in (project_strict(lam, mu), project_proximal(lam, mu)):
            ok &= proj[0] >= 0.0
            ok &= np.linalg.norm(proj[1:]) <= mu * proj[0] + 1e-12
        iso = project_strict_anisotropic(lam, mu, mu)
        ok &= np.linalg.norm(iso - project_strict(lam, mu)) <= 1e-10
    _check("projections land in the friction cone; isotropic ellipse = strict", ok, failures)

    ok = True
    for trial in range(20):
        aug, w = random_contact_augmentation(rng)
        from .contacts import contact_jacobian_matrix

        jc = contact_jacobian_matrix(aug).toarray()
        prod = jc @ np.diag(w.w) @ jc.T
        off = prod - np.diag(np.diag(prod))
        ok &= np.abs(off).max() <= 1e-12
    _check("tied step matrix diagonalizes Jc W Jc^T", ok, failures)

    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all checks passed")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_verify(args)
    except ScenarioValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
