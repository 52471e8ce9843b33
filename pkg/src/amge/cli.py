"""Command-line front end: build a hierarchy, solve, report, export, verify.

Exit codes: 0 success, 1 failed ``--verify`` check, 2 flag or solver
configuration error, 3 mesh error, 4 hierarchy construction error,
5 solver did not converge, 6 export I/O error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import core_la as la
from .checks import check_identity_coarsening, check_operator_symmetry, run_checks
from .errors import (
    AmgeError,
    ConfigError,
    ExactnessViolation,
    NotPositiveDefinite,
    ParseError,
    SingularLocalSystem,
    TopologyError,
    UnknownAttribute,
    ZeroMeasureEntity,
)
from .fem import Coefficient
from .mesh import assign_attribute_by_region, generate_cube_mesh, inner_box, read_mesh, uniform_refine
from .pipeline import setup_hierarchy
from .solvers import SolverLibrary

CSV_HEADER = ["form", "levels", "fine_dofs", "iterations", "rel_residual", "gc", "oc", "setup_s", "solve_s"]
FORMS = {"curl": 2, "div": 3}
FAULTS = ("none", "corrupt-P")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _attr_value(text: str):
    try:
        a, v = text.split(":")
        return int(a), float(v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected ATTR:VALUE, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="amge", description="Element-based AMGe for H(curl) and H(div) forms.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mesh", metavar="PATH", help="mesh file")
    src.add_argument("--cube", type=int, metavar="N", help="unit cube with N^3 cells of 6 tets (default 2)")
    p.add_argument("--refine", type=int, default=0, metavar="K", help="uniform refinements")
    p.add_argument("--form", choices=sorted(FORMS), default="curl")
    p.add_argument("--levels", type=int, default=2, metavar="L")
    p.add_argument("--factor", type=int, default=8, metavar="F", help="elements per agglomerate")
    p.add_argument("--target-order", type=int, default=1, metavar="P")
    p.add_argument("--partitioner", choices=("greedy", "bisection", "blocks"), default="greedy")
    p.add_argument("--alpha", type=_attr_value, action="append", default=[], metavar="ATTR:VAL")
    p.add_argument("--beta", type=_attr_value, action="append", default=[], metavar="ATTR:VAL")
    p.add_argument("--inner-box", action="store_true", help="attribute 2 inside [0.25, 0.75]^3")
    p.add_argument("--solver-config", metavar="PATH")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--report", metavar="PATH.csv")
    p.add_argument("--export", metavar="DIR")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verify", action="store_true", help="run the invariant checks instead of a solve")
    p.add_argument("--trivial-partition", action="store_true", help="one agglomerate per element")
    p.add_argument("--no-timing", action="store_true", help="write zero timings (reproducible reports)")
    p.add_argument("--inject-fault", choices=FAULTS, default="none", help=argparse.SUPPRESS)
    return p


def load_mesh(args):
    try:
        if args.mesh:
            m = read_mesh(args.mesh)
        else:
            m = generate_cube_mesh(2 if args.cube is None else args.cube)
        for _ in range(args.refine):
            m = uniform_refine(m)
        if args.inner_box:
            m = assign_attribute_by_region(m, inner_box(), 2)
    except (OSError, ParseError, ValueError) as exc:
        raise CliError(f"mesh error: {exc}", 3) from exc
    return m


def make_coefficient(args, m) -> Coefficient:
    alpha, beta = dict(args.alpha), dict(args.beta)
    attrs = sorted(set(int(a) for a in np.unique(m.element_attr)) | set(alpha) | set(beta))
    try:
        return Coefficient({a: (alpha.get(a, 1.0), beta.get(a, 1.0)) for a in attrs})
    except ValueError as exc:
        raise CliError(f"invalid coefficient: {exc}", 2) from exc


def load_library(args) -> SolverLibrary:
    try:
        return SolverLibrary.from_file(args.solver_config) if args.solver_config else SolverLibrary.default()
    except ConfigError as exc:
        raise CliError(f"solver configuration error: {exc}", 2) from exc


def build(args, m, coeff, check=True):
    if args.levels < 1 or args.factor < 2 and not args.trivial_partition:
        raise CliError("--levels must be >= 1 and --factor >= 2", 2)
    if args.target_order < 0:
        raise CliError("--target-order must be >= 0", 2)
    try:
        return setup_hierarchy(
            m,
            FORMS[args.form],
            coeff,
            levels=args.levels,
            factor=args.factor,
            target_order=args.target_order,
            partitioner=args.partitioner,
            seed=args.seed,
            trivial=args.trivial_partition,
            check=check,
        )
    except UnknownAttribute as exc:
        raise CliError(f"unknown attribute: {exc}", 2) from exc
    except (TopologyError, ExactnessViolation, SingularLocalSystem, ZeroMeasureEntity, NotPositiveDefinite) as exc:
        raise CliError(f"hierarchy construction failed: {exc}", 4) from exc


def export(setup, directory) -> list:
    """MatrixMarket files per level ``k`` (1-based): ``A_lk``, ``D{j}_lk``, ``P{i}_lk``, ``Pi{i}_lk``."""
    H = setup.hierarchy
    written = []
    try:
        os.makedirs(directory, exist_ok=True)
        for k, L in enumerate(H.levels, start=1):
            items = [(f"A_l{k}", H.A[k - 1])] + [(f"D{j}_l{k}", L.D[j]) for j in (1, 2, 3)]
            if k <= len(H.bundles):
                b = H.bundles[k - 1]
                items += [(f"P{i}_l{k}", b.P[i]) for i in (1, 2, 3, 4)]
                items += [(f"Pi{i}_l{k}", b.Pi[i]) for i in (1, 2, 3, 4)]
            for name, M in items:
                path = os.path.join(directory, name + ".mtx")
                la.write_matrix_market(path, M)
                written.append(path)
    except OSError as exc:
        raise CliError(f"export failed: {exc}", 6) from exc
    return written


def inject_fault(setup, fault: str):
    if fault == "corrupt-P" and setup.hierarchy.bundles:
        P = setup.hierarchy.bundles[0].P[2]
        P.data[0] *= 1.5


def verify(args, out=None) -> int:
    out = sys.stdout if out is None else out
    m = load_mesh(args)
    coeff = make_coefficient(args, m)
    setup = build(args, m, coeff, check=False)
    inject_fault(setup, args.inject_fault)
    H = setup.hierarchy
    results = run_checks(H.levels, H.bundles, setup.aggs)
    if args.trivial_partition:
        results += check_identity_coarsening(H.levels)
    lib = SolverLibrary(
        {
            "solvers": {
                "v": {"type": "vcycle", "smoother": "h", "coarse": "d"},
                "h": {"type": "hybrid", "smoother": "s"},
                "s": {"type": "l1-sgs", "sweeps": 2},
                "d": {"type": "direct"},
                "a": {"type": "aux-space", "smoother": "s"},
            }
        }
    )
    from .checks import CheckResult
    from .solvers import SolverContext

    ctx = SolverContext(H, 0, H.form, H.A[0])
    for name, label in (("v", "vcycle"), ("a", "aux_space")):
        op = lib.build(name, ctx)
        asym, minq = check_operator_symmetry(op.apply, H.A[0].shape[0])
        results.append(CheckResult(f"{label}.symmetry", asym <= 1e-10, asym, 1e-10))
        results.append(CheckResult(f"{label}.positivity", minq > 0.0, minq, 0.0))
    for r in results:
        print(r.line(), file=out)
    failed = sum(not r.passed for r in results)
    print(f"VERIFY {'PASS' if not failed else 'FAIL'} checks={len(results)} failed={failed}", file=out)
    return 0 if not failed else 1


def run_benchmark(args, out=None) -> int:
    out = sys.stdout if out is None else out
    lib = load_library(args)
    m = load_mesh(args)
    coeff = make_coefficient(args, m)
    t0 = time.perf_counter()
    setup = build(args, m, coeff)
    H = setup.hierarchy
    setup_s = time.perf_counter() - t0
    rng = np.random.default_rng(args.seed)
    b = H.A[0] @ rng.standard_normal(H.A[0].shape[0])
    t0 = time.perf_counter()
    try:
        res = lib.solve(H, b, rel_tol=args.tol, max_it=args.max_iterations)
    except ConfigError as exc:
        raise CliError(f"solver configuration error: {exc}", 2) from exc
    except AmgeError as exc:
        raise CliError(f"solver failed: {exc}", 5) from exc
    solve_s = time.perf_counter() - t0
    gc, oc = H.complexities()
    if args.no_timing:
        setup_s = solve_s = 0.0
    row = [args.form, H.n_levels, H.levels[0].dims[H.form], res.iterations, f"{res.rel_residual:.6e}",
           f"{gc:.6f}", f"{oc:.6f}", f"{setup_s:.3f}", f"{solve_s:.3f}"]
    for l, (L, A) in enumerate(zip(H.levels, H.A), start=1):
        print(f"# level {l}: dims {L.d} free {A.shape[0]} nnz {A.nnz}", file=out)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerow(row)
    if args.report:
        try:
            with open(args.report, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_HEADER)
                w.writerow(row)
        except OSError as exc:
            raise CliError(f"cannot write report: {exc}", 6) from exc
    if args.export:
        export(setup, args.export)
    if not res.converged:
        print(f"error: PCG did not converge in {res.iterations} iterations", file=sys.stderr)
        return 5
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return verify(args) if args.verify else run_benchmark(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
