"""Command-line interface: ``fiberdist <command> ...``.

Exit codes: 0 success, 1 usage error, 2 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import approx as apx
from . import constellation as cons
from . import distance as dist
from . import eulag
from . import stochastic as sto
from .channel import FiberParams
from .errors import FiberDistError, NoConvergence

EXIT_USAGE = 1
EXIT_FAILURE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _complex(text: str) -> complex:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected re,im but got {text!r}")
    if len(parts) == 1:
        parts.append(0.0)
    if len(parts) != 2 or not all(map(math.isfinite, parts)):
        raise argparse.ArgumentTypeError(f"expected re,im but got {text!r}")
    return complex(parts[0], parts[1])


def _grid(text: str):
    try:
        nr, nphi, rmax = text.split(",")
        return int(nr), int(nphi), float(rmax)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected n_radii,n_phases,r_max but got {text!r}")


def _sweep(text: str):
    """``a:b:n`` -> n values from a to b, geometric when both ends are positive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n but got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("sweep needs n >= 1")
    return list(np.geomspace(a, b, n) if a > 0 and b > 0 else np.linspace(a, b, n))


def _fiber(args) -> FiberParams:
    return FiberParams(args.L, args.gamma)


def _progress(label):
    def report(k, n):
        step = max(1, n // 20)
        if k == n or k % step == 0:
            print(f"{label}: {k}/{n}", file=sys.stderr, flush=True)

    return report


def _writable(path):
    d = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(d) or not os.access(d, os.W_OK):
        raise SystemExit(f"cannot write to {path}")


def _fmt(v: float) -> str:
    return f"{v:.12g}"


# -- commands --------------------------------------------------------------------


def cmd_distance(args) -> int:
    fiber = _fiber(args)
    x1, x2 = args.x1, args.x2
    if x1 == x2:
        res = dist.DistanceResult(0.0, "closed_form", 0.0, 0.0)
    elif args.method == "bounds":
        lo = dist.radial_distance(x1, x2, fiber)
        hi = dist.upper_bound(x1, x2, fiber)
        res = dist.DistanceResult(float("nan"), "closed_form", lo, hi)
    elif args.method == "decomp":
        res = dist.decompose_distance(x1, x2, fiber, args.tol)
    elif args.method == "approx":
        table = apx.load_table(args.table, fiber)
        v = apx.approx_distance(x1, x2, table)
        res = dist.DistanceResult(v, "approximation", dist.radial_distance(x1, x2, fiber))
    else:
        res = dist.exact_distance(x1, x2, fiber, args.tol, with_witness=False)
    out = {"value": res.value, "method": res.method, "lower_bound": res.lower_bound, "upper_bound": res.upper_bound}
    if args.json:
        print(json.dumps(out))
    else:
        for k, v in out.items():
            print(f"{k}: {v if isinstance(v, str) else _fmt(v)}")
    return 0


def cmd_fig2(args) -> int:
    """Distance from the origin: joint solver against the closed form."""
    fiber = _fiber(args)
    _writable(args.out)
    failed = False
    rows = []
    for k in range(args.steps + 1):
        x = args.xmax * k / args.steps
        closed = dist.distance_from_origin(x, fiber)
        if x == 0:
            rows.append((x, 0.0, closed, 0.0))
            continue
        try:
            v = eulag.solve_joint(x, 0.0, fiber, tol=args.tol, with_trajectory=False).effort
            rows.append((x, v, closed, abs(v - closed) / closed))
        except NoConvergence:
            failed = True
            rows.append((x, float("nan"), closed, float("nan")))
        _progress("fig2")(k + 1, args.steps + 1)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "exact_solver", "closed_form", "rel_err"])
        w.writerows([[_fmt(v) for v in r] for r in rows])
    return EXIT_FAILURE if failed else 0


def _witness_csv(sol: eulag.JointSolution, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z", "a1", "b1", "a2", "b2"])
        for z, q1, q2 in zip(sol.traj1.z, sol.traj1.q, sol.traj2.q):
            w.writerow([_fmt(z), _fmt(q1.real), _fmt(q1.imag), _fmt(q2.real), _fmt(q2.imag)])


def cmd_antipodal_sweep(args) -> int:
    """Antipodal pair ``(x, -x)`` against on-off keying ``(x, 0)``."""
    fiber = _fiber(args)
    _writable(args.out)
    rows, failed = [], False
    for k in range(1, args.steps + 1):
        x = args.xmax * k / args.steps
        try:
            d = dist.exact_distance(x, -x, fiber, args.tol, with_witness=False).value
        except (FiberDistError, NoConvergence):
            d, failed = float("nan"), True
        rows.append((x, d, dist.distance_from_origin(x, fiber), dist.upper_bound(x, -x, fiber)))
        _progress("antipodal")(k, args.steps)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "d_antipodal", "d_ook", "upper_bound"])
        w.writerows([[_fmt(v) for v in r] for r in rows])
    if args.witness_dir:
        os.makedirs(args.witness_dir, exist_ok=True)
        for x in args.witness_x:
            try:
                sol = dist.exact_distance(x, -x, fiber, args.tol).witness
            except (FiberDistError, NoConvergence):
                failed = True
                continue
            if sol is not None:
                _witness_csv(sol, os.path.join(args.witness_dir, f"antipodal_{x:g}.csv"))
    return EXIT_FAILURE if failed else 0


def cmd_build_table(args) -> int:
    fiber = _fiber(args)
    _writable(args.out)
    radii = np.linspace(0.0, args.rmax, args.radii)
    table = apx.build_table(fiber, radii, args.tol, workers=args.threads, progress=_progress("table"))
    apx.save_table(table, args.out)
    if args.check_angle:
        for r1, r2, off, ok in apx.check_worst_angle(fiber, args.rmax, seed=args.seed):
            print(f"worst angle at r1={_fmt(r1)} r2={_fmt(r2)}: offset {_fmt(off)} {'ok' if ok else 'MISMATCH'}")
    return 0


def cmd_design(args) -> int:
    fiber = _fiber(args)
    _writable(args.out)
    nr, nphi, rmax = args.grid
    grid = cons.polar_grid(nr, rmax, nphi, include_origin=args.origin)
    table = apx.load_table(args.table, fiber) if args.source == "approx" else None
    source = "approximation" if args.source == "approx" else "exact"
    matrix = cons.distance_matrix(grid, fiber, source, table, args.tol, args.threads, _progress("matrix"))
    c, th = cons.design_max_min(matrix, args.size, rmax * rmax, fiber)
    cons.save_constellation(c, args.out)
    print(f"threshold: {_fmt(th)}")
    print(f"min_distance: {_fmt(c.min_distance)}")
    return 0


def cmd_refine(args) -> int:
    fiber = _fiber(args)
    _writable(args.out)
    if args.table:
        table = apx.load_table(args.table, fiber)
    else:
        table = apx.build_table(fiber, workers=args.threads, progress=_progress("table"))
    c = cons.best_of_refinements(args.size, table, args.trials, args.seed, args.peak, args.threads)
    cons.save_constellation(c, args.out)
    print(f"min_distance: {_fmt(c.min_distance)}")
    return 0


def cmd_eval(args) -> int:
    c = cons.load_constellation(args.constellation)
    _writable(args.out)
    table = sto.load_decoder_table(args.decoder_table) if args.decoder_table else None
    rows = sto.evaluate(c, args.sigma2, c.fiber, args.trials, args.seed, args.bins, table)
    sto.save_report(rows, args.out)
    return 0


def cmd_decoder_table(args) -> int:
    c = cons.load_constellation(args.constellation)
    _writable(args.out)
    t = sto.decoder_table(c, c.fiber, resolution=args.resolution, source=args.source)
    sto.save_decoder_table(t, args.out)
    return 0


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fiberdist", description="Adversarial distance on the nondispersive fiber channel.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def fiber_args(sp):
        sp.add_argument("--L", type=float, default=2000.0, help="fiber length in km")
        sp.add_argument("--gamma", type=float, default=1.27, help="nonlinearity in 1/(W km)")
        sp.add_argument("--tol", type=float, default=eulag.DEFAULT_TOL, help="solver tolerance")

    def threads(sp):
        sp.add_argument("--threads", type=int, default=1, help="worker processes")

    sp = sub.add_parser("distance", help="distance between two points")
    sp.add_argument("--x1", type=_complex, required=True, help="re,im")
    sp.add_argument("--x2", type=_complex, required=True, help="re,im")
    sp.add_argument("--method", choices=["exact", "decomp", "approx", "bounds"], default="exact")
    sp.add_argument("--table", help="A-table CSV for --method approx")
    sp.add_argument("--json", action="store_true")
    fiber_args(sp)
    sp.set_defaults(func=cmd_distance)

    sp = sub.add_parser("fig2", help="distance from the origin, solver vs closed form")
    sp.add_argument("--xmax", type=float, default=0.05)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--out", required=True)
    fiber_args(sp)
    sp.set_defaults(func=cmd_fig2)

    sp = sub.add_parser("antipodal-sweep", help="antipodal vs on-off keying distance")
    sp.add_argument("--xmax", type=float, default=0.1)
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--out", required=True)
    sp.add_argument("--witness-dir", help="also write witness trajectories here")
    sp.add_argument("--witness-x", type=float, nargs="+", default=[0.02, 0.03, 0.05])
    fiber_args(sp)
    sp.set_defaults(func=cmd_antipodal_sweep)

    sp = sub.add_parser("build-table", help="tabulate the approximation excess A(r1, r2)")
    sp.add_argument("--radii", type=int, default=apx.DEFAULT_RADII)
    sp.add_argument("--rmax", type=float, default=apx.DEFAULT_RMAX)
    sp.add_argument("--out", required=True)
    sp.add_argument("--check-angle", action="store_true", help="verify the worst relative phase")
    sp.add_argument("--seed", type=int, default=0)
    fiber_args(sp)
    threads(sp)
    sp.set_defaults(func=cmd_build_table)

    sp = sub.add_parser("design", help="max-min design on a polar grid (clique search)")
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--grid", type=_grid, default=(10, 16, 0.05), help="n_radii,n_phases,r_max")
    sp.add_argument("--source", choices=["exact", "approx"], default="exact")
    sp.add_argument("--table", help="A-table CSV for --source approx")
    sp.add_argument("--origin", action="store_true", help="add the origin to the grid")
    sp.add_argument("--out", required=True)
    fiber_args(sp)
    threads(sp)
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("refine", help="greedy refinement from random starts")
    sp.add_argument("--size", type=int, required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--peak", type=float, default=cons.PEAK_POWER, help="peak power in W")
    sp.add_argument("--table", help="A-table CSV (built with defaults when omitted)")
    sp.add_argument("--out", required=True)
    fiber_args(sp)
    threads(sp)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser(
        "eval", help="Monte Carlo SER and MI",
        description="PSNR is reported as peak_power / (sigma2 L) in dB.",
    )
    sp.add_argument("--constellation", required=True)
    sp.add_argument("--sigma2", type=_sweep, required=True, help="a:b:n noise PSD sweep (W/km)")
    sp.add_argument("--trials", type=int, default=sto.DEFAULT_TRIALS)
    sp.add_argument("--bins", type=int, default=sto.DEFAULT_BINS)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--decoder-table", help="decoder-table CSV for the minimum-effort decoder")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("decoder-table", help="minimum-effort decision regions on a grid")
    sp.add_argument("--constellation", required=True)
    sp.add_argument("--resolution", type=int, default=48)
    sp.add_argument("--source", choices=["exact", "spiral"], default="exact")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_decoder_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FiberDistError, NoConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
