"""Command-line front end.

Every subcommand writes whitespace-separated data files with a ``#`` header
and a JSON run manifest.  Exit codes: 0 success, 2 usage error, 3 no
solution, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    COEFF_HEADER,
    coeff_b_eps,
    coeff_b_radial,
    coeff_c_1d,
    coeff_c_nonradial_first,
    j_cubed_tail,
    lemma_integral_scan,
    morse_index_radial,
)
from .continuation import SeedFailureError, StepControl, fold_report, trace_branch, write_branch
from .io_utils import atomic_write_json, atomic_write_text, format_columns
from .radial_ode import (
    NonlinearityError,
    ProblemSpec,
    StepFailureError,
    parse_nonlinearity,
    verify_solution_identities,
    write_profile,
)
from .shooting import ConvergenceError, HorizonError, SolutionType, classify, find_solutions, time_map
from .spectrum import radial_eigenvalue, spectrum_list

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_SOLUTION = 3
EXIT_NUMERICAL = 4

THREADS_ENV = "NEUMANN_RADIAL_THREADS"


class NoSolution(Exception):
    pass


class NumericalFailure(Exception):
    pass


class UsageError(Exception):
    pass


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


_TERM = re.compile(r"^(?:lam(\d+)(rad)?|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)$")


def parse_exponent(text: str, N: int, R: float) -> float:
    """Resolve ``2.1+lam2rad`` style sums.

    Terms are numbers, ``lam<i>rad`` (i-th radial eigenvalue) or ``lam<i>``
    (i-th distinct eigenvalue of the full spectrum).
    """
    total = 0.0
    for term in text.replace(" ", "").split("+"):
        m = _TERM.match(term)
        if not term or not m:
            raise UsageError(f"cannot parse exponent term {term!r} in {text!r}")
        if m.group(1):
            i = int(m.group(1))
            if i < 1:
                raise UsageError("eigenvalue index starts at 1")
            total += radial_eigenvalue(N, R, i) if m.group(2) else spectrum_list(N, R, i)[-1].lam
        else:
            total += float(term)
    return total


def parse_range(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"range must be A:B, got {text!r}")
    a, b = float(parts[0]), float(parts[1])
    if not a < b:
        raise UsageError("range needs A < B")
    return a, b


def parse_index_list(text: str):
    """``3``, ``2..6`` or ``2,4,5``."""
    if ".." in text:
        a, b = text.split("..")
        out = list(range(int(a), int(b) + 1))
    else:
        out = [int(t) for t in text.split(",")]
    if not out:
        raise UsageError("empty index list")
    return out


def _out_path(args, default_name):
    base = Path(args.outdir)
    return base / (args.out if getattr(args, "out", None) else default_name)


def _finish(args, command, params, outputs, t0, extra=None):
    manifest = {
        "command": command,
        "parameters": params,
        "tool_version": __version__,
        "outputs": [str(p) for p in outputs],
        "wall_time": time.perf_counter() - t0,
    }
    if extra:
        manifest.update(extra)
    path = Path(args.outdir) / (args.manifest or f"{command}.manifest.json")
    atomic_write_json(path, manifest)
    return path


# ----------------------------------------------------------------- commands

def cmd_eigs(args):
    t0 = time.perf_counter()
    N, R = args.dim, args.radius
    f = parse_nonlinearity(args.f)
    slope = float(f.fprime(1.0))
    rows = []
    if args.radial_only:
        for i in range(1, args.count + 1):
            lam = radial_eigenvalue(N, R, i)
            rows.append((i, 0, i - 1, math.sqrt(lam) * R, lam, 1))
    else:
        for i, rec in enumerate(spectrum_list(N, R, args.count), start=1):
            rows.append((i, rec.k, rec.ell, rec.z, rec.lam, rec.multiplicity))
    names = ["i", "k", "ell", "z", "lambda", "two_plus_lambda", "multiplicity", "eps_i"]
    cols = list(zip(*rows))
    two = [2.0 + lam for lam in cols[4]]
    eps = [(slope - 1.0) / lam if lam > 0 else float("inf") for lam in cols[4]]
    text = format_columns(names, [cols[0], cols[1], cols[2], cols[3], cols[4], two, cols[5], eps])
    out = _out_path(args, "eigs.dat")
    atomic_write_text(out, text)
    sys.stdout.write(text)
    _finish(args, "eigs", {"dim": N, "radius": R, "count": args.count,
                           "radial_only": args.radial_only, "f": args.f}, [out], t0)
    return EXIT_OK


def _problem_from_args(args):
    N, R = args.dim, args.radius
    if args.p is not None:
        p = parse_exponent(args.p, N, R)
        return ProblemSpec.power(N, R, p)
    if args.f is None or args.eps is None:
        raise UsageError("give --p, or --f together with --eps")
    return ProblemSpec(N, float(R), parse_nonlinearity(args.f, args.eps))


def cmd_solve(args):
    t0 = time.perf_counter()
    problem = _problem_from_args(args)
    want = SolutionType.parse(args.type)
    sols = find_solutions(problem, want=want, n=args.grid, tol=args.tol)
    if not sols:
        raise NoSolution(f"no solution of type {want} found for {problem.to_dict()}")
    sols.sort(key=lambda s: s.gamma)
    outputs, records = [], []
    stem = args.out or f"solve_{want.i}{'p' if want.sign == '+' else 'm'}.dat"
    for k, prof in enumerate(sols):
        rep = verify_solution_identities(prof)
        if not rep.ok:
            raise NumericalFailure(f"solution at gamma={prof.gamma!r} fails integral identities: "
                                   f"{rep.to_dict()}")
        mi = morse_index_radial(prof)
        name = stem if len(sols) == 1 else _suffixed(stem, k + 1)
        path = Path(args.outdir) / name
        write_profile(prof, path, include_du=True)
        meta = prof.to_metadata()
        meta.update({"type": str(classify(prof)), "morse_index_rad": mi.index,
                     "morse_degenerate": mi.degenerate, "identities": rep.to_dict()})
        atomic_write_json(str(path) + ".json", meta)
        outputs += [path, Path(str(path) + ".json")]
        records.append(meta)
        print(f"{want} gamma={prof.gamma:.10g} min={meta['min_u']:.8g} max={meta['max_u']:.8g} "
              f"E={meta['energy']:.10g} MI_rad={mi.index}")
    params = {"dim": args.dim, "radius": args.radius, "problem": problem.to_dict(),
              "type": str(want), "tol": args.tol, "grid": args.grid}
    _finish(args, "solve", params, outputs, t0, {"solutions": records})
    return EXIT_OK


def _suffixed(name, k):
    p = Path(name)
    return f"{p.stem}_{k}{p.suffix}"


def cmd_branch(args):
    t0 = time.perf_counter()
    N, R = args.dim, args.radius
    lo, hi = parse_range(args.range)
    nonlin = None
    if args.family == "eps":
        nonlin = parse_nonlinearity(args.f or "quadratic")
    step = StepControl(ds_init=args.ds_init, ds_max=args.ds_max, tol=args.tol,
                       gamma_max=args.gamma_max, morse=not args.no_morse)
    idx = parse_index_list(args.i)

    def run(i):
        return trace_branch(args.family, N, R, i, args.sign, (lo, hi), nonlin=nonlin, step=step)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        branches = list(pool.map(run, idx))
    outputs, reports = [], []
    sign_tag = "p" if args.sign == "+" else "m"
    for i, br in zip(idx, branches):
        name = args.out if (args.out and len(idx) == 1) else f"branch_{args.family}_{i}{sign_tag}.dat"
        path = Path(args.outdir) / name
        write_branch(br, path, extended=True)
        outputs.append(path)
        folds = [fr.to_dict() for fr in fold_report(br, args.tol)]
        rep = br.to_manifest()
        rep["fold_report"] = folds
        reports.append(rep)
        print(f"branch {i}{args.sign}: seed {br.param_star:.8g}, {len(br.points)} points, "
              f"termination {br.termination}, folds {[(round(p, 6), round(g, 6)) for p, g in br.folds]}")
    params = {"dim": N, "radius": R, "family": args.family, "f": args.f, "i": idx, "sign": args.sign,
              "range": [lo, hi], "ds_init": args.ds_init, "ds_max": args.ds_max, "tol": args.tol,
              "gamma_max": args.gamma_max}
    _finish(args, "branch", params, outputs, t0, {"branches": reports})
    return EXIT_OK


def cmd_timemap(args):
    t0 = time.perf_counter()
    parts = args.gammas.split(":")
    if len(parts) != 3:
        raise UsageError("--gammas needs a:b:n")
    a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    if not 0 < a < b < 1 or n < 2:
        raise UsageError("--gammas needs 0 < a < b < 1 and n >= 2")
    p = parse_exponent(args.p, args.dim, 1.0)
    gam = np.linspace(a, b, n)
    T, flag = [], []
    for g in gam:
        try:
            T.append(time_map(args.dim, p, float(g), r_max=args.r_max))
            flag.append(0)
        except HorizonError:
            T.append(float("nan"))
            flag.append(1)
    T = np.array(T)
    ok = np.isfinite(T)
    decreasing = bool(np.all(np.diff(T[ok]) < 0))
    out = _out_path(args, "timemap.dat")
    atomic_write_text(out, format_columns(["gamma", "T", "horizon_error"], [gam, T, flag]))
    print(f"{n} rows, strictly decreasing: {decreasing}")
    _finish(args, "timemap", {"dim": args.dim, "p": p, "gammas": [a, b, n], "r_max": args.r_max},
            [out], t0, {"strictly_decreasing": decreasing, "horizon_errors": int(sum(flag))})
    return EXIT_OK


def cmd_coeffs(args):
    t0 = time.perf_counter()
    mode = args.mode
    outputs = []
    params = {"mode": mode}
    extra = {}
    if mode in ("b-radial", "b-eps"):
        if args.dim is None or args.radius is None:
            raise UsageError(f"{mode} needs --dim and --radius")
        idx = parse_index_list(args.i or "2")
        if mode == "b-radial":
            rows = [coeff_b_radial(args.dim, args.radius, i) for i in idx]
        else:
            f = parse_nonlinearity(args.f or "quadratic")
            rows = [coeff_b_eps(args.dim, args.radius, f, i) for i in idx]
        text = COEFF_HEADER + "\n" + "\n".join(r.row() for r in rows) + "\n"
        params.update({"dim": args.dim, "radius": args.radius, "i": idx, "f": args.f})
        extra["quadratures"] = [r.quadratures for r in rows]
    elif mode == "c-1d":
        if args.radius is None:
            raise UsageError("c-1d needs --radius")
        idx = parse_index_list(args.i or "1")
        lines = [f"one-dim 1 {args.radius:.12g} {i} -1 0 {coeff_c_1d(args.radius, i):.12g}" for i in idx]
        text = COEFF_HEADER + "\n" + "\n".join(lines) + "\n"
        params.update({"radius": args.radius, "i": idx})
    elif mode == "c-nonradial":
        if args.dim is None:
            raise UsageError("c-nonradial needs --dim")
        Rs = np.linspace(args.rmin, args.rmax, args.n)
        vals = [coeff_c_nonradial_first(args.dim, float(R)) for R in Rs]
        text = format_columns(["R", "scaled_c", "c"], [Rs, [v.quadratures["scaled_c"] for v in vals],
                                                       [v.c for v in vals]])
        params.update({"dim": args.dim, "rmin": args.rmin, "rmax": args.rmax, "n": args.n})
        extra.update({k: vals[0].quadratures[k] for k in ("alpha", "beta", "lambda_bar")})
    elif mode == "lemma-scan":
        nu = args.nu
        alpha = args.alpha if args.alpha is not None else 1.0 - nu
        scan = lemma_integral_scan(nu, alpha, args.beta, args.xmax)
        text = format_columns(["x", "cumulative"], [scan.x, scan.cumulative])
        params.update({"nu": nu, "alpha": alpha, "beta": args.beta, "xmax": args.xmax})
        extra.update({"min_value": scan.min_value, "argmin": scan.argmin,
                      "final_value": scan.final_value, "tail_estimate": scan.tail_estimate})
        print(f"min {scan.min_value:.10g} at x={scan.argmin:.6g}, tail estimate {scan.tail_estimate:.10g}")
    elif mode == "tail":
        val = j_cubed_tail(args.nu)
        text = format_columns(["nu", "tail"], [[args.nu], [val]])
        params.update({"nu": args.nu})
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(mode)
    out = _out_path(args, f"coeffs_{mode}.dat")
    atomic_write_text(out, text)
    outputs.append(out)
    if mode != "lemma-scan":
        sys.stdout.write(text)
    _finish(args, "coeffs", params, outputs, t0, extra)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser():
    ap = argparse.ArgumentParser(prog="neumann-radial",
                                 description="Radial Neumann solutions, branches and bifurcation data.")
    ap.add_argument("--outdir", default=".", help="directory for data files and manifests")
    ap.add_argument("--manifest", default=None, help="manifest file name (default <command>.manifest.json)")
    sub = ap.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eigs", help="Neumann eigenvalues of the ball")
    e.add_argument("--dim", type=int, required=True)
    e.add_argument("--radius", type=float, required=True)
    e.add_argument("--count", type=int, required=True)
    e.add_argument("--radial-only", action="store_true")
    e.add_argument("--f", default="quadratic", help="nonlinearity for the eps_i column")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eigs)

    s = sub.add_parser("solve", help="radial solutions of a given type")
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--radius", type=float, required=True)
    s.add_argument("--p", help="exponent, e.g. 3 or 2.1+lam2rad")
    s.add_argument("--f", help="nonlinearity name for the eps problem")
    s.add_argument("--eps", type=float)
    s.add_argument("--type", required=True, help="solution type, e.g. 2- or 3+")
    s.add_argument("--tol", type=float, default=1e-11)
    s.add_argument("--grid", type=int, default=160, help="central values scanned per side")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("branch", help="trace a radial branch")
    b.add_argument("--dim", type=int, required=True)
    b.add_argument("--radius", type=float, required=True)
    b.add_argument("--family", choices=["p", "eps"], required=True)
    b.add_argument("--f", help="nonlinearity for the eps family (default quadratic)")
    b.add_argument("--i", required=True, help="index, list 2,3 or range 2..7")
    b.add_argument("--sign", choices=["+", "-"], required=True)
    b.add_argument("--range", required=True, help="parameter interval A:B")
    b.add_argument("--ds-init", type=float, default=1e-3)
    b.add_argument("--ds-max", type=float, default=0.05)
    b.add_argument("--gamma-max", type=float, default=1e3)
    b.add_argument("--tol", type=float, default=1e-11)
    b.add_argument("--no-morse", action="store_true")
    b.add_argument("--out")
    b.set_defaults(func=cmd_branch)

    t = sub.add_parser("timemap", help="first turning radius of increasing trajectories")
    t.add_argument("--dim", type=int, required=True)
    t.add_argument("--p", required=True)
    t.add_argument("--gammas", required=True, help="a:b:n")
    t.add_argument("--r-max", type=float, default=100.0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_timemap)

    c = sub.add_parser("coeffs", help="bifurcation coefficients and Bessel integrals")
    c.add_argument("--mode", required=True,
                   choices=["b-radial", "b-eps", "c-1d", "c-nonradial", "lemma-scan", "tail"])
    c.add_argument("--dim", type=int)
    c.add_argument("--radius", type=float)
    c.add_argument("--i")
    c.add_argument("--f")
    c.add_argument("--rmin", type=float, default=0.3)
    c.add_argument("--rmax", type=float, default=4.5)
    c.add_argument("--n", type=int, default=50)
    c.add_argument("--nu", type=float, default=0.5)
    c.add_argument("--alpha", type=float)
    c.add_argument("--beta", type=float, default=3.0)
    c.add_argument("--xmax", type=float, default=60.0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_coeffs)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, NonlinearityError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoSolution, SeedFailureError) as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return EXIT_NO_SOLUTION
    except (NumericalFailure, StepFailureError, ConvergenceError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
