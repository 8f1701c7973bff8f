"""Command-line front end.

Every subcommand writes its artifacts and a ``manifest.json`` into ``--out``.
Options can also come from a ``key=value`` file given with ``--config``;
flags on the command line win.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import analysis as an
from .errors import BcPrecondError, CapError, ConfigError, DivergenceError, IoError, NonConvergence

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ERROR = 3
EXIT_DIVERGED = 4  # the dash of an iteration table
EXIT_NONCONVERGED = 5
EXIT_CAP = 6
EXIT_IO = 7


def _floats(text: str) -> list[float]:
    try:
        return [float(eval_fraction(t)) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def eval_fraction(text: str) -> float:
    """Parse ``0.05`` or ``1/20``."""
    text = text.strip()
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


def read_config(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment; keys use flag spelling."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no config file at {path}")
    out = {}
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


# ---------------------------------------------------------------- workers

def _precond_cfg(args):
    from .precond.stack import PrecondConfig

    return PrecondConfig(
        cheb_steps=args.cheb_steps, uzawa_steps=args.uzawa_steps, mg_cycles=args.mg_cycles,
        delta=getattr(args, "delta", None), stride=getattr(args, "stride", 1),
    )


def _stokes_job(args, level, beta):
    from .control import solve_stokes_control, summarize
    from .io import save_solution, write_vtk
    from .kkt import control_energy

    x, kkt, rep = solve_stokes_control(level, args.alpha, beta, _precond_cfg(args), tol=args.tol,
                                       maxit=args.maxit, direct=args.direct)
    tag = f"stokes_l{level}_beta{beta:g}"
    out = Path(args.out)
    row = {"level": level, "N": kkt.N, "alpha": args.alpha, "beta": beta, **summarize(rep),
           "control_energy": control_energy(kkt, x)}
    (out / f"{tag}.json").write_text(json.dumps(row, indent=2) + "\n")
    if rep is not None:
        rep.write_csv(out / f"{tag}_residuals.csv")
    save_solution(out / f"{tag}.npz", kkt, x)
    if args.vtk:
        write_vtk(out / f"{tag}.vtk", kkt, x)
    return row


def _ns_job(args, level, nu):
    from .io import save_solution, write_vtk
    from .kkt import ChannelProblem, build_oseen_kkt
    from .picard import solve_navier_control

    out = Path(args.out)
    tag = f"ns_l{level}_nu{nu:.6g}"
    problem = ChannelProblem.build(level)
    callback = None
    if args.vtk:
        def callback(k, x, res):
            kkt = build_oseen_kkt(problem, x[: problem.dofmap.n_v], args.alpha, args.beta, nu)
            write_vtk(out / f"{tag}_it{k:03d}.vtk", kkt, x)
    try:
        x, rep = solve_navier_control(
            problem, args.alpha, args.beta, nu, _precond_cfg(args), tol=args.tol,
            nonlinear_tol=args.nonlinear_tol, max_nonlinear=args.max_nonlinear, maxit=args.maxit,
            direct=args.direct, callback=callback,
        )
    except DivergenceError as exc:
        row = {"level": level, "nu": nu, "status": "diverged", "message": str(exc)}
        (out / f"{tag}.json").write_text(json.dumps(row, indent=2) + "\n")
        return row
    except NonConvergence as exc:
        rep = exc.args[1] if len(exc.args) > 1 else None
        row = {"level": level, "nu": nu, "status": "nonconverged",
               **(rep.as_dict() if rep is not None else {})}
        (out / f"{tag}.json").write_text(json.dumps(row, indent=2) + "\n")
        return row
    row = {"status": "converged", **rep.as_dict()}
    (out / f"{tag}.json").write_text(json.dumps(row, indent=2) + "\n")
    kkt = build_oseen_kkt(problem, x[: problem.dofmap.n_v], args.alpha, args.beta, nu)
    save_solution(out / f"{tag}.npz", kkt, x)
    return row


def _fan_out(fn, args, jobs):
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            return list(ex.map(fn, [args] * len(jobs), *zip(*jobs)))
    return [fn(args, *j) for j in jobs]


# ---------------------------------------------------------------- commands

def cmd_stokes_control(args) -> int:
    rows = _fan_out(_stokes_job, args, list(product(args.level, args.beta)))
    print(f"{'l':>3} {'N':>8} {'beta':>8} {'MINRES':>7} {'time/s':>8} {'u^T Q_u u':>12}")
    for r in rows:
        print(f"{r['level']:>3} {r['N']:>8} {r['beta']:>8.0e} {r['iterations']:>7} "
              f"{r.get('wall_time', 0.0):>8.2f} {r['control_energy']:>12.4f}")
    return EXIT_OK if all(r.get("converged", True) for r in rows) else EXIT_NONCONVERGED


def cmd_ns_control(args) -> int:
    rows = _fan_out(_ns_job, args, list(product(args.level, args.nu)))
    print(f"{'nu':>8} {'l':>3} {'avg MINRES (Picard)':>22} {'u^T Q_u u':>12}")
    code = EXIT_OK
    for r in rows:
        if r["status"] == "diverged":
            cell, energy = "---", ""
            code = max(code, EXIT_DIVERGED)
        elif r["status"] == "nonconverged":
            cell, energy = f"no conv. ({r.get('picard_iterations', '?')})", ""
            code = max(code, EXIT_NONCONVERGED)
        else:
            avg = "direct" if args.direct else f"{r['average_minres']:.0f}"
            cell = f"{avg} ({r['picard_iterations']})"
            energy = f"{r['control_energy']:.4f}"
        print(f"{r['nu']:>8.4g} {r['level']:>3} {cell:>22} {energy:>12}")
    return code


def cmd_mass_bounds(args) -> int:
    rows = an.mass_bounds_table()
    an.write_csv(Path(args.out) / "mass_bounds.csv", ["matrix", "lambda_min", "lambda_max"],
                 [(r["matrix"], r["lambda_min"], r["lambda_max"]) for r in rows],
                 "extreme eigenvalues of D_e^-1 Q_e for element mass matrices")
    for r in rows:
        print(f"{r['matrix']:<12} {r['lambda_min']:.4f} {r['lambda_max']:.4f}")
    return EXIT_OK


def cmd_chebyshev(args) -> int:
    rows = []
    for which in ("Q_v", "Q_p", "Q_u"):
        rep = an.mass_spectrum_report(which, args.level, args.cheb_steps)
        rows.append((which, args.level, args.cheb_steps, rep.min, rep.max))
        print(f"{which}: lambda in [1{rep.min - 1:+.3e}, 1{rep.max - 1:+.3e}]")
    an.write_csv(Path(args.out) / "chebyshev_spectrum.csv",
                 ["matrix", "level", "steps", "lambda_min", "lambda_max"], rows,
                 "extreme eigenvalues of the Chebyshev-preconditioned mass matrices")
    return EXIT_OK


def cmd_schur_spectrum(args) -> int:
    rep = an.schur_interlacing_report(args.level, args.alpha, args.beta)
    an.write_csv(Path(args.out) / "schur_spectrum.csv", ["index", "eigenvalue"], rep.rows(),
                 f"generalized eigenvalues of (S, S~), level {args.level}, beta {args.beta:g}")
    outside = int((rep.eigenvalues > 1 + args.eps).sum())
    print(f"n_u = {rep.n_u}; min = {rep.minimum:.12f}; above 1+{args.eps:g}: {outside}; "
          f"largest = {rep.eigenvalues[-1]:.6g}")
    return EXIT_OK


def _converged_wind(level, nu, alpha, beta):
    from .kkt import ChannelProblem
    from .picard import solve_navier_control

    problem = ChannelProblem.build(level)
    x, _ = solve_navier_control(problem, alpha, beta, nu, direct=True)
    return problem, x[: problem.dofmap.n_v]


def cmd_convection(args) -> int:
    problem, wind = _converged_wind(args.level, args.nu, args.alpha, args.beta)
    rows = an.convection_symmetric_report(problem, args.nu, wind, strides=tuple(args.strides))
    an.write_csv(Path(args.out) / "convection_node_elimination.csv",
                 ["matrix", "n_negative", "condition_number", "inflow_mass"],
                 [(r["matrix"], r["n_negative"], r["condition_number"], r["inflow_mass"]) for r in rows],
                 f"symmetric part of the convection-diffusion block, level {args.level}, nu {args.nu:g}")
    spectra = Path(args.out) / "convection_spectra.csv"
    an.write_csv(spectra, ["matrix", "index", "eigenvalue"],
                 [(r["matrix"], i, float(v)) for r in rows for i, v in enumerate(r["eigenvalues"])])
    for r in rows:
        print(f"{r['matrix']:<14} negative {r['n_negative']:>2}  kappa {r['condition_number']:.4e}")
    return EXIT_OK


def cmd_element_elim(args) -> int:
    patterns = [an.parse_pattern(args.pattern)] if args.pattern is not None else list(an.EDGE_PATTERNS)
    rows = []
    for J in patterns:
        rep = an.element_elimination_eigs(J)
        label = "{" + ",".join(map(str, J)) + "}" if J else "{}"
        rows.append((label, rep.min, rep.max))
        print(f"{label:<9} {rep.min:.4f} {rep.max:.4f}")
        if tuple(J) == (1, 5, 7):
            ref = an.element_elimination_eigs((1, 4, 7))
            print(f"note: removing the whole left edge {{1,4,7}} gives {ref.min:.4f} {ref.max:.4f}")
    an.write_csv(Path(args.out) / "node_removal_bounds.csv", ["pattern", "lambda_min", "lambda_max"], rows,
                 "eigenvalue bounds of the Q2 element mass matrix with local nodes removed")
    return EXIT_OK


def cmd_murphy(args) -> int:
    rep = an.murphy_ideal_check(args.level, args.alpha, args.beta, schur=args.schur)
    an.write_csv(Path(args.out) / "murphy_spectrum.csv", ["index", "eigenvalue"],
                 [(i, float(v)) for i, v in enumerate(rep.eigenvalues)],
                 "spectrum of the ideally preconditioned KKT matrix")
    print(f"distance to {{1, (1+-sqrt 5)/2}}: {an.distance_to_golden(rep):.3e}")
    return EXIT_OK


def cmd_interlacing(args) -> int:
    res = an.random_interlacing_trials(args.trials, args.size, tuple(args.ranks), args.seed)
    an.write_csv(Path(args.out) / "interlacing_trials.csv", ["trial", "rank", "passed", "worst_violation"],
                 [(i, r.rank, int(r.passed), r.worst_violation) for i, r in enumerate(res)],
                 "randomized low-rank interlacing checks")
    ok = all(r.passed for r in res)
    print(f"{sum(r.passed for r in res)}/{len(res)} trials {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_export_fields(args) -> int:
    from .control import control_profile
    from .io import load_solution, write_vtk
    from .kkt import control_energy

    kkt, x = load_solution(args.solution)
    stem = Path(args.solution).stem
    out = Path(args.out)
    write_vtk(out / f"{stem}.vtk", kkt, x)
    prof = control_profile(kkt, x)
    an.write_csv(out / f"{stem}_control.csv", ["y", "u_x", "u_y"], [tuple(map(float, r)) for r in prof],
                 "control along the inflow edge")
    print(f"u^T Q_u u = {control_energy(kkt, x):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(p, *, level=None, alpha=True, beta=None):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--jobs", type=int, default=1)
    if level is not None:
        p.add_argument("--level", type=_ints if level == "list" else int,
                       default=[3] if level == "list" else 3)
    if alpha:
        p.add_argument("--alpha", type=float, default=1e-3)
    if beta is not None:
        p.add_argument("--beta", type=_floats if isinstance(beta, list) else float, default=beta)


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--maxit", type=int, default=5000)
    p.add_argument("--cheb-steps", type=int, default=20)
    p.add_argument("--uzawa-steps", type=int, default=None, help="5 for Stokes, 30 for Oseen")
    p.add_argument("--mg-cycles", type=int, default=5)
    p.add_argument("--direct", action="store_true", help="sparse LU instead of preconditioned MINRES")
    p.add_argument("--vtk", action="store_true", help="write legacy VTK fields")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bcprecond", description="Channel boundary control solvers and spectra.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stokes-control", help="Stokes control with the block-diagonal preconditioner")
    _common(p, level="list", beta=[1e-3])
    _solver_flags(p)
    p.set_defaults(func=cmd_stokes_control)

    p = sub.add_parser("ns-control", help="Navier-Stokes control by Picard iteration")
    _common(p, level="list", beta=1.0)
    _solver_flags(p)
    p.add_argument("--nu", type=_floats, default=[0.2], help="comma list; fractions like 1/20 allowed")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--delta", type=float, default=None, help="Uzawa velocity damping (default nu)")
    p.add_argument("--nonlinear-tol", type=float, default=1e-6)
    p.add_argument("--max-nonlinear", type=int, default=40)
    p.set_defaults(func=cmd_ns_control)

    p = sub.add_parser("mass-bounds", help="element mass matrix eigenvalue bounds")
    _common(p, alpha=False)
    p.set_defaults(func=cmd_mass_bounds)

    p = sub.add_parser("chebyshev", help="spectra of Chebyshev-preconditioned mass matrices")
    _common(p, level="int", alpha=False)
    p.add_argument("--cheb-steps", type=int, default=20)
    p.set_defaults(func=cmd_chebyshev)

    p = sub.add_parser("schur-spectrum", help="generalized eigenvalues of (S, S~)")
    _common(p, level="int", beta=1e-3)
    p.add_argument("--eps", type=float, default=0.5)
    p.set_defaults(func=cmd_schur_spectrum)

    p = sub.add_parser("convection", help="negative eigenvalues of F_S and of its node-reduced versions")
    _common(p, level="int", beta=1.0)
    p.add_argument("--nu", type=eval_fraction, default=0.05)
    p.add_argument("--strides", type=_ints, default=[1, 2, 4])
    p.set_defaults(func=cmd_convection)

    p = sub.add_parser("element-elim", help="element mass bounds with inflow-edge nodes removed")
    _common(p, alpha=False)
    p.add_argument("--pattern", default=None, help="comma list of local nodes 1..9 (default: all edge patterns)")
    p.set_defaults(func=cmd_element_elim)

    p = sub.add_parser("murphy", help="ideal block-diagonal preconditioner spectrum")
    _common(p, level="int", beta=1e-3)
    p.add_argument("--schur", choices=("exact", "tilde"), default="exact")
    p.set_defaults(func=cmd_murphy, level=2)

    p = sub.add_parser("interlacing", help="randomized low-rank interlacing checks")
    _common(p, alpha=False)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--size", type=int, default=30)
    p.add_argument("--ranks", type=_ints, default=[1, 2, 3, 4, 5])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_interlacing)

    p = sub.add_parser("export-fields", help="VTK fields and control profile from a saved solution")
    _common(p, alpha=False)
    p.add_argument("solution", help=".npz artifact written by stokes-control or ns-control")
    p.set_defaults(func=cmd_export_fields)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults taken from the ``--config`` file, if any."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    unknown = set(values) - set(actions)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    defaults = {}
    for key, text in values.items():
        act = actions[key]
        if act.const is True and act.nargs == 0:  # store_true
            defaults[key] = text.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = act.type(text) if act.type else text
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0) and EXIT_USAGE
    except BcPrecondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, IoError) else EXIT_ERROR
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        from .io import write_manifest

        cfg = {k: v for k, v in vars(args).items() if k != "func"}
        write_manifest(out / "manifest.json", ["bcprecond"] + argv, cfg, seed=getattr(args, "seed", None))
        np.seterr(over="ignore")
        return args.func(args)
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NonConvergence as exc:
        print(f"not converged: {exc.args[0]}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except CapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BcPrecondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
