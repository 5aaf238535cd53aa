"""Command-line front end.

Usage::

    python -m savanna_pdmp <subcommand> [options]

Subcommands: ``simulate``, ``phase``, ``ensemble``, ``fpe``,
``stationary-compare``, ``verify``. Model parameters come from the built-in
figure defaults, then ``--params FILE`` (``key = value`` lines), then
individual flags; later sources win.

Exit codes:

===  =====================================================
0    success
1    unexpected internal error
2    usage error or unknown subcommand
3    configuration error (unreadable or malformed file)
4    invalid model parameters
5    invalid numeric option or input data
6    steady-state iteration did not converge
7    numerical failure (integrator, intensity bound, flux)
8    certificate construction failed
===  =====================================================

On failure a single JSON record ``{"error", "message", "exit_code"}`` is
written to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from .core import figure_params, validate_params
from .ensemble import (
    DEFAULT_SEED,
    DensityGrid,
    l1_distance,
    read_grid,
    run_ensemble,
    stationary_estimate,
    write_grid,
    write_report,
)
from .flow import equilibria, phase_curves
from .kvfile import FORMAT_VERSION, read_kv, write_kv
from .pdmp import RngStream, simulate, write_trajectory_csv
from .verify import certificate_report

SUBCOMMANDS = ("simulate", "phase", "ensemble", "fpe", "stationary-compare", "verify")

EXIT_CODES = {
    "UsageError": 2,
    "UnknownSubcommand": 2,
    "ConfigError": 3,
    "ParameterError": 4,
    "DomainError": 5,
    "TimeOutOfRange": 5,
    "GridMismatch": 5,
    "CflViolation": 5,
    "InvalidResolution": 5,
    "NotConverged": 6,
    "IntegratorFailure": 7,
    "InvalidBound": 7,
    "NegativeDensity": 7,
    "DomainConsistencyError": 7,
    "NoDeltaFound": 8,
    "ScheduleNotFound": 8,
}

FIGURE1_PANELS = {"left": (0.08, 1.5), "right": (0.25, 0.5)}

PARAM_FLAGS = {
    "r_w": "r_w",
    "r_g": "r_g",
    "M_w": "M_w",
    "M_g": "M_g",
    "lambda_c": "lambda.c",
    "lambda_p": "lambda.p",
    "lambda_sup": "lambda.sup",
}


class UsageError(errors.SavannaError):
    pass


class UnknownSubcommand(UsageError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _exit_code(exc: Exception) -> int:
    for cls in type(exc).__mro__:
        if cls.__name__ in EXIT_CODES:
            return EXIT_CODES[cls.__name__]
    if isinstance(exc, errors.ParameterError):
        return 4
    return 1


def _add_param_flags(p):
    p.add_argument("--params", help="parameter file (key = value lines)")
    for flag in PARAM_FLAGS:
        p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=float)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _grid(values):
    n_w, n_g = values
    return int(n_w), int(n_g)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="savanna_pdmp", description="Tree-grass fire model toolkit")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="write one trajectory as CSV")
    _add_param_flags(p)
    p.add_argument("--w0", type=float, default=0.1)
    p.add_argument("--g0", type=float, default=0.2)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--dt", type=float, default=0.1, help="flow sampling interval in the CSV")
    p.add_argument("--index", type=int, default=0, help="random stream index")
    p.add_argument("--fire-mode", choices=("stochastic", "periodic"), default="stochastic")
    p.add_argument("--tau-fixed", type=float)
    p.add_argument("--method", choices=("thinning", "inversion"), default="thinning")
    p.add_argument("--out", required=True)

    p = sub.add_parser("phase", help="fire-free solution curves and nullclines")
    _add_param_flags(p)
    p.add_argument("--figure1", action="store_true", help="both phase-portrait parameter sets")
    p.add_argument("--t-end", type=float, default=80.0)
    p.add_argument("--n-starts", type=int, default=6, help="start points per square edge")
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("ensemble", help="Monte Carlo density snapshots")
    _add_param_flags(p)
    p.add_argument("--w0", type=float, default=0.1)
    p.add_argument("--g0", type=float, default=0.2)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--times", type=float, nargs="+", default=[25.0, 50.0, 100.0, 200.0, 400.0])
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("N_W", "N_G"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="report directory")

    p = sub.add_parser("fpe", help="evolve or solve the density equation")
    _add_param_flags(p)
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("N_W", "N_G"))
    p.add_argument("--initial", help="initial grid file (default: uniform)")
    p.add_argument("--T", type=float, help="evolve for this time instead of solving for steady state")
    p.add_argument("--dt", default="auto")
    p.add_argument("--residual-tol", type=float, default=1e-8)
    p.add_argument("--t-max", type=float, default=5000.0)
    p.add_argument("--gain", choices=("push", "pull"), default="push")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("stationary-compare", help="Monte Carlo vs density-equation stationary law")
    _add_param_flags(p)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--burn-in", type=float, default=500.0)
    p.add_argument("--grid", type=int, nargs=2, default=[64, 64], metavar=("N_W", "N_G"))
    p.add_argument("--residual-tol", type=float, default=1e-8)
    p.add_argument("--t-max", type=float, default=5000.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("verify", help="numerical certificates")
    _add_param_flags(p)
    p.add_argument("--points", type=int, default=10_000)
    p.add_argument("--reach", type=int, default=20)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--resolution", type=int, default=400)
    p.add_argument("--out", required=True, help="report file")
    return parser


def load_params(args):
    """Defaults, then ``--params`` file, then flags."""
    base = figure_params()
    raw = {"r_w": base.r_w, "r_g": base.r_g, "M_w": base.M_w, "M_g": base.M_g}
    if args.params:
        raw.update(read_kv(args.params))
    for flag, key in PARAM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = value
    return validate_params(raw)


def _cmd_simulate(args):
    params = load_params(args)
    traj = simulate(
        params,
        (args.w0, args.g0),
        args.horizon,
        RngStream(args.seed, args.index),
        fire_mode=args.fire_mode,
        tau_fixed=args.tau_fixed,
        method=args.method,
    )
    write_trajectory_csv(traj, args.out, dt=args.dt)


def _phase_starts(n):
    edge = np.linspace(0.0, 1.0, n + 2)[1:-1]
    starts = [(a, 1.0) for a in edge] + [(a, 0.02) for a in edge]
    starts += [(0.01, b) for b in edge] + [(1.0, b) for b in edge]
    return starts


def _write_phase(path, params, args):
    lines = ["kind,curve,t,w,g"]
    for c, (t, w, g) in enumerate(phase_curves(params, _phase_starts(args.n_starts), args.t_end, args.n_points)):
        for ti, wi, gi in zip(t, w, g):
            lines.append(f"trajectory,{c},{ti!r},{wi!r},{gi!r}")
    s = np.linspace(0.0, 1.0, 101)
    nullclines = {
        "w_nullcline_w0": (np.zeros_like(s), s),
        "w_nullcline_w1": (np.ones_like(s), s),
        "g_nullcline_g0": (s, np.zeros_like(s)),
        "g_nullcline_diag": (s, 1.0 - s),
    }
    for name, (w, g) in nullclines.items():
        for wi, gi in zip(w, g):
            lines.append(f"{name},-1,0.0,{float(wi)!r},{float(gi)!r}")
    for eq in equilibria(params):
        lines.append(f"equilibrium:{eq.classification.replace(' ', '_')},-1,0.0,{eq.location.w!r},{eq.location.g!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _cmd_phase(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = load_params(args)
    if args.figure1:
        for panel, (r_w, r_g) in FIGURE1_PANELS.items():
            p = validate_params({"r_w": r_w, "r_g": r_g, "M_w": params.M_w, "M_g": params.M_g})
            _write_phase(out / f"phase_{panel}_rw{r_w}_rg{r_g}.csv", p, args)
    else:
        _write_phase(out / f"phase_rw{params.r_w}_rg{params.r_g}.csv", params, args)


def _cmd_ensemble(args):
    params = load_params(args)
    report = run_ensemble(
        params, (args.w0, args.g0), args.n, sorted(args.times), _grid(args.grid), args.seed, args.workers
    )
    write_report(args.out, report)


def _cmd_fpe(args):
    from .fokker_planck import evolve, stationary_fpe

    params = load_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_w, n_g = _grid(args.grid)
    f0 = read_grid(args.initial) if args.initial else DensityGrid.uniform(n_w, n_g)
    dt = args.dt if args.dt == "auto" else float(args.dt)
    if args.T is not None:
        result = evolve(params, f0, args.T, dt=dt, gain=args.gain)
        write_grid(out / "grid.txt", result)
        write_kv(out / "report.txt", {"format_version": FORMAT_VERSION, "kind": "fpe-evolve", "T": args.T, "mass": result.mass()})
        return
    try:
        res = stationary_fpe(params, (n_w, n_g), args.residual_tol, args.t_max, f0=f0, gain=args.gain)
    except errors.NotConverged as exc:
        write_grid(out / "grid.txt", exc.last)
        write_kv(out / "report.txt", {"format_version": FORMAT_VERSION, "kind": "fpe-stationary", "converged": False, "residual": exc.residual, "t": exc.t})
        raise
    write_grid(out / "grid.txt", res.grid)
    write_kv(
        out / "report.txt",
        {
            "format_version": FORMAT_VERSION,
            "kind": "fpe-stationary",
            "converged": True,
            "residual": res.residual,
            "t": res.t,
            "degenerate": res.degenerate,
        },
    )


def _cmd_stationary_compare(args):
    from .fokker_planck import stationary_fpe

    params = load_params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = _grid(args.grid)
    mc = stationary_estimate(params, args.burn_in, args.n, grid=grid, seed=args.seed, workers=args.workers)
    pde = stationary_fpe(params, grid, args.residual_tol, args.t_max)
    write_grid(out / "mc.txt", mc.grid)
    write_grid(out / "fpe.txt", pde.grid)
    write_kv(
        out / "compare.txt",
        {
            "format_version": FORMAT_VERSION,
            "kind": "stationary-compare",
            "n": args.n,
            "burn_in": args.burn_in,
            "seed": args.seed,
            "n_w": grid[0],
            "n_g": grid[1],
            "fpe_residual": pde.residual,
            "mc_boundary_mass": mc.grid.boundary_mass,
            "l1_distance": l1_distance(mc.grid, pde.grid),
        },
    )


def _cmd_verify(args):
    params = load_params(args)
    record = {"format_version": FORMAT_VERSION, "kind": "verify"}
    record.update(
        certificate_report(params, args.points, args.reach, args.epsilon, args.seed, args.resolution)
    )
    write_kv(args.out, record)


COMMANDS = {
    "simulate": _cmd_simulate,
    "phase": _cmd_phase,
    "ensemble": _cmd_ensemble,
    "fpe": _cmd_fpe,
    "stationary-compare": _cmd_stationary_compare,
    "verify": _cmd_verify,
}


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv or argv[0] not in SUBCOMMANDS:
            if argv and argv[0] in ("-h", "--help"):
                build_parser().print_help()
                return 0
            raise UnknownSubcommand(
                f"expected one of {', '.join(SUBCOMMANDS)}; got {argv[0] if argv else 'nothing'}"
            )
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        COMMANDS[args.command](args)
        return 0
    except Exception as exc:
        code = _exit_code(exc)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(record), file=sys.stderr)
        return code


def main():
    sys.exit(dispatch())
