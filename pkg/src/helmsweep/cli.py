"""Command-line interface.

Verbs:
  solve         run one benchmark case and write its report
  table         omega- or q-sweep, one CSV row per value
  probe-schur   probe the moving-layer approximation error at one layer
  oracle-check  compare the preconditioner against the exact elimination

A JSON config file (``--config``) may predefine any case key; explicit CLI
flags override config values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .assembly import assemble_global
from .bench import BenchmarkCase, make_forcing, make_velocity, run_case, run_table
from .gmres import gmres_solve
from .oracle import exact_factorize, exact_solve
from .pml import PmlConfig
from .problem import Grid, HelmholtzProblem
from .sweeping import SweepConfig, build_preconditioner, schur_approx_error

SWEEP_FLAG_TO_MODE = {"single": "single-front", "two-front": "two-front"}


def _add_case_flags(p):
    p.add_argument("--config", type=Path, help="JSON file with case defaults")
    p.add_argument("--dim", type=int, choices=(2, 3))
    p.add_argument("--omega", type=float,
                   help="frequency in cycles per unit length (omega / 2 pi)")
    p.add_argument("--q", type=float, help="grid points per wavelength")
    p.add_argument("--field", choices=("constant", "lens", "waveguide",
                                       "random", "external-file"))
    p.add_argument("--velocity-file", type=Path,
                   help="raw binary velocity grid for --field external-file")
    p.add_argument("--forcing", choices=("point-source", "wave-packet"))
    p.add_argument("--alpha", type=float, help="complex shift of the preconditioner")
    p.add_argument("--pml-b", type=int, dest="pml_b",
                   help="moving absorbing-layer width in grid layers")
    p.add_argument("--panel-d", type=int, dest="panel_d",
                   help="layers eliminated per sweep step")
    p.add_argument("--buffer-layers", type=int, dest="buffer_layers")
    p.add_argument("--sweep", choices=tuple(SWEEP_FLAG_TO_MODE))
    p.add_argument("--tol", type=float, help="GMRES relative tolerance (default 1e-3)")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--seed", type=int, help="seed for the random velocity field")
    p.add_argument("--boundary-pml-layers", type=int, dest="pml_layers",
                   help="boundary absorbing-layer width (default: one wavelength)")
    p.add_argument("--memory-guard-gb", type=float, dest="memory_guard_gb")
    p.add_argument("--out", type=Path, help="output directory")


_FLAG_TO_CASE_KEY = {
    "dim": "dim",
    "omega": "omega_over_2pi",
    "q": "q",
    "field": "field_name",
    "forcing": "forcing_name",
    "alpha": "alpha",
    "pml_b": "b",
    "panel_d": "d",
    "buffer_layers": "buffer_layers",
    "tol": "tol",
    "max_iter": "max_iter",
    "seed": "seed",
    "pml_layers": "pml_layers",
}


def _case_from_args(args):
    keys = {f.name for f in dataclasses.fields(BenchmarkCase)}
    values = {}
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        unknown = set(loaded) - keys
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for flag, key in _FLAG_TO_CASE_KEY.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if getattr(args, "sweep", None):
        values["sweep_mode"] = SWEEP_FLAG_TO_MODE[args.sweep]
    if getattr(args, "velocity_file", None):
        values["velocity_file"] = str(args.velocity_file)
    return BenchmarkCase(**values)


def _cmd_solve(args):
    case = _case_from_args(args)
    report, _ = run_case(case, out_dir=args.out, save_field=args.save_field,
                         memory_guard_gb=args.memory_guard_gb)
    print(report.to_json())
    return 0 if report.converged else 1


def _cmd_table(args):
    case = _case_from_args(args)
    values = [float(v) for v in args.values.split(",")]
    rows = run_table(args.vary, values, case, out_dir=args.out,
                     save_fields=args.save_field, workers=args.workers,
                     memory_guard_gb=args.memory_guard_gb)
    cols = list(rows[0].keys())
    print("\t".join(cols))
    for row in rows:
        print("\t".join(str(row[c]) for c in cols))
    return 0 if all(not r["error"] for r in rows) else 1


def _small_problem(case, alpha):
    case = case.resolved()
    grid = Grid(n=case.n, dim=case.dim)
    velocity = make_velocity(case, grid)
    return case, grid, HelmholtzProblem(
        grid=grid, omega=case.omega, velocity=velocity,
        pml=PmlConfig.from_layers(case.pml_layers, grid.h), alpha=alpha,
        boundary_mode=case.boundary_mode, q=case.q)


def _cmd_probe_schur(args):
    case = _case_from_args(args)
    case, grid, problem = _small_problem(case, case.resolved().alpha or 0.0)
    config = SweepConfig(b=case.b, d=1, alpha=problem.alpha,
                         sweep_mode="single-front",
                         buffer_layers=case.buffer_layers)
    err = schur_approx_error(problem, config, args.layer,
                             probe_count=args.probes, seed=case.seed)
    out = {"layer": args.layer, "b": case.b, "alpha": problem.alpha,
           "n": grid.n, "dim": grid.dim, "relative_error": err}
    print(json.dumps(out, indent=2))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "schur_probe.json").write_text(json.dumps(out, indent=2))
    return 0


def _cmd_oracle_check(args):
    case = _case_from_args(args)
    rcase = case.resolved()
    case, grid, problem = _small_problem(case, 0.0)
    if grid.layer_size > 512:
        raise SystemExit("oracle-check is desk-scale only (layer size <= 512)")
    system = assemble_global(problem)
    f = make_forcing(case, grid)
    fact = exact_factorize(system)
    u_exact = exact_solve(fact, f)
    resid_exact = float(np.linalg.norm(system.matrix @ u_exact.values - f.values)
                        / np.linalg.norm(f.values))

    config = SweepConfig(b=case.b, d=case.d, alpha=rcase.alpha,
                         sweep_mode=case.sweep_mode,
                         buffer_layers=case.buffer_layers)
    precond = build_preconditioner(problem.with_alpha(rcase.alpha), config)
    matrix = system.matrix
    u, report = gmres_solve(lambda v: matrix @ v, precond.apply, f,
                            tol=case.tol, max_iter=case.max_iter)
    diff = float(np.linalg.norm(u.values - u_exact.values)
                 / np.linalg.norm(u_exact.values))
    out = {
        "n": grid.n,
        "dim": grid.dim,
        "exact_solve_residual": resid_exact,
        "gmres_iterations": report.iterations,
        "gmres_converged": report.converged,
        "solution_vs_exact_relative_error": diff,
    }
    print(json.dumps(out, indent=2))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "oracle_check.json").write_text(json.dumps(out, indent=2))
    return 0 if report.converged else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="helmsweep",
        description="Helmholtz solver benchmarks with a moving-layer sweeping "
                    "preconditioner")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one case")
    _add_case_flags(p)
    p.add_argument("--save-field", action="store_true",
                   help="dump the solution field next to the report")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("table", help="omega- or q-sweep")
    _add_case_flags(p)
    p.add_argument("--vary", choices=("omega", "q"), required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values, e.g. 16,32,64")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--save-field", action="store_true")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("probe-schur",
                       help="moving-layer approximation error at one layer")
    _add_case_flags(p)
    p.add_argument("--layer", type=int, required=True,
                   help="0-based layer index to probe")
    p.add_argument("--probes", type=int, default=5)
    p.set_defaults(func=_cmd_probe_schur)

    p = sub.add_parser("oracle-check",
                       help="exact elimination vs preconditioned solve, desk scale")
    _add_case_flags(p)
    p.set_defaults(func=_cmd_oracle_check)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
