"""Benchmark harness: built-in velocity fields, forcings, and case runners.

A case is defined by the frequency (in cycles, ``omega/2pi``), the points
per wavelength ``q`` (so ``n = q * omega/2pi - 1``), a velocity field, a
forcing, and the sweep knobs.  ``run_case`` assembles the plain and shifted
operators, builds the preconditioner from the shifted one, and iterates
GMRES on the plain one to the requested tolerance.  ``run_table`` sweeps
omega or q, reporting each forcing in its own pair of columns with one
shared preconditioner setup per row.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .assembly import assemble_global
from .errors import MemoryGuardError
from .gmres import gmres_solve, unpreconditioned_residual
from .pml import PmlConfig
from .problem import (
    FieldVector,
    Grid,
    HelmholtzProblem,
    read_velocity_file,
    write_field_file,
)
from .sweeping import SweepConfig, build_preconditioner

__all__ = [
    "BenchmarkCase",
    "make_velocity",
    "make_forcing",
    "run_case",
    "run_table",
]

FIELDS = ("constant", "lens", "waveguide", "random", "external-file")
FORCINGS = ("point-source", "wave-packet")

#: velocity formula version; bump if the built-in field definitions change
FIELD_FORMULA_VERSION = 1

LENS_DEPTH = 0.4
LENS_SHARPNESS = 32.0
RANDOM_AMPLITUDE = 0.3
POINT_SOURCE_WIDTH_CELLS = 2.0  # Gaussian std in units of h

DEFAULT_MEMORY_GUARD_GB = 12.0


@dataclass(frozen=True)
class BenchmarkCase:
    """One benchmark configuration; ``n`` follows from omega and q."""

    dim: int = 2
    field_name: str = "lens"
    forcing_name: str = "point-source"
    omega_over_2pi: float = 16.0
    q: float = 8.0
    alpha: float | None = None
    b: int | None = None
    d: int | None = None
    sweep_mode: str = "two-front"
    boundary_mode: str | None = None
    buffer_layers: int = 0
    tol: float = 1e-3
    max_iter: int = 200
    seed: int = 0
    pml_layers: int | None = None
    velocity_file: str | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.field_name not in FIELDS:
            raise ValueError(f"unknown field {self.field_name!r}")
        if self.forcing_name not in FORCINGS:
            raise ValueError(f"unknown forcing {self.forcing_name!r}")

    @property
    def n(self):
        n = int(round(self.q * self.omega_over_2pi)) - 1
        if n < 1:
            raise ValueError("omega and q give an empty grid")
        return n

    @property
    def omega(self):
        return 2.0 * np.pi * self.omega_over_2pi

    def resolved(self):
        """Fill dimension-dependent defaults (2D: alpha 2, b=d=12; 3D: alpha 1,
        b=6, d=3; boundary mode matching the sweep mode)."""
        alpha = self.alpha if self.alpha is not None else (2.0 if self.dim == 2 else 1.0)
        b = self.b if self.b is not None else (12 if self.dim == 2 else 6)
        d = self.d if self.d is not None else (12 if self.dim == 2 else 3)
        boundary = self.boundary_mode
        if boundary is None:
            boundary = ("pml-all-sides" if self.sweep_mode == "two-front"
                        else "pml-three-sides-dirichlet-top")
        pml_layers = self.pml_layers if self.pml_layers is not None else int(round(self.q))
        return replace(self, alpha=alpha, b=b, d=d, boundary_mode=boundary,
                       pml_layers=pml_layers)


def _grid_points(grid):
    axes = (grid.coords(),) * grid.dim
    return np.meshgrid(*axes, indexing="ij")


def make_velocity(case, grid):
    """Velocity samples for the case's field, indexed [i, j(, k)].

    lens:      1 - 0.4 exp(-32 |x - center|^2)
    waveguide: 1 - 0.4 exp(-32 dist^2(x, vertical axis through the center))
    random:    1 + 0.3 * unit-normalized white noise blurred over a wavelength
    """
    if case.field_name == "constant":
        return np.ones(grid.shape)
    if case.field_name == "external-file":
        if not case.velocity_file:
            raise ValueError("external-file field needs velocity_file")
        vel = read_velocity_file(case.velocity_file)
        if vel.shape != grid.shape:
            raise ValueError(
                f"velocity file shape {vel.shape} does not match grid {grid.shape}"
            )
        return vel
    pts = _grid_points(grid)
    if case.field_name == "lens":
        r2 = sum((p - 0.5) ** 2 for p in pts)
        return 1.0 - LENS_DEPTH * np.exp(-LENS_SHARPNESS * r2)
    if case.field_name == "waveguide":
        # guide runs along the sweep axis; distance is transversal only
        r2 = sum((p - 0.5) ** 2 for p in pts[:-1])
        return 1.0 - LENS_DEPTH * np.exp(-LENS_SHARPNESS * r2)
    # random: seeded noise smoothed over one wavelength (q grid points)
    rng = np.random.default_rng(case.seed)
    noise = rng.standard_normal(grid.shape)
    noise = gaussian_filter(noise, sigma=case.q, mode="reflect")
    peak = np.abs(noise).max()
    if peak > 0:
        noise /= peak
    return 1.0 + RANDOM_AMPLITUDE * noise


def _forcing_centers(case):
    if case.forcing_name == "point-source":
        return (0.5, 0.125) if case.dim == 2 else (0.5, 0.5, 0.25)
    return (0.125, 0.125) if case.dim == 2 else (0.5, 0.25, 0.25)


def make_forcing(case, grid):
    """Forcing samples as a FieldVector.

    point-source: Gaussian bump of std 2h, normalized to unit discrete mass;
    wave-packet: Gaussian envelope one wavelength wide riding a plane wave
    along the diagonal direction ((1,1) in 2D, (0,1,1) in 3D).
    """
    pts = _grid_points(grid)
    center = _forcing_centers(case)
    r2 = sum((p - c) ** 2 for p, c in zip(pts, center))
    if case.forcing_name == "point-source":
        width = POINT_SOURCE_WIDTH_CELLS * grid.h
        g = np.exp(-r2 / (2.0 * width**2))
        g = g / (g.sum() * grid.h**grid.dim)
        return FieldVector.from_grid_array(g)
    lam = 2.0 * np.pi / case.omega
    direction = (1.0, 1.0) if case.dim == 2 else (0.0, 1.0, 1.0)
    direction = np.asarray(direction) / np.linalg.norm(direction)
    phase = sum(k * p for k, p in zip(direction, pts))
    g = np.exp(-r2 / (2.0 * lam**2)) * np.exp(1j * case.omega * phase)
    return FieldVector.from_grid_array(g)


def _estimate_bytes(case):
    """Crude peak-memory estimate: operators, panel factors, Krylov basis."""
    n = case.n
    N = n**case.dim
    stencil = 2 * case.dim + 1
    operators = 2 * N * stencil * 20  # two assemblies, CSR overhead included
    krylov = (min(case.max_iter, 60) + 4) * N * 16
    depth = case.b + case.d - 1 + case.buffer_layers
    if case.dim == 2:
        band = (3 * depth + 1) * depth  # factor rows per transversal position
        panels = (n // max(case.d, 1) + 2) * n * band * 16
    else:
        # nested-dissection fill: ~ depth^2 * n^2 * log2(n) entries per panel
        per_panel = depth**2 * n * n * max(np.log2(n), 1.0) * 16
        panels = (n // max(case.d, 1) + 2) * per_panel
    return int(operators + krylov + panels)


def _prepare(case, memory_guard_gb=None):
    """Resolve the case, apply the memory guard, assemble and factorize.

    Returns (case, grid, system, preconditioner, setup_seconds).
    """
    case = case.resolved()
    guard = DEFAULT_MEMORY_GUARD_GB if memory_guard_gb is None else memory_guard_gb
    estimate = _estimate_bytes(case)
    if estimate > guard * 2**30:
        raise MemoryGuardError(
            f"case needs an estimated {estimate / 2**30:.1f} GiB "
            f"(guard: {guard:.1f} GiB)",
            estimated_bytes=estimate,
        )
    grid = Grid(n=case.n, dim=case.dim)
    pml = PmlConfig.from_layers(case.pml_layers, grid.h)
    velocity = make_velocity(case, grid)
    problem = HelmholtzProblem(grid=grid, omega=case.omega, velocity=velocity,
                               pml=pml, alpha=0.0,
                               boundary_mode=case.boundary_mode, q=case.q)
    t0 = time.perf_counter()
    system = assemble_global(problem)
    config = SweepConfig(b=case.b, d=case.d, alpha=case.alpha,
                         sweep_mode=case.sweep_mode,
                         buffer_layers=case.buffer_layers)
    precond = build_preconditioner(problem.with_alpha(case.alpha), config)
    return case, grid, system, precond, time.perf_counter() - t0


def _solve_prepared(case, grid, system, precond, setup_time):
    forcing = make_forcing(case, grid)
    matrix = system.matrix
    u, report = gmres_solve(lambda v: matrix @ v, precond.apply, forcing,
                            tol=case.tol, max_iter=case.max_iter)
    report.setup_time = setup_time
    report.metadata.update({
        "omega_over_2pi": case.omega_over_2pi,
        "q": case.q,
        "n": case.n,
        "N": grid.N,
        "dim": case.dim,
        "field": case.field_name,
        "forcing": case.forcing_name,
        "alpha": case.alpha,
        "b": case.b,
        "d": case.d,
        "sweep_mode": case.sweep_mode,
        "boundary_mode": case.boundary_mode,
        "buffer_layers": case.buffer_layers,
        "tol": case.tol,
        "seed": case.seed,
        "field_formula_version": FIELD_FORMULA_VERSION,
        "unpreconditioned_residual": unpreconditioned_residual(
            lambda v: matrix @ v, u, forcing),
        "preconditioner": precond.stats(),
    })
    return report, u


def run_case(case, out_dir=None, save_field=False, memory_guard_gb=None,
             case_label=None):
    """Assemble, precondition and solve one case; returns (report, solution).

    Writes the report JSON, residual CSV and (optionally) the solution field
    into ``out_dir`` when given.
    """
    prepared = _prepare(case, memory_guard_gb)
    report, u = _solve_prepared(*prepared)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        label = case_label or _case_label(prepared[0])
        report.to_json(out_dir / f"{label}.json")
        report.residuals_to_csv(out_dir / f"{label}.residuals.csv")
        if save_field:
            write_field_file(out_dir / f"{label}.field", u,
                             metadata={"case": asdict(prepared[0])})
    return report, u


def _case_label(case):
    return (f"{case.dim}d_{case.field_name}_{case.forcing_name}"
            f"_om{case.omega_over_2pi:g}_q{case.q:g}")


def _sweep_row(args):
    """One table row: shared setup, then one solve per forcing."""
    case, forcings, out_dir, save_fields, guard = args
    row = {
        "omega_over_2pi": case.omega_over_2pi,
        "q": case.q,
        "N": "",
        "field": case.field_name,
        "T_setup": "",
        "error": "",
    }
    for fo in forcings:
        row[f"N_iter[{fo}]"] = ""
        row[f"T_solve[{fo}]"] = ""
    try:
        prepared = _prepare(case, guard)
        rcase, grid, system, precond, setup_time = prepared
        row["N"] = grid.N
        row["T_setup"] = f"{setup_time:.3f}"
        for fo in forcings:
            fcase = replace(rcase, forcing_name=fo)
            report, u = _solve_prepared(fcase, grid, system, precond,
                                        setup_time)
            row[f"N_iter[{fo}]"] = report.iterations
            row[f"T_solve[{fo}]"] = f"{report.solve_time:.3f}"
            if not report.converged:
                row["error"] = f"not converged for {fo}"
            if out_dir is not None:
                out = Path(out_dir)
                out.mkdir(parents=True, exist_ok=True)
                label = _case_label(fcase)
                report.to_json(out / f"{label}.json")
                if save_fields:
                    write_field_file(out / f"{label}.field", u,
                                     metadata={"case": asdict(fcase)})
    except Exception as exc:  # failed rows keep the sweep going
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_table(vary, values, base_case, forcings=FORCINGS, out_dir=None,
              save_fields=False, workers=1, memory_guard_gb=None):
    """Run a sweep over omega or q; one row per value, columns per forcing.

    Rows keep the submission order even when cases run in parallel; per-case
    failures are recorded in the row's error column and do not abort the
    sweep.
    """
    if vary not in ("omega", "q"):
        raise ValueError("vary must be 'omega' or 'q'")
    values = list(values)
    if not values:
        raise ValueError("sweep values must be nonempty")
    forcings = tuple(forcings)
    if not forcings:
        raise ValueError("forcing list must be nonempty")
    for fo in forcings:
        if fo not in FORCINGS:
            raise ValueError(f"unknown forcing {fo!r}")
    cases = []
    for v in values:
        if vary == "omega":
            cases.append(replace(base_case, omega_over_2pi=float(v)))
        else:
            cases.append(replace(base_case, q=float(v)))
    jobs = [(c, forcings, out_dir, save_fields, memory_guard_gb)
            for c in cases]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_table_csv(out_dir / f"table_{vary}_sweep.csv", rows)
    return rows


def write_table_csv(path, rows):
    cols = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        writer.writerows(rows)
