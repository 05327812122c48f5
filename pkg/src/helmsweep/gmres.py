"""Left-preconditioned GMRES with residual tracking.

Solves M A u = M f, monitoring the preconditioned relative residual that the
Arnoldi least-squares problem minimizes (full-memory Krylov basis by default,
modified Gram-Schmidt with one conditional reorthogonalization pass).
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from ._threads import limit_blas_threads
from .problem import FieldVector, as_values

__all__ = ["SolveReport", "gmres_solve", "unpreconditioned_residual"]

REORTH_THRESHOLD = 1.0 / np.sqrt(2.0)
BREAKDOWN_ATOL = 1e-300


@dataclass
class SolveReport:
    """Outcome of one preconditioned solve."""

    iterations: int
    residual_history: list
    converged: bool
    breakdown: bool = False
    setup_time: float = 0.0
    solve_time: float = 0.0
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "setup_time": self.setup_time,
            "solve_time": self.solve_time,
            "residual_history": list(map(float, self.residual_history)),
            **self.metadata,
        }

    def to_json(self, path=None, **kwargs):
        text = json.dumps(self.to_dict(), indent=2, **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def residuals_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "preconditioned_relative_residual"])
            for k, r in enumerate(self.residual_history, start=1):
                writer.writerow([k, f"{r:.6e}"])


def unpreconditioned_residual(apply_A, u, f):
    """Plain relative residual ||A u - f|| / ||f|| for reporting."""
    u = as_values(u)
    fv = as_values(f)
    if u.shape != fv.shape:
        raise ValueError("shape mismatch between iterate and right-hand side")
    return float(np.linalg.norm(apply_A(u) - fv) / np.linalg.norm(fv))


def _gmres_cycle(apply_A, apply_M, fv, x0, tol_abs, max_steps, history):
    """One full-memory GMRES cycle from iterate x0; returns (x, done, brk).

    Appends the absolute preconditioned least-squares residual |g_{k+1}| to
    ``history`` once per Arnoldi step.
    """
    n = fv.size
    r = apply_M(fv - apply_A(x0)) if x0 is not None else apply_M(fv)
    beta = np.linalg.norm(r)
    if beta <= tol_abs or beta == 0.0:
        return (x0 if x0 is not None else np.zeros(n, dtype=np.complex128),
                True, False)

    V = np.empty((max_steps + 1, n), dtype=np.complex128)
    H = np.zeros((max_steps + 1, max_steps), dtype=np.complex128)
    cs = np.zeros(max_steps, dtype=np.complex128)
    sn = np.zeros(max_steps, dtype=np.complex128)
    g = np.zeros(max_steps + 1, dtype=np.complex128)
    V[0] = r / beta
    g[0] = beta

    m = 0
    breakdown = False
    for k in range(max_steps):
        # copy: the operators may hand back an alias of their input
        w = np.array(apply_M(apply_A(V[k])), dtype=np.complex128)
        norm_before = np.linalg.norm(w)
        for i in range(k + 1):
            H[i, k] = np.vdot(V[i], w)
            w -= H[i, k] * V[i]
        if np.linalg.norm(w) < REORTH_THRESHOLD * norm_before:
            for i in range(k + 1):
                corr = np.vdot(V[i], w)
                H[i, k] += corr
                w -= corr * V[i]
        hnext = np.linalg.norm(w)
        H[k + 1, k] = hnext

        # rotate the new column through the accumulated Givens rotations,
        # then eliminate the subdiagonal with a fresh one
        for i in range(k):
            t = H[i, k]
            H[i, k] = np.conj(cs[i]) * t + np.conj(sn[i]) * H[i + 1, k]
            H[i + 1, k] = -sn[i] * t + cs[i] * H[i + 1, k]
        denom = np.sqrt(np.abs(H[k, k]) ** 2 + np.abs(H[k + 1, k]) ** 2)
        if denom < BREAKDOWN_ATOL:
            breakdown = True
            history.append(history[-1] if history else beta)
            break
        cs[k] = H[k, k] / denom
        sn[k] = H[k + 1, k] / denom
        H[k, k] = np.conj(cs[k]) * H[k, k] + np.conj(sn[k]) * H[k + 1, k]
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = np.conj(cs[k]) * g[k]

        history.append(abs(g[k + 1]))
        m = k + 1
        if hnext == 0.0:  # happy breakdown: exact solution in this subspace
            break
        V[k + 1] = w / hnext
        if abs(g[m]) <= tol_abs:
            break

    y = np.linalg.solve(H[:m, :m], g[:m]) if m else np.zeros(0, np.complex128)
    dx = V[:m].T @ y
    x = dx if x0 is None else x0 + dx
    done = bool(m == 0 or abs(g[m]) <= tol_abs)
    return x, done, breakdown


def gmres_solve(apply_A, apply_M, f, tol=1e-3, max_iter=200, restart=None,
                metadata=None):
    """Run left-preconditioned GMRES until ||M(Au - f)|| <= tol * ||M f||.

    ``apply_A`` and ``apply_M`` are callables on flat complex vectors;
    ``restart=None`` keeps the whole Krylov basis.  Returns the solution and
    a :class:`SolveReport` whose residual history is the (nonincreasing)
    Arnoldi least-squares sequence, one entry per iteration.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    fv = as_values(f)
    t0 = time.perf_counter()

    mf = apply_M(fv)
    if mf.shape != fv.shape:
        raise ValueError("preconditioner changed the vector length")
    norm_mf = np.linalg.norm(mf)
    if norm_mf == 0.0:
        report = SolveReport(iterations=0, residual_history=[], converged=True,
                             solve_time=time.perf_counter() - t0,
                             metadata=metadata or {})
        out = np.zeros_like(fv)
        return (FieldVector(out, f.n, f.dim) if isinstance(f, FieldVector)
                else out), report

    tol_abs = tol * norm_mf
    cycle = max_iter if restart is None else min(restart, max_iter)

    history_abs = []
    x = None
    done = False
    breakdown = False
    steps_left = max_iter
    with limit_blas_threads():
        while steps_left > 0 and not done and not breakdown:
            steps = min(cycle, steps_left)
            x, done, breakdown = _gmres_cycle(apply_A, apply_M, fv, x, tol_abs,
                                              steps, history_abs)
            steps_left -= steps
            if restart is None:
                break

    history = [min(1.0, r / norm_mf) for r in history_abs]
    # enforce the monotone envelope against rounding jitter across restarts
    for i in range(1, len(history)):
        history[i] = min(history[i], history[i - 1])

    report = SolveReport(
        iterations=len(history),
        residual_history=history,
        converged=bool(done and not breakdown),
        breakdown=bool(breakdown),
        solve_time=time.perf_counter() - t0,
        metadata=metadata or {},
    )
    if isinstance(f, FieldVector):
        return FieldVector(x, f.n, f.dim), report
    return x, report
