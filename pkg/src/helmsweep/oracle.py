"""Exact layer-by-layer elimination, kept as a correctness oracle.

Stores every layer's Schur-complement inverse densely, so the cost is
O(n_layers * layer_size^3) and use is restricted to small problems.  The
solve runs the three sweeps (forward elimination, diagonal application,
backward substitution) over the layer blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from ._threads import limit_blas_threads
from .errors import FactorizationError
from .problem import FieldVector, as_values

__all__ = ["ExactSweepFactorization", "exact_factorize", "exact_solve"]

MAX_LAYER_SIZE = 512
PIVOT_RTOL = 1e-13


def _invert(dense, m):
    lu, piv = la.lu_factor(dense, check_finite=False)
    bound = PIVOT_RTOL * max(np.abs(dense).max(), 1e-300)
    if (np.abs(np.diag(lu)) < bound).any():
        raise FactorizationError(
            f"singular layer Schur complement at layer {m}", where=m
        )
    return la.lu_solve((lu, piv), np.eye(dense.shape[0], dtype=np.complex128),
                       check_finite=False)


@dataclass
class ExactSweepFactorization:
    """Dense Schur-complement inverses T_m for every layer, bottom to top."""

    schur_inverses: list = field(repr=False)
    system: object = None

    @property
    def n_layers(self):
        return len(self.schur_inverses)

    def schur_inverse(self, m):
        return self.schur_inverses[m]


def exact_factorize(system):
    """Eliminate layers in order, storing each Schur-complement inverse.

    ``system`` is a :class:`~helmsweep.assembly.BlockTridiagonalSystem`.
    """
    ls = system.layer_size
    if ls > MAX_LAYER_SIZE:
        raise ValueError(
            f"layer size {ls} exceeds the dense-oracle limit {MAX_LAYER_SIZE}"
        )
    t_mats = []
    with limit_blas_threads():
        schur = system.diag_block(0).toarray()
        t_mats.append(_invert(schur, 0))
        for m in range(1, system.n_layers):
            d = system.off_block(m - 1)
            # off-diagonal blocks are diagonal, so the triple product is a
            # two-sided diagonal scaling of T_{m-1}
            schur = system.diag_block(m).toarray() - (d[:, None] * t_mats[-1]) * d[None, :]
            t_mats.append(_invert(schur, m))
    return ExactSweepFactorization(schur_inverses=t_mats, system=system)


def exact_solve(fact, f):
    """Apply the factorization: u with A u = f, via the three sweeps."""
    system = fact.system
    ls = system.layer_size
    n = system.n_layers
    values = as_values(f)
    if values.shape != (n * ls,):
        raise ValueError(f"rhs length {values.shape} does not match system")
    u = values.reshape(n, ls).copy()

    cache = [None] * n
    for m in range(n - 1):
        w = fact.schur_inverses[m] @ u[m]
        cache[m] = w
        u[m + 1] -= system.off_block(m) * w
    cache[n - 1] = fact.schur_inverses[n - 1] @ u[n - 1]

    for m in range(n):
        u[m] = cache[m]

    for m in range(n - 2, -1, -1):
        u[m] -= fact.schur_inverses[m] @ (system.off_block(m) * u[m + 1])

    out = u.ravel()
    if isinstance(f, FieldVector):
        return FieldVector(out, f.n, f.dim)
    return out
