"""LU factorization and solves for banded complex matrices.

Backed by LAPACK's partial-pivoting band routines (zgbtrf / zgbtrs) in the
widened-band storage convention: the factor array has ``2*kl + ku + 1`` rows
so row interchanges can fill up to ``kl + ku`` superdiagonals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import get_lapack_funcs

from .errors import FactorizationError

__all__ = ["BandedFactor", "banded_factorize", "banded_solve"]

PIVOT_RTOL = 1e-13

_gbtrf, _gbtrs = get_lapack_funcs(
    ("gbtrf", "gbtrs"), (np.empty((1, 1), dtype=np.complex128),)
)


@dataclass
class BandedFactor:
    """PA = LU of a banded matrix, stored in packed band layout."""

    size: int
    lower_bw: int
    upper_bw: int
    lu: np.ndarray = field(repr=False)
    ipiv: np.ndarray = field(repr=False)

    @property
    def nnz(self):
        """Entries held by the packed factor storage."""
        return self.lu.size


def _band_storage(matrix, kl, ku):
    """Scatter a sparse/dense matrix into gbtrf band storage."""
    if sp.issparse(matrix):
        coo = matrix.tocoo()
        rows, cols = coo.row, coo.col
        vals = np.asarray(coo.data, dtype=np.complex128)
        size = matrix.shape[0]
    else:
        dense = np.asarray(matrix)
        rows, cols = np.nonzero(dense)
        vals = dense[rows, cols].astype(np.complex128)
        size = dense.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if rows.size:
        diff = rows - cols
        if diff.max(initial=0) > kl or -diff.min(initial=0) > ku:
            raise ValueError(
                f"entries outside declared band (kl={kl}, ku={ku})"
            )
    ab = np.zeros((2 * kl + ku + 1, size), dtype=np.complex128, order="F")
    ab[kl + ku + rows - cols, cols] = vals
    absmax = np.abs(vals).max() if vals.size else 0.0
    return ab, size, absmax


def banded_factorize(matrix, lower_bw, upper_bw):
    """Band LU with partial pivoting; ``lower_bw``/``upper_bw`` must bound
    every nonzero of ``matrix`` (sparse or dense).

    Raises :class:`FactorizationError` naming the row when a pivot falls
    below ``1e-13`` times the largest input entry.
    """
    kl, ku = int(lower_bw), int(upper_bw)
    if kl < 0 or ku < 0:
        raise ValueError("bandwidths must be nonnegative")
    ab, size, absmax = _band_storage(matrix, kl, ku)
    lu, ipiv, info = _gbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"illegal gbtrf argument {-info}")
    tol = PIVOT_RTOL * absmax
    udiag = np.abs(lu[kl + ku, :])
    if info > 0 or (udiag < tol).any():
        row = int(np.argmin(udiag)) if info == 0 else int(info - 1)
        raise FactorizationError(
            f"pivot below tolerance at row {row}", where=row
        )
    return BandedFactor(size=size, lower_bw=kl, upper_bw=ku, lu=lu, ipiv=ipiv)


def banded_solve(factor, rhs):
    """Solve against a :class:`BandedFactor`; ``rhs`` may be a vector or a
    matrix of stacked right-hand-side columns."""
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape[0] != factor.size:
        raise ValueError(
            f"rhs length {rhs.shape[0]} does not match size {factor.size}"
        )
    x, info = _gbtrs(factor.lu, factor.lower_bw, factor.upper_bw, rhs,
                     factor.ipiv)
    if info != 0:
        raise FactorizationError(f"band solve failed with info={info}")
    return x
