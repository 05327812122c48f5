"""Sparse direct solver for quasi-2D slabs via nested dissection.

The unknowns live on an ``nx * ny`` plane of positions, each carrying a
column of ``depth`` unknowns (the sweep coordinate).  The plane is split
recursively by one-line separators; every plane position keeps its whole
depth-column in one group, so elimination works on dense frontal blocks of
``group positions * depth`` unknowns.  Fill stays confined to each group's
ancestor separators, which is what makes the factorization cheap.

The matrix must be given in sweep-inner ordering: unknown ``p * depth + t``
for plane position ``p = j * nx + i`` and sweep offset ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ._threads import limit_blas_threads
from .errors import FactorizationError

__all__ = [
    "DissectionOrdering",
    "nested_dissection_order",
    "MultifrontalFactor",
    "mf_factorize",
    "mf_solve",
    "read_coo_text",
]

PIVOT_RTOL = 1e-13
DEFAULT_LEAF_SIZE = 8

# raw LAPACK handles: the solve path runs thousands of small fronts, where
# the scipy wrappers' per-call validation would dominate
_getrf, _getrs = la.get_lapack_funcs(
    ("getrf", "getrs"), (np.empty((1, 1), dtype=np.complex128),)
)


@dataclass
class DissectionOrdering:
    """Hierarchical elimination ordering of plane positions.

    ``groups[g]`` is the array of plane positions eliminated together at step
    ``g``; ``parent[g]`` is the separator group that splits the box around
    ``g`` (-1 for the root).  Groups are listed in elimination (post) order.
    """

    nx: int
    ny: int
    depth: int
    leaf_size: int
    groups: list = field(repr=False)
    parent: np.ndarray = field(repr=False)

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def n_positions(self):
        return self.nx * self.ny

    @property
    def size(self):
        return self.nx * self.ny * self.depth

    def ancestors(self, g):
        """Separator chain from ``g`` up to the root."""
        chain = []
        p = self.parent[g]
        while p >= 0:
            chain.append(int(p))
            p = self.parent[p]
        return chain


def nested_dissection_order(nx, ny, depth, leaf_size=DEFAULT_LEAF_SIZE):
    """Alternating-axis recursive bisection of the plane.

    Boxes with at most ``leaf_size`` positions become leaf groups; larger
    boxes are cut along their longer axis by a one-line separator, which is
    eliminated after both of its child boxes.
    """
    if nx < 1 or ny < 1 or depth < 1 or leaf_size < 1:
        raise ValueError("plane sizes, depth and leaf_size must be positive")

    groups = []
    parents = []

    def positions(i0, i1, j0, j1):
        ii, jj = np.meshgrid(np.arange(i0, i1), np.arange(j0, j1), indexing="ij")
        return (jj * nx + ii).ravel()

    def rec(i0, i1, j0, j1, level):
        w, ht = i1 - i0, j1 - j0
        if w * ht <= leaf_size:
            groups.append(positions(i0, i1, j0, j1))
            parents.append(-1)
            return len(groups) - 1
        if w != ht:
            axis = 0 if w > ht else 1
        else:
            axis = level % 2
        child_roots = []
        if axis == 0:
            sep = (i0 + i1) // 2
            boxes = [(i0, sep, j0, j1), (sep + 1, i1, j0, j1)]
            sep_pos = positions(sep, sep + 1, j0, j1)
        else:
            sep = (j0 + j1) // 2
            boxes = [(i0, i1, j0, sep), (i0, i1, sep + 1, j1)]
            sep_pos = positions(i0, i1, sep, sep + 1)
        for bi0, bi1, bj0, bj1 in boxes:
            if bi1 > bi0 and bj1 > bj0:
                child_roots.append(rec(bi0, bi1, bj0, bj1, level + 1))
        groups.append(sep_pos)
        parents.append(-1)
        me = len(groups) - 1
        for c in child_roots:
            parents[c] = me
        return me

    rec(0, nx, 0, ny, 0)
    return DissectionOrdering(nx=nx, ny=ny, depth=depth, leaf_size=leaf_size,
                              groups=groups, parent=np.array(parents))


@dataclass
class _GroupFactor:
    gidx: np.ndarray
    bidx: np.ndarray
    lu: np.ndarray
    piv: np.ndarray
    coupling: np.ndarray  # dense (len(bidx), len(gidx)) block of the front


@dataclass
class MultifrontalFactor:
    """Factorization stored as per-group dense blocks, applied as a sequence
    of block row operations, block diagonal solves, and the transposed
    sequence (the matrix is complex symmetric, transpose not adjoint)."""

    ordering: DissectionOrdering
    records: list = field(repr=False)

    @property
    def size(self):
        return self.ordering.size

    @property
    def nnz(self):
        """Entries held by the dense factor blocks."""
        return sum(r.lu.size + r.coupling.size for r in self.records)


def _plane_neighbors(pos, nx, ny):
    i = pos % nx
    j = pos // nx
    parts = [pos[i > 0] - 1, pos[i < nx - 1] + 1,
             pos[j > 0] - nx, pos[j < ny - 1] + nx]
    return np.concatenate(parts)


def mf_factorize(matrix, ordering, check_fill=False):
    """Eliminate the plane groups in order, carrying dense update matrices.

    ``matrix`` must be complex symmetric with couplings only between equal or
    plane-adjacent positions (any sweep offsets).  ``check_fill=True``
    additionally asserts that every group's boundary lies in its ancestor
    separators.

    Raises :class:`FactorizationError` naming the group on a singular pivot.
    """
    with limit_blas_threads():
        return _mf_factorize(matrix, ordering, check_fill)


def _mf_factorize(matrix, ordering, check_fill):
    H = sp.csc_matrix(matrix, dtype=np.complex128)
    nx, ny, depth = ordering.nx, ordering.ny, ordering.depth
    npos = nx * ny
    if H.shape != (npos * depth, npos * depth):
        raise ValueError(
            f"matrix shape {H.shape} does not match ordering size {npos * depth}"
        )
    indptr, indices, data = H.indptr, H.indices, H.data

    eliminated = np.zeros(npos, dtype=bool)
    poslocal = np.full(npos, -1, dtype=np.int64)
    children = [[] for _ in ordering.groups]
    for g, p in enumerate(ordering.parent):
        if p >= 0:
            children[p].append(g)
    updates = [None] * ordering.n_groups
    records = []
    tosweep = np.arange(depth, dtype=np.int64)

    for g, gpos in enumerate(ordering.groups):
        cand = [_plane_neighbors(gpos, nx, ny)]
        for c in children[g]:
            cand.append(updates[c][0])
        cand = np.unique(np.concatenate(cand))
        ingroup = np.zeros(npos, dtype=bool)
        ingroup[gpos] = True
        bpos = cand[~eliminated[cand] & ~ingroup[cand]]
        if check_fill:
            allowed = np.concatenate(
                [ordering.groups[a] for a in ordering.ancestors(g)] or
                [np.empty(0, dtype=np.int64)]
            )
            if not np.isin(bpos, allowed).all():
                raise AssertionError(f"fill outside ancestor separators at group {g}")

        fpos = np.concatenate([gpos, bpos])
        poslocal[fpos] = np.arange(fpos.size)
        k = gpos.size * depth
        nf = fpos.size * depth
        F = np.zeros((nf, nf), dtype=np.complex128)

        # original entries incident to the group, one position's columns at a time
        for li, p in enumerate(gpos):
            sl = slice(indptr[p * depth], indptr[(p + 1) * depth])
            rows = indices[sl]
            rpos = rows // depth
            rloc = poslocal[rpos]
            keep = rloc >= 0
            counts = np.diff(indptr[p * depth : (p + 1) * depth + 1])
            cloc = np.repeat(li * depth + tosweep, counts)
            F[rloc[keep] * depth + rows[keep] % depth, cloc[keep]] = data[sl][keep]
        F[:k, k:] = F[k:, :k].T

        for c in children[g]:
            cbnd, U = updates[c]
            lp = poslocal[cbnd]
            loc = (lp[:, None] * depth + tosweep[None, :]).ravel()
            F[np.ix_(loc, loc)] += U
            updates[c] = None

        lu, piv, info = _getrf(F[:k, :k])
        bound = PIVOT_RTOL * max(np.abs(F[:k, :k]).max(), 1e-300)
        if info > 0 or (np.abs(np.diag(lu)) < bound).any():
            raise FactorizationError(f"singular front at group {g}", where=g)
        if info < 0:
            raise ValueError(f"illegal getrf argument {-info}")

        B = np.ascontiguousarray(F[k:, :k])
        if bpos.size:
            X, _ = _getrs(lu, piv, np.asfortranarray(F[:k, k:]),
                          overwrite_b=1)
            updates[g] = (bpos, F[k:, k:] - B @ X)
        else:
            updates[g] = (bpos, np.zeros((0, 0), dtype=np.complex128))

        gidx = (gpos[:, None] * depth + tosweep[None, :]).ravel()
        bidx = (bpos[:, None] * depth + tosweep[None, :]).ravel()
        records.append(_GroupFactor(gidx=gidx, bidx=bidx, lu=lu, piv=piv,
                                    coupling=B))
        eliminated[gpos] = True
        poslocal[fpos] = -1

    return MultifrontalFactor(ordering=ordering, records=records)


def mf_solve(factor, rhs):
    """Apply the factorized inverse to ``rhs``."""
    rhs = np.asarray(rhs, dtype=np.complex128)
    if rhs.shape != (factor.size,):
        raise ValueError(f"rhs shape {rhs.shape} does not match {factor.size}")
    u = rhs.copy()
    getrs = _getrs
    for rec in factor.records:
        z, _ = getrs(rec.lu, rec.piv, u[rec.gidx], overwrite_b=1)
        u[rec.gidx] = z
        if rec.bidx.size:
            u[rec.bidx] -= rec.coupling @ z
    for rec in reversed(factor.records):
        if rec.bidx.size:
            w, _ = getrs(rec.lu, rec.piv, rec.coupling.T @ u[rec.bidx],
                         overwrite_b=1)
            u[rec.gidx] -= w
    return u


def read_coo_text(path):
    """Read the 1-based ``i j re im`` coordinate-list format."""
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 'i j re im'")
            rows.append(int(parts[0]) - 1)
            cols.append(int(parts[1]) - 1)
            vals.append(float(parts[2]) + 1j * float(parts[3]))
    size = max(max(rows, default=0), max(cols, default=0)) + 1
    return sp.csc_matrix(
        (np.array(vals), (np.array(rows), np.array(cols))), shape=(size, size)
    )
