"""Assembly of the damped Helmholtz operator on the full grid and on panels.

The operator comes from the symmetrized stretched-coordinate equation: along
each axis the second derivative becomes d/dx (ratio(x) d/dx) with
``ratio = s_axis / prod(s_other)``, and the zeroth-order term is
``omega_eff^2 / (s_1 s_2 (s_3) c^2)``.  Central differences with the stretch
ratios evaluated at half-grid midpoints give, at each interior point, one
coefficient per neighbor and a diagonal equal to the zeroth-order term minus
the sum of all neighbor coefficients (neighbors beyond the box are Dirichlet
zero, but their coefficients still enter the diagonal sum).  Mirroring each
edge coefficient into both triangles makes every assembled matrix complex
symmetric exactly.

Two flat orderings of a box of layers are used:

* layer-major: x1 fastest, sweep axis slowest (global matrix ordering);
* sweep-inner: sweep coordinate fastest within each transversal position
  (the panel ordering whose matrix is banded in 2D).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .pml import ramp, sigma_profile, stretch_factor
from .problem import Grid, HelmholtzProblem

__all__ = [
    "BlockTridiagonalSystem",
    "PanelSystem",
    "assemble_global",
    "assemble_panel",
    "assemble_middle_panel",
    "layer_major_permutation",
    "write_coo_text",
]


def layer_major_permutation(n_transversal, depth):
    """Reordering that makes the sweep coordinate innermost.

    Returns ``perm`` with ``perm[new] = old``: position ``p * depth + t`` of
    the reordered vector holds entry ``t * n_transversal + p`` of the
    layer-major one.  ``depth = 1`` is the identity.
    """
    if n_transversal < 1 or depth < 1:
        raise ValueError("permutation sizes must be positive")
    p = np.arange(n_transversal)[:, None]
    t = np.arange(depth)[None, :]
    return (t * n_transversal + p).ravel()


def _axis_stretches(sigma_fn, start, count, h, omega_eff):
    """Stretch factors at grid points start..start+count-1 and the flanking midpoints."""
    pts = (np.arange(count) + start + 1.0) * h
    mids = (np.arange(count + 1) + start + 0.5) * h
    sg = stretch_factor(sigma_fn(pts), omega_eff)
    sm = stretch_factor(sigma_fn(mids), omega_eff)
    return sg, sm


@dataclass
class StencilBlock:
    """Stencil coefficients for a box of ``count`` sweep layers.

    ``diag`` and ``couples[a]`` are grid-shaped ([i, j] or [i, j, k]);
    ``couples[a]`` holds the coefficient between neighbors along axis ``a``
    and is one shorter along that axis.
    """

    n: int
    dim: int
    sweep_start: int
    count: int
    diag: np.ndarray
    couples: tuple

    @property
    def size(self):
        return self.diag.size

    @property
    def layer_size(self):
        return self.n ** (self.dim - 1)

    def _to_sparse(self, axes_order, offsets):
        diag = self.diag.transpose(axes_order).ravel()
        n_tot = diag.size
        diagonals = [diag]
        offs = [0]
        for arr, off in zip(self.couples, offsets):
            if arr.size == 0:  # single-point axis: no couplings
                continue
            # pad the short axis back to full length, reorder, flatten, trim;
            # the same data array serves +off and -off, so symmetry is exact
            full = np.zeros(self.diag.shape, dtype=arr.dtype)
            sl = tuple(slice(0, s) for s in arr.shape)
            full[sl] = arr
            flat = full.transpose(axes_order).ravel()
            diagonals.extend([flat[:-off], flat[:-off]])
            offs.extend([off, -off])
        return sp.diags_array(diagonals, offsets=offs, shape=(n_tot, n_tot), format="csr")

    def matrix_layer_major(self):
        """CSR matrix with x1 fastest and the sweep coordinate slowest."""
        if self.dim == 2:
            return self._to_sparse((1, 0), (1, self.n))
        return self._to_sparse((2, 1, 0), (1, self.n, self.n * self.n))

    def matrix_sweep_inner(self):
        """CSR matrix with the sweep coordinate fastest (banded in 2D)."""
        if self.dim == 2:
            return self._to_sparse((0, 1), (self.count, 1))
        return self._to_sparse((1, 0, 2), (self.count, self.n * self.count, 1))

    def sweep_couplings(self):
        """Layer-to-layer coupling diagonals, shape (count - 1, layer_size)."""
        arr = self.couples[-1]
        if self.dim == 2:
            return np.ascontiguousarray(arr.T)
        return np.ascontiguousarray(arr.transpose(2, 1, 0).reshape(self.count - 1, -1))


def _global_axis_sigma(problem, axis):
    """Damping profile along one axis of the full problem."""
    cfg = problem.pml
    last = axis == problem.grid.dim - 1
    if last and problem.boundary_mode == "pml-three-sides-dirichlet-top":
        kind = "one-sided"
    else:
        kind = "two-sided"
    return lambda t: sigma_profile(t, cfg, kind)


def _stencil(problem, sweep_sigma, sweep_start, count):
    """Coefficient arrays for layers [sweep_start, sweep_start + count)."""
    grid = problem.grid
    n, h, dim = grid.n, grid.h, grid.dim
    w = problem.omega_eff
    inv_h2 = 1.0 / (h * h)

    sg, sm = [], []
    for axis in range(dim - 1):
        g, m = _axis_stretches(_global_axis_sigma(problem, axis), 0, n, h, w)
        sg.append(g)
        sm.append(m)
    g, m = _axis_stretches(sweep_sigma, sweep_start, count, h, w)
    sg.append(g)
    sm.append(m)

    sl = (slice(None),) * (dim - 1) + (slice(sweep_start, sweep_start + count),)
    c2 = problem.velocity[sl] ** 2

    if dim == 2:
        s1g, s2g = sg
        s1m, s2m = sm
        denom = s1g[:, None] * s2g[None, :]
        couple1 = (s1m[1:-1][:, None] / s2g[None, :]) * inv_h2
        couple2 = (s2m[1:-1][None, :] / s1g[:, None]) * inv_h2
        ring = ((s1m[:-1] + s1m[1:])[:, None] / s2g[None, :]
                + (s2m[:-1] + s2m[1:])[None, :] / s1g[:, None]) * inv_h2
        diag = w * w / (denom * c2) - ring
        couples = (couple1, couple2)
    else:
        s1g, s2g, s3g = sg
        s1m, s2m, s3m = sm
        g1 = s1g[:, None, None]
        g2 = s2g[None, :, None]
        g3 = s3g[None, None, :]
        couple1 = (s1m[1:-1][:, None, None] / (g2 * g3)) * inv_h2
        couple2 = (s2m[1:-1][None, :, None] / (g1 * g3)) * inv_h2
        couple3 = (s3m[1:-1][None, None, :] / (g1 * g2)) * inv_h2
        ring = ((s1m[:-1] + s1m[1:])[:, None, None] / (g2 * g3)
                + (s2m[:-1] + s2m[1:])[None, :, None] / (g1 * g3)
                + (s3m[:-1] + s3m[1:])[None, None, :] / (g1 * g2)) * inv_h2
        diag = w * w / (g1 * g2 * g3 * c2) - ring
        couples = (couple1, couple2, couple3)

    return StencilBlock(n=n, dim=dim, sweep_start=sweep_start, count=count,
                        diag=diag, couples=couples)


@dataclass
class BlockTridiagonalSystem:
    """The assembled operator in layer-blocked form.

    ``matrix`` is the full CSR operator in layer-major ordering;
    ``couplings[m]`` is the diagonal of the block coupling layers m and m+1.
    """

    matrix: sp.csr_matrix
    n_layers: int
    layer_size: int
    dim: int
    couplings: np.ndarray
    problem: HelmholtzProblem

    @property
    def N(self):
        return self.n_layers * self.layer_size

    def diag_block(self, m):
        """Sparse diagonal block of layer ``m`` (0-based)."""
        ls = self.layer_size
        return self.matrix[m * ls : (m + 1) * ls, m * ls : (m + 1) * ls]

    def off_block(self, m):
        """Coupling diagonal between layers ``m`` and ``m + 1``."""
        return self.couplings[m]

    @cached_property
    def diag_blocks(self):
        return [self.diag_block(m) for m in range(self.n_layers)]

    def layer_range(self, lo, hi):
        """Square sparse sub-block of layers lo..hi inclusive."""
        ls = self.layer_size
        return self.matrix[lo * ls : (hi + 1) * ls, lo * ls : (hi + 1) * ls]


def assemble_global(problem):
    """Assemble the damped operator on the full grid."""
    grid = problem.grid
    sweep_sigma = _global_axis_sigma(problem, grid.dim - 1)
    block = _stencil(problem, sweep_sigma, 0, grid.n)
    return BlockTridiagonalSystem(
        matrix=block.matrix_layer_major(),
        n_layers=grid.n,
        layer_size=grid.layer_size,
        dim=grid.dim,
        couplings=block.sweep_couplings(),
        problem=problem,
    )


@dataclass
class PanelSystem:
    """A thin slab of layers with its own absorbing ramp on the sweep axis.

    ``lo``/``hi`` are the global (0-based) layer indices the panel covers;
    ``m`` is the anchor layer next to the artificial absorbing ramp's far
    side (the eliminated layer).  In-plane stretches are inherited from the
    parent problem; only the sweep-axis profile is replaced.
    """

    m: int
    depth: int
    lo: int
    hi: int
    direction: str
    block: StencilBlock

    @property
    def size(self):
        return self.block.size

    @property
    def layer_size(self):
        return self.block.layer_size

    @cached_property
    def operator(self):
        """The panel matrix in layer-major ordering."""
        return self.block.matrix_layer_major()

    @cached_property
    def perm(self):
        return layer_major_permutation(self.layer_size, self.depth)

    def matrix_sweep_inner(self):
        """Permuted panel matrix (banded with bandwidth ``depth`` in 2D)."""
        return self.block.matrix_sweep_inner()

    def local(self, layer):
        """Panel-local index of a global layer."""
        if not self.lo <= layer <= self.hi:
            raise IndexError(f"layer {layer} outside panel [{self.lo}, {self.hi}]")
        return layer - self.lo


def _panel_span(problem, m, depth, direction):
    n = problem.grid.n
    if depth < 1:
        raise ValueError("panel depth must be positive")
    if direction == "up":
        if m < depth - 1:
            raise IndexError(f"anchor {m} too low for depth {depth}")
        if m >= n:
            raise IndexError(f"anchor {m} beyond grid")
        return m - depth + 1, m
    if direction == "down":
        if m + depth - 1 > n - 1:
            raise IndexError(f"anchor {m} too high for depth {depth}")
        if m < 0:
            raise IndexError(f"anchor {m} below grid")
        return m, m + depth - 1
    raise ValueError(f"unknown panel direction {direction!r}")


def assemble_panel(problem, m, depth, ramp_layers=None, direction="up"):
    """Assemble the absorbing-capped slab used to approximate one layer solve.

    The slab covers ``depth`` layers ending (``direction="up"``) or starting
    (``"down"``) at anchor layer ``m``, with Dirichlet caps one grid line
    beyond each end.  Along the sweep axis the global damping profile is
    replaced by a one-sided quadratic ramp of width ``ramp_layers * h``
    (default: the full slab) rising toward the cap away from the anchor, so
    the anchor layer sits exactly where the ramp vanishes.
    """
    h = problem.grid.h
    C = problem.pml.C
    b = depth if ramp_layers is None else ramp_layers
    if b < 1:
        raise ValueError("ramp_layers must be positive")
    lo, hi = _panel_span(problem, m, depth, direction)
    eta = b * h
    if direction == "up":
        t0 = lo * h  # bottom Dirichlet cap
        sweep_sigma = lambda x: ramp(np.asarray(x) - t0, eta, C)
    else:
        t1 = (hi + 2) * h  # top Dirichlet cap
        sweep_sigma = lambda x: ramp(t1 - np.asarray(x), eta, C)
    block = _stencil(problem, sweep_sigma, lo, depth)
    return PanelSystem(m=m, depth=depth, lo=lo, hi=hi, direction=direction,
                       block=block)


def assemble_middle_panel(problem, lo, hi, ramp_layers, buffer_layers=0):
    """Slab for the meeting layers of a two-front sweep: ramps on both sides.

    Targets are the global layers lo..hi; the panel extends ``ramp_layers - 1
    + buffer_layers`` grid layers beyond them on each side (clamped to the
    grid) and carries one-sided ramps rising toward both Dirichlet caps.
    """
    n, h = problem.grid.n, problem.grid.h
    C = problem.pml.C
    if not 0 <= lo <= hi < n:
        raise IndexError(f"target layers [{lo}, {hi}] outside grid")
    wing = ramp_layers - 1 + buffer_layers
    plo = max(0, lo - wing)
    phi = min(n - 1, hi + wing)
    eta = ramp_layers * h
    t0 = plo * h
    t1 = (phi + 2) * h
    sweep_sigma = lambda x: (ramp(np.asarray(x) - t0, eta, C)
                             + ramp(t1 - np.asarray(x), eta, C))
    block = _stencil(problem, sweep_sigma, plo, phi - plo + 1)
    return PanelSystem(m=hi, depth=phi - plo + 1, lo=plo, hi=phi,
                       direction="middle", block=block)


def write_coo_text(path, matrix):
    """Coordinate-list text dump: one ``i j re im`` line per entry, 1-based."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            v = complex(v)
            fh.write(f"{r + 1} {c + 1} {v.real:.17g} {v.imag:.17g}\n")
