"""Problem containers: grid geometry, velocity field, frequency and shift.

Array conventions used across the package:

* velocity and other grid-shaped arrays are indexed ``[i]``, ``[i, j]`` or
  ``[i, j, k]`` with axis 0 = x1 and the last axis the sweep direction
  (x2 in 2D, x3 in 3D);
* flat solution/forcing vectors are ordered with x1 fastest and the sweep
  coordinate slowest ("layer-major"), so consecutive chunks of
  ``layer_size`` entries are the grid layers of the sweep axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .pml import PmlConfig

__all__ = [
    "Grid",
    "HelmholtzProblem",
    "FieldVector",
    "read_velocity_file",
    "write_velocity_file",
    "read_field_file",
    "write_field_file",
]

BOUNDARY_MODES = ("pml-three-sides-dirichlet-top", "pml-all-sides")


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid of interior points on the unit box."""

    n: int
    dim: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one interior point per dimension")
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")

    @property
    def h(self):
        return 1.0 / (self.n + 1)

    @property
    def N(self):
        return self.n**self.dim

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def layer_size(self):
        return self.n ** (self.dim - 1)

    def coords(self, axis=0):
        """Interior point coordinates along one axis."""
        return (np.arange(self.n) + 1.0) * self.h


@dataclass(frozen=True)
class HelmholtzProblem:
    """One discretized Helmholtz problem: grid, frequency, shift, velocity, PML.

    ``alpha`` is the magnitude of the complex frequency shift; the assembled
    operator uses ``omega_eff = omega + i alpha`` throughout (both in the
    zeroth-order term and inside the stretch denominators), so ``alpha = 0``
    is the plain unshifted operator.
    """

    grid: Grid
    omega: float
    velocity: np.ndarray
    pml: PmlConfig
    alpha: float = 0.0
    boundary_mode: str = "pml-all-sides"
    q: float | None = None

    def __post_init__(self):
        vel = np.ascontiguousarray(np.asarray(self.velocity, dtype=float))
        object.__setattr__(self, "velocity", vel)
        if vel.shape != self.grid.shape:
            raise ValueError(
                f"velocity shape {vel.shape} does not match grid {self.grid.shape}"
            )
        if not np.all(vel > 0.0):
            raise ValueError("velocity samples must be positive")
        if self.omega <= 0.0:
            raise ValueError("omega must be positive")
        if self.alpha < 0.0:
            raise ValueError("alpha must be nonnegative")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")
        if abs(self.pml.eta - self.pml.b * self.grid.h) > 1e-12:
            raise ValueError("pml.eta must equal pml.b * grid.h")
        if 2 * self.pml.eta > 1.0:
            raise ValueError("absorbing layers overlap: 2*eta > 1")

    @property
    def omega_eff(self):
        return self.omega + 1j * self.alpha

    @property
    def q_nominal(self):
        """Grid points per typical wavelength."""
        return 2.0 * np.pi * self.grid.n / self.omega

    def with_alpha(self, alpha):
        """Same problem with a different complex shift."""
        return replace(self, alpha=alpha)


class FieldVector:
    """Complex samples on the grid, ordered layer-major (sweep axis slowest)."""

    __slots__ = ("values", "n", "dim")

    def __init__(self, values, n, dim):
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (n**dim,):
            raise ValueError(f"expected {n**dim} samples, got shape {values.shape}")
        self.values = values
        self.n = n
        self.dim = dim

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.N, dtype=np.complex128), grid.n, grid.dim)

    @classmethod
    def from_grid_array(cls, arr):
        """Wrap an ``[i, j(, k)]``-indexed grid array."""
        arr = np.asarray(arr)
        n, dim = arr.shape[0], arr.ndim
        flat = arr.transpose(tuple(reversed(range(dim)))).ravel()
        return cls(flat.astype(np.complex128), n, dim)

    @property
    def layer_size(self):
        return self.n ** (self.dim - 1)

    @property
    def n_layers(self):
        return self.n

    def layer(self, m):
        """View of the samples in sweep layer ``m`` (0-based)."""
        ls = self.layer_size
        return self.values[m * ls : (m + 1) * ls]

    def to_grid_array(self):
        """Back to an ``[i, j(, k)]``-indexed array."""
        shaped = self.values.reshape((self.n,) * self.dim)
        return shaped.transpose(tuple(reversed(range(self.dim))))

    def copy(self):
        return FieldVector(self.values.copy(), self.n, self.dim)


def as_values(f):
    """Flat complex array from a FieldVector or array-like."""
    if isinstance(f, FieldVector):
        return f.values
    return np.asarray(f, dtype=np.complex128)


_HEADER_DTYPE = np.dtype("<i8")


def write_velocity_file(path, velocity):
    """Raw binary velocity dump: int64 header (dim, n), then float64 samples.

    Samples are stored layer-major (the FieldVector ordering).
    """
    velocity = np.asarray(velocity, dtype=float)
    dim = velocity.ndim
    n = velocity.shape[0]
    if velocity.shape != (n,) * dim:
        raise ValueError("velocity array must be a cube")
    with open(path, "wb") as fh:
        np.array([dim, n], dtype=_HEADER_DTYPE).tofile(fh)
        velocity.transpose(tuple(reversed(range(dim)))).astype("<f8").tofile(fh)


def read_velocity_file(path):
    """Inverse of :func:`write_velocity_file`; returns an [i, j(, k)] array."""
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype=_HEADER_DTYPE, count=2)
        if header.size != 2:
            raise ValueError(f"truncated header in {path}")
        dim, n = int(header[0]), int(header[1])
        if dim not in (2, 3) or n < 1:
            raise ValueError(f"bad header (dim={dim}, n={n}) in {path}")
        data = np.fromfile(fh, dtype="<f8", count=n**dim)
    if data.size != n**dim:
        raise ValueError(f"expected {n**dim} samples in {path}, found {data.size}")
    return data.reshape((n,) * dim).transpose(tuple(reversed(range(dim))))


def write_field_file(path, field, metadata=None):
    """Complex solution dump: int64 header (dim, n), complex128 samples.

    Writes a ``<path>.json`` sidecar with grid metadata next to the payload.
    """
    path = Path(path)
    values = as_values(field)
    if isinstance(field, FieldVector):
        n, dim = field.n, field.dim
    else:
        raise TypeError("write_field_file needs a FieldVector")
    with open(path, "wb") as fh:
        np.array([dim, n], dtype=_HEADER_DTYPE).tofile(fh)
        values.astype("<c16").tofile(fh)
    side = {"dim": dim, "n": n, "dtype": "complex128", "order": "layer-major"}
    if metadata:
        side.update(metadata)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(side, indent=2))


def read_field_file(path):
    with open(path, "rb") as fh:
        header = np.fromfile(fh, dtype=_HEADER_DTYPE, count=2)
        dim, n = int(header[0]), int(header[1])
        data = np.fromfile(fh, dtype="<c16", count=n**dim)
    if data.size != n**dim:
        raise ValueError(f"expected {n**dim} samples in {path}, found {data.size}")
    return FieldVector(data.astype(np.complex128), n, dim)
