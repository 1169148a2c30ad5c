"""
Diagonal-aligned (y, v) lattice and the quadrature rules used on it.

The lattice covers [-G, G] x [-1, 1] with y_i = -G + i*dy (i = 0..2I) and
v_j = -1 + j*dv (j = 0..2J).  Requiring J to be a multiple of I puts a node
on the singular line y = v*G in every row: row i meets it at column r*i with
r = J // I.  Fields carry two values at that node, one from each one-sided
sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels

__all__ = [
    "Mesh",
    "GridField",
    "build_mesh",
    "prolong",
    "velocity_average",
    "row_averages",
    "y_integral",
    "total_mass",
]


@dataclass(frozen=True)
class Mesh:
    G: float
    I: int
    J: int
    y: np.ndarray = field(repr=False, compare=False)
    v: np.ndarray = field(repr=False, compare=False)

    @property
    def dy(self) -> float:
        return self.G / self.I

    @property
    def dv(self) -> float:
        return 1.0 / self.J

    @property
    def ratio(self) -> int:
        """Column stride of the diagonal, J // I."""
        return self.J // self.I

    @property
    def ny(self) -> int:
        return 2 * self.I + 1

    @property
    def nv(self) -> int:
        return 2 * self.J + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nv)

    def diag(self, i: int | np.ndarray) -> int | np.ndarray:
        """Column index of the diagonal node in row i."""
        return self.ratio * i

    @property
    def diag_columns(self) -> np.ndarray:
        return self.ratio * np.arange(self.ny)

    def column(self, v_value: float) -> int:
        """Index of the v-node equal to ``v_value``; raises if it is not a node."""
        j = int(round((v_value + 1.0) * self.J))
        if j < 0 or j >= self.nv or abs(self.v[j] - v_value) > 1e-12:
            raise ValueError(f"v={v_value} is not a node of the mesh (J={self.J})")
        return j

    def row(self, y_value: float) -> int:
        i = int(round((y_value + self.G) / self.dy))
        if i < 0 or i >= self.ny or abs(self.y[i] - y_value) > 1e-12 * max(1.0, self.G):
            raise ValueError(f"y={y_value} is not a node of the mesh (I={self.I})")
        return i

    def weights(self) -> np.ndarray:
        """
        W_ij = v_j*G - y_i, the transport speed in y.

        Computed as G*(j/J - i/I) so that the diagonal entries are exactly zero.
        """
        i = np.arange(self.ny)[:, None]
        j = np.arange(self.nv)[None, :]
        return self.G * (j * self.I - i * self.J) / (self.I * self.J)


def build_mesh(G: float, I: int, J: int) -> Mesh:
    G = float(G)
    if not np.isfinite(G) or G <= 0.0:
        raise ValueError(f"G must be positive, got {G}")
    if int(I) != I or I < 1:
        raise ValueError(f"I must be a positive integer, got {I}")
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J}")
    I, J = int(I), int(J)
    if J % I != 0:
        raise ValueError(f"J mod I != 0 (I={I}, J={J}): diagonal nodes would be misaligned")
    # index formulas, no accumulation: the end points and the diagonal are exact
    y = G * (np.arange(2 * I + 1) - I) / I
    v = (np.arange(2 * J + 1) - J) / J
    return Mesh(G=G, I=I, J=J, y=y, v=v)


@dataclass
class GridField:
    """
    Values on the lattice plus the two-sided diagonal pair.

    ``interior[i, diag(i)]`` holds the mean of the pair and is only for display;
    every quadrature and every scheme uses ``diag_left`` / ``diag_right``.
    """

    interior: np.ndarray
    diag_left: np.ndarray
    diag_right: np.ndarray

    @classmethod
    def zeros(cls, mesh: Mesh) -> GridField:
        return cls(np.zeros(mesh.shape), np.zeros(mesh.ny), np.zeros(mesh.ny))

    @classmethod
    def from_function(cls, mesh: Mesh, fn) -> GridField:
        """Sample ``fn(y, v)`` on the nodes; both diagonal values get the node value."""
        vals = np.asarray(fn(mesh.y[:, None], mesh.v[None, :]), dtype=float)
        vals = np.broadcast_to(vals, mesh.shape).copy()
        d = vals[np.arange(mesh.ny), mesh.diag_columns]
        return cls(vals, d.copy(), d.copy())

    def copy(self) -> GridField:
        return GridField(self.interior.copy(), self.diag_left.copy(), self.diag_right.copy())

    def scaled(self, c: float) -> GridField:
        return GridField(self.interior * c, self.diag_left * c, self.diag_right * c)

    def __add__(self, other: GridField) -> GridField:
        return GridField(self.interior + other.interior,
                         self.diag_left + other.diag_left,
                         self.diag_right + other.diag_right)

    def __sub__(self, other: GridField) -> GridField:
        return self + other.scaled(-1.0)

    def multiply_columns(self, mesh: Mesh, colvals: np.ndarray) -> GridField:
        """Pointwise product with a function of v (given on the v nodes)."""
        d = colvals[mesh.diag_columns]
        return GridField(self.interior * colvals[None, :], self.diag_left * d, self.diag_right * d)

    def multiply_rows(self, rowvals: np.ndarray) -> GridField:
        """Pointwise product with a function of y (given on the y nodes)."""
        return GridField(self.interior * rowvals[:, None], self.diag_left * rowvals, self.diag_right * rowvals)

    def refresh_diagonal(self, mesh: Mesh) -> None:
        idx = np.arange(mesh.ny)
        self.interior[idx, mesh.diag_columns] = 0.5 * (self.diag_left + self.diag_right)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.interior).all()
                    and np.isfinite(self.diag_left).all()
                    and np.isfinite(self.diag_right).all())

    def min_value(self, mesh: Mesh) -> float:
        """Smallest stored value over interior rows, counting both diagonal values."""
        inner = self.interior[1:-1].copy()
        rows = np.arange(1, mesh.ny - 1)
        inner[rows - 1, mesh.diag_columns[1:-1]] = np.inf
        return float(min(inner.min(), self.diag_left[1:-1].min(), self.diag_right[1:-1].min()))


def prolong(coarse: Mesh, field: GridField, fine: Mesh) -> GridField:
    """
    Interpolate a field onto a nested finer mesh (bilinear off the diagonal,
    linear in y for each diagonal branch).  Intended as a warm start.
    """
    if fine.G != coarse.G or fine.I % coarse.I or fine.J % coarse.J or fine.ratio != coarse.ratio:
        raise ValueError("fine mesh must refine the coarse one by integer factors with the same G and J/I")
    interp = RegularGridInterpolator((coarse.y, coarse.v), field.interior)
    yy, vv = np.meshgrid(fine.y, fine.v, indexing="ij")
    vals = interp(np.stack([yy.ravel(), vv.ravel()], axis=-1)).reshape(fine.shape)
    out = GridField(vals, np.interp(fine.y, coarse.y, field.diag_left),
                    np.interp(fine.y, coarse.y, field.diag_right))
    out.refresh_diagonal(fine)
    return out


def velocity_average(mesh: Mesh, field: GridField, i: int) -> float:
    """
    Trapezoidal average over v of row i, (1/2) * integral over [-1, 1].

    The left part of the row ends on the diagonal with the forward-branch
    value and the right part starts there with the backward-branch value.
    Rows 0 and 2I are zero by convention.
    """
    if i < 0 or i > 2 * mesh.I:
        raise IndexError(f"row {i} outside 0..{2 * mesh.I}")
    if i == 0 or i == 2 * mesh.I:
        return 0.0
    q = field.interior[i]
    js = mesh.diag(i)
    total = (q[0] + 2.0 * q[1:js].sum() + field.diag_right[i]
             + field.diag_left[i] + 2.0 * q[js + 1:-1].sum() + q[-1])
    return float(mesh.dv / 4.0 * total)


def row_averages(mesh: Mesh, field: GridField) -> np.ndarray:
    """``velocity_average`` for every row at once."""
    out = np.empty(mesh.ny)
    _kernels.row_averages(np.ascontiguousarray(field.interior, dtype=float),
                          np.ascontiguousarray(field.diag_left, dtype=float),
                          np.ascontiguousarray(field.diag_right, dtype=float),
                          mesh.I, mesh.J, out)
    return out


def y_integral(mesh: Mesh, profile: np.ndarray) -> float:
    """Composite Simpson over the 2I+1 y nodes."""
    p = np.asarray(profile, dtype=float)
    if p.shape != (mesh.ny,):
        raise ValueError(f"profile must have {mesh.ny} entries, got shape {p.shape}")
    return float(mesh.dy / 3.0 * (p[0] + 4.0 * p[1:-1:2].sum() + 2.0 * p[2:-1:2].sum() + p[-1]))


def total_mass(mesh: Mesh, field: GridField) -> float:
    return y_integral(mesh, row_averages(mesh, field))
