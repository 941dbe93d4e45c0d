"""Rectangular cell-centered grid and the discrete operators used everywhere.

Scalars live at cell centers, arrays of shape ``(nx, ny)`` indexed ``[i, j]``
with ``x = (i + 1/2) hx``.  Vector fields are face-normal (MAC) components:
``x`` on vertical faces, shape ``(nx + 1, ny)``; ``y`` on horizontal faces,
shape ``(nx, ny + 1)``.  Homogeneous Neumann conditions for scalars are
realised by even ghost reflection, which is the same as setting the
boundary-face gradient to zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DiagnosticError


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ConfigurationError("cell counts must be integers")
        if self.nx < 4 or self.ny < 4:
            raise ConfigurationError(f"grid needs nx, ny >= 4, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0 and np.isfinite(self.Lx) and np.isfinite(self.Ly)):
            raise ConfigurationError(f"domain lengths must be positive, got {self.Lx}, {self.Ly}")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def h(self) -> float:
        return min(self.hx, self.hy)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    @property
    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx + 1) * self.hx

    @property
    def y_faces(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.hy

    def mesh(self):
        """Cell-center coordinates ``(X, Y)`` with ``ij`` indexing."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    @property
    def first_neumann_eigenvalue(self) -> float:
        return np.pi**2 / max(self.Lx, self.Ly) ** 2


@dataclass
class VectorField:
    """Face-normal velocity/flux components on the MAC layout."""

    x: np.ndarray
    y: np.ndarray

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> "VectorField":
        return VectorField(self.x.copy(), self.y.copy())

    def __add__(self, other):
        return VectorField(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return VectorField(self.x - other.x, self.y - other.y)

    def __mul__(self, c):
        return VectorField(self.x * c, self.y * c)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(np.abs(self.x).max(initial=0.0), np.abs(self.y).max(initial=0.0))

    def boundary_normal_max(self) -> float:
        return max(np.abs(self.x[[0, -1], :]).max(), np.abs(self.y[:, [0, -1]]).max())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.x).all() and np.isfinite(self.y).all())


def _require_finite(f, what="field"):
    if not np.isfinite(f).all():
        raise DiagnosticError(f"non-finite entry in {what}")


def integrate(f: np.ndarray, grid: Grid) -> float:
    """Midpoint-rule integral over the domain."""
    _require_finite(f)
    return float(f.sum() * grid.cell_area)


def mean(f: np.ndarray, grid: Grid) -> float:
    return integrate(f, grid) / grid.area


def gradient(f: np.ndarray, grid: Grid) -> VectorField:
    """Face-normal differences; boundary faces carry zero (Neumann)."""
    g = VectorField.zeros(grid)
    g.x[1:-1, :] = np.diff(f, axis=0) / grid.hx
    g.y[:, 1:-1] = np.diff(f, axis=1) / grid.hy
    return g


def divergence(F: VectorField, grid: Grid) -> np.ndarray:
    return np.diff(F.x, axis=0) / grid.hx + np.diff(F.y, axis=1) / grid.hy


def laplacian_neumann(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point Laplacian with even ghost reflection."""
    return divergence(gradient(f, grid), grid)


def laplacian_dirichlet(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Five-point Laplacian with odd ghost reflection (zero on the walls)."""
    p = np.pad(f, 1)
    p[0, :], p[-1, :] = -p[1, :], -p[-2, :]
    p[:, 0], p[:, -1] = -p[:, 1], -p[:, -2]
    return ((p[2:, 1:-1] - 2 * f + p[:-2, 1:-1]) / grid.hx**2
            + (p[1:-1, 2:] - 2 * f + p[1:-1, :-2]) / grid.hy**2)


def laplacian_velocity(u: VectorField, grid: Grid) -> VectorField:
    """Vector Laplacian for no-slip walls.

    Normal components on boundary faces are zero nodes; tangential
    components use odd ghost reflection across the wall.  Boundary-face
    entries of the result are zero.
    """
    hx2, hy2 = grid.hx**2, grid.hy**2
    out = VectorField.zeros(grid)

    ux = u.x
    gy = np.pad(ux, ((0, 0), (1, 1)))
    gy[:, 0], gy[:, -1] = -ux[:, 0], -ux[:, -1]
    lx = (ux[2:] - 2 * ux[1:-1] + ux[:-2]) / hx2 + (gy[1:-1, 2:] - 2 * ux[1:-1] + gy[1:-1, :-2]) / hy2
    out.x[1:-1] = lx

    uy = u.y
    gx = np.pad(uy, ((1, 1), (0, 0)))
    gx[0, :], gx[-1, :] = -uy[0, :], -uy[-1, :]
    ly = (uy[:, 2:] - 2 * uy[:, 1:-1] + uy[:, :-2]) / hy2 + (gx[2:, 1:-1] - 2 * uy[:, 1:-1] + gx[:-2, 1:-1]) / hx2
    out.y[:, 1:-1] = ly
    return out


def face_inner(F: VectorField, G: VectorField, grid: Grid) -> float:
    """Discrete L2 inner product of two face fields."""
    return float((np.sum(F.x * G.x) + np.sum(F.y * G.y)) * grid.cell_area)


def to_cells(F: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Average face components to cell centers."""
    return 0.5 * (F.x[1:] + F.x[:-1]), 0.5 * (F.y[:, 1:] + F.y[:, :-1])


def face_average(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic averages of a cell field on interior x- and y-faces."""
    return 0.5 * (f[1:] + f[:-1]), 0.5 * (f[:, 1:] + f[:, :-1])


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def mollifier_at(x, y, grid: Grid, eps: float) -> np.ndarray:
    """Boundary cutoff: 0 within eps/2 of the wall, 1 beyond eps, C^1 ramp between."""
    if not (0.0 < eps < 0.5 * min(grid.Lx, grid.Ly)):
        raise ConfigurationError(f"mollifier width must lie in (0, {0.5 * min(grid.Lx, grid.Ly)}), got {eps}")
    x, y = np.asarray(x, float), np.asarray(y, float)
    d = np.minimum(np.minimum(x, grid.Lx - x), np.minimum(y, grid.Ly - y))
    return _smoothstep((d - 0.5 * eps) / (0.5 * eps))


def boundary_mollifier(grid: Grid, eps: float) -> np.ndarray:
    X, Y = grid.mesh()
    return mollifier_at(X, Y, grid, eps)


@lru_cache(maxsize=32)
def mollifier_faces(grid: Grid, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Cutoff evaluated at interior x-faces ``(nx-1, ny)`` and y-faces ``(nx, ny-1)``."""
    xf, yf = grid.x_faces[1:-1], grid.y_faces[1:-1]
    rx = mollifier_at(*np.meshgrid(xf, grid.y, indexing="ij"), grid, eps)
    ry = mollifier_at(*np.meshgrid(grid.x, yf, indexing="ij"), grid, eps)
    rx.setflags(write=False)
    ry.setflags(write=False)
    return rx, ry
