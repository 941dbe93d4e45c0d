"""Direct fast-transform solvers for the five-point operators on the grid.

Each boundary treatment in :mod:`chemofluid.grid` is diagonalised by a
real trigonometric transform:

========================  ====================  ===========
layout                    boundary              transform
========================  ====================  ===========
cell centers              even ghost (Neumann)  DCT-II
cell centers              odd ghost (Dirichlet) DST-II
face nodes, zero at ends  Dirichlet             DST-I
========================  ====================  ===========

so Poisson and Helmholtz solves are exact to round-off.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import fft

from .errors import GaugeError, SolverError
from .grid import Grid, VectorField, integrate, laplacian_dirichlet, laplacian_neumann

_FORWARD = {"dct2": lambda a, ax: fft.dct(a, 2, axis=ax, norm="ortho"),
            "dst2": lambda a, ax: fft.dst(a, 2, axis=ax, norm="ortho"),
            "dst1": lambda a, ax: fft.dst(a, 1, axis=ax, norm="ortho")}
_INVERSE = {"dct2": lambda a, ax: fft.idct(a, 2, axis=ax, norm="ortho"),
            "dst2": lambda a, ax: fft.idst(a, 2, axis=ax, norm="ortho"),
            "dst1": lambda a, ax: fft.idst(a, 1, axis=ax, norm="ortho")}


def _eigs(kind: str, n: int, h: float) -> np.ndarray:
    # eigenvalues of the 1D negative second difference
    if kind == "dct2":
        k = np.arange(n)
    elif kind == "dst2":
        k = np.arange(1, n + 1)
    else:  # dst1 on n-1 interior nodes
        k = np.arange(1, n)
    return (2.0 - 2.0 * np.cos(np.pi * k / n)) / h**2


_LAYOUT = {
    "neumann": ("dct2", "dct2"),
    "dirichlet": ("dst2", "dst2"),
    "ux": ("dst1", "dst2"),
    "uy": ("dst2", "dst1"),
}


@lru_cache(maxsize=64)
def _symbol(grid: Grid, layout: str) -> np.ndarray:
    kx, ky = _LAYOUT[layout]
    lam = _eigs(kx, grid.nx, grid.hx)[:, None] + _eigs(ky, grid.ny, grid.hy)[None, :]
    lam.setflags(write=False)
    return lam


def _apply_inverse(rhs: np.ndarray, grid: Grid, layout: str, multiplier) -> np.ndarray:
    kx, ky = _LAYOUT[layout]
    r = _FORWARD[ky](_FORWARD[kx](rhs, 0), 1)
    r = multiplier(r, _symbol(grid, layout))
    return _INVERSE[ky](_INVERSE[kx](r, 0), 1)


def helmholtz_solve(rhs: np.ndarray, grid: Grid, coeff: float, layout: str = "neumann") -> np.ndarray:
    """Solve ``(I - coeff * Laplacian) x = rhs`` for ``coeff >= 0``."""
    return _apply_inverse(rhs, grid, layout, lambda r, lam: r / (1.0 + coeff * lam))


def helmholtz_velocity(u: VectorField, grid: Grid, coeff: float) -> VectorField:
    """Implicit viscous step ``(I - coeff * Laplacian) v = u`` with no-slip walls."""
    out = VectorField.zeros(grid)
    out.x[1:-1] = helmholtz_solve(u.x[1:-1], grid, coeff, "ux")
    out.y[:, 1:-1] = helmholtz_solve(u.y[:, 1:-1], grid, coeff, "uy")
    return out


def poisson_solve(rhs: np.ndarray, grid: Grid, bc: str = "neumann", rtol: float = 1e-10,
                  return_residual: bool = False):
    """Solve ``Laplacian p = rhs``.

    Neumann problems need a compatible right-hand side; the solution is
    returned with zero mean.  Raises :class:`SolverError` if the residual
    contract ``||Lp - rhs|| <= rtol ||rhs||`` is not met.
    """
    if not np.isfinite(rhs).all():
        raise SolverError("non-finite Poisson right-hand side")
    rnorm = float(np.sqrt(np.sum(rhs**2)))
    if bc == "neumann":
        total = integrate(rhs, grid)
        scale = max(1.0, integrate(np.abs(rhs), grid))
        if abs(total) > 1e-10 * scale:
            raise GaugeError(f"incompatible Neumann data: integral {total:.3e}")
        rhs = rhs - total / grid.area

        def mult(r, lam):
            out = np.zeros_like(r)
            out[lam > 0] = -r[lam > 0] / lam[lam > 0]
            return out

        p = _apply_inverse(rhs, grid, "neumann", mult)
        p -= p.mean()
        residual = float(np.sqrt(np.sum((laplacian_neumann(p, grid) - rhs) ** 2)))
    elif bc == "dirichlet":
        p = _apply_inverse(rhs, grid, "dirichlet", lambda r, lam: -r / lam)
        residual = float(np.sqrt(np.sum((laplacian_dirichlet(p, grid) - rhs) ** 2)))
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    if residual > rtol * rnorm and residual > 1e-300:
        raise SolverError(f"Poisson residual {residual:.3e} exceeds {rtol:g} * {rnorm:.3e}", [residual])
    if return_residual:
        return p, residual
    return p
