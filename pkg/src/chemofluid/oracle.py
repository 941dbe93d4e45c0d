"""Reference implementations used only for cross-validation.

The explicit stepper below is written cell by cell with plain loops and
its own sparse pressure solve.  It discretises the same semi-discrete
system as :mod:`chemofluid.solver` (same face stencils, same upwinding)
but shares none of its code, so agreement between the two is evidence
rather than tautology.  Everything is forward Euler; nothing is split.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .errors import OracleError
from .grid import Grid, VectorField
from .model import eval_sensitivity


# ---------------------------------------------------------------- closed forms

@dataclass(frozen=True)
class HomogeneousSolution:
    """Spatially flat solution: ``w' = n - w``, ``v' = -v w``, n constant."""

    n_bar: float
    w0: float
    v0: float

    def w(self, t):
        return self.n_bar + (self.w0 - self.n_bar) * np.exp(-np.asarray(t, float))

    def v(self, t):
        t = np.asarray(t, float)
        return self.v0 * np.exp(-self.n_bar * t - (self.w0 - self.n_bar) * (-np.expm1(-t)))

    def v_by_quadrature(self, t: float) -> float:
        integral, _ = quad(lambda s: float(self.w(s)), 0.0, t, epsabs=0.0, epsrel=1e-13)
        return self.v0 * math.exp(-integral)


def homogeneous_closed_form(n_bar: float, w0: float, v0: float, t):
    if n_bar < 0 or w0 <= 0 or v0 <= 0:
        raise OracleError("need n_bar >= 0, w0 > 0, v0 > 0")
    sol = HomogeneousSolution(n_bar, w0, v0)
    return sol.w(t), sol.v(t)


def manufactured_heat_solution(grid: Grid, t: float) -> np.ndarray:
    """Exact Neumann heat solution ``exp(-(pi/Lx)^2 t) cos(pi x / Lx)`` at cell centers."""
    if t < 0:
        raise OracleError("t must be nonnegative")
    k = math.pi / grid.Lx
    col = math.exp(-k * k * t) * np.cos(k * grid.x)
    return np.repeat(col[:, None], grid.ny, axis=1)


# ---------------------------------------------------------------- explicit stepper

def _cutoff(x, y, grid, eps):
    d = min(x, grid.Lx - x, y, grid.Ly - y)
    s = (d - eps / 2) / (eps / 2)
    s = 0.0 if s < 0 else (1.0 if s > 1 else s)
    return 3 * s * s - 2 * s * s * s


def _scalar_laplacian(f, grid):
    nx, ny = grid.nx, grid.ny
    out = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            c = f[i, j]
            w = f[i - 1, j] if i > 0 else c
            e = f[i + 1, j] if i < nx - 1 else c
            s = f[i, j - 1] if j > 0 else c
            n = f[i, j + 1] if j < ny - 1 else c
            out[i, j] = (w - 2 * c + e) / grid.hx**2 + (s - 2 * c + n) / grid.hy**2
    return out


def _scalar_transport(f, u, grid):
    """Upwind -div(f u) accumulated face by face."""
    nx, ny = grid.nx, grid.ny
    out = np.zeros((nx, ny))
    for i in range(1, nx):
        for j in range(ny):
            a = u.x[i, j]
            flux = a * (f[i - 1, j] if a > 0 else f[i, j])
            out[i - 1, j] -= flux / grid.hx
            out[i, j] += flux / grid.hx
    for i in range(nx):
        for j in range(1, ny):
            b = u.y[i, j]
            flux = b * (f[i, j - 1] if b > 0 else f[i, j])
            out[i, j - 1] -= flux / grid.hy
            out[i, j] += flux / grid.hy
    return out


def _density_rhs(n, v, u, params, grid):
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    spec, eps = params.sensitivity, params.eps
    out = np.zeros((nx, ny))

    def cdx(i, j):
        return (v[min(i + 1, nx - 1), j] - v[max(i - 1, 0), j]) / (2 * hx)

    def cdy(i, j):
        return (v[i, min(j + 1, ny - 1)] - v[i, max(j - 1, 0)]) / (2 * hy)

    for i in range(1, nx):
        for j in range(ny):
            vf = 0.5 * (v[i - 1, j] + v[i, j])
            S = eval_sensitivity(spec, 0.5 * (n[i - 1, j] + n[i, j]), vf)
            dv_n = (v[i, j] - v[i - 1, j]) / hx
            dv_t = 0.5 * (cdy(i - 1, j) + cdy(i, j))
            rho = _cutoff(i * hx, (j + 0.5) * hy, grid, eps)
            b = rho * (S[0, 0] * dv_n + S[0, 1] * dv_t) + u.x[i, j]
            flux = -(n[i, j] - n[i - 1, j]) / hx + b * (n[i - 1, j] if b > 0 else n[i, j])
            out[i - 1, j] -= flux / hx
            out[i, j] += flux / hx
    for i in range(nx):
        for j in range(1, ny):
            vf = 0.5 * (v[i, j - 1] + v[i, j])
            S = eval_sensitivity(spec, 0.5 * (n[i, j - 1] + n[i, j]), vf)
            dv_n = (v[i, j] - v[i, j - 1]) / hy
            dv_t = 0.5 * (cdx(i, j - 1) + cdx(i, j))
            rho = _cutoff((i + 0.5) * hx, j * hy, grid, eps)
            b = rho * (S[1, 0] * dv_t + S[1, 1] * dv_n) + u.y[i, j]
            flux = -(n[i, j] - n[i, j - 1]) / hy + b * (n[i, j - 1] if b > 0 else n[i, j])
            out[i, j - 1] -= flux / hy
            out[i, j] += flux / hy
    return out


def _momentum_rhs(u, n, phi, grid, advection):
    """Convection, viscosity and buoyancy on interior faces."""
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    ux, uy = u.x, u.y
    rx = np.zeros_like(ux)
    ry = np.zeros_like(uy)

    def ux_at(i, j):
        if j < 0:
            return -ux[i, 0]
        if j > ny - 1:
            return -ux[i, ny - 1]
        return ux[i, j]

    def uy_at(i, j):
        if i < 0:
            return -uy[0, j]
        if i > nx - 1:
            return -uy[nx - 1, j]
        return uy[i, j]

    for i in range(1, nx):
        for j in range(ny):
            c = ux[i, j]
            lap = (ux[i + 1, j] - 2 * c + ux[i - 1, j]) / hx**2 + (ux_at(i, j + 1) - 2 * c + ux_at(i, j - 1)) / hy**2
            conv = 0.0
            if advection:
                vb = 0.25 * (uy[i - 1, j] + uy[i - 1, j + 1] + uy[i, j] + uy[i, j + 1])
                ddx = (c - ux[i - 1, j]) / hx if c > 0 else (ux[i + 1, j] - c) / hx
                ddy = (c - ux_at(i, j - 1)) / hy if vb > 0 else (ux_at(i, j + 1) - c) / hy
                conv = c * ddx + vb * ddy
            force = 0.5 * (n[i - 1, j] + n[i, j]) * (phi[i, j] - phi[i - 1, j]) / hx
            rx[i, j] = lap - conv + force
    for i in range(nx):
        for j in range(1, ny):
            c = uy[i, j]
            lap = (uy[i, j + 1] - 2 * c + uy[i, j - 1]) / hy**2 + (uy_at(i + 1, j) - 2 * c + uy_at(i - 1, j)) / hx**2
            conv = 0.0
            if advection:
                ub = 0.25 * (ux[i, j - 1] + ux[i + 1, j - 1] + ux[i, j] + ux[i + 1, j])
                ddy = (c - uy[i, j - 1]) / hy if c > 0 else (uy[i, j + 1] - c) / hy
                ddx = (c - uy_at(i - 1, j)) / hx if ub > 0 else (uy_at(i + 1, j) - c) / hx
                conv = c * ddy + ub * ddx
            force = 0.5 * (n[i, j - 1] + n[i, j]) * (phi[i, j] - phi[i, j - 1]) / hy
            ry[i, j] = lap - conv + force
    return VectorField(rx, ry)


@lru_cache(maxsize=8)
def _pressure_factor(grid: Grid):
    """LU factors of the Neumann Laplacian bordered by a zero-mean constraint."""
    nx, ny = grid.nx, grid.ny
    N = nx * ny
    idx = lambda i, j: i * ny + j  # noqa: E731
    A = sparse.lil_matrix((N + 1, N + 1))
    for i in range(nx):
        for j in range(ny):
            k = idx(i, j)
            for di, dj, h2 in ((-1, 0, grid.hx**2), (1, 0, grid.hx**2), (0, -1, grid.hy**2), (0, 1, grid.hy**2)):
                ii, jj = i + di, j + dj
                if 0 <= ii < nx and 0 <= jj < ny:
                    A[k, idx(ii, jj)] += 1.0 / h2
                    A[k, k] -= 1.0 / h2
            A[k, N] = 1.0
            A[N, k] = 1.0
    return splu(A.tocsc())


def _project(u: VectorField, grid: Grid, dt: float) -> VectorField:
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    div = np.zeros((nx, ny))
    for i in range(nx):
        for j in range(ny):
            div[i, j] = (u.x[i + 1, j] - u.x[i, j]) / hx + (u.y[i, j + 1] - u.y[i, j]) / hy
    rhs = np.append(div.ravel() / dt, 0.0)
    p = _pressure_factor(grid).solve(rhs)[:-1].reshape(nx, ny)
    out = u.copy()
    for i in range(1, nx):
        for j in range(ny):
            out.x[i, j] -= dt * (p[i, j] - p[i - 1, j]) / hx
    for i in range(nx):
        for j in range(1, ny):
            out.y[i, j] -= dt * (p[i, j] - p[i, j - 1]) / hy
    return out, p


def explicit_limit(grid: Grid) -> float:
    return min(grid.hx, grid.hy) ** 2 / 8.0


def explicit_reference_step(state, params, dt: float):
    """One naive forward-Euler step of the full regularized system."""
    from .solver import SystemState  # container only

    g = state.grid
    if dt > explicit_limit(g) * (1 + 1e-12):
        raise OracleError(f"dt={dt:.3e} exceeds explicit limit {explicit_limit(g):.3e}")
    n, v, w, u = state.n, state.v, state.w, state.u
    dn = _density_rhs(n, v, u, params, g)
    dv = _scalar_transport(v, u, g) + _scalar_laplacian(v, g) - v * w
    dw = _scalar_transport(w, u, g) + _scalar_laplacian(w, g) - w + n
    du = _momentum_rhs(u, n, params.phi, g, params.fluid_advection)
    u_star = u + du * dt
    u_new, p = _project(u_star, g, dt)
    return SystemState(g, state.t + dt, n + dt * dn, v + dt * dv, w + dt * dw, u_new, p, state.v0_sup)
