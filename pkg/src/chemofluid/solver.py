"""Time stepping for the regularized chemotaxis-Navier-Stokes system.

One step advances, in this order and each with the beginning-of-step
velocity for transport:

* ``v``: upwind transport, implicit diffusion, exact v-w reaction;
* ``w``: upwind transport, implicit diffusion, exact affine reaction;
* ``n``: explicit conservative finite volumes with the fresh ``v``;
* ``u``: explicit convection, implicit viscosity, buoyancy, projection.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .elliptic import helmholtz_solve, helmholtz_velocity, poisson_solve
from .errors import PositivityError, SolverError, StiffnessError
from .grid import Grid, VectorField, divergence, face_average, gradient, mollifier_faces
from .model import InitialData, ModelParams

log = logging.getLogger(__name__)

DIV_TOL = 1e-8
MIN_DT = 1e-12


@dataclass
class SystemState:
    grid: Grid
    t: float
    n: np.ndarray
    v: np.ndarray
    w: np.ndarray
    u: VectorField
    p: np.ndarray
    v0_sup: float

    @classmethod
    def from_initial(cls, data: InitialData) -> "SystemState":
        g = data.grid
        return cls(g, 0.0, data.n0.astype(float).copy(), data.v0.astype(float).copy(),
                   data.w0.astype(float).copy(), data.u0.copy(), g.zeros(), float(data.v0.max()))

    def copy(self) -> "SystemState":
        return SystemState(self.grid, self.t, self.n.copy(), self.v.copy(), self.w.copy(),
                           self.u.copy(), self.p.copy(), self.v0_sup)


@dataclass
class StepReport:
    dt_used: float
    clamps: int
    pressure_iterations: int
    pressure_residual: float
    cfl_diffusive: float
    cfl_advective: float
    div_u: float


def _flux_divergence(fx: np.ndarray, fy: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence of interior-face fluxes; boundary faces carry no flux."""
    d = np.zeros(grid.shape)
    d[:-1] += fx / grid.hx
    d[1:] -= fx / grid.hx
    d[:, :-1] += fy / grid.hy
    d[:, 1:] -= fy / grid.hy
    return d


def transport(f: np.ndarray, u: VectorField, grid: Grid) -> np.ndarray:
    """Upwind approximation of ``-div(f u)``."""
    ux, uy = u.x[1:-1], u.y[:, 1:-1]
    fx = np.where(ux > 0, f[:-1], f[1:]) * ux
    fy = np.where(uy > 0, f[:, :-1], f[:, 1:]) * uy
    return -_flux_divergence(fx, fy, grid)


def _tangential_differences(v: np.ndarray, grid: Grid):
    """dv/dy on x-faces and dv/dx on y-faces from central cell differences."""
    p = np.pad(v, 1, mode="edge")
    cdx = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * grid.hx)
    cdy = (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * grid.hy)
    return 0.5 * (cdy[1:] + cdy[:-1]), 0.5 * (cdx[:, 1:] + cdx[:, :-1])


def chemotactic_drift(v: np.ndarray, params: ModelParams, grid: Grid):
    """Face-normal components of ``rho_eps S(v) grad v`` on interior faces."""
    rx, ry = mollifier_faces(grid, params.eps)
    vx, vy = face_average(v)
    dvx = np.diff(v, axis=0) / grid.hx
    dvy = np.diff(v, axis=1) / grid.hy
    spec = params.sensitivity
    s11, s12, _, _ = spec.coefficients(vx)
    _, _, s21, s22 = spec.coefficients(vy)
    bx = s11 * dvx
    by = s22 * dvy
    if not spec.isotropic:
        tx, ty = _tangential_differences(v, grid)
        bx = bx + s12 * tx
        by = by + s21 * ty
    return rx * bx, ry * by


def advance_n(state: SystemState, params: ModelParams, dt: float) -> np.ndarray:
    """Conservative explicit update of the cell density."""
    g = state.grid
    n = state.n
    cx, cy = chemotactic_drift(state.v, params, g)
    bx = cx + state.u.x[1:-1]
    by = cy + state.u.y[:, 1:-1]
    fx = -np.diff(n, axis=0) / g.hx + np.where(bx > 0, n[:-1], n[1:]) * bx
    fy = -np.diff(n, axis=1) / g.hy + np.where(by > 0, n[:, :-1], n[:, 1:]) * by
    n_new = n - dt * _flux_divergence(fx, fy, g)
    nmin, nmax = n_new.min(), np.abs(n).max()
    if nmin < -1e-14 * nmax:
        raise PositivityError(f"density went negative ({nmin:.3e}) at t={state.t:.6g}, dt={dt:.3e}")
    return n_new


def _reaction_exponent(n, w, dt):
    # integral over one step of the affine trajectory w' = n - w
    return n * dt + (w - n) * (-np.expm1(-dt))


def _advance_v(state: SystemState, dt: float, v_floor: float):
    g = state.grid
    v = state.v + dt * transport(state.v, state.u, g)
    v = helmholtz_solve(v, g, dt)
    v = v * np.exp(-_reaction_exponent(state.n, state.w, dt))
    low = v < v_floor
    clamps = int(np.count_nonzero(low))
    if clamps:
        log.warning("v fell below floor %.1e in %d cells at t=%.6g; clamping", v_floor, clamps, state.t)
        v = np.where(low, v_floor, v)
    return v, clamps


def advance_v(state: SystemState, dt: float, v_floor: float = 1e-14) -> np.ndarray:
    """Transport, implicit diffusion, then the exact v-w reaction.

    The reaction integrates ``v' = -v w`` against the same-step trajectory
    of ``w' = n - w`` (n frozen), which is exact for flat data.
    """
    return _advance_v(state, dt, v_floor)[0]


def advance_w(state: SystemState, dt: float) -> np.ndarray:
    g = state.grid
    w = state.w + dt * transport(state.w, state.u, g)
    w = helmholtz_solve(w, g, dt)
    decay = np.exp(-dt)
    return w * decay + state.n * (-np.expm1(-dt))


def _convection(u: VectorField, grid: Grid):
    """Upwind ``(u . grad) u`` at interior faces of each component."""
    hx, hy = grid.hx, grid.hy
    ux, uy = u.x, u.y

    # x-component on interior x-faces (nx-1, ny)
    a = ux[1:-1]
    vbar = 0.25 * (uy[:-1, :-1] + uy[:-1, 1:] + uy[1:, :-1] + uy[1:, 1:])
    dxm = (ux[1:-1] - ux[:-2]) / hx
    dxp = (ux[2:] - ux[1:-1]) / hx
    gy = np.pad(ux[1:-1], ((0, 0), (1, 1)))
    gy[:, 0], gy[:, -1] = -gy[:, 1], -gy[:, -2]
    dym = (gy[:, 1:-1] - gy[:, :-2]) / hy
    dyp = (gy[:, 2:] - gy[:, 1:-1]) / hy
    cx = a * np.where(a > 0, dxm, dxp) + vbar * np.where(vbar > 0, dym, dyp)

    # y-component on interior y-faces (nx, ny-1)
    b = uy[:, 1:-1]
    ubar = 0.25 * (ux[:-1, :-1] + ux[1:, :-1] + ux[:-1, 1:] + ux[1:, 1:])
    dym = (uy[:, 1:-1] - uy[:, :-2]) / hy
    dyp = (uy[:, 2:] - uy[:, 1:-1]) / hy
    gx = np.pad(uy[:, 1:-1], ((1, 1), (0, 0)))
    gx[0, :], gx[-1, :] = -gx[1, :], -gx[-2, :]
    dxm = (gx[1:-1] - gx[:-2]) / hx
    dxp = (gx[2:] - gx[1:-1]) / hx
    cy = b * np.where(b > 0, dym, dyp) + ubar * np.where(ubar > 0, dxm, dxp)
    return cx, cy


def _advance_u(state: SystemState, params: ModelParams, n: np.ndarray, dt: float):
    g = state.grid
    u = state.u.copy()
    if params.fluid_advection:
        cx, cy = _convection(state.u, g)
        u.x[1:-1] -= dt * cx
        u.y[:, 1:-1] -= dt * cy
    u = helmholtz_velocity(u, g, dt)
    # buoyancy after the viscous solve keeps hydrostatic balance exact
    nx_f, ny_f = face_average(n)
    u.x[1:-1] += dt * nx_f * np.diff(params.phi, axis=0) / g.hx
    u.y[:, 1:-1] += dt * ny_f * np.diff(params.phi, axis=1) / g.hy
    p, residual = poisson_solve(divergence(u, g) / dt, g, "neumann", return_residual=True)
    u = u - dt * gradient(p, g)
    return u, p, residual


def advance_u(state: SystemState, params: ModelParams, dt: float):
    """Projection step; returns the new velocity and mean-zero pressure."""
    u, p, _ = _advance_u(state, params, state.n, dt)
    return u, p


def stable_dt(state: SystemState, params: ModelParams):
    """``dt_safety * min(h^2/4, h / (|u| + |S_eps grad v| + eps))`` and its two limits."""
    g = state.grid
    diffusive = 1.0 / (2.0 / g.hx**2 + 2.0 / g.hy**2)
    cx, cy = chemotactic_drift(state.v, params, g)
    speed = state.u.max_abs() + max(np.abs(cx).max(), np.abs(cy).max()) + params.eps_cfl
    advective = g.h / speed
    return params.dt_safety * min(diffusive, advective), diffusive, advective


def step(state: SystemState, params: ModelParams, dt_cap: float | None = None):
    """Advance one adaptive step. Returns ``(new_state, StepReport)``."""
    dt, diffusive, advective = stable_dt(state, params)
    dt = min(dt, params.dt_max)
    if dt_cap is not None:
        dt = min(dt, dt_cap)
    if not dt >= MIN_DT:
        raise StiffnessError(f"time step underflow ({dt:.3e}) at t={state.t:.6g}")

    v_new, clamps = _advance_v(state, dt, params.v_floor)
    w_new = advance_w(state, dt)
    n_new = advance_n(replace(state, v=v_new), params, dt)
    u_new, p_new, residual = _advance_u(state, params, n_new, dt)

    div = float(np.abs(divergence(u_new, state.grid)).max())
    if div > DIV_TOL:
        raise SolverError(f"projection left |div u| = {div:.3e} at t={state.t:.6g}")
    if w_new.min() <= 0:
        raise PositivityError(f"w lost positivity at t={state.t:.6g}")
    for name, f in (("n", n_new), ("v", v_new), ("w", w_new), ("p", p_new)):
        if not np.isfinite(f).all():
            raise SolverError(f"non-finite {name} at t={state.t:.6g}")

    new = SystemState(state.grid, state.t + dt, n_new, v_new, w_new, u_new, p_new, state.v0_sup)
    report = StepReport(dt, clamps, 1, residual, dt / diffusive, dt / advective, div)
    return new, report
