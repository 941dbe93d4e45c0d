"""Model parameters, the sensitivity menu and initial-data presets."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import Grid, VectorField, divergence, integrate

log = logging.getLogger(__name__)

SENSITIVITY_VARIANTS = ("logarithmic", "sublogarithmic", "rotated", "scaled")


@dataclass(frozen=True)
class SensitivitySpec:
    """Chemotactic sensitivity ``S(x, n, v)``, independent of x and n.

    ``param`` is theta for ``sublogarithmic`` (in (0, 1)), the rotation
    angle for ``rotated`` and the scale ``c > 0`` for ``scaled``; it is
    ignored for ``logarithmic``.
    """

    variant: str = "logarithmic"
    param: float = 0.0

    def __post_init__(self):
        if self.variant not in SENSITIVITY_VARIANTS:
            raise ConfigurationError(f"unknown sensitivity variant {self.variant!r}")
        if self.variant == "sublogarithmic" and not 0.0 < self.param < 1.0:
            raise ConfigurationError("sublogarithmic theta must lie in (0, 1)")
        if self.variant == "scaled" and not self.param > 0.0:
            raise ConfigurationError("scaled sensitivity needs c > 0")
        if not np.isfinite(self.param):
            raise ConfigurationError("sensitivity parameter must be finite")

    def s0(self, v):
        """The nondecreasing bound ``S0`` with ``|S(x, n, v)| <= S0(v) / v``."""
        v = np.asarray(v, dtype=float)
        if self.variant == "sublogarithmic":
            return v ** (1.0 - self.param)
        if self.variant == "scaled":
            return np.full_like(v, self.param)
        return np.ones_like(v)

    def coefficients(self, v):
        """Entries ``(s11, s12, s21, s22)`` evaluated elementwise on ``v``."""
        v = np.asarray(v, dtype=float)
        if np.any(v <= 0):
            raise DomainError("sensitivity evaluated at non-positive v; positivity was lost upstream")
        if self.variant == "sublogarithmic":
            d = v ** (-self.param)
        elif self.variant == "scaled":
            d = self.param / v
        else:
            d = 1.0 / v
        if self.variant == "rotated":
            c, s = np.cos(self.param), np.sin(self.param)
            return c * d, -s * d, s * d, c * d
        zero = np.zeros_like(d)
        return d, zero, zero, d

    @property
    def isotropic(self) -> bool:
        return self.variant != "rotated" or np.sin(self.param) == 0.0


def eval_sensitivity(spec: SensitivitySpec, n: float, v: float) -> np.ndarray:
    """The 2x2 sensitivity matrix at a single point."""
    if n < 0:
        raise DomainError("sensitivity evaluated at negative density")
    s11, s12, s21, s22 = spec.coefficients(float(v))
    return np.array([[s11, s12], [s21, s22]], dtype=float)


def linear_gravity_potential(grid: Grid, g: float = 1.0) -> np.ndarray:
    _, Y = grid.mesh()
    return g * Y


@dataclass
class ModelParams:
    phi: np.ndarray
    eps: float = 0.05
    sensitivity: SensitivitySpec = field(default_factory=SensitivitySpec)
    dt_safety: float = 0.9
    v_floor: float = 1e-14
    dt_max: float = np.inf
    fluid_advection: bool = True
    eps_cfl: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.dt_safety < 1.0:
            raise ConfigurationError("dt_safety must lie in (0, 1)")
        if not 0.0 < self.v_floor < 1e-3:
            raise ConfigurationError("v_floor must lie in (0, 1e-3)")
        if not self.eps > 0.0:
            raise ConfigurationError("mollifier width must be positive")
        if not self.dt_max > 0.0:
            raise ConfigurationError("dt_max must be positive")
        if not np.isfinite(self.phi).all():
            raise ConfigurationError("potential must be finite")


@dataclass
class InitialData:
    grid: Grid
    n0: np.ndarray
    v0: np.ndarray
    w0: np.ndarray
    u0: VectorField


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_initial_data(data: InitialData, div_tol: float = 1e-10) -> ValidationReport:
    """Check the admissibility conditions; never raises."""
    g = data.grid
    rep = ValidationReport()
    for name, f in (("n0", data.n0), ("v0", data.v0), ("w0", data.w0)):
        if f.shape != g.shape:
            rep.violations.append(f"{name} has shape {f.shape}, expected {g.shape}")
            return rep
        if not np.isfinite(f).all():
            rep.violations.append(f"{name} has non-finite entries")
            return rep
    if not data.u0.is_finite():
        rep.violations.append("u0 has non-finite entries")
        return rep
    if data.n0.min() < 0:
        rep.violations.append(f"n0 negative (min {data.n0.min():.3e})")
    if data.n0.max() <= 0:
        rep.violations.append("n0 identically zero")
    if data.v0.min() <= 0:
        rep.violations.append(f"v0 not strictly positive (min {data.v0.min():.3e})")
    if data.w0.min() <= 0:
        rep.violations.append(f"w0 not strictly positive (min {data.w0.min():.3e})")
    div = np.abs(divergence(data.u0, g)).max()
    if div > div_tol:
        rep.violations.append(f"u0 not divergence-free (max |div| {div:.3e})")
    wall = data.u0.boundary_normal_max()
    if wall > 0:
        rep.violations.append(f"u0 does not vanish on the boundary (max {wall:.3e})")
    return rep


def velocity_from_streamfunction(psi: np.ndarray, grid: Grid) -> VectorField:
    """MAC velocity ``(d psi/dy, -d psi/dx)`` from corner values ``(nx+1, ny+1)``.

    Exactly divergence-free; normal components vanish on the walls when psi
    is zero on the boundary.
    """
    if psi.shape != (grid.nx + 1, grid.ny + 1):
        raise ValueError("stream function must live on cell corners")
    return VectorField(np.diff(psi, axis=1) / grid.hy, -np.diff(psi, axis=0) / grid.hx)


PRESETS = ("uniform", "gaussian-bump", "perturbed", "vortex")


def make_scenario(kind: str, grid: Grid, mass: float, K: float, seed: int | None = None) -> InitialData:
    """Initial data with ``integrate(n0) == mass`` and ``max v0 <= K``.

    ``seed`` only affects "perturbed", whose mode amplitudes are then
    jittered by up to 50%; the other presets are deterministic.
    """
    if kind not in PRESETS:
        raise ConfigurationError(f"unknown preset {kind!r}; choose from {', '.join(PRESETS)}")
    if not (mass > 0 and K > 0):
        raise ConfigurationError("mass and K must be positive")
    X, Y = grid.mesh()
    Lx, Ly = grid.Lx, grid.Ly
    nbar = mass / grid.area
    u0 = VectorField.zeros(grid)
    v0 = grid.full(K)
    w0 = grid.full(nbar)

    if kind == "uniform":
        n0 = grid.full(nbar)
    elif kind == "gaussian-bump":
        sigma = 0.15 * min(Lx, Ly)
        r2 = (X - 0.35 * Lx) ** 2 + (Y - 0.6 * Ly) ** 2
        n0 = 0.5 + np.exp(-r2 / (2 * sigma**2))
    elif kind == "perturbed":
        a = np.ones(5) if seed is None else 1.0 + 0.5 * np.random.default_rng(seed).uniform(-1, 1, 5)
        cx, cy = np.cos(np.pi * X / Lx), np.cos(np.pi * Y / Ly)
        n0 = 1.0 + 0.1 * a[0] * cx * cy + 0.05 * a[1] * np.cos(2 * np.pi * X / Lx)
        v0 = K * (1.0 - 0.05 * a[2] * (1.0 + cx) - 0.05 * (1.0 - np.cos(2 * np.pi * Y / Ly)) / 2)
        w0 = nbar * (1.0 + 0.1 * a[3] * cy)
        u0 = _corner_vortex(grid, 0.01 * a[4])
    else:  # vortex
        n0 = grid.full(1.0)
        u0 = _corner_vortex(grid, 0.1)

    n0 = n0 * (mass / integrate(n0, grid))
    return InitialData(grid, n0, v0, w0, u0)


def _corner_vortex(grid: Grid, amplitude: float) -> VectorField:
    xc, yc = np.meshgrid(grid.x_faces, grid.y_faces, indexing="ij")
    psi = amplitude * np.sin(np.pi * xc / grid.Lx) ** 2 * np.sin(np.pi * yc / grid.Ly) ** 2
    # psi vanishes on the walls to round-off; pin it exactly
    psi[[0, -1], :] = 0.0
    psi[:, [0, -1]] = 0.0
    return velocity_from_streamfunction(psi, grid)
