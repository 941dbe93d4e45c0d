"""Quantities tracked along a run, invariant checks, rate fits and probes."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import integrate as spi

from .errors import CalibrationError, DiagnosticError, FitError, QuadratureError
from .grid import Grid, divergence, face_average, face_inner, gradient, integrate, laplacian_velocity, to_cells

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- fields

def z_field(v: np.ndarray, v0_sup: float, v_floor: float = 1e-14) -> np.ndarray:
    """``z = -ln(v / v0_sup)``, nonnegative while ``v <= v0_sup``."""
    if not v0_sup > 0:
        raise DiagnosticError("v0_sup must be positive")
    if v.min() < v_floor:
        raise DiagnosticError(f"v below floor ({v.min():.3e} < {v_floor:.1e})")
    return np.maximum(-np.log(v / v0_sup), 0.0)


def _entropy_density(n: np.ndarray, nbar: float) -> np.ndarray:
    # n ln(n/nbar) - n + nbar: pointwise nonnegative, integrates to the
    # relative entropy whenever the mass equals nbar * |Omega|
    d = n / nbar - 1.0
    tiny = n < 1e-300
    d = np.where(tiny, 0.0, d)
    out = nbar * ((1.0 + d) * np.log1p(d) - d)
    return np.maximum(np.where(tiny, nbar, out), 0.0)


def lyapunov_F(state, n_bar0: float):
    """Conditional Lyapunov functional and its four parts.

    Returns ``(F, (entropy, half_grad_z_sq, w_variance, u_sq))``.
    """
    g = state.grid
    entropy = integrate(_entropy_density(state.n, n_bar0), g)
    gz = gradient(z_field(state.v, state.v0_sup), g)
    half_gz = 0.5 * face_inner(gz, gz, g)
    wbar = integrate(state.w, g) / g.area
    wvar = integrate((state.w - wbar) ** 2, g)
    usq = face_inner(state.u, state.u, g)
    parts = (entropy, half_gz, wvar, usq)
    return math.fsum(parts), parts


# ---------------------------------------------------------------- records

@dataclass(frozen=True)
class RunMetadata:
    """Run constants entering the a-priori bounds."""

    mass: float
    area: float
    int_w0: float
    mean_w0: float
    v0_sup: float
    int_log_v0: float
    K: float
    s0_K: float

    @property
    def n_bar0(self) -> float:
        return self.mass / self.area

    @property
    def C0(self) -> float:
        return self.int_log_v0 + self.mass + self.int_w0

    @property
    def C1(self) -> float:
        return 2 * self.mass + self.s0_K**2 * self.C0

    @classmethod
    def from_state(cls, state, K: float, s0_K: float) -> "RunMetadata":
        g = state.grid
        return cls(mass=integrate(state.n, g), area=g.area, int_w0=integrate(state.w, g),
                   mean_w0=integrate(state.w, g) / g.area, v0_sup=state.v0_sup,
                   int_log_v0=integrate(np.log(state.v0_sup / state.v), g), K=K, s0_K=float(s0_K))


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass_n: float
    sup_v: float
    l1_w: float
    mean_w: float
    F_value: float
    F_entropy: float
    F_grad_z: float
    F_w_var: float
    F_u: float
    sup_dev_n: float
    sup_v_norm: float
    sup_dev_w: float
    grad_z_l2: float
    grad_z_l4: float
    grad_z_sup: float
    u_l2: float
    grad_u_l2: float
    div_u_sup: float
    fisher_n: float
    clamp_count: int

    @property
    def F_components(self):
        return (self.F_entropy, self.F_grad_z, self.F_w_var, self.F_u)

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict:
        return asdict(self)


def compute_record(state, meta: RunMetadata, clamp_count: int = 0) -> DiagnosticsRecord:
    g = state.grid
    nbar = meta.n_bar0
    F, (ent, hgz, wvar, usq) = lyapunov_F(state, nbar)
    z = z_field(state.v, state.v0_sup)
    gz = gradient(z, g)
    cx, cy = to_cells(gz)
    mag2 = cx**2 + cy**2
    gn = gradient(state.n, g)
    nx_f, ny_f = face_average(state.n)
    fisher = (np.sum(gn.x[1:-1] ** 2 / (nx_f + 1) ** 2) + np.sum(gn.y[:, 1:-1] ** 2 / (ny_f + 1) ** 2)) * g.cell_area
    grad_u2 = -face_inner(state.u, laplacian_velocity(state.u, g), g)
    sup_v = float(state.v.max())
    l1_w = integrate(state.w, g)
    return DiagnosticsRecord(
        t=float(state.t),
        mass_n=integrate(state.n, g),
        sup_v=sup_v,
        l1_w=l1_w,
        mean_w=l1_w / g.area,
        F_value=F, F_entropy=ent, F_grad_z=hgz, F_w_var=wvar, F_u=usq,
        sup_dev_n=float(np.abs(state.n - nbar).max()),
        sup_v_norm=sup_v / state.v0_sup,
        sup_dev_w=float(np.abs(state.w - nbar).max()),
        grad_z_l2=math.sqrt(2.0 * hgz),
        grad_z_l4=float(np.sum(mag2**2) * g.cell_area) ** 0.25,
        grad_z_sup=float(np.sqrt(mag2.max())),
        u_l2=math.sqrt(usq),
        grad_u_l2=math.sqrt(max(grad_u2, 0.0)),
        div_u_sup=float(np.abs(divergence(state.u, g)).max()),
        fisher_n=float(fisher),
        clamp_count=int(clamp_count),
    )


# ---------------------------------------------------------------- rate fits

@dataclass(frozen=True)
class RateFit:
    kappa_hat: float
    intercept: float
    t_a: float
    t_b: float
    r2: float
    n_samples: int

    @property
    def reliable(self) -> bool:
        return self.r2 >= 0.99


def fit_decay_rate(t, y, window=None, min_samples: int = 10) -> RateFit:
    """Least-squares line through ``(t, ln y)``; ``kappa_hat`` is minus the slope.

    The default window is the second half of the time span.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is None:
        window = (t[0] + 0.5 * (t[-1] - t[0]), t[-1])
    ta, tb = window
    sel = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if sel.sum() < min_samples:
        raise FitError(f"only {sel.sum()} samples in window [{ta}, {tb}], need {min_samples}")
    ts, ys = t[sel], y[sel]
    if not np.all(ys > 0) or not np.all(np.isfinite(ys)):
        raise FitError("non-positive values in fit window; quantity has not entered decay")
    ly = np.log(ys)
    slope, intercept = np.polyfit(ts, ly, 1)
    resid = ly - (slope * ts + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    ss_res = np.sum(resid**2)
    if ss_tot <= 1e-30 * max(1.0, ly.size):
        r2 = 1.0
    else:
        r2 = float(np.clip(1.0 - ss_res / ss_tot, 0.0, 1.0))
    return RateFit(float(-slope), float(intercept), float(ts[0]), float(ts[-1]), r2, int(sel.sum()))


# ---------------------------------------------------------------- invariants

@dataclass
class InvariantResult:
    name: str
    passed: bool
    worst: float
    t_worst: float
    tol: float


@dataclass
class InvariantReport:
    results: list[InvariantResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def as_dict(self):
        return {r.name: asdict(r) for r in self.results}


INVARIANT_TOLERANCES = {
    "mass": 1e-10,
    "sup_v_bound": 1e-12,
    "sup_v_monotone": 1e-12,
    "w_l1_bound": 1e-8,
    "mean_w_ode": 1e-6,
    "F_additivity": 1e-12,
    "divergence": 1e-8,
    "clamps": 0.0,
}


def check_invariants(records, meta: RunMetadata | None = None, tolerances=None) -> InvariantReport:
    """Evaluate the exact identities and bounds on a record series.

    Run constants are taken from ``meta`` when given, otherwise from the
    first record (which must be the initial state).
    """
    if not records:
        raise DiagnosticError("empty record series")
    tol = dict(INVARIANT_TOLERANCES, **(tolerances or {}))
    r0 = records[0]
    if meta is None:
        m, int_w0, mean_w0 = r0.mass_n, r0.l1_w, r0.mean_w
        area = r0.l1_w / r0.mean_w
        v0_sup = r0.sup_v / r0.sup_v_norm
    else:
        m, int_w0, mean_w0, area, v0_sup = meta.mass, meta.int_w0, meta.mean_w0, meta.area, meta.v0_sup
    nbar = m / area
    t = np.array([r.t for r in records])
    col = lambda name: np.array([getattr(r, name) for r in records], dtype=float)  # noqa: E731

    checks = {}
    checks["mass"] = np.abs(col("mass_n") - m) / m
    checks["sup_v_bound"] = col("sup_v") - v0_sup
    sv = col("sup_v")
    checks["sup_v_monotone"] = np.concatenate([[0.0], np.diff(sv)])
    checks["w_l1_bound"] = col("l1_w") - (m + np.exp(-t) * int_w0)
    checks["mean_w_ode"] = np.abs(col("mean_w") - (nbar + (mean_w0 - nbar) * np.exp(-t)))
    F = col("F_value")
    parts = np.array([[math.fsum(r.F_components)] for r in records])[:, 0]
    checks["F_additivity"] = np.abs(F - parts) / np.maximum(np.abs(F), 1e-300)
    checks["divergence"] = col("div_u_sup")
    checks["clamps"] = col("clamp_count")

    report = InvariantReport()
    for name, vals in checks.items():
        k = int(np.argmax(vals))
        worst = float(vals[k])
        report.results.append(InvariantResult(name, bool(worst <= tol[name]), worst, float(t[k]), tol[name]))
    return report


@dataclass
class LyapunovFinding:
    delta: float
    entered: bool
    t_entry: float | None
    monotone: bool
    worst_increase: float
    t_worst: float | None


def lyapunov_monotone_after_entry(records, delta: float, slack: float = 1e-8) -> LyapunovFinding:
    """Is F non-increasing after it first drops to ``delta``?

    A violation is reported as a finding, never raised.
    """
    F = np.array([r.F_value for r in records])
    t = np.array([r.t for r in records])
    idx = np.flatnonzero(F <= delta)
    if idx.size == 0:
        return LyapunovFinding(delta, False, None, True, 0.0, None)
    k0 = int(idx[0])
    inc = np.diff(F[k0:])
    if inc.size == 0:
        return LyapunovFinding(delta, True, float(t[k0]), True, 0.0, None)
    k = int(np.argmax(inc))
    worst = float(inc[k])
    return LyapunovFinding(delta, True, float(t[k0]), worst <= slack, worst, float(t[k0 + k + 1]))


# ---------------------------------------------------------------- temporal averages

@dataclass
class AverageBound:
    name: str
    average: float
    bound: float | None

    @property
    def ok(self) -> bool:
        return self.bound is None or self.average <= self.bound


@dataclass
class TemporalAverages:
    t1: float
    t2: float
    entries: list[AverageBound]

    @property
    def ok(self) -> bool:
        return all(e.ok for e in self.entries)

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def _time_average(t, y, t1, t2):
    # trapezoid on the samples, with linear interpolation at the window ends
    ts = np.concatenate([[t1], t[(t > t1) & (t < t2)], [t2]])
    ys = np.interp(ts, t, y)
    return float(spi.trapezoid(ys, ts) / (t2 - t1))


def temporal_average_report(records, t1: float, t2: float, meta: RunMetadata,
                            M: float | None = None, min_samples: int = 10) -> TemporalAverages:
    """Time averages of the gradient quantities against their a-priori bounds.

    Covers the mean of ``||grad z||^2``, of ``int |grad n|^2/(n+1)^2`` and of
    the relative entropy; the entropy bound needs the Moser-Trudinger
    constant ``M`` and is omitted without it.
    """
    t = np.array([r.t for r in records])
    if not (t[0] - 1e-12 <= t1 < t2 <= t[-1] + 1e-12):
        raise DiagnosticError(f"window [{t1}, {t2}] outside series range [{t[0]}, {t[-1]}]")
    inside = np.count_nonzero((t >= t1) & (t <= t2))
    if inside < min_samples:
        warnings.warn(f"only {inside} samples in [{t1}, {t2}]; time averages are coarse", RuntimeWarning)
    gz2 = np.array([r.grad_z_l2**2 for r in records])
    fisher = np.array([r.fisher_n for r in records])
    ent = np.array([r.F_entropy for r in records])
    m, w0, s2 = meta.mass, meta.int_w0, meta.s0_K**2
    span = t2 - t1
    b_gz = meta.C0 * (t1 + 1) / span + m + math.exp(-t1) * w0
    b_fisher = meta.C1 * (t1 + 1) / span + m * s2 + s2 * math.exp(-t1) * w0
    b_ent = None
    if M is not None:
        b_ent = (m / math.pi * meta.C1 * (1 + t1) / span + (4 * M * m**2 + M) * m
                 + (m**2 / math.pi + m * w0 * math.exp(-t1) / math.pi) * s2
                 + 2 * m * max(math.log(meta.area / m), 0.0))
    return TemporalAverages(t1, t2, [
        AverageBound("grad_z_sq", _time_average(t, gz2, t1, t2), b_gz),
        AverageBound("fisher_n", _time_average(t, fisher, t1, t2), b_fisher),
        AverageBound("entropy", _time_average(t, ent, t1, t2), b_ent),
    ])


# ---------------------------------------------------------------- Moser-Trudinger probes

def _mt_terms(phi, psi, a, eps, grid):
    int_phi = integrate(phi, grid)
    ent = integrate(_entropy_density(phi, int_phi / grid.area), grid)
    gpsi = gradient(psi, grid)
    dirichlet = face_inner(gpsi, gpsi, grid)
    l1psi = integrate(np.abs(psi), grid)
    lhs = integrate(phi * np.abs(psi), grid)
    fixed = ent / a + (1 + eps) * a / (8 * math.pi) * int_phi * dirichlet
    per_M = a * int_phi * l1psi**2 + int_phi / a
    return lhs, fixed, per_M


def moser_trudinger_probe(phi, psi, a: float, eps: float, M: float, grid: Grid) -> float:
    """Right- minus left-hand side of the weighted Moser-Trudinger inequality.

    Nonnegative means the inequality holds for this ``(phi, psi, a, M)``.
    """
    if phi.min() < 0 or phi.max() <= 0:
        raise DiagnosticError("phi must be nonnegative and not identically zero")
    if not (a > 0 and eps > 0):
        raise DiagnosticError("a and eps must be positive")
    lhs, fixed, per_M = _mt_terms(phi, psi, a, eps, grid)
    return fixed + M * per_M - lhs


def required_M(phi, psi, a: float, eps: float, grid: Grid) -> float:
    """Smallest M making the probe residual zero (may be negative)."""
    lhs, fixed, per_M = _mt_terms(phi, psi, a, eps, grid)
    return (lhs - fixed) / per_M


def log_moser_trudinger_probe(psi, eps: float, M: float, grid: Grid) -> float:
    """Residual of the companion inequality for ``int psi ln(psi + 1)``."""
    if psi.min() < 0:
        raise DiagnosticError("psi must be nonnegative")
    s = integrate(psi, grid)
    g = gradient(psi, grid)
    xf, yf = face_average(psi)
    weighted = (np.sum(g.x[1:-1] ** 2 / (xf + 1) ** 2) + np.sum(g.y[:, 1:-1] ** 2 / (yf + 1) ** 2)) * grid.cell_area
    lhs = integrate(psi * np.log1p(psi), grid)
    rhs = ((1 + eps) / (2 * math.pi) * s * weighted + 4 * M * s**3
           + (M - math.log(s / grid.area)) * s)
    return rhs - lhs


def smooth_random_triple(grid: Grid, rng: np.random.Generator, modes: int = 4):
    """Random smooth ``(phi, psi, a)``: phi = exp(random field), psi a random field."""
    X, Y = grid.mesh()
    kx = rng.integers(0, modes + 1, size=modes)
    ky = rng.integers(0, modes + 1, size=modes)

    def field(amp):
        f = np.zeros(grid.shape)
        for i in range(modes):
            ph = rng.uniform(0, 2 * np.pi, size=2)
            c = rng.normal()
            f += c * np.cos(np.pi * kx[i] * X / grid.Lx + ph[0]) * np.cos(np.pi * ky[i] * Y / grid.Ly + ph[1])
        return amp * f

    phi = np.exp(field(rng.uniform(0.0, 3.0)))
    phi *= 10 ** rng.uniform(-2, 2) / integrate(phi, grid)
    psi = field(10 ** rng.uniform(-2, 1)) + rng.normal() * 10 ** rng.uniform(-2, 1)
    a = 10 ** rng.uniform(-2, 2)
    return phi, psi, a


def constant_triple(grid: Grid, rng: np.random.Generator):
    """Constant ``phi`` and ``psi`` with a log-uniform ``a``."""
    phi = grid.full(10 ** rng.uniform(-2, 2))
    psi = grid.full(rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(-2, 2))
    return phi, psi, 10 ** rng.uniform(-2, 2)


M_SEARCH_GRID = np.concatenate([[0.0], 10.0 ** (np.arange(-64, 65) / 8.0)])


def calibrate_M(grid: Grid, eps: float, family=smooth_random_triple, trials: int = 1000,
                seed: int = 0, search_grid=M_SEARCH_GRID) -> float:
    """Smallest M on a log grid with nonnegative probe residual on every sample.

    This is an empirical lower estimate of the true constant.  Samples are
    drawn sequentially from one generator, so a larger ``trials`` extends
    the sample set of a smaller one.
    """
    if trials < 100:
        raise CalibrationError("need at least 100 trials")
    rng = np.random.default_rng(seed)
    need = -np.inf
    for _ in range(trials):
        phi, psi, a = family(grid, rng)
        need = max(need, required_M(phi, psi, a, eps, grid))
    ok = search_grid[search_grid >= need]
    if ok.size == 0:
        raise CalibrationError(f"required M {need:.3e} exceeds search range")
    return float(ok[0])


# ---------------------------------------------------------------- convolution integrals

@dataclass
class ConvolutionCheck:
    t: np.ndarray
    lhs: np.ndarray
    shape: np.ndarray
    C_hat: float
    fit: RateFit | None

    @property
    def bound(self) -> np.ndarray:
        return self.C_hat * self.shape


def convolution_integral(t: float, alpha: float, beta: float, gamma: float, delta: float) -> float:
    """``int_0^t (1 + (t-s)^-alpha) e^{-gamma (t-s)} (1 + s^-beta) e^{-delta s} ds``.

    Split into four pieces whose endpoint power singularities are handled
    by the algebraic weights of QUADPACK's QAWS.
    """
    f = lambda s: math.exp(-gamma * (t - s) - delta * s)  # noqa: E731
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spi.IntegrationWarning)
        try:
            for ps in (0.0, -beta):
                for pt in (0.0, -alpha):
                    val, _ = spi.quad(f, 0.0, t, weight="alg", wvar=(ps, pt), limit=200, epsabs=0.0, epsrel=1e-11)
                    total += val
        except spi.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failed at t={t}: {exc}") from exc
    return total


def convolution_bound_check(alpha: float, beta: float, gamma: float, delta: float,
                            t=None, fit_window=None) -> ConvolutionCheck:
    """Sample the convolution integral and the smallest constant in its bound."""
    if not (alpha < 1 and beta < 1 and gamma > 0 and delta > 0):
        raise DiagnosticError("need alpha < 1, beta < 1, gamma > 0, delta > 0")
    if gamma == delta:
        raise DiagnosticError("gamma and delta must differ")
    t = np.linspace(0.1, 20.0, 200) if t is None else np.asarray(t, dtype=float)
    lhs = np.array([convolution_integral(ti, alpha, beta, gamma, delta) for ti in t])
    expo = min(0.0, 1.0 - alpha - beta)
    shape = (1.0 + t**expo) * np.exp(-min(gamma, delta) * t)
    C_hat = float(np.max(lhs / shape))
    try:
        fit = fit_decay_rate(t, lhs, fit_window)
    except DiagnosticError:
        fit = None
    return ConvolutionCheck(t, lhs, shape, C_hat, fit)
