"""Scenario runs, mass sweeps, consistency checks and plot-data export."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .checkpoint import is_checkpoint, load_checkpoint, save_checkpoint
from .config import ScenarioConfig, load_config
from .diagnostics import (
    DiagnosticsRecord, InvariantReport, LyapunovFinding, RateFit, RunMetadata,
    check_invariants, compute_record, fit_decay_rate, lyapunov_F,
    lyapunov_monotone_after_entry, temporal_average_report,
)
from .errors import ChemofluidError, ConfigurationError, DiagnosticError, FitError
from .grid import Grid, VectorField, divergence, integrate
from .model import InitialData, ModelParams, make_scenario, validate_initial_data
from .oracle import explicit_limit, explicit_reference_step, homogeneous_closed_form, manufactured_heat_solution
from .solver import SystemState, advance_n, step

log = logging.getLogger(__name__)

FIT_QUANTITIES = ("sup_dev_n", "sup_v_norm", "sup_dev_w", "grad_z_l2", "grad_z_sup", "u_l2")

EXIT_OK, EXIT_INVARIANT, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3


class FSample(NamedTuple):
    t: float
    F_value: float


@dataclass
class StepStats:
    steps: int = 0
    clamps: int = 0
    max_div: float = 0.0
    max_pressure_residual: float = 0.0
    min_dt: float = math.inf
    max_dt: float = 0.0

    def update(self, rep) -> None:
        self.steps += 1
        self.clamps += rep.clamps
        self.max_div = max(self.max_div, rep.div_u)
        self.max_pressure_residual = max(self.max_pressure_residual, rep.pressure_residual)
        self.min_dt = min(self.min_dt, rep.dt_used)
        self.max_dt = max(self.max_dt, rep.dt_used)


@dataclass
class RunResult:
    config: ScenarioConfig
    records: list[DiagnosticsRecord]
    meta: RunMetadata
    fits: dict[str, RateFit | None]
    fit_errors: dict[str, str]
    invariants: InvariantReport
    lyapunov: LyapunovFinding
    stats: StepStats
    final_state: SystemState
    checkpoint: Path | None = None
    out_dir: Path | None = None
    error: str | None = None
    error_type: str | None = None
    F_trace: list[FSample] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_SOLVER
        return EXIT_OK if self.invariants.passed else EXIT_INVARIANT

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def summary(self) -> dict:
        """JSON-ready summary; holds no wall-clock data so reruns are byte-identical."""
        fits = {k: (asdict(f) | {"reliable": f.reliable} if f is not None else None) for k, f in self.fits.items()}
        out = {
            "config": self.config.as_dict(),
            "meta": asdict(self.meta) | {"n_bar0": self.meta.n_bar0, "C0": self.meta.C0, "C1": self.meta.C1},
            "status": "ok" if self.error is None else "error",
            "error": self.error,
            "error_type": self.error_type,
            "t_final": self.final_state.t,
            "n_records": len(self.records),
            "steps": asdict(self.stats) | {"min_dt": _finite_or_none(self.stats.min_dt)},
            "fits": fits,
            "fit_errors": self.fit_errors,
            "invariants": {"passed": self.invariants.passed, **self.invariants.as_dict()},
            "lyapunov": asdict(self.lyapunov),
        }
        t_end = self.records[-1].t
        if t_end > 0 and len(self.records) >= 2:
            try:
                avg = temporal_average_report(self.records, 0.0, t_end, self.meta, min_samples=2)
                out["temporal_averages"] = {e.name: {"average": e.average, "bound": e.bound, "ok": e.ok}
                                            for e in avg.entries}
            except DiagnosticError as exc:
                out["temporal_averages"] = {"error": str(exc)}
        return out


def _finite_or_none(x):
    return x if math.isfinite(x) else None


def initial_data(config: ScenarioConfig) -> InitialData:
    return make_scenario(config.preset, config.grid, config.mass, config.K, seed=config.seed)


def _fit_all(records, min_samples=10):
    fits, errors = {}, {}
    t = np.array([r.t for r in records])
    for name in FIT_QUANTITIES:
        y = np.array([getattr(r, name) for r in records])
        try:
            fits[name] = fit_decay_rate(t, y, min_samples=min_samples)
        except FitError as exc:
            fits[name] = None
            errors[name] = str(exc)
    return fits, errors


def write_timeseries(path, records) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DiagnosticsRecord.columns())
        for r in records:
            wr.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
    return path


def read_timeseries(path) -> list[DiagnosticsRecord]:
    cols = DiagnosticsRecord.columns()
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header != cols:
            raise ValueError(f"{path}: unexpected columns {header}")
        return [DiagnosticsRecord(*[int(v) if c == "clamp_count" else float(v) for c, v in zip(cols, row)])
                for row in rd]


def run(config: ScenarioConfig, write: bool = True, trace_F: bool = False) -> RunResult:
    """Integrate one scenario to ``t_end``, sampling every ``sample_interval``.

    Solver errors stop the integration; whatever was computed up to the
    last good state is still returned (and written).  ``trace_F`` also
    records the Lyapunov functional after every step.
    """
    data = initial_data(config)
    report = validate_initial_data(data)
    if not report.ok:
        raise ConfigurationError("invalid initial data: " + "; ".join(report.violations))
    params = config.model_params()
    state = SystemState.from_initial(data)
    meta = RunMetadata.from_state(state, config.K, float(config.sensitivity_spec.s0(config.K)))
    stats = StepStats()
    records = [compute_record(state, meta, 0)]
    F_trace = [FSample(0.0, records[0].F_value)] if trace_F else []
    error = error_type = None
    wall0 = time.perf_counter()

    n_samples = int(math.floor(config.t_end / config.sample_interval + 1e-9))
    targets = [k * config.sample_interval for k in range(1, n_samples + 1)]
    if config.t_end > 0 and (not targets or targets[-1] < config.t_end - 1e-12):
        targets.append(config.t_end)
    try:
        for target in targets:
            while state.t < target - 1e-12:
                state, rep = step(state, params, dt_cap=target - state.t)
                stats.update(rep)
                if trace_F:
                    F_trace.append(FSample(state.t, lyapunov_F(state, meta.n_bar0)[0]))
            state.t = target
            records.append(compute_record(state, meta, stats.clamps))
    except ChemofluidError as exc:
        error, error_type = str(exc), type(exc).__name__
        log.error("run stopped at t=%.6g: %s", state.t, exc)

    fits, fit_errors = _fit_all(records)
    invariants = check_invariants(records, meta)
    lyap = lyapunov_monotone_after_entry(F_trace if trace_F else records, config.lyapunov_delta)
    result = RunResult(config, records, meta, fits, fit_errors, invariants, lyap, stats, state,
                       error=error, error_type=error_type, F_trace=F_trace,
                       wall_time=time.perf_counter() - wall0)
    if write:
        _write_outputs(result)
    return result


def _write_outputs(result: RunResult) -> None:
    out = result.config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    result.out_dir = out
    result.config.save(out / "config.ini")
    write_timeseries(out / "timeseries.csv", result.records)
    result.checkpoint = save_checkpoint(out / "final.ckpt", result.final_state, result.meta)
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- sweep

@dataclass
class SweepRow:
    mass: float
    status: str
    error: str | None
    exit_code: int
    lyapunov_entered: bool | None
    lyapunov_monotone: bool | None
    invariants_passed: bool | None
    rates: dict[str, float | None]
    r2: dict[str, float | None]
    out_dir: str


@dataclass
class SweepReport:
    rows: list[SweepRow]

    @property
    def ok(self) -> bool:
        return all(r.exit_code == EXIT_OK for r in self.rows)

    @property
    def exit_code(self) -> int:
        return max((r.exit_code for r in self.rows), default=EXIT_OK)

    def as_dict(self):
        return {"rows": [asdict(r) for r in self.rows]}


def _mass_dir(mass: float) -> str:
    return f"mass_{mass!r}"


def _sweep_one(config: ScenarioConfig) -> SweepRow:
    try:
        res = run(config)
    except Exception as exc:  # recorded, the sweep goes on
        code = EXIT_CONFIG if isinstance(exc, ConfigurationError) else EXIT_SOLVER
        return SweepRow(config.mass, "error", f"{type(exc).__name__}: {exc}", code, None, None, None,
                        {}, {}, str(config.resolved_output_dir()))
    return SweepRow(
        config.mass, "ok" if res.error is None else "error", res.error, res.exit_code,
        res.lyapunov.entered, res.lyapunov.monotone, res.invariants.passed,
        {k: (f.kappa_hat if f else None) for k, f in res.fits.items()},
        {k: (f.r2 if f else None) for k, f in res.fits.items()},
        str(res.out_dir))


def sweep(base: ScenarioConfig, masses, workers: int | None = None) -> SweepReport:
    """Run ``base`` once per mass; each run writes under ``<output_dir>/mass_<m>``."""
    masses = [float(m) for m in masses]
    if any(not (m > 0) for m in masses):
        raise ConfigurationError("sweep masses must be positive")
    unique = sorted(set(masses))
    if len(unique) != len(masses):
        warnings.warn("duplicate masses removed from sweep", UserWarning)
    if not unique:
        return SweepReport([])
    configs = [replace(base, mass=m, output_dir=str(Path(base.output_dir) / _mass_dir(m))) for m in unique]
    if workers == 1 or len(configs) == 1:
        rows = [_sweep_one(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_one, configs))
    report = SweepReport(rows)
    out = base.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep_summary.json").write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "sweep_summary.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["mass", "status", "exit_code", "lyapunov_monotone", "invariants_passed",
                     *[f"kappa_{q}" for q in FIT_QUANTITIES]])
        for r in rows:
            wr.writerow([repr(r.mass), r.status, r.exit_code, r.lyapunov_monotone, r.invariants_passed,
                         *[repr(r.rates.get(q)) for q in FIT_QUANTITIES]])
    return report


# ---------------------------------------------------------------- check

@dataclass
class CheckItem:
    name: str
    passed: bool
    detail: str
    value: float | None = None
    tol: float | None = None


@dataclass
class CheckReport:
    source: str
    kind: str
    items: list[CheckItem]

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_INVARIANT

    def as_dict(self):
        return {"source": self.source, "kind": self.kind, "passed": self.passed,
                "items": [asdict(i) for i in self.items]}

    def lines(self) -> list[str]:
        out = [f"{'PASS' if i.passed else 'FAIL'}  {i.name}: {i.detail}" for i in self.items]
        out.append(f"{'PASS' if self.passed else 'FAIL'}  overall ({self.kind} {self.source})")
        return out


def _homogeneous_check(config: ScenarioConfig) -> CheckItem:
    g = Grid(8, 8, config.Lx, config.Ly)
    nbar = config.mass / g.area
    w0, v0, T, dt = 2 * nbar, config.K, 1.0, 1e-3
    data = InitialData(g, g.full(nbar), g.full(v0), g.full(w0), VectorField.zeros(g))
    params = replace(config.model_params_for(g), dt_max=dt)
    state = SystemState.from_initial(data)
    worst = 0.0
    while state.t < T - 1e-12:
        state, _ = step(state, params, dt_cap=T - state.t)
        w_ex, v_ex = homogeneous_closed_form(nbar, w0, v0, state.t)
        worst = max(worst, float(np.abs(state.w - w_ex).max()), float(np.abs(state.v - v_ex).max()))
    tol = 1e-6
    return CheckItem("homogeneous_ode", worst <= tol, f"max |sim - closed form| = {worst:.3e} (tol {tol:g})",
                     worst, tol)


def oracle_order(config: ScenarioConfig, n: int = 16, T: float | None = None, levels: int = 3):
    """Solver-vs-oracle discrepancy on a coupled ``n x n`` problem for dt, dt/2, dt/4."""
    g = Grid(n, n, config.Lx, config.Ly)
    data = make_scenario("perturbed", g, config.mass, config.K, seed=config.seed)
    params = config.model_params_for(g)
    dt0 = explicit_limit(g)
    T = T if T is not None else 40 * dt0
    errs = []
    for lev in range(levels):
        steps = int(math.ceil(T / dt0)) * 2**lev
        dt = T / steps
        a = SystemState.from_initial(data)
        b = SystemState.from_initial(data)
        p_solver = replace(params, dt_max=dt)
        for _ in range(steps):
            a, _ = step(a, p_solver, dt_cap=dt)
            b = explicit_reference_step(b, params, dt)
        errs.append(_state_distance(a, b))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    return errs, orders


def heat_order(sizes=(16, 32, 64), T: float = 0.05, L: float = 1.0):
    """Sup-norm error of the density kernel against the exact Neumann heat mode.

    With ``v`` constant and ``u = 0`` the density equation reduces to the
    heat equation; ``dt`` scales like ``h^2`` so the spatial order shows.
    """
    errs = []
    for n in sizes:
        g = Grid(n, n, L, L)
        params = ModelParams(phi=g.zeros(), eps=0.25 * L)
        st = SystemState(g, 0.0, 1.0 + manufactured_heat_solution(g, 0.0), g.full(1.0), g.full(1.0),
                         VectorField.zeros(g), g.zeros(), 1.0)
        steps = int(math.ceil(T / (0.2 * g.h**2)))
        dt = T / steps
        for _ in range(steps):
            st.n = advance_n(st, params, dt)
        errs.append(float(np.abs(st.n - 1.0 - manufactured_heat_solution(g, T)).max()))
    errs = np.array(errs)
    return errs, np.log2(errs[:-1] / errs[1:])


def _state_distance(a: SystemState, b: SystemState) -> float:
    g = a.grid
    d = 0.0
    for fa, fb in ((a.n, b.n), (a.v, b.v), (a.w, b.w)):
        d += math.sqrt(integrate((fa - fb) ** 2, g))
    d += math.sqrt(np.sum((a.u.x - b.u.x) ** 2) * g.cell_area + np.sum((a.u.y - b.u.y) ** 2) * g.cell_area)
    return d


def _check_config(config: ScenarioConfig, horizon: float) -> list[CheckItem]:
    items = []
    rep = validate_initial_data(initial_data(config))
    items.append(CheckItem("initial_data", rep.ok, "valid" if rep.ok else "; ".join(rep.violations)))
    items.append(_homogeneous_check(config))
    t0 = time.perf_counter()
    errs, orders = oracle_order(config)
    elapsed = time.perf_counter() - t0
    order = float(orders.min())
    items.append(CheckItem("oracle_temporal_order", order >= 0.9,
                           f"discrepancies {', '.join(f'{e:.3e}' for e in errs)}; min order {order:.3f} "
                           f"({elapsed:.1f} s)", order, 0.9))
    short = replace(config, t_end=min(config.t_end, horizon),
                    sample_interval=min(config.sample_interval, max(horizon, 1e-3) / 10))
    res = run(short, write=False)
    items.append(CheckItem("short_run", res.error is None, res.error or f"reached t={res.final_state.t:.4g}"))
    for r in res.invariants.results:
        items.append(CheckItem(f"invariant:{r.name}", r.passed, f"worst {r.worst:.3e} at t={r.t_worst:.4g}",
                               r.worst, r.tol))
    return items


def _check_checkpoint(path) -> list[CheckItem]:
    state, meta = load_checkpoint(path)
    g = state.grid
    items = []
    finite = all(np.isfinite(f).all() for f in (state.n, state.v, state.w, state.u.x, state.u.y, state.p))
    items.append(CheckItem("finite", finite, "all fields finite" if finite else "non-finite entries"))
    pos = bool(state.n.min() >= 0 and state.v.min() > 0 and state.w.min() > 0)
    items.append(CheckItem("positivity", pos, f"min n {state.n.min():.3e}, min v {state.v.min():.3e}, "
                                             f"min w {state.w.min():.3e}"))
    sup_v = float(state.v.max())
    items.append(CheckItem("sup_v_bound", sup_v <= state.v0_sup + 1e-12,
                           f"sup v = {sup_v!r}, initial sup = {state.v0_sup!r}", sup_v - state.v0_sup, 1e-12))
    div = float(np.abs(divergence(state.u, g)).max())
    items.append(CheckItem("divergence", div <= 1e-8, f"|div u| = {div:.3e}", div, 1e-8))
    bnd = max(float(np.abs(state.u.x[[0, -1]]).max()), float(np.abs(state.u.y[:, [0, -1]]).max()))
    items.append(CheckItem("no_penetration", bnd == 0.0, f"boundary normal velocity {bnd:.3e}", bnd, 0.0))
    if meta is None:
        items.append(CheckItem("metadata", False, "checkpoint carries no run metadata"))
        return items
    mass = integrate(state.n, g)
    rel = abs(mass - meta.mass) / meta.mass
    items.append(CheckItem("mass", rel <= 1e-10, f"relative drift {rel:.3e}", rel, 1e-10))
    t = state.t
    l1w = integrate(state.w, g)
    excess = l1w - (meta.mass + math.exp(-t) * meta.int_w0)
    items.append(CheckItem("w_l1_bound", excess <= 1e-8, f"excess {excess:.3e}", excess, 1e-8))
    mw = l1w / g.area
    dev = abs(mw - (meta.n_bar0 + (meta.mean_w0 - meta.n_bar0) * math.exp(-t)))
    items.append(CheckItem("mean_w_ode", dev <= 1e-6, f"deviation {dev:.3e}", dev, 1e-6))
    return items


def check(path, horizon: float = 1.0) -> CheckReport:
    """Check a config (oracle comparisons plus a short run) or a checkpoint."""
    path = Path(path)
    if is_checkpoint(path):
        return CheckReport(str(path), "checkpoint", _check_checkpoint(path))
    if not path.exists():
        raise OSError(f"cannot read {path}")
    config = load_config(path)
    return CheckReport(str(path), "config", _check_config(config, horizon))


# ---------------------------------------------------------------- plot data

def plot_data(source, out_dir=None) -> list[Path]:
    """Write ``<column>.dat`` two-column files (t, value) for every tracked quantity."""
    source = Path(source)
    csv_path = source / "timeseries.csv" if source.is_dir() else source
    records = read_timeseries(csv_path)
    out = Path(out_dir) if out_dir else csv_path.parent / "plot"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in DiagnosticsRecord.columns()[1:]:
        p = out / f"{name}.dat"
        with open(p, "w") as fh:
            fh.write(f"# t {name}\n")
            for r in records:
                fh.write(f"{r.t!r} {getattr(r, name)!r}\n")
        written.append(p)
    return written
