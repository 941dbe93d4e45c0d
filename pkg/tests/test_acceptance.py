"""Acceptance criteria, each at its stated tolerance; one printed line per criterion.

The long runs live on a 5 x 5 square (64 x 64 cells) so that the slowest
decay mode, roughly 0.4 per unit time, is still resolved above round-off
over the fit window [10, 20].
"""
import math
import time

import numpy as np
import pytest

from chemofluid.config import ScenarioConfig
from chemofluid.diagnostics import (
    calibrate_M, convolution_bound_check, lyapunov_monotone_after_entry,
    moser_trudinger_probe, smooth_random_triple, temporal_average_report,
)
from chemofluid.grid import Grid, VectorField
from chemofluid.harness import heat_order, oracle_order, run
from chemofluid.model import InitialData, ModelParams
from chemofluid.oracle import homogeneous_closed_form
from chemofluid.solver import SystemState, step

pytestmark = pytest.mark.slow

BASE = ScenarioConfig(nx=64, ny=64, Lx=5.0, Ly=5.0, preset="gaussian-bump", mass=0.1, K=1.0,
                      eps=0.25, gravity=1.0, t_end=20.0, sample_interval=0.1, lyapunov_delta=0.004)

RATE_TARGETS = {"sup_dev_n": "|n - n0bar|_inf", "sup_v_norm": "|v|_inf", "sup_dev_w": "|w - n0bar|_inf",
                "grad_z_l2": "|grad z|_2", "u_l2": "|u|_2"}


@pytest.fixture(scope="module")
def bump_run():
    return run(BASE, write=False, trace_F=True)


@pytest.fixture(scope="module")
def uniform_run():
    return run(BASE.with_(preset="uniform"), write=False)


@pytest.fixture(scope="module")
def flat_run():
    """Flat data n = 0.1, w = 0.2, v = 1 with dt = 1e-3 up to T = 5."""
    g = Grid(8, 8)
    nbar, w0, v0, dt, T = 0.1, 0.2, 1.0, 1e-3, 5.0
    data = InitialData(g, g.full(nbar), g.full(v0), g.full(w0), VectorField.zeros(g))
    params = ModelParams(phi=g.zeros(), eps=0.1, dt_max=dt)
    state = SystemState.from_initial(data)
    t0 = time.perf_counter()
    err_w = err_v = 0.0
    sup_v, div = [], []
    while state.t < T - 1e-12:
        state, rep = step(state, params, dt_cap=T - state.t)
        w_ex, v_ex = homogeneous_closed_form(nbar, w0, v0, state.t)
        err_w = max(err_w, float(np.abs(state.w - w_ex).max()))
        err_v = max(err_v, float(np.abs(state.v - v_ex).max()))
        sup_v.append(float(state.v.max()))
        div.append(rep.div_u)
    return {"err_w": err_w, "err_v": err_v, "sup_v": np.array(sup_v), "v0_sup": v0,
            "div": max(div), "wall": time.perf_counter() - t0}


def test_c01_mass_conservation(criterion, uniform_run, bump_run):
    drifts = {}
    for name, res in (("uniform", uniform_run), ("bump", bump_run)):
        m = res.column("mass_n")
        drifts[name] = float(np.abs(m - res.meta.mass).max() / res.meta.mass)
    wall = max(uniform_run.wall_time, bump_run.wall_time)
    ok = all(d <= 1e-10 for d in drifts.values()) and wall <= 120 and not uniform_run.error and not bump_run.error
    detail = ", ".join(f"{k} drift {v:.2e}" for k, v in drifts.items()) + f"; slowest run {wall:.1f} s"
    assert criterion(1, "mass conservation", ok, detail)


def test_c02_maximum_principle(criterion, uniform_run, bump_run, flat_run):
    excess = [float((r.column("sup_v") - r.meta.v0_sup).max()) for r in (uniform_run, bump_run)]
    excess.append(float((flat_run["sup_v"] - flat_run["v0_sup"]).max()))
    worst = max(excess)
    assert criterion(2, "maximum principle for v", worst <= 1e-12, f"max(sup v - |v0|_inf) = {worst:.2e}")


def test_c03_homogeneous_ode(criterion, flat_run):
    ok = flat_run["err_w"] <= 1e-6 and flat_run["err_v"] <= 1e-6 and flat_run["wall"] <= 30
    assert criterion(3, "homogeneous ODE exactness", ok,
                     f"max|dw| = {flat_run['err_w']:.2e}, max|dv| = {flat_run['err_v']:.2e}, "
                     f"{flat_run['wall']:.1f} s")


def test_c04_mean_w_law(criterion, bump_run):
    meta = bump_run.meta
    t = bump_run.column("t")
    law = meta.n_bar0 + (meta.mean_w0 - meta.n_bar0) * np.exp(-t)
    worst = float(np.abs(bump_run.column("mean_w") - law).max())
    assert criterion(4, "mean-w law", worst <= 1e-6, f"max deviation {worst:.2e}")


def test_c05_w_l1_bound(criterion, uniform_run, bump_run):
    worst = -math.inf
    for res in (uniform_run, bump_run):
        t = res.column("t")
        excess = res.column("l1_w") - (res.meta.mass + np.exp(-t) * res.meta.int_w0)
        worst = max(worst, float(excess.max()))
    assert criterion(5, "w L1 bound", worst <= 1e-8, f"max excess {worst:.2e}")


def test_c06_exponential_convergence(criterion, bump_run):
    fits = bump_run.fits
    bad = [k for k in RATE_TARGETS if fits[k] is None or not (fits[k].kappa_hat > 0 and fits[k].r2 >= 0.99)]
    nbar = bump_run.meta.n_bar0
    ratio = fits["sup_v_norm"].kappa_hat / nbar
    ok = not bad and 0.8 <= ratio <= 1.2 and bump_run.wall_time <= 300 and bump_run.error is None
    detail = ", ".join(f"{RATE_TARGETS[k]} {fits[k].kappa_hat:.4f} (R2 {fits[k].r2:.4f})" for k in RATE_TARGETS
                       if fits[k] is not None)
    detail += f"; kappa_v/n0bar = {ratio:.3f}; {bump_run.wall_time:.1f} s"
    assert criterion(6, "small-mass exponential convergence", ok, detail)


def test_c07_conditional_lyapunov(criterion, bump_run):
    finding = lyapunov_monotone_after_entry(bump_run.F_trace, BASE.lyapunov_delta, slack=1e-8)
    ok = finding.entered and finding.monotone
    assert criterion(7, "conditional Lyapunov decay", ok,
                     f"F <= {finding.delta} from t = {finding.t_entry}; worst step increase "
                     f"{finding.worst_increase:.2e} over {len(bump_run.F_trace) - 1} steps")


def test_c08_temporal_averages(criterion, bump_run):
    windows = [(0.0, 20.0), (0.0, 10.0), (0.0, 1.0), (5.0, 20.0), (10.0, 20.0), (19.0, 20.0)]
    violations, worst_ratio = [], 0.0
    for t1, t2 in windows:
        rep = temporal_average_report(bump_run.records, t1, t2, bump_run.meta)
        for e in rep.entries:
            if e.bound is None:
                continue
            worst_ratio = max(worst_ratio, e.average / e.bound)
            if not e.ok:
                violations.append(f"{e.name}[{t1},{t2}]")
    assert criterion(8, "temporal-average bounds", not violations,
                     f"{len(violations)} violations over {len(windows)} windows; max average/bound {worst_ratio:.2e}")


def test_c09_divergence_free(criterion, uniform_run, bump_run, flat_run):
    worst = max(uniform_run.stats.max_div, bump_run.stats.max_div, flat_run["div"])
    steps = uniform_run.stats.steps + bump_run.stats.steps
    assert criterion(9, "divergence-free fluid", worst <= 1e-8, f"max |div u| {worst:.2e} over {steps} + 5000 steps")


def test_c10_moser_trudinger(criterion):
    g, eps = Grid(32, 32), 0.1
    M = calibrate_M(g, eps, trials=1000, seed=0)
    rng = np.random.default_rng(20261016)
    residuals = np.array([moser_trudinger_probe(*smooth_random_triple(g, rng), eps, M, g) for _ in range(1000)])
    fails = int(np.count_nonzero(residuals < 0))
    assert criterion(10, "Moser-Trudinger probe", fails == 0,
                     f"M = {M:.4g}; {fails} violations in 1000 fresh triples; min residual {residuals.min():.2e}")


def test_c11_convolution(criterion):
    chk = convolution_bound_check(0.75, 0.0, 2.0, 1.0)
    rate = chk.fit.kappa_hat if chk.fit else float("nan")
    ok = math.isfinite(chk.C_hat) and abs(rate - 1.0) <= 0.05
    assert criterion(11, "convolution quadrature", ok, f"C_hat = {chk.C_hat:.4f}; fitted rate {rate:.6f}")


def test_c12_convergence_orders(criterion):
    t0 = time.perf_counter()
    h_errs, h_orders = heat_order((16, 32, 64))
    t_errs, t_orders = oracle_order(BASE.with_(Lx=1.0, Ly=1.0, eps=0.1, gravity=5.0, mass=0.5,
                                               sensitivity="rotated", sensitivity_param=0.7))
    wall = time.perf_counter() - t0
    ok = h_orders.min() >= 1.8 and t_orders.min() >= 0.9 and wall <= 180
    assert criterion(12, "convergence orders", ok,
                     f"spatial orders {np.round(h_orders, 3).tolist()}, temporal orders "
                     f"{np.round(t_orders, 3).tolist()}; {wall:.1f} s")
