import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chemofluid.errors import ConfigurationError, DomainError
from chemofluid.grid import Grid, VectorField, divergence, integrate
from chemofluid.model import (
    PRESETS, InitialData, ModelParams, SensitivitySpec, eval_sensitivity, linear_gravity_potential,
    make_scenario, validate_initial_data, velocity_from_streamfunction,
)

specs = st.one_of(
    st.just(SensitivitySpec()),
    st.builds(SensitivitySpec, st.just("sublogarithmic"), st.floats(0.01, 0.99)),
    st.builds(SensitivitySpec, st.just("rotated"), st.floats(-2 * math.pi, 2 * math.pi)),
    st.builds(SensitivitySpec, st.just("scaled"), st.floats(0.01, 100.0)),
)


def test_sensitivity_examples():
    assert np.allclose(eval_sensitivity(SensitivitySpec(), 0.3, 2.0), 0.5 * np.eye(2), rtol=0, atol=1e-15)
    rot = eval_sensitivity(SensitivitySpec("rotated", math.pi / 2), 1.0, 1.0)
    assert np.allclose(rot, [[0.0, -1.0], [1.0, 0.0]], atol=1e-15)
    sub = eval_sensitivity(SensitivitySpec("sublogarithmic", 0.5), 0.0, 4.0)
    assert np.allclose(sub, 0.5 * np.eye(2), rtol=0, atol=1e-15)
    assert np.allclose(eval_sensitivity(SensitivitySpec("scaled", 3.0), 1.0, 2.0), 1.5 * np.eye(2))


def test_sensitivity_validation():
    with pytest.raises(ConfigurationError):
        SensitivitySpec("quadratic")
    with pytest.raises(ConfigurationError):
        SensitivitySpec("sublogarithmic", 1.0)
    with pytest.raises(ConfigurationError):
        SensitivitySpec("scaled", 0.0)
    with pytest.raises(DomainError):
        eval_sensitivity(SensitivitySpec(), 1.0, 0.0)
    with pytest.raises(DomainError):
        eval_sensitivity(SensitivitySpec(), -1.0, 1.0)


@given(specs, st.floats(0.0, 100.0), st.floats(1e-6, 10.0))
def test_operator_norm_bound(spec, n, v):
    S = eval_sensitivity(spec, n, v)
    assert np.linalg.norm(S, 2) <= float(spec.s0(v)) / v * (1 + 1e-12) + 1e-12


@given(specs, st.floats(1e-3, 10.0))
def test_sensitivity_continuous_in_v(spec, v):
    S = eval_sensitivity(spec, 1.0, v)
    for d in (1e-4, 1e-6, 1e-8):
        jump = np.abs(eval_sensitivity(spec, 1.0, v + d * v) - S).max()
        assert jump <= 2 * d * np.abs(S).max() + 1e-14


def test_s0_is_nondecreasing():
    v = np.linspace(1e-3, 10, 200)
    for spec in (SensitivitySpec(), SensitivitySpec("sublogarithmic", 0.3), SensitivitySpec("scaled", 2.0)):
        assert np.all(np.diff(spec.s0(v)) >= 0)


def test_coefficients_vectorised():
    spec = SensitivitySpec("rotated", 0.4)
    v = np.array([[1.0, 2.0], [4.0, 0.5]])
    s11, s12, s21, s22 = spec.coefficients(v)
    assert s11.shape == v.shape
    assert np.allclose(s11, math.cos(0.4) / v) and np.allclose(s12, -math.sin(0.4) / v)
    assert not spec.isotropic and SensitivitySpec().isotropic


def test_params_validation():
    phi = Grid(4, 4).zeros()
    for bad in (dict(dt_safety=1.0), dict(v_floor=0.0), dict(eps=0.0), dict(dt_max=0.0)):
        with pytest.raises(ConfigurationError):
            ModelParams(phi=phi, **bad)
    phi[0, 0] = np.nan
    with pytest.raises(ConfigurationError):
        ModelParams(phi=phi)


def test_linear_gravity():
    g = Grid(4, 8)
    phi = linear_gravity_potential(g, 2.0)
    assert np.allclose(phi[0], 2.0 * g.y)


def _flat(g, n=0.1, v=1.0, w=0.1):
    return InitialData(g, g.full(n), g.full(v), g.full(w), VectorField.zeros(g))


def test_validate_examples():
    g = Grid(8, 8)
    assert validate_initial_data(_flat(g)).ok
    d = _flat(g)
    d.v0[3, 4] = 0.0
    rep = validate_initial_data(d)
    assert not rep and any("v0 not strictly positive" in m for m in rep.violations)


def test_validate_streamfunction_velocity():
    g = Grid(32, 24, 2.0, 1.0)
    xc, yc = np.meshgrid(g.x_faces, g.y_faces, indexing="ij")
    psi = np.sin(np.pi * xc / g.Lx) * np.sin(np.pi * yc / g.Ly)
    psi[[0, -1]] = 0.0
    psi[:, [0, -1]] = 0.0
    u = velocity_from_streamfunction(psi, g)
    d = InitialData(g, g.full(1.0), g.full(1.0), g.full(1.0), u)
    assert validate_initial_data(d).ok
    assert np.abs(divergence(u, g)).max() <= 1e-10


def test_validate_catches_each_violation():
    g = Grid(6, 6)
    d = _flat(g)
    d.n0[0, 0] = -1.0
    d.w0[1, 1] = 0.0
    d.u0.x[0, 2] = 1.0
    msgs = " | ".join(validate_initial_data(d).violations)
    assert "n0 negative" in msgs and "w0 not strictly positive" in msgs
    assert "divergence" in msgs and "boundary" in msgs
    assert not validate_initial_data(InitialData(g, g.zeros(), g.full(1), g.full(1), VectorField.zeros(g)))
    bad = _flat(g)
    bad.n0 = np.zeros((3, 3))
    assert "shape" in validate_initial_data(bad).violations[0]


def test_preset_examples():
    g = Grid(16, 16)
    d = make_scenario("uniform", g, 0.1, 1.0)
    assert np.allclose(d.n0, 0.1, rtol=1e-14) and np.all(d.v0 == 1.0)
    d = make_scenario("gaussian-bump", g, 0.1, 1.0)
    assert abs(integrate(d.n0, g) - 0.1) <= 1e-12
    d = make_scenario("vortex", g, 0.1, 1.0)
    assert np.abs(divergence(d.u0, g)).max() <= 1e-10 and d.u0.max_abs() > 0


@given(st.sampled_from(PRESETS), st.integers(4, 24), st.integers(4, 24), st.floats(0.2, 5.0),
       st.floats(0.2, 5.0), st.floats(1e-4, 50.0), st.floats(0.01, 10.0), st.none() | st.integers(0, 99))
def test_presets_are_admissible_and_normalised(kind, nx, ny, Lx, Ly, mass, K, seed):
    g = Grid(nx, ny, Lx, Ly)
    d = make_scenario(kind, g, mass, K, seed=seed)
    assert abs(integrate(d.n0, g) - mass) <= 1e-12 * mass
    assert d.v0.max() <= K * (1 + 1e-15)
    assert validate_initial_data(d).ok


def test_preset_errors():
    with pytest.raises(ConfigurationError):
        make_scenario("swirl", Grid(8, 8), 0.1, 1.0)
    with pytest.raises(ConfigurationError):
        make_scenario("uniform", Grid(8, 8), 0.0, 1.0)


def test_seed_changes_only_perturbed():
    g = Grid(8, 8)
    assert not np.array_equal(make_scenario("perturbed", g, 1, 1, seed=1).n0,
                              make_scenario("perturbed", g, 1, 1, seed=2).n0)
    assert np.array_equal(make_scenario("perturbed", g, 1, 1, seed=5).v0,
                          make_scenario("perturbed", g, 1, 1, seed=5).v0)
    assert np.array_equal(make_scenario("gaussian-bump", g, 1, 1, seed=1).n0,
                          make_scenario("gaussian-bump", g, 1, 1, seed=2).n0)
