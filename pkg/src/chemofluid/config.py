"""Scenario configuration: one flat ``[scenario]`` section of ``key = value`` lines.

Unknown keys are rejected.  Example::

    [scenario]
    # grid
    nx = 64
    ny = 64
    Lx = 5.0
    Ly = 5.0
    preset = gaussian-bump
    mass = 0.1
    K = 1.0
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .grid import Grid
from .model import PRESETS, SENSITIVITY_VARIANTS, ModelParams, SensitivitySpec, linear_gravity_potential

OUTPUT_ROOT_ENV = "CHEMOFLUID_OUTPUT_ROOT"

_COMMENTS = {
    "nx": "cells in x", "ny": "cells in y", "Lx": "domain width", "Ly": "domain height",
    "preset": "one of " + ", ".join(PRESETS),
    "mass": "initial cell mass m = int n0", "K": "bound on sup v0",
    "sensitivity": "one of " + ", ".join(SENSITIVITY_VARIANTS),
    "sensitivity_param": "theta (sublogarithmic), angle (rotated) or c (scaled)",
    "eps": "boundary mollifier width",
    "gravity": "g in the potential Phi = g * y (ignored when phi_file is set)",
    "phi_file": "optional .npy file with Phi at cell centers",
    "t_end": "final time", "sample_interval": "diagnostics cadence",
    "dt_safety": "CFL safety factor in (0, 1)", "dt_max": "upper cap on the time step",
    "v_floor": "positive clamp threshold for v",
    "fluid_advection": "false drops (u . grad) u (Stokes limit)",
    "lyapunov_delta": "threshold after which F must be non-increasing",
    "output_dir": "output directory (relative paths honour $" + OUTPUT_ROOT_ENV + ")",
    "seed": "random seed for stochastic presets",
}


@dataclass(frozen=True)
class ScenarioConfig:
    nx: int = 64
    ny: int = 64
    Lx: float = 1.0
    Ly: float = 1.0
    preset: str = "gaussian-bump"
    mass: float = 0.1
    K: float = 1.0
    sensitivity: str = "logarithmic"
    sensitivity_param: float = 0.0
    eps: float = 0.05
    gravity: float = 1.0
    phi_file: str = ""
    t_end: float = 20.0
    sample_interval: float = 0.1
    dt_safety: float = 0.9
    dt_max: float = math.inf
    v_floor: float = 1e-14
    fluid_advection: bool = True
    lyapunov_delta: float = 0.05
    output_dir: str = "runs/default"
    seed: int = 0

    def __post_init__(self):
        self.grid  # validates nx, ny, Lx, Ly
        if self.preset not in PRESETS:
            raise ConfigurationError(f"unknown preset {self.preset!r}")
        self.sensitivity_spec
        checks = [
            (self.mass > 0, "mass must be positive"),
            (self.K > 0, "K must be positive"),
            (0 < self.eps < 0.5 * min(self.Lx, self.Ly), "eps must lie in (0, min(Lx, Ly)/2)"),
            (self.t_end >= 0 and math.isfinite(self.t_end), "t_end must be finite and >= 0"),
            (self.sample_interval > 0, "sample_interval must be positive"),
            (0 < self.dt_safety < 1, "dt_safety must lie in (0, 1)"),
            (self.dt_max > 0, "dt_max must be positive"),
            (0 < self.v_floor < 1e-3, "v_floor must lie in (0, 1e-3)"),
            (self.lyapunov_delta > 0, "lyapunov_delta must be positive"),
            (math.isfinite(self.gravity), "gravity must be finite"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigurationError(msg)

    @property
    def grid(self) -> Grid:
        return Grid(self.nx, self.ny, self.Lx, self.Ly)

    @property
    def sensitivity_spec(self) -> SensitivitySpec:
        return SensitivitySpec(self.sensitivity, self.sensitivity_param)

    def model_params(self) -> ModelParams:
        return self.model_params_for(self.grid)

    def model_params_for(self, g: Grid) -> ModelParams:
        """Parameters on grid ``g``; a Phi file is only used on the configured grid."""
        if self.phi_file and g == self.grid:
            phi = np.load(self.phi_file)
            if phi.shape != g.shape:
                raise ConfigurationError(f"phi_file has shape {phi.shape}, expected {g.shape}")
        else:
            phi = linear_gravity_potential(g, self.gravity)
        return ModelParams(phi=phi, eps=self.eps, sensitivity=self.sensitivity_spec,
                           dt_safety=self.dt_safety, v_floor=self.v_floor, dt_max=self.dt_max,
                           fluid_advection=self.fluid_advection)

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        lines = ["[scenario]"]
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"# {_COMMENTS[f.name]}")
            lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path

    def as_dict(self) -> dict:
        return {k: (v if not (isinstance(v, float) and math.isinf(v)) else "inf") for k, v in asdict(self).items()}


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {name}: {raw!r}") from exc
    return raw


_TYPES = {"nx": int, "ny": int, "seed": int, "fluid_advection": bool,
          "preset": str, "sensitivity": str, "phi_file": str, "output_dir": str}


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    if cp.sections() != ["scenario"]:
        raise ConfigurationError("config must contain exactly one [scenario] section")
    known = {f.name for f in fields(ScenarioConfig)}
    values = {}
    for key, raw in cp["scenario"].items():
        if key not in known:
            raise ConfigurationError(f"unknown config key {key!r}")
        values[key] = _parse(key, _TYPES.get(key, float), raw)
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
