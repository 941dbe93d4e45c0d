"""Logarithmic chemotaxis coupled to incompressible Navier-Stokes, with indirect nutrient consumption."""
from .config import ScenarioConfig, load_config, parse_config
from .errors import ChemofluidError, ConfigurationError, DiagnosticError, OracleError, SolverError
from .grid import Grid, VectorField
from .harness import RunResult, check, run, sweep
from .model import InitialData, ModelParams, SensitivitySpec, make_scenario
from .solver import SystemState, step

__version__ = "0.1.0"

__all__ = [
    "ChemofluidError", "ConfigurationError", "DiagnosticError", "Grid", "InitialData", "ModelParams",
    "OracleError", "RunResult", "ScenarioConfig", "SensitivitySpec", "SolverError", "SystemState",
    "VectorField", "check", "load_config", "make_scenario", "parse_config", "run", "step", "sweep",
]
