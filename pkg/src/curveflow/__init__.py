"""Parametric finite elements for curve diffusion and elastic flow of closed curves."""

from .errors import (CurveFlowError, DegenerateCurveError, InvalidArgumentError,
                     SingularSystemError, StabilityViolation)
from .mesh import NodalField, Partition, interpolate, uniform_partition
from .stepper import CurveState, FlowKind, FlowSpec, initial_position, initial_state, initial_y, step
from .manufactured import ManufacturedFamily
from .monitors import (MonitorRecord, discrete_curvature, elastic_energy, mesh_ratio,
                       scalar_monitors, signed_area)
from .harness import ErrorTable, error_norms, run_convergence
from .scenarios import ScenarioSpec, initial_curve, make_initial_curve, scenario_names
from .driver import RunOutput, run_simulation

__all__ = [
    "CurveFlowError", "DegenerateCurveError", "InvalidArgumentError", "SingularSystemError",
    "StabilityViolation", "NodalField", "Partition", "interpolate", "uniform_partition",
    "CurveState", "FlowKind", "FlowSpec", "initial_position", "initial_state", "initial_y", "step",
    "ManufacturedFamily", "MonitorRecord", "discrete_curvature", "elastic_energy", "mesh_ratio",
    "scalar_monitors", "signed_area", "ErrorTable", "error_norms", "run_convergence",
    "ScenarioSpec", "initial_curve", "make_initial_curve", "scenario_names", "RunOutput",
    "run_simulation",
]

__version__ = "0.1.0"
