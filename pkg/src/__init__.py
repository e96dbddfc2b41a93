"""
Segmented Atom-Light Simulator

Gaussian covariance-matrix dynamics of segmented atomic ensembles probed by
light pulses: QND interaction, scattering loss, atomic motion, homodyne
detection and the resulting spin squeezing.
"""

__version__ = "0.1.0"

from .config import ScenarioConfig, load_config
from .errors import SimulatorError
from .experiments import acceptance_checks, run_scenario, write_series
from .measurement import Detector, DetectorKind, DetectorModel, conditional_update
from .scheduler import Scheduler, SimulationModel, StepPlan, run, select_tau
from .species import AtomicSpecies, BeamParams
from .state import GaussianState, SegmentLayout, init_coherent, squeezing_parameter

__all__ = [
    "ScenarioConfig",
    "load_config",
    "SimulatorError",
    "acceptance_checks",
    "run_scenario",
    "write_series",
    "Detector",
    "DetectorKind",
    "DetectorModel",
    "conditional_update",
    "Scheduler",
    "SimulationModel",
    "StepPlan",
    "run",
    "select_tau",
    "AtomicSpecies",
    "BeamParams",
    "GaussianState",
    "SegmentLayout",
    "init_coherent",
    "squeezing_parameter",
]
