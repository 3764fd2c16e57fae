"""Phase-space simulator for a quartic double-well oscillator coupled to a tunnelling pseudo-spin."""

from .config import RunConfig, load_config
from .grid import PhaseGrid, build_grid
from .integrator import IntegratorConfig, evolve, rkck_step
from .liouvillian import rhs
from .model import Mode, ModelParams
from .observables import TimeSeries
from .state import SpinPhaseField, init_coherent_excited

__all__ = [
    "IntegratorConfig", "Mode", "ModelParams", "PhaseGrid", "RunConfig", "SpinPhaseField",
    "TimeSeries", "build_grid", "evolve", "init_coherent_excited", "load_config", "rhs",
    "rkck_step",
]
