"""Moment variations (realized third and fourth) under square-root stochastic volatility."""

from .exceptions import DomainError, EstimationError, InputError, NumericalError, PreconditionError
from .model_core import HestonParams
from .realized import DailyMomentPanel, IntradayGrid, build_panel
from .simulator import SimConfig, simulate_paths, synth_panel

__all__ = [
    "DomainError", "EstimationError", "InputError", "NumericalError", "PreconditionError",
    "HestonParams", "DailyMomentPanel", "IntradayGrid", "build_panel",
    "SimConfig", "simulate_paths", "synth_panel",
]
