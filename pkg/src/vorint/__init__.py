"""Monte Carlo integration with Voronoi cell-area weights on stretched-window Poisson samples."""

from .errors import (
    DegenerateInput,
    EmptyFilter,
    InvalidConfidence,
    RejectionExhausted,
    ResolutionMismatch,
    UnknownFunction,
    VorintError,
)
from .estimators import EstimateReport, Integrand, estimate
from .geom2d import UNIT_WINDOW, Tessellation, Window, build_tessellation
from .pointproc import PointConfig, SpppParams, bound_reject_prob, sample_sppp, solve_epsilon
from .rng import make_rng

__version__ = "0.1.0"

__all__ = [
    "DegenerateInput",
    "EmptyFilter",
    "InvalidConfidence",
    "RejectionExhausted",
    "ResolutionMismatch",
    "UnknownFunction",
    "VorintError",
    "EstimateReport",
    "Integrand",
    "estimate",
    "UNIT_WINDOW",
    "Tessellation",
    "Window",
    "build_tessellation",
    "PointConfig",
    "SpppParams",
    "bound_reject_prob",
    "sample_sppp",
    "solve_epsilon",
    "make_rng",
]
