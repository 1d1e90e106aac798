"""Stability thresholds and ball-cluster energy landscape of the Riesz
liquid-drop functional ``P(E) + gamma * int_E int_E |x - y|^-alpha``."""

__version__ = "0.1.0"

from .errors import BracketError, ConvergenceError, DomainError, OverlapError, RdropError
from .params import ModelParams
from .numerics import QuadratureSpec, SampleStream
from .coefficients import RieszCoefficients, riesz_coefficients
from .ballmodel import Ball, BallConfiguration, EnergyBreakdown
from .stability import HarmonicPerturbation, StabilityReport, Verdict, stability_verdict
from .landscape import LandscapeTable, PartitionResult

__all__ = [
    "__version__",
    "RdropError",
    "DomainError",
    "ConvergenceError",
    "OverlapError",
    "BracketError",
    "ModelParams",
    "QuadratureSpec",
    "SampleStream",
    "RieszCoefficients",
    "riesz_coefficients",
    "Ball",
    "BallConfiguration",
    "EnergyBreakdown",
    "HarmonicPerturbation",
    "StabilityReport",
    "Verdict",
    "stability_verdict",
    "LandscapeTable",
    "PartitionResult",
]
