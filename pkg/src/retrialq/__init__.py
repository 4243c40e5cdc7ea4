"""Stationary distributions and heavy-tail asymptotics for the M/G/1
retrial queue with Bernoulli schedule, computed three independent ways:
transform inversion, brute-force decomposition oracles, and discrete-event
simulation."""

__version__ = "0.1.0"

from ._backend import BACKEND_NAME as backend_name
from .model import (Pareto, Exponential, Deterministic, ModelParams,
                    DerivedQuantities, validate, derive)
from .transforms import TransformContext, Tolerances
from .asymptotics import TailLaw, LightTailError
from .inversion import Pmf, Ccdf, invert, invert_joint, ccdf
from .simulator import SimConfig, run_des

__all__ = [
    "backend_name", "Pareto", "Exponential", "Deterministic", "ModelParams",
    "DerivedQuantities", "validate", "derive", "TransformContext",
    "Tolerances", "TailLaw", "LightTailError", "Pmf", "Ccdf", "invert",
    "invert_joint", "ccdf", "SimConfig", "run_des",
]
