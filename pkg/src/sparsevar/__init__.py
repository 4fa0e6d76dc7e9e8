"""Variance lower bounds and minimum-variance estimators for sparse
Gaussian estimation problems, with a Monte Carlo benchmarking harness."""

from . import bounds, estimators, meanmc, models, numkit
from .bounds import BoundReport, MeanModel, NumericalConsistencyError
from .estimators import DiagonalEstimator, HermiteSeries
from .meanmc import McConfig, McResult
from .models import DomainError, SdpcmProblem, SlmProblem, SpcmProblem

__all__ = [
    "bounds",
    "estimators",
    "meanmc",
    "models",
    "numkit",
    "BoundReport",
    "MeanModel",
    "NumericalConsistencyError",
    "DiagonalEstimator",
    "HermiteSeries",
    "McConfig",
    "McResult",
    "DomainError",
    "SdpcmProblem",
    "SlmProblem",
    "SpcmProblem",
]

__version__ = "0.1.0"
