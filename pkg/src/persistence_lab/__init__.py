"""Persistence exponents of stable processes and their additive functionals.

Simulation of strictly alpha-stable Levy paths, homogeneous additive
functionals and their local-time clock, closed-form constants with
quadrature cross-checks, Monte Carlo survival fits and statistical checks
of distributional identities.
"""

from .errors import DomainError, InsufficientDataError, NumericError
from .functionals import FunctionalParams
from .montecarlo import MonteCarloConfig, TailEstimate, estimate_survival, fit_exponent, theoretical_theta
from .stable import StableParams, positivity_parameter, sample_stable

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InsufficientDataError",
    "NumericError",
    "FunctionalParams",
    "MonteCarloConfig",
    "TailEstimate",
    "StableParams",
    "estimate_survival",
    "fit_exponent",
    "positivity_parameter",
    "sample_stable",
    "theoretical_theta",
]
