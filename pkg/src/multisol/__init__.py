"""Multiple solutions of semilinear elliptic problems on elliptical disks.

Legendre-Fourier Galerkin discretisation, a bisection-deflation scalar root
finder, a dogleg trust-region solver and an adaptive orthogonal basis driver.
"""
from .aobd import AOBDConfig, AdaptiveBasis, SolutionRecord, solve_multiple
from .galerkin import DiscreteProblem, SpectralCoefficients
from .geometry import EllipseDomain
from .problems import BC, ProblemSpec, get_problem
from .trustregion import TrustRegionConfig, minimize

__version__ = "0.1.0"

__all__ = [
    "AOBDConfig",
    "AdaptiveBasis",
    "SolutionRecord",
    "solve_multiple",
    "DiscreteProblem",
    "SpectralCoefficients",
    "EllipseDomain",
    "BC",
    "ProblemSpec",
    "get_problem",
    "TrustRegionConfig",
    "minimize",
]
