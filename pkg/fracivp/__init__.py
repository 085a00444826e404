"""
frac-ivp - Riemann-Liouville fractional initial value problems of order 1 < sigma < 2

Picard solver on the equivalent Volterra system, existence window, and
sampled checks of Nagumo, Krasnoselskii-Krein and Osgood uniqueness criteria.
"""

__version__ = "0.1.0"

from fracivp.expr import parse, serialize, evaluate
from fracivp.problem import ProblemSpec, ExistenceWindow, existence_window, bound_M
from fracivp.solver import SolverConfig, SolutionPair, picard_solve, residual, refine_study
from fracivp.certificates import (
    CertificateReport,
    estimate_lipschitz,
    nagumo_check,
    kk_check,
    osgood_check,
    mean_value_witness,
)
