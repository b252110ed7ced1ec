"""econflow: credit-cycle dynamics as coupled transaction fluids.

Three linked levels over a bounded risk box: a Monte Carlo layer of trading
agents, a finite-volume solver for the credit / loan-repayment fluid system
on the pair space, and the exactly-closed moment ODE system whose solutions
are bounded oscillations about exponential trends.  Cross-level budget
identities tie the levels together and are checked by the validation module.
"""

from .domain import (
    EconomicDomain,
    GridSpec,
    ScalarField,
    VectorField,
    coordinate_moment,
    integrate_field,
    make_grid,
)
from .errors import CFLViolation, ConfigError, NumericalBlowup
from .params import CouplingParams, ReducedParams

__version__ = "0.1.0"

__all__ = [
    "EconomicDomain",
    "GridSpec",
    "ScalarField",
    "VectorField",
    "make_grid",
    "integrate_field",
    "coordinate_moment",
    "CouplingParams",
    "ReducedParams",
    "ConfigError",
    "CFLViolation",
    "NumericalBlowup",
    "__version__",
]
