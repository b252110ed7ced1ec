import numpy as np
import pytest

from econflow.domain import EconomicDomain, make_grid
from econflow.hydro import initial_gaussian_state
from econflow.params import CouplingParams


def standard_params(n=1, a=0.5, b=-0.4):
    """Generic admissible coupling set used across the hydro-level tests.

    Frequencies omega = 2, nu = sqrt(6); growth rates gamma_x = 0.3,
    gamma_y = 0.2.  The impulse couplings are kept balanced (|c| ~ |d|) so
    source exchange does not amplify one fluid's velocity far beyond the
    other's, which keeps the advective CFL tame over multi-period runs.
    """
    return CouplingParams(
        n=n, a=a, b=b,
        c_x=[2.0] * n, d_x=[-2.0] * n,
        c_y=[2.0] * n, d_y=[-3.0] * n,
        mu_x=[0.09] * n, eta_x=[1.0] * n,
        mu_y=[0.04] * n, eta_y=[1.0] * n,
    )


def standard_state(m=64, epsilon_fraction=1e-3):
    """Co-located Gaussian bumps with gentle bulk drift.

    CL and LR share center and width: the velocity fields are ratios of
    impulse to density, so disjoint supports would produce unbounded
    velocities in the tails.  Returns (grid, initial state, epsilon): the
    regularization scale is a fraction of the initial density peak, large
    enough to treat the deep tails as vacuum once the two fluids drift
    apart.
    """
    grid = make_grid(EconomicDomain(1), m)
    kwargs = dict(
        cl_center=[0.45, 0.5], cl_width=0.1, cl_mass=1.0,
        lr_center=[0.45, 0.5], lr_width=0.1, lr_mass=0.8,
        cl_velocity=[0.02, -0.015], lr_velocity=[0.02, -0.015],
    )
    probe = initial_gaussian_state(grid, **kwargs)
    epsilon = epsilon_fraction * float(np.max(probe.cl.values))
    return grid, initial_gaussian_state(grid, **kwargs, epsilon=epsilon), epsilon


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
