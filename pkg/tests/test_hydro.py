import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import standard_params, standard_state
from econflow.domain import (
    EconomicDomain,
    ScalarField,
    VectorField,
    coordinate_moment,
    integrate_field,
    make_grid,
)
from econflow.errors import CFLViolation, NumericalBlowup
from econflow.hydro import (
    FluidState,
    advect_upwind,
    cfl_number,
    compute_moments,
    default_epsilon,
    derive_velocity,
    gaussian_bump,
    initial_gaussian_state,
    run_hydro,
    step_system,
)
from econflow.params import CouplingParams


def empty_state(grid, **overrides):
    fields = dict(
        cl=ScalarField.zeros(grid),
        lr=ScalarField.zeros(grid),
        p=VectorField.zeros(grid),
        d=VectorField.zeros(grid),
        ec=tuple(ScalarField.zeros(grid) for _ in range(grid.ndim)),
        er=tuple(ScalarField.zeros(grid) for _ in range(grid.ndim)),
    )
    fields.update(overrides)
    return FluidState(time=0.0, **fields)


def uniform_vector(grid, values):
    return VectorField.from_arrays(
        grid, [np.full(grid.shape, v) for v in values])


class TestCouplingParams:
    def test_positive_cd_product_rejected(self):
        with pytest.raises(ValueError, match="c_x"):
            CouplingParams(n=1, c_x=[1.0], d_x=[4.0])

    def test_negative_mu_eta_product_rejected(self):
        with pytest.raises(ValueError, match="mu_y"):
            CouplingParams(n=1, mu_y=[1.0], eta_y=[-1.0])

    def test_zero_couplings_allowed(self):
        params = CouplingParams(n=2)
        assert_allclose(params.omega, [0.0, 0.0])
        assert_allclose(params.gamma_x, [0.0, 0.0])

    def test_derived_frequencies(self):
        params = CouplingParams(n=1, c_x=[1.0], d_x=[-4.0],
                                mu_x=[0.09], eta_x=[1.0])
        assert params.omega[0] == pytest.approx(2.0)
        assert params.gamma_x[0] == pytest.approx(0.3)


class TestDeriveVelocity:
    def test_zero_impulse(self):
        grid = make_grid(EconomicDomain(1), 4)
        v = derive_velocity(ScalarField.full(grid, 2.0), VectorField.zeros(grid), 1e-8)
        assert not any(c.values.any() for c in v.components)

    def test_regular_division(self):
        grid = make_grid(EconomicDomain(1), 2)
        p = uniform_vector(grid, [0.5, 0.0])
        v = derive_velocity(ScalarField.full(grid, 1.0), p, 1e-8)
        assert v.components[0].values[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_vanishing_density(self):
        grid = make_grid(EconomicDomain(1), 2)
        p = uniform_vector(grid, [0.3, 0.0])
        v = derive_velocity(ScalarField.zeros(grid), p, 1e-8)
        assert not v.components[0].values.any()

    def test_epsilon_must_be_positive(self):
        grid = make_grid(EconomicDomain(1), 2)
        with pytest.raises(ValueError):
            derive_velocity(ScalarField.zeros(grid), VectorField.zeros(grid), 0.0)


class TestAdvectUpwind:
    def test_zero_velocity_identity(self, rng):
        grid = make_grid(EconomicDomain(1), 8)
        field = ScalarField(grid, rng.random(grid.shape))
        out = advect_upwind(field, VectorField.zeros(grid), 0.1)
        assert np.array_equal(out.values, field.values)

    def test_mass_conserved_with_any_admissible_velocity(self, rng):
        grid = make_grid(EconomicDomain(1), 16)
        field = ScalarField(grid, rng.random(grid.shape))
        v = VectorField.from_arrays(
            grid, [0.3 * rng.standard_normal(grid.shape) for _ in range(2)])
        dt = 0.9 / cfl_number(v, 1.0)
        out = advect_upwind(field, v, dt)
        assert integrate_field(out) == pytest.approx(integrate_field(field),
                                                     rel=1e-13)

    def test_gaussian_translates_at_bulk_speed(self):
        # characteristics oracle: uniform v=+0.25 along x moves the profile
        # by exactly v*T; upwind smearing may shift the mean by at most ~h
        grid = make_grid(EconomicDomain(1), 64)
        field = gaussian_bump(grid, (0.25, 0.5), 0.06, 1.0)
        v = uniform_vector(grid, [0.25, 0.0])
        dt = 0.5 * grid.spacing[0] / 0.25
        steps = int(round(2.0 / dt))
        values = field
        for _ in range(steps):
            values = advect_upwind(values, v, dt)
        before = coordinate_moment(field, 0) / integrate_field(field)
        after = coordinate_moment(values, 0) / integrate_field(values)
        assert after - before == pytest.approx(0.5, abs=grid.spacing[0])

    def test_cfl_violation_reports_number(self):
        grid = make_grid(EconomicDomain(1), 32)
        field = ScalarField.full(grid, 1.0)
        v = uniform_vector(grid, [1.0, 0.0])
        with pytest.raises(CFLViolation) as exc:
            advect_upwind(field, v, 1.0)
        assert exc.value.cfl == pytest.approx(32.0)
        assert "32" in str(exc.value)


class TestStepSystem:
    def test_zero_state_is_fixed_point(self):
        grid = make_grid(EconomicDomain(1), 4)
        state = empty_state(grid)
        params = standard_params()
        out = step_system(state, params, 0.01)
        assert out.time == pytest.approx(0.01)
        assert not out.cl.values.any()
        assert not any(c.values.any() for c in out.p.components)

    def test_single_cell_continuity_source(self):
        # m=1: advection vanishes, source lands a*z.D = x*Dx + y*Dy at (.5,.5)
        grid = make_grid(EconomicDomain(1), 1)
        state = empty_state(grid, d=uniform_vector(grid, [1.0, 1.0]))
        params = CouplingParams(n=1, a=1.0)
        out = step_system(state, params, 0.01)
        assert out.cl.values[0, 0] == pytest.approx(0.01)

    def test_single_cell_impulse_oscillator(self):
        # with CL = 0 the advection is inert and the integrated impulse pair
        # is the plain explicit-Euler oscillator: Px(10) ~ cos(2*10)
        grid = make_grid(EconomicDomain(1), 1)
        state = empty_state(grid, p=uniform_vector(grid, [1.0, 0.0]))
        params = CouplingParams(n=1, c_x=[1.0], d_x=[-4.0])
        dt = 1e-3
        for _ in range(10_000):
            state = step_system(state, params, dt)
        px = integrate_field(state.p.components[0])
        assert px == pytest.approx(np.cos(20.0), abs=1e-2)

    def test_blowup_detected(self):
        grid = make_grid(EconomicDomain(1), 1)
        state = empty_state(grid, d=uniform_vector(grid, [1e300, 0.0]))
        params = CouplingParams(n=1, a=1e300)
        with np.errstate(over="ignore"), pytest.raises(NumericalBlowup):
            step_system(state, params, 1.0)



class TestComputeMoments:
    def test_zero_state(self):
        grid = make_grid(EconomicDomain(1), 4)
        m = compute_moments(empty_state(grid))
        assert m.c == 0.0 and m.lr == 0.0
        assert m.x_c is None and m.x_l is None
        assert m.pz == 0.0 and m.dz == 0.0
        assert m.boundary_flux == 0.0

    def test_uniform_credit_field(self):
        grid = make_grid(EconomicDomain(1), 8)
        m = compute_moments(empty_state(grid, cl=ScalarField.full(grid, 1.0)))
        assert m.c == pytest.approx(1.0)
        assert m.x_c[0] == pytest.approx(0.5)
        assert m.x_l[0] == pytest.approx(0.5)

    def test_point_mass_mean_risks(self):
        grid = make_grid(EconomicDomain(1), 4)
        values = np.zeros(grid.shape)
        values[3, 0] = 1.0 / grid.cell_measure
        m = compute_moments(empty_state(grid, cl=ScalarField(grid, values)))
        assert m.x_c[0] == pytest.approx(0.875)
        assert m.x_l[0] == pytest.approx(0.125)

    def test_diagnostic_energy_matches_initial_seeding(self):
        grid, initial, epsilon = standard_state(m=16)
        m = compute_moments(initial, epsilon)
        assert m.closure_drift == pytest.approx(0.0, abs=1e-15)
        assert_allclose(m.ecx, m.ecx_diag)


class TestRunHydro:
    def test_zero_steps_emits_initial_row(self):
        grid, initial, epsilon = standard_state(m=8)
        run = run_hydro(initial, standard_params(), 1e-3, 0, epsilon=epsilon)
        assert len(run.moments) == 1
        assert run.moments[0].time == 0.0

    def test_frozen_dynamics(self):
        grid = make_grid(EconomicDomain(1), 8)
        state = empty_state(grid, cl=gaussian_bump(grid, (0.5, 0.5), 0.1, 1.0))
        params = CouplingParams(n=1)
        run = run_hydro(state, params, 0.01, 20)
        first = run.moments[0]
        for m in run.moments[1:]:
            assert m.c == first.c
            assert_allclose(m.px, first.px)

    def test_mass_budget_matches_emitted_sources(self):
        # dt must not be too small here: the identity is exact, but forming
        # (C_{k+1}-C_k)/dt amplifies the fields' roundoff by C/(dt*|a*Dz|)
        grid, initial, epsilon = standard_state(m=16)
        params = standard_params()
        dt = 1e-2
        run = run_hydro(initial, params, dt, 100, epsilon=epsilon)
        for before, after in zip(run.moments, run.moments[1:]):
            assert (after.c - before.c) / dt == pytest.approx(
                params.a * before.dz, rel=1e-10)
            assert (after.lr - before.lr) / dt == pytest.approx(
                params.b * before.pz, rel=1e-10)

    def test_boundary_flux_identically_zero(self):
        grid, initial, epsilon = standard_state(m=16)
        run = run_hydro(initial, standard_params(), 1e-3, 50, epsilon=epsilon)
        assert all(m.boundary_flux == 0.0 for m in run.moments)

    def test_mc_accumulates_credit_rate(self):
        grid, initial, epsilon = standard_state(m=16)
        dt = 1e-3
        run = run_hydro(initial, standard_params(), dt, 50, epsilon=epsilon)
        expected = dt * sum(m.c for m in run.moments[:-1])
        assert run.moments[-1].mc == pytest.approx(expected, rel=1e-12)

    def test_mean_risk_containment_nonnegative_run(self):
        # a = 0 keeps CL advection-only; donor-cell upwind preserves its sign
        grid, initial, epsilon = standard_state(m=32)
        params = standard_params(a=0.0)
        run = run_hydro(initial, params, 2.5e-3, 400, epsilon=epsilon)
        for m in run.moments:
            assert m.min_cl >= 0.0
            assert 0.0 <= m.x_c[0] <= 1.0
            assert 0.0 <= m.x_l[0] <= 1.0

    def test_error_carries_step_index(self):
        grid = make_grid(EconomicDomain(1), 16)
        state = empty_state(
            grid,
            cl=gaussian_bump(grid, (0.5, 0.5), 0.1, 1.0),
            p=VectorField.from_arrays(
                grid, [2.0 * gaussian_bump(grid, (0.5, 0.5), 0.1, 1.0).values,
                       np.zeros(grid.shape)]),
        )
        with pytest.raises(CFLViolation, match="step 0") as exc:
            run_hydro(state, CouplingParams(n=1), 0.5, 3)
        assert exc.value.step == 0


class TestTwoRiskAxes:
    def test_budgets_exact_on_4d_grid(self):
        grid = make_grid(EconomicDomain(2), 6)
        params = CouplingParams(
            n=2, a=0.5, b=-0.4,
            c_x=[2.0, 1.0], d_x=[-2.0, -1.0], c_y=[2.0, 1.5], d_y=[-3.0, -1.5],
            mu_x=[0.09, 0.04], eta_x=[1.0, 1.0],
            mu_y=[0.04, 0.01], eta_y=[1.0, 1.0],
        )
        initial = initial_gaussian_state(
            grid,
            cl_center=[0.5, 0.45, 0.5, 0.55], cl_width=0.15, cl_mass=1.0,
            lr_center=[0.5, 0.45, 0.5, 0.55], lr_width=0.15, lr_mass=0.8,
            cl_velocity=[0.02, -0.01, 0.015, -0.02],
            lr_velocity=[0.02, -0.01, 0.015, -0.02],
        )
        epsilon = 1e-3 * float(np.max(initial.cl.values))
        dt = 0.01
        run = run_hydro(initial, params, dt, 100, epsilon=epsilon)
        for before, after in zip(run.moments, run.moments[1:]):
            assert (after.c - before.c) / dt == pytest.approx(
                params.a * before.dz, rel=1e-10)
            for i in range(2):
                assert (after.px[i] - before.px[i]) / dt == pytest.approx(
                    params.c_x[i] * before.dx[i], rel=1e-10, abs=1e-16)
                assert (after.ecy[i] - before.ecy[i]) / dt == pytest.approx(
                    params.mu_y[i] * before.ery[i], rel=1e-10, abs=1e-16)


class TestGaussianInitialState:
    def test_bump_mass_is_exact(self):
        grid = make_grid(EconomicDomain(1), 32)
        bump = gaussian_bump(grid, (0.4, 0.6), 0.07, 2.5)
        assert integrate_field(bump) == pytest.approx(2.5, rel=1e-13)

    def test_impulse_equals_bulk_velocity_times_density(self):
        grid, initial, _ = standard_state(m=8)
        assert_allclose(initial.p.components[0].values,
                        0.02 * initial.cl.values, rtol=1e-12)
        assert_allclose(initial.d.components[1].values,
                        -0.015 * initial.lr.values, rtol=1e-12)

    def test_mismatched_grid_rejected(self):
        grid = make_grid(EconomicDomain(1), 4)
        other = make_grid(EconomicDomain(1), 5)
        with pytest.raises(ValueError):
            FluidState(
                time=0.0,
                cl=ScalarField.zeros(grid), lr=ScalarField.zeros(other),
                p=VectorField.zeros(grid), d=VectorField.zeros(grid),
                ec=tuple(ScalarField.zeros(grid) for _ in range(2)),
                er=tuple(ScalarField.zeros(grid) for _ in range(2)),
            )
