import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from econflow.domain import (
    EconomicDomain,
    ScalarField,
    VectorField,
    coordinate_moment,
    integrate_field,
    make_grid,
)


def unit_grid(m, n=1):
    return make_grid(EconomicDomain(n), m)


class TestDomainTypes:
    def test_default_bounds_are_unit(self):
        dom = EconomicDomain(2)
        assert dom.bounds == (1.0, 1.0)

    @pytest.mark.parametrize("n", [0, -1, 4])
    def test_unsupported_dimension_rejected(self, n):
        with pytest.raises(ValueError):
            EconomicDomain(n)

    def test_nonpositive_bound_rejected(self):
        with pytest.raises(ValueError):
            EconomicDomain(2, (1.0, 0.0))

    def test_field_shape_mismatch_rejected(self):
        grid = unit_grid(4)
        with pytest.raises(ValueError):
            ScalarField(grid, np.zeros((4, 5)))

    def test_nonfinite_field_rejected(self):
        grid = unit_grid(2)
        values = np.zeros(grid.shape)
        values[0, 0] = np.nan
        with pytest.raises(ValueError):
            ScalarField(grid, values)

    def test_fields_are_readonly(self):
        field = ScalarField.full(unit_grid(3), 1.0)
        with pytest.raises(ValueError):
            field.values[0, 0] = 2.0

    def test_vector_field_needs_2n_components(self):
        grid = unit_grid(3)
        with pytest.raises(ValueError):
            VectorField(grid, (ScalarField.zeros(grid),))


class TestMakeGrid:
    def test_unit_grid_m4(self):
        grid = unit_grid(4)
        assert grid.spacing == (0.25, 0.25)
        assert_allclose(grid.cell_centers[0], [0.125, 0.375, 0.625, 0.875])
        assert_allclose(grid.cell_centers[1], [0.125, 0.375, 0.625, 0.875])

    def test_single_cell(self):
        grid = unit_grid(1)
        assert grid.cell_centers[0][0] == 0.5
        assert grid.cell_centers[1][0] == 0.5
        assert grid.cell_measure == 1.0

    def test_cell_count_n2(self):
        grid = unit_grid(8, n=2)
        assert grid.cell_count == 8 ** 4 == 4096

    def test_zero_cells_rejected(self):
        with pytest.raises(ValueError):
            make_grid(EconomicDomain(1), 0)

    def test_grid_determinism(self):
        a = unit_grid(16)
        b = unit_grid(16)
        assert a.spacing == b.spacing
        for ca, cb in zip(a.cell_centers, b.cell_centers):
            assert np.array_equal(ca, cb)


class TestQuadrature:
    def test_zero_field(self):
        field = ScalarField.zeros(unit_grid(5))
        assert integrate_field(field) == 0.0
        assert coordinate_moment(field, 0) == 0.0

    @pytest.mark.parametrize("m", [1, 3, 7, 16])
    def test_constant_field_unit_mass(self, m):
        field = ScalarField.full(unit_grid(m), 1.0)
        assert integrate_field(field) == pytest.approx(1.0, abs=1e-14)
        assert coordinate_moment(field, 0) == pytest.approx(0.5, abs=1e-14)

    def test_linear_integrand_exact(self):
        grid = unit_grid(64)
        x = np.broadcast_to(grid.center_mesh(0), grid.shape)
        field = ScalarField(grid, x)
        assert integrate_field(field) == pytest.approx(0.5, abs=1e-15)

    def test_point_mass_moment(self):
        # density 16 on the single cell holding (0.875, 0.125): unit mass
        grid = unit_grid(4)
        values = np.zeros(grid.shape)
        values[3, 0] = 16.0
        field = ScalarField(grid, values)
        assert integrate_field(field) == pytest.approx(1.0, abs=1e-14)
        assert coordinate_moment(field, 0) == pytest.approx(0.875, abs=1e-14)
        assert coordinate_moment(field, 1) == pytest.approx(0.125, abs=1e-14)

    def test_axis_out_of_range(self):
        field = ScalarField.zeros(unit_grid(2))
        with pytest.raises(ValueError):
            coordinate_moment(field, 2)

    def test_midpoint_exact_for_bilinear(self, rng):
        # a + b*x + c*y integrates to a + b/2 + c/2 on the unit box
        grid = unit_grid(9)
        a, b, c = rng.normal(size=3)
        x = np.broadcast_to(grid.center_mesh(0), grid.shape)
        y = np.broadcast_to(grid.center_mesh(1), grid.shape)
        field = ScalarField(grid, a + b * x + c * y)
        assert integrate_field(field) == pytest.approx(a + b / 2 + c / 2, rel=1e-13)
        # moment of x weight: a/2 + b/3 + c/4 needs x^2, which midpoint gets
        # wrong by O(h^2); check the exactly-linear moment instead
        assert coordinate_moment(field, 1) == pytest.approx(
            a / 2 + b / 4 + c / 3, rel=5e-3)

    def test_non_unit_bounds(self):
        # box [0,2]^2: volume 4, x-moment of the unit density 2*2*2/2 = 4
        grid = make_grid(EconomicDomain(1, (2.0,)), 8)
        field = ScalarField.full(grid, 1.0)
        assert integrate_field(field) == pytest.approx(4.0)
        assert coordinate_moment(field, 0) == pytest.approx(4.0)
        assert coordinate_moment(field, 1) == pytest.approx(4.0)

    @settings(max_examples=25, deadline=None)
    @given(alpha=st.floats(-1e3, 1e3), beta=st.floats(-1e3, 1e3))
    def test_quadrature_linearity(self, alpha, beta):
        grid = unit_grid(6)
        gen = np.random.default_rng(99)
        f = gen.normal(size=grid.shape)
        g = gen.normal(size=grid.shape)
        combined = ScalarField(grid, alpha * f + beta * g)
        expected = alpha * integrate_field(ScalarField(grid, f)) \
            + beta * integrate_field(ScalarField(grid, g))
        assert integrate_field(combined) == pytest.approx(expected, abs=1e-9)
