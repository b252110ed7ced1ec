"""Bounded risk box, its pair-space discretization, and quadrature primitives.

The model lives on the box ``[0, X_1] x ... x [0, X_n]`` of risk grades
(0 = most secure, X_i = most risky).  Pairwise transactions between a
creditor at ``x`` and a borrower at ``y`` are fields on the 2n-dimensional
pair space ``z = (x, y)``, discretized here as a uniform cell-centered
Cartesian grid with the same cell count ``m`` on every axis.

Axis convention used everywhere in this package: axes ``0..n-1`` are the
creditor coordinates ``x_1..x_n`` and axes ``n..2n-1`` are the borrower
coordinates ``y_1..y_n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIMENSIONS = 3


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class EconomicDomain:
    """The box of admissible risk grades, one bound per risk axis."""

    n: int
    bounds: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.n <= MAX_DIMENSIONS:
            raise ValueError(f"dimension count must be in 1..{MAX_DIMENSIONS}, got {self.n}")
        bounds = self.bounds or (1.0,) * self.n
        if len(bounds) != self.n:
            raise ValueError(f"expected {self.n} axis bounds, got {len(bounds)}")
        if any(b <= 0.0 for b in bounds):
            raise ValueError(f"axis bounds must be positive, got {bounds}")
        object.__setattr__(self, "bounds", tuple(float(b) for b in bounds))


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid over the 2n-dimensional pair space.

    ``spacing[k]`` and ``cell_centers[k]`` describe axis ``k`` of the pair
    space; center of cell ``j`` on an axis with spacing ``h`` is ``(j+0.5)*h``.
    """

    domain: EconomicDomain
    m: int
    spacing: tuple[float, ...] = field(init=False)
    cell_centers: tuple[np.ndarray, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"cells per axis must be >= 1, got {self.m}")
        pair_bounds = self.domain.bounds + self.domain.bounds
        spacing = tuple(b / self.m for b in pair_bounds)
        centers = tuple(
            _readonly((np.arange(self.m) + 0.5) * h) for h in spacing
        )
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "cell_centers", centers)

    @property
    def ndim(self) -> int:
        """Number of pair-space axes (2n)."""
        return 2 * self.domain.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.ndim

    @property
    def cell_count(self) -> int:
        return self.m ** self.ndim

    @property
    def cell_measure(self) -> float:
        """2n-volume of one cell; strictly positive."""
        return float(np.prod(self.spacing))

    def center_mesh(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along ``axis``, shaped to broadcast over the grid."""
        if not 0 <= axis < self.ndim:
            raise ValueError(f"axis must be in 0..{self.ndim - 1}, got {axis}")
        shape = [1] * self.ndim
        shape[axis] = self.m
        return self.cell_centers[axis].reshape(shape)

    def cell_index(self, axis: int, coordinate: np.ndarray) -> np.ndarray:
        """Index of the cell containing ``coordinate`` on ``axis`` (bound maps to last cell)."""
        idx = np.floor(np.asarray(coordinate) / self.spacing[axis]).astype(np.intp)
        return np.clip(idx, 0, self.m - 1)


@dataclass(frozen=True)
class ScalarField:
    """One finite density value per grid cell (per unit 2n-volume)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        values = _readonly(self.values)
        if values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must all be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))


@dataclass(frozen=True)
class VectorField:
    """2n scalar components ordered (x_1..x_n, y_1..y_n), all on one grid."""

    grid: GridSpec
    components: tuple[ScalarField, ...]

    def __post_init__(self) -> None:
        if len(self.components) != self.grid.ndim:
            raise ValueError(
                f"expected {self.grid.ndim} components, got {len(self.components)}"
            )
        if any(c.grid is not self.grid and c.grid != self.grid for c in self.components):
            raise ValueError("all components must share the vector field's grid")
        object.__setattr__(self, "components", tuple(self.components))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls(grid, tuple(ScalarField.zeros(grid) for _ in range(grid.ndim)))

    @classmethod
    def from_arrays(cls, grid: GridSpec, arrays) -> "VectorField":
        return cls(grid, tuple(ScalarField(grid, a) for a in arrays))


def make_grid(domain: EconomicDomain, m: int) -> GridSpec:
    """Build the uniform midpoint grid with ``m`` cells on each of the 2n axes.

    Identical ``(domain, m)`` inputs produce bit-identical grids.
    """
    if m < 1:
        raise ValueError(f"cells per axis must be >= 1, got {m}")
    return GridSpec(domain, m)


def integrate_field(f: ScalarField) -> float:
    """Midpoint quadrature of the field over the pair space.

    Exact to roundoff for integrands linear in each coordinate.  Accumulates
    in extended precision: per-step budget identities difference these
    integrals and divide by dt, which amplifies summation roundoff.
    """
    return float(f.values.sum(dtype=np.longdouble) * f.grid.cell_measure)


def coordinate_moment(f: ScalarField, axis: int) -> float:
    """Midpoint quadrature of ``z_axis * f`` over the pair space.

    This is the center-of-mass style first moment along one pair-space axis;
    exact to roundoff for fields linear in each coordinate.
    """
    grid = f.grid
    if not 0 <= axis < grid.ndim:
        raise ValueError(f"axis must be in 0..{grid.ndim - 1}, got {axis}")
    weighted = f.values * grid.center_mesh(axis)
    return float(weighted.sum(dtype=np.longdouble) * grid.cell_measure)
