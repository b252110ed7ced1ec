"""Coupling coefficients shared by the fluid solver and the reduced ODE system.

Sign conventions: the impulse couplings on each axis must satisfy
``c * d <= 0`` so the impulse pair oscillates (frequency ``sqrt(-c*d)``),
and the energy couplings must satisfy ``mu * eta >= 0`` so the energy pair
grows or decays exponentially (rate ``sqrt(mu*eta)``).  Strictly violating
products are rejected at construction; zero products are admitted so that
fully frozen configurations remain expressible, with zero frequency/rate
handled as the degenerate linear limit by the analytic solutions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _axis_array(name: str, values, n: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape == (1,) and n > 1:
        arr = np.repeat(arr, n)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have one entry per risk axis ({n}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class CouplingParams:
    """Source coefficients: continuity (a, b), impulse (c, d), energy (mu, eta)."""

    n: int
    a: float = 0.0
    b: float = 0.0
    c_x: np.ndarray = 0.0
    c_y: np.ndarray = 0.0
    d_x: np.ndarray = 0.0
    d_y: np.ndarray = 0.0
    mu_x: np.ndarray = 0.0
    mu_y: np.ndarray = 0.0
    eta_x: np.ndarray = 0.0
    eta_y: np.ndarray = 0.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"axis count must be >= 1, got {self.n}")
        for name in ("c_x", "c_y", "d_x", "d_y", "mu_x", "mu_y", "eta_x", "eta_y"):
            object.__setattr__(self, name, _axis_array(name, getattr(self, name), self.n))
        for side in ("x", "y"):
            cd = getattr(self, f"c_{side}") * getattr(self, f"d_{side}")
            if np.any(cd > 0.0):
                i = int(np.argmax(cd > 0.0))
                raise ValueError(
                    f"c_{side}[{i}]*d_{side}[{i}] = {cd[i]:g} > 0: the product must be "
                    f"non-positive so the impulse frequency sqrt(-c*d) is real"
                )
            me = getattr(self, f"mu_{side}") * getattr(self, f"eta_{side}")
            if np.any(me < 0.0):
                i = int(np.argmax(me < 0.0))
                raise ValueError(
                    f"mu_{side}[{i}]*eta_{side}[{i}] = {me[i]:g} < 0: the product must be "
                    f"non-negative so the energy growth rate sqrt(mu*eta) is real"
                )

    @property
    def omega(self) -> np.ndarray:
        """Impulse oscillation frequencies along the creditor axes."""
        return np.sqrt(-self.c_x * self.d_x)

    @property
    def nu(self) -> np.ndarray:
        """Impulse oscillation frequencies along the borrower axes."""
        return np.sqrt(-self.c_y * self.d_y)

    @property
    def gamma_x(self) -> np.ndarray:
        """Energy growth/decay rates along the creditor axes."""
        return np.sqrt(self.mu_x * self.eta_x)

    @property
    def gamma_y(self) -> np.ndarray:
        """Energy growth/decay rates along the borrower axes."""
        return np.sqrt(self.mu_y * self.eta_y)


# The reduced moment system uses the identical coefficient set.
ReducedParams = CouplingParams
