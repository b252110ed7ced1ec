"""Failure modes shared across the solver modules."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid run configuration (bad key, bad value, broken constraint)."""


class CFLViolation(RuntimeError):
    """Explicit step rejected because the advective CFL number is too large."""

    def __init__(self, cfl: float, limit: float):
        self.cfl = cfl
        self.limit = limit
        super().__init__(
            f"CFL number {cfl:.6g} exceeds the allowed limit {limit:.6g}; "
            f"reduce dt or the advection velocities"
        )


class NumericalBlowup(RuntimeError):
    """A field or state stopped being finite."""

    def __init__(self, what: str, where=None):
        self.what = what
        self.where = where
        location = f" at {where}" if where is not None else ""
        super().__init__(f"non-finite values in {what}{location}")
