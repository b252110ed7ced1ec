"""Cross-level consistency checks over emitted series.

Three families:
 - discrete moment budgets on a fluid run; the total/impulse/energy budgets
   are exact identities of the explicit scheme and are checked at roundoff
   tolerance, while the first-moment (Pz/Dz) budgets carry upwind-diffusion
   error and get a convergence-grade tolerance;
 - fluid-vs-reduced-ODE trajectory comparison over the exactly-closed
   subsystem, with the energy-closure gap reported separately (never
   asserted);
 - kinetic aggregation identities between raw transaction records and the
   binned fields.

Budget derivatives use forward differences matched to the explicit stepper;
a centered difference would smear genuinely exact per-step identities into
merely second-order ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import integrate_field
from .hydro import MomentSet
from .kinetic import TransactionRecord
from .params import CouplingParams
from .reduced import ReducedState, integrate

__all__ = [
    "QuantityCheck",
    "ComparisonReport",
    "check_moment_budgets",
    "compare_hydro_vs_ode",
    "check_kinetic_aggregation",
    "reduced_state_from_moments",
]

EXACT_TOLERANCE = 1e-10


def reduced_state_from_moments(m: MomentSet) -> ReducedState:
    """Seed the reduced system from one moment row (ODE energies take the
    prognostic values)."""
    return ReducedState(
        time=m.time, n=m.n, c=m.c, lr=m.lr, mc=m.mc, ml=m.ml,
        px=m.px, py=m.py, dx=m.dx, dy=m.dy,
        pzx=m.pzx, pzy=m.pzy, dzx=m.dzx, dzy=m.dzy,
        ecx=m.ecx, ecy=m.ecy, erx=m.erx, ery=m.ery,
    )


@dataclass(frozen=True)
class QuantityCheck:
    name: str
    max_abs_err: float
    max_rel_err: float
    rmse: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_abs_err": self.max_abs_err,
            "max_rel_err": self.max_rel_err,
            "rmse": self.rmse,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class ComparisonReport:
    """Pass/fail per checked quantity plus non-asserted diagnostic curves."""

    checks: tuple[QuantityCheck, ...]
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> QuantityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "metadata": self.metadata,
            "diagnostics": self.diagnostics,
        }


def _compare_series(name: str, lhs: np.ndarray, rhs: np.ndarray,
                    tolerance: float) -> QuantityCheck:
    """Relative error scaled by the series' own magnitude (0 = 0 passes)."""
    err = np.abs(lhs - rhs)
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    max_abs = float(err.max()) if err.size else 0.0
    max_rel = max_abs / scale if scale > 0.0 else 0.0
    rmse = float(np.sqrt(np.mean(err ** 2))) if err.size else 0.0
    return QuantityCheck(name=name, max_abs_err=max_abs, max_rel_err=max_rel,
                         rmse=rmse, tolerance=tolerance,
                         passed=max_rel <= tolerance)


def _stack(moments: list[MomentSet], attr: str) -> np.ndarray:
    return np.array([getattr(m, attr) for m in moments])


def check_moment_budgets(moments: list[MomentSet], params: CouplingParams,
                         dt: float, *, exact_tolerance: float = EXACT_TOLERANCE,
                         pz_tolerance: float = 0.05) -> ComparisonReport:
    """Verify the per-step budgets of an emitted moment series.

    Exact identities (total, impulse, energy budgets) are held to
    ``exact_tolerance``; the Pz/Dz budgets, whose integration-by-parts step
    is perturbed by scheme diffusion, are held to ``pz_tolerance`` and are
    expected to shrink under grid/step refinement.
    """
    if len(moments) and moments[0].n != params.n:
        raise ValueError(
            f"moment series has {moments[0].n} axes but params have {params.n}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")

    checks: list[QuantityCheck] = []
    metadata = {"rows": len(moments), "dt": dt, "n": params.n}
    if len(moments) < 2:
        return ComparisonReport(checks=tuple(checks), metadata=metadata)

    c = _stack(moments, "c")
    lr = _stack(moments, "lr")
    dz = np.array([m.dz for m in moments])
    pz = np.array([m.pz for m in moments])
    checks.append(_compare_series(
        "dC/dt = a*Dz", np.diff(c) / dt, params.a * dz[:-1], exact_tolerance))
    checks.append(_compare_series(
        "dLR/dt = b*Pz", np.diff(lr) / dt, params.b * pz[:-1], exact_tolerance))

    px, py = _stack(moments, "px"), _stack(moments, "py")
    dx, dy = _stack(moments, "dx"), _stack(moments, "dy")
    ecx, ecy = _stack(moments, "ecx"), _stack(moments, "ecy")
    erx, ery = _stack(moments, "erx"), _stack(moments, "ery")
    pzx, pzy = _stack(moments, "pzx"), _stack(moments, "pzy")
    dzx, dzy = _stack(moments, "dzx"), _stack(moments, "dzy")
    ecx_diag, ecy_diag = _stack(moments, "ecx_diag"), _stack(moments, "ecy_diag")
    erx_diag, ery_diag = _stack(moments, "erx_diag"), _stack(moments, "ery_diag")

    for i in range(params.n):
        axis = i + 1
        checks.append(_compare_series(
            f"dPx{axis}/dt = c_x*Dx{axis}", np.diff(px[:, i]) / dt,
            params.c_x[i] * dx[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dPy{axis}/dt = c_y*Dy{axis}", np.diff(py[:, i]) / dt,
            params.c_y[i] * dy[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dDx{axis}/dt = d_x*Px{axis}", np.diff(dx[:, i]) / dt,
            params.d_x[i] * px[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dDy{axis}/dt = d_y*Py{axis}", np.diff(dy[:, i]) / dt,
            params.d_y[i] * py[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dECx{axis}/dt = mu_x*ERx{axis}", np.diff(ecx[:, i]) / dt,
            params.mu_x[i] * erx[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dECy{axis}/dt = mu_y*ERy{axis}", np.diff(ecy[:, i]) / dt,
            params.mu_y[i] * ery[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dERx{axis}/dt = eta_x*ECx{axis}", np.diff(erx[:, i]) / dt,
            params.eta_x[i] * ecx[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dERy{axis}/dt = eta_y*ECy{axis}", np.diff(ery[:, i]) / dt,
            params.eta_y[i] * ecy[:-1, i], exact_tolerance))
        checks.append(_compare_series(
            f"dPzx{axis}/dt = ECx{axis}_diag + c_x*Dzx{axis}",
            np.diff(pzx[:, i]) / dt,
            ecx_diag[:-1, i] + params.c_x[i] * dzx[:-1, i], pz_tolerance))
        checks.append(_compare_series(
            f"dPzy{axis}/dt = ECy{axis}_diag + c_y*Dzy{axis}",
            np.diff(pzy[:, i]) / dt,
            ecy_diag[:-1, i] + params.c_y[i] * dzy[:-1, i], pz_tolerance))
        checks.append(_compare_series(
            f"dDzx{axis}/dt = ERx{axis}_diag + d_x*Pzx{axis}",
            np.diff(dzx[:, i]) / dt,
            erx_diag[:-1, i] + params.d_x[i] * pzx[:-1, i], pz_tolerance))
        checks.append(_compare_series(
            f"dDzy{axis}/dt = ERy{axis}_diag + d_y*Pzy{axis}",
            np.diff(dzy[:, i]) / dt,
            ery_diag[:-1, i] + params.d_y[i] * pzy[:-1, i], pz_tolerance))

    boundary = np.array([m.boundary_flux for m in moments])
    checks.append(QuantityCheck(
        name="boundary_flux = 0",
        max_abs_err=float(np.max(np.abs(boundary))),
        max_rel_err=float(np.max(np.abs(boundary))),
        rmse=float(np.sqrt(np.mean(boundary ** 2))),
        tolerance=0.0,
        passed=bool(np.all(boundary == 0.0)),
    ))
    return ComparisonReport(checks=tuple(checks), metadata=metadata)


_EXACT_SUBSYSTEM = [
    ("C", "c", "c"), ("LR", "lr", "lr"),
    ("Px", "px", "px"), ("Py", "py", "py"),
    ("Dx", "dx", "dx"), ("Dy", "dy", "dy"),
    ("ECx", "ecx", "ecx"), ("ECy", "ecy", "ecy"),
    ("ERx", "erx", "erx"), ("ERy", "ery", "ery"),
]


def compare_hydro_vs_ode(moments: list[MomentSet], params: CouplingParams,
                         initial: ReducedState, dt: float, *,
                         tolerance: float = 0.005) -> ComparisonReport:
    """Compare the fluid run's moment series against the reduced ODE.

    Only the exactly-closed subsystem {C, LR, P, D, EC, ER} is pass/fail:
    those budgets are exact, so the two levels coincide up to time
    discretization.  The Pz/Dz gap and the credit drift it induces through
    dC = a*Dz depend on the energy closure and are reported as diagnostics.
    """
    if len(moments) < 1:
        raise ValueError("empty moment series")
    if moments[0].n != params.n or initial.n != params.n:
        raise ValueError("axis counts of series, params and initial state differ")
    first = moments[0]
    mismatch = max(
        abs(first.c - initial.c), abs(first.lr - initial.lr),
        float(np.max(np.abs(first.px - initial.px))),
        float(np.max(np.abs(first.py - initial.py))),
        float(np.max(np.abs(first.dx - initial.dx))),
        float(np.max(np.abs(first.dy - initial.dy))),
        float(np.max(np.abs(first.pzx - initial.pzx))),
        float(np.max(np.abs(first.pzy - initial.pzy))),
        float(np.max(np.abs(first.dzx - initial.dzx))),
        float(np.max(np.abs(first.dzy - initial.dzy))),
        float(np.max(np.abs(first.ecx - initial.ecx))),
        float(np.max(np.abs(first.ecy - initial.ecy))),
        float(np.max(np.abs(first.erx - initial.erx))),
        float(np.max(np.abs(first.ery - initial.ery))),
    )
    if mismatch > 1e-12:
        raise ValueError(
            f"reduced initial state differs from the first moment row by {mismatch:g}; "
            f"seed it from the run's initial moments"
        )

    steps = len(moments) - 1
    trajectory = integrate(initial, params, dt, steps)
    checks: list[QuantityCheck] = []
    for label, moment_attr, state_attr in _EXACT_SUBSYSTEM:
        hydro_series = _stack(moments, moment_attr)
        ode_series = np.array([getattr(trajectory.state(k), state_attr)
                               for k in range(steps + 1)])
        if hydro_series.ndim == 1:
            checks.append(_compare_series(label, hydro_series, ode_series, tolerance))
        else:
            for i in range(params.n):
                checks.append(_compare_series(
                    f"{label}{i + 1}", hydro_series[:, i], ode_series[:, i], tolerance))

    pz_hydro = np.array([m.pz for m in moments])
    dz_hydro = np.array([m.dz for m in moments])
    pz_ode = np.array([trajectory.state(k).pz for k in range(steps + 1)])
    dz_ode = np.array([trajectory.state(k).dz for k in range(steps + 1)])
    c_hydro = _stack(moments, "c")
    c_ode = np.array([trajectory.state(k).c for k in range(steps + 1)])
    # Credit drift induced by the Dz gap, accumulated with the scheme's rule.
    induced = np.concatenate([
        [0.0], np.cumsum(dt * params.a * (dz_hydro[:-1] - dz_ode[:-1]))
    ])
    diagnostics = {
        "closure_drift": {
            "times": [m.time for m in moments],
            "pz_gap": (pz_hydro - pz_ode).tolist(),
            "dz_gap": (dz_hydro - dz_ode).tolist(),
            "c_gap": (c_hydro - c_ode).tolist(),
            "c_gap_induced_by_dz": induced.tolist(),
            "energy_closure_gap": [m.closure_drift for m in moments],
        }
    }
    metadata = {"rows": len(moments), "dt": dt, "n": params.n,
                "tolerance": tolerance}
    return ComparisonReport(checks=tuple(checks), metadata=metadata,
                            diagnostics=diagnostics)


def check_kinetic_aggregation(records_per_step: list[list[TransactionRecord]],
                              fields_per_step: list, velocities_per_step: list, *,
                              tolerance: float = 1e-12) -> ComparisonReport:
    """Verify binned fields against direct sums over the raw records.

    ``fields_per_step`` holds (cl, p) pairs, ``velocities_per_step`` the
    (N, n) agent velocity snapshot each step's binning used.  The oracle
    side recomputes the credit total and the impulse totals by exact
    compensated summation over the records.
    """
    if not (len(records_per_step) == len(fields_per_step) == len(velocities_per_step)):
        raise ValueError("per-step series have mismatched lengths")
    checks: list[QuantityCheck] = []
    c_emitted, c_raw = [], []
    imp_emitted: list[list[float]] = []
    imp_raw: list[list[float]] = []
    for records, (cl, p), velocities in zip(records_per_step, fields_per_step,
                                            velocities_per_step):
        n = cl.grid.domain.n
        c_emitted.append(integrate_field(cl))
        c_raw.append(math.fsum(r.amount for r in records))
        emitted_row, raw_row = [], []
        for axis in range(n):
            emitted_row.append(integrate_field(p.components[axis]))
            raw_row.append(math.fsum(
                r.amount * velocities[r.creditor_id][axis] for r in records))
            emitted_row.append(integrate_field(p.components[n + axis]))
            raw_row.append(math.fsum(
                r.amount * velocities[r.borrower_id][axis] for r in records))
        imp_emitted.append(emitted_row)
        imp_raw.append(raw_row)

    metadata = {"steps": len(records_per_step),
                "records": sum(len(r) for r in records_per_step)}
    if not records_per_step:
        return ComparisonReport(checks=tuple(checks), metadata=metadata)

    checks.append(_compare_series("credit total = sum of amounts",
                                  np.array(c_emitted), np.array(c_raw), tolerance))
    imp_emitted_arr = np.array(imp_emitted)
    imp_raw_arr = np.array(imp_raw)
    n = fields_per_step[0][0].grid.domain.n
    for axis in range(n):
        checks.append(_compare_series(
            f"Px{axis + 1} = sum amount*creditor velocity",
            imp_emitted_arr[:, 2 * axis], imp_raw_arr[:, 2 * axis], tolerance))
        checks.append(_compare_series(
            f"Py{axis + 1} = sum amount*borrower velocity",
            imp_emitted_arr[:, 2 * axis + 1], imp_raw_arr[:, 2 * axis + 1], tolerance))
    return ComparisonReport(checks=tuple(checks), metadata=metadata)
