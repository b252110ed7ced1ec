"""The exactly-closed moment ODE system and its closed-form solutions.

State vector (dimension 4 + 12n): total credit rate C, total repayment rate
LR, their cumulative integrals MC/ML, and per risk axis the impulse totals
(Px, Py, Dx, Dy), the first coordinate moments of the impulses (Pzx, Pzy,
Dzx, Dzy) and the energy totals (ECx, ECy, ERx, ERy).  The dynamics are
linear:

    C'   = a*Dz         Dz = sum_i (Dzx_i + Dzy_i)
    LR'  = b*Pz         Pz = sum_i (Pzx_i + Pzy_i)
    MC'  = C,  ML' = LR
    Px_i'  = c_x_i*Dx_i      Dx_i'  = d_x_i*Px_i        (and the y side)
    Pzx_i' = ECx_i + c_x_i*Dzx_i     Dzx_i' = ERx_i + d_x_i*Pzx_i
    ECx_i' = mu_x_i*ERx_i            ERx_i' = eta_x_i*ECx_i

so the impulse pairs are harmonic oscillators at omega_i = sqrt(-c_x_i*d_x_i)
(nu_i on the y side), the energy pairs are hyperbolic with rate
gamma = sqrt(mu*eta), and the Pz/Dz pairs are oscillators forced by the
energies.  C(t) is therefore a sum of sinusoids at omega_i, nu_i plus
exponentials at +/-gamma, which is the business-cycle solution form.

Closed forms are assembled here from a tiny symbolic sum-of-terms
representation (sin/cos/exp/polynomial) so that the credit series and its
cumulative integral come out of exact term-by-term antiderivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NumericalBlowup
from .params import ReducedParams

__all__ = [
    "ReducedState",
    "ReducedParams",
    "ReducedTrajectory",
    "ImpulseSolution",
    "EnergySolution",
    "CreditSolution",
    "QuadraticInvariants",
    "ode_rhs",
    "system_matrix",
    "rk4_step",
    "integrate",
    "analytic_impulses",
    "analytic_energies",
    "analytic_pz_credit",
    "conserved_quadratics",
    "vector_labels",
]

_SCALARS = ("C", "LR", "MC", "ML")
_BLOCKS = ("Px", "Py", "Dx", "Dy", "Pzx", "Pzy", "Dzx", "Dzy",
           "ECx", "ECy", "ERx", "ERy")


def vector_labels(n: int) -> list[str]:
    """Component names of the flat state vector, in storage order."""
    labels = list(_SCALARS)
    for name in _BLOCKS:
        labels.extend(f"{name}{i + 1}" for i in range(n))
    return labels


def _block(name: str, values, n: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.shape == (1,) and n > 1:
        arr = np.repeat(arr, n)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have one entry per axis ({n}), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} entries must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ReducedState:
    """One point of the closed moment system (all entries finite)."""

    time: float
    n: int
    c: float = 0.0
    lr: float = 0.0
    mc: float = 0.0
    ml: float = 0.0
    px: np.ndarray = 0.0
    py: np.ndarray = 0.0
    dx: np.ndarray = 0.0
    dy: np.ndarray = 0.0
    pzx: np.ndarray = 0.0
    pzy: np.ndarray = 0.0
    dzx: np.ndarray = 0.0
    dzy: np.ndarray = 0.0
    ecx: np.ndarray = 0.0
    ecy: np.ndarray = 0.0
    erx: np.ndarray = 0.0
    ery: np.ndarray = 0.0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"axis count must be >= 1, got {self.n}")
        for name in ("c", "lr", "mc", "ml"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("px", "py", "dx", "dy", "pzx", "pzy", "dzx", "dzy",
                     "ecx", "ecy", "erx", "ery"):
            object.__setattr__(self, name, _block(name, getattr(self, name), self.n))

    @property
    def pz(self) -> float:
        return float(self.pzx.sum() + self.pzy.sum())

    @property
    def dz(self) -> float:
        return float(self.dzx.sum() + self.dzy.sum())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            [self.c, self.lr, self.mc, self.ml],
            self.px, self.py, self.dx, self.dy,
            self.pzx, self.pzy, self.dzx, self.dzy,
            self.ecx, self.ecy, self.erx, self.ery,
        ])

    @classmethod
    def from_vector(cls, time: float, vec: np.ndarray, n: int) -> "ReducedState":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (4 + 12 * n,):
            raise ValueError(f"expected vector of length {4 + 12 * n}, got {vec.shape}")
        blocks = vec[4:].reshape(12, n)
        return cls(time, n, *vec[:4], *blocks)


def _rhs_vector(vec: np.ndarray, params: ReducedParams, n: int) -> np.ndarray:
    out = np.empty_like(vec)
    blocks = vec[4:].reshape(12, n)
    px, py, dx, dy, pzx, pzy, dzx, dzy, ecx, ecy, erx, ery = blocks
    out[0] = params.a * (dzx.sum() + dzy.sum())
    out[1] = params.b * (pzx.sum() + pzy.sum())
    out[2] = vec[0]
    out[3] = vec[1]
    dblocks = out[4:].reshape(12, n)
    dblocks[0] = params.c_x * dx
    dblocks[1] = params.c_y * dy
    dblocks[2] = params.d_x * px
    dblocks[3] = params.d_y * py
    dblocks[4] = ecx + params.c_x * dzx
    dblocks[5] = ecy + params.c_y * dzy
    dblocks[6] = erx + params.d_x * pzx
    dblocks[7] = ery + params.d_y * pzy
    dblocks[8] = params.mu_x * erx
    dblocks[9] = params.mu_y * ery
    dblocks[10] = params.eta_x * ecx
    dblocks[11] = params.eta_y * ecy
    return out


def ode_rhs(state: ReducedState, params: ReducedParams) -> ReducedState:
    """Time derivative of the closed system (the returned ``time`` is unused)."""
    if params.n != state.n:
        raise ValueError(f"params are for {params.n} axes, state for {state.n}")
    return ReducedState.from_vector(
        state.time, _rhs_vector(state.to_vector(), params, state.n), state.n
    )


def system_matrix(params: ReducedParams, n: int) -> np.ndarray:
    """Dense matrix A with ode_rhs(y) = A @ y (the system is linear)."""
    dim = 4 + 12 * n
    matrix = np.empty((dim, dim))
    basis = np.zeros(dim)
    for j in range(dim):
        basis[j] = 1.0
        matrix[:, j] = _rhs_vector(basis, params, n)
        basis[j] = 0.0
    return matrix


def _rk4_matrix_step(vec: np.ndarray, matrix: np.ndarray, dt: float) -> np.ndarray:
    k1 = matrix @ vec
    k2 = matrix @ (vec + 0.5 * dt * k1)
    k3 = matrix @ (vec + 0.5 * dt * k2)
    k4 = matrix @ (vec + dt * k3)
    return vec + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def rk4_step(state: ReducedState, params: ReducedParams, dt: float) -> ReducedState:
    """One classical Runge-Kutta step; deterministic, fixed dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if params.n != state.n:
        raise ValueError(f"params are for {params.n} axes, state for {state.n}")
    matrix = system_matrix(params, state.n)
    new = _rk4_matrix_step(state.to_vector(), matrix, dt)
    if not np.all(np.isfinite(new)):
        bad = int(np.argwhere(~np.isfinite(new))[0])
        raise NumericalBlowup("reduced state", vector_labels(state.n)[bad])
    return ReducedState.from_vector(state.time + dt, new, state.n)


@dataclass(frozen=True)
class ReducedTrajectory:
    """Dense output of a fixed-step integration: times and stacked state vectors."""

    n: int
    times: np.ndarray            # (steps+1,)
    values: np.ndarray           # (steps+1, 4+12n), rows in to_vector order

    def state(self, k: int) -> ReducedState:
        return ReducedState.from_vector(float(self.times[k]), self.values[k], self.n)

    def column(self, label: str) -> np.ndarray:
        return self.values[:, vector_labels(self.n).index(label)]


def integrate(initial: ReducedState, params: ReducedParams, dt: float,
              steps: int) -> ReducedTrajectory:
    """RK4 trajectory from the initial state; row k is the state at t0 + k*dt."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if params.n != initial.n:
        raise ValueError(f"params are for {params.n} axes, state for {initial.n}")
    n = initial.n
    values = np.empty((steps + 1, 4 + 12 * n))
    vec = initial.to_vector()
    values[0] = vec
    matrix = system_matrix(params, n)
    for k in range(steps):
        vec = _rk4_matrix_step(vec, matrix, dt)
        values[k + 1] = vec
    if not np.all(np.isfinite(values)):
        row, col = np.argwhere(~np.isfinite(values))[0]
        raise NumericalBlowup("reduced trajectory",
                              f"step {int(row)}, {vector_labels(n)[int(col)]}")
    times = initial.time + dt * np.arange(steps + 1)
    return ReducedTrajectory(n=n, times=times, values=values)


# ---------------------------------------------------------------------------
# Closed forms, built from sums of sin/cos/exp/polynomial terms.


@dataclass(frozen=True)
class _Term:
    kind: str     # 'sin' | 'cos' | 'exp' | 'poly'
    rate: float   # frequency, growth rate, or polynomial power
    coef: float


def _term_values(terms: list[_Term], t: np.ndarray) -> np.ndarray:
    total = np.zeros_like(t, dtype=float)
    for term in terms:
        if term.coef == 0.0:
            continue
        if term.kind == "sin":
            total += term.coef * np.sin(term.rate * t)
        elif term.kind == "cos":
            total += term.coef * np.cos(term.rate * t)
        elif term.kind == "exp":
            total += term.coef * np.exp(term.rate * t)
        else:
            total += term.coef * t ** term.rate
    return total


def _term_derivative(terms: list[_Term]) -> list[_Term]:
    out: list[_Term] = []
    for term in terms:
        if term.kind == "sin":
            out.append(_Term("cos", term.rate, term.coef * term.rate))
        elif term.kind == "cos":
            out.append(_Term("sin", term.rate, -term.coef * term.rate))
        elif term.kind == "exp":
            out.append(_Term("exp", term.rate, term.coef * term.rate))
        elif term.rate >= 1:
            out.append(_Term("poly", term.rate - 1, term.coef * term.rate))
    return out


def _term_antiderivative(terms: list[_Term]) -> list[_Term]:
    """Antiderivative normalized to vanish at t = 0 (sin -> -cos/freq, exp -> exp/rate)."""
    out: list[_Term] = []
    for term in terms:
        if term.kind == "sin":
            out.append(_Term("cos", term.rate, -term.coef / term.rate))
            out.append(_Term("poly", 0, term.coef / term.rate))
        elif term.kind == "cos":
            out.append(_Term("sin", term.rate, term.coef / term.rate))
        elif term.kind == "exp":
            out.append(_Term("exp", term.rate, term.coef / term.rate))
            out.append(_Term("poly", 0, -term.coef / term.rate))
        else:
            out.append(_Term("poly", term.rate + 1, term.coef / (term.rate + 1)))
    return out


def _value_at_zero(terms: list[_Term]) -> float:
    total = 0.0
    for term in terms:
        if term.kind in ("cos", "exp") or (term.kind == "poly" and term.rate == 0):
            total += term.coef
    return total


def _energy_pair_terms(e0: float, r0: float, fwd: float, bwd: float,
                       gamma: float) -> tuple[list[_Term], list[_Term]]:
    """Closed form of E' = fwd*R, R' = bwd*E with gamma = sqrt(fwd*bwd).

    Exponential pair exp(+/-gamma t) for gamma > 0; the degenerate gamma = 0
    case collapses to the linear solution E = e0 + fwd*r0*t.
    """
    if gamma > 0.0:
        e_plus = 0.5 * (e0 + fwd * r0 / gamma)
        e_minus = 0.5 * (e0 - fwd * r0 / gamma)
        r_plus = 0.5 * (r0 + bwd * e0 / gamma)
        r_minus = 0.5 * (r0 - bwd * e0 / gamma)
        e_terms = [_Term("exp", gamma, e_plus), _Term("exp", -gamma, e_minus)]
        r_terms = [_Term("exp", gamma, r_plus), _Term("exp", -gamma, r_minus)]
    else:
        e_terms = [_Term("poly", 0, e0), _Term("poly", 1, fwd * r0)]
        r_terms = [_Term("poly", 0, r0), _Term("poly", 1, bwd * e0)]
    return e_terms, r_terms


def _forced_oscillator_terms(omega: float, y0: float, dy0: float,
                             forcing: list[_Term]) -> list[_Term]:
    """Solve y'' + omega^2 y = forcing by undetermined coefficients.

    The forcing only ever contains exponentials and low-degree polynomials
    (the energy modes), so no resonance with the sinusoidal homogeneous part
    is possible.  omega = 0 reduces to double integration of the forcing.
    """
    particular: list[_Term] = []
    for term in forcing:
        if term.coef == 0.0:
            continue
        if term.kind == "exp":
            particular.append(
                _Term("exp", term.rate, term.coef / (term.rate ** 2 + omega ** 2))
            )
        elif term.kind == "poly":
            if omega > 0.0:
                # polynomial ansatz: a_k = coef/omega^2, a_j = -(j+2)(j+1) a_{j+2}/omega^2
                k = int(term.rate)
                coef = term.coef / omega ** 2
                particular.append(_Term("poly", k, coef))
                j = k - 2
                while j >= 0:
                    coef = -(j + 2) * (j + 1) * coef / omega ** 2
                    particular.append(_Term("poly", j, coef))
                    j -= 2
            else:
                k = term.rate
                particular.append(_Term("poly", k + 2, term.coef / ((k + 1) * (k + 2))))
        else:
            raise ValueError(f"unsupported forcing term kind {term.kind!r}")
    p0 = _value_at_zero(particular)
    dp0 = _value_at_zero(_term_derivative(particular))
    if omega > 0.0:
        homogeneous = [_Term("cos", omega, y0 - p0),
                       _Term("sin", omega, (dy0 - dp0) / omega)]
    else:
        homogeneous = [_Term("poly", 0, y0 - p0), _Term("poly", 1, dy0 - dp0)]
    return particular + homogeneous


@dataclass(frozen=True)
class ImpulseSolution:
    """Per-axis impulse totals evaluated on a time array; shape (n,) + t.shape."""

    px: np.ndarray
    py: np.ndarray
    dx: np.ndarray
    dy: np.ndarray


def analytic_impulses(params: ReducedParams, initial: ReducedState, t) -> ImpulseSolution:
    """Closed-form impulse oscillations matching the initial values and slopes.

    Px_i(t) = Px_i(0) cos(w t) + (c_x_i Dx_i(0)/w) sin(w t) at w = omega_i,
    with the w -> 0 limit Px_i(0) + c_x_i Dx_i(0) t; the y side runs at nu_i.
    """
    if params.n != initial.n:
        raise ValueError(f"params are for {params.n} axes, state for {initial.n}")
    t = np.asarray(t, dtype=float)
    n = params.n

    def pair(w: float, p0: float, d0: float, c: float, d: float):
        s = np.sin(w * t) / w if w > 0.0 else t
        cos_wt = np.cos(w * t)
        return p0 * cos_wt + c * d0 * s, d0 * cos_wt + d * p0 * s

    px = np.empty((n,) + t.shape)
    dx = np.empty_like(px)
    py = np.empty_like(px)
    dy = np.empty_like(px)
    for i in range(n):
        px[i], dx[i] = pair(float(params.omega[i]), initial.px[i], initial.dx[i],
                            params.c_x[i], params.d_x[i])
        py[i], dy[i] = pair(float(params.nu[i]), initial.py[i], initial.dy[i],
                            params.c_y[i], params.d_y[i])
    return ImpulseSolution(px=px, py=py, dx=dx, dy=dy)


@dataclass(frozen=True)
class EnergySolution:
    """Per-axis energy totals evaluated on a time array; shape (n,) + t.shape."""

    ecx: np.ndarray
    ecy: np.ndarray
    erx: np.ndarray
    ery: np.ndarray


def analytic_energies(params: ReducedParams, initial: ReducedState, t) -> EnergySolution:
    """Closed-form energy growth/decay: cosh/sinh at rate gamma per axis.

    ECx_i(t) = ECx_i(0) cosh(g t) + (mu_x_i ERx_i(0)/g) sinh(g t) with the
    g -> 0 limit ECx_i(0) + mu_x_i ERx_i(0) t; symmetric for ER with eta.
    """
    if params.n != initial.n:
        raise ValueError(f"params are for {params.n} axes, state for {initial.n}")
    t = np.asarray(t, dtype=float)
    n = params.n
    ecx = np.empty((n,) + t.shape)
    ecy = np.empty_like(ecx)
    erx = np.empty_like(ecx)
    ery = np.empty_like(ecx)
    for i in range(n):
        ec_terms, er_terms = _energy_pair_terms(
            initial.ecx[i], initial.erx[i],
            params.mu_x[i], params.eta_x[i], float(params.gamma_x[i]))
        ecx[i] = _term_values(ec_terms, t)
        erx[i] = _term_values(er_terms, t)
        ec_terms, er_terms = _energy_pair_terms(
            initial.ecy[i], initial.ery[i],
            params.mu_y[i], params.eta_y[i], float(params.gamma_y[i]))
        ecy[i] = _term_values(ec_terms, t)
        ery[i] = _term_values(er_terms, t)
    return EnergySolution(ecx=ecx, ecy=ecy, erx=erx, ery=ery)


@dataclass(frozen=True)
class CreditSolution:
    """Forced first-moment components plus the assembled credit aggregates."""

    pzx: np.ndarray   # (n,) + t.shape
    pzy: np.ndarray
    dzx: np.ndarray
    dzy: np.ndarray
    c: np.ndarray     # t.shape
    lr: np.ndarray
    mc: np.ndarray
    ml: np.ndarray


def analytic_pz_credit(params: ReducedParams, initial: ReducedState, t) -> CreditSolution:
    """Closed-form Pz/Dz components and the credit/repayment aggregates.

    Per axis, Pzx solves the energy-forced oscillator

        Pzx'' + omega^2 Pzx = d/dt ECx + c_x ERx

    (Dzx analogously with ER'/d_x ECx), with the homogeneous sin/cos part
    matched to Pzx(0) and Pzx'(0) = ECx(0) + c_x Dzx(0).  The aggregates then
    follow by term-by-term antiderivatives: C = C(0) + a * int(Dz),
    LR = LR(0) + b * int(Pz), MC = MC(0) + int(C), ML = ML(0) + int(LR).
    """
    if params.n != initial.n:
        raise ValueError(f"params are for {params.n} axes, state for {initial.n}")
    t = np.asarray(t, dtype=float)
    n = params.n

    pzx = np.empty((n,) + t.shape)
    pzy = np.empty_like(pzx)
    dzx = np.empty_like(pzx)
    dzy = np.empty_like(pzx)
    pz_int: list[_Term] = []
    dz_int: list[_Term] = []

    def side(omega, c, d, gamma, fwd, bwd, e0, r0, pz0, dz0):
        ec_terms, er_terms = _energy_pair_terms(e0, r0, fwd, bwd, gamma)
        pz_forcing = _term_derivative(ec_terms) + [
            replace(term, coef=c * term.coef) for term in er_terms
        ]
        dz_forcing = _term_derivative(er_terms) + [
            replace(term, coef=d * term.coef) for term in ec_terms
        ]
        pz_terms = _forced_oscillator_terms(omega, pz0, e0 + c * dz0, pz_forcing)
        dz_terms = _forced_oscillator_terms(omega, dz0, r0 + d * pz0, dz_forcing)
        return pz_terms, dz_terms

    for i in range(n):
        pz_terms, dz_terms = side(
            float(params.omega[i]), params.c_x[i], params.d_x[i],
            float(params.gamma_x[i]), params.mu_x[i], params.eta_x[i],
            initial.ecx[i], initial.erx[i], initial.pzx[i], initial.dzx[i])
        pzx[i] = _term_values(pz_terms, t)
        dzx[i] = _term_values(dz_terms, t)
        pz_int += _term_antiderivative(pz_terms)
        dz_int += _term_antiderivative(dz_terms)

        pz_terms, dz_terms = side(
            float(params.nu[i]), params.c_y[i], params.d_y[i],
            float(params.gamma_y[i]), params.mu_y[i], params.eta_y[i],
            initial.ecy[i], initial.ery[i], initial.pzy[i], initial.dzy[i])
        pzy[i] = _term_values(pz_terms, t)
        dzy[i] = _term_values(dz_terms, t)
        pz_int += _term_antiderivative(pz_terms)
        dz_int += _term_antiderivative(dz_terms)

    c_terms = [_Term("poly", 0, initial.c)] + [
        replace(term, coef=params.a * term.coef) for term in dz_int
    ]
    lr_terms = [_Term("poly", 0, initial.lr)] + [
        replace(term, coef=params.b * term.coef) for term in pz_int
    ]
    mc_terms = [_Term("poly", 0, initial.mc)] + _term_antiderivative(c_terms)
    ml_terms = [_Term("poly", 0, initial.ml)] + _term_antiderivative(lr_terms)

    return CreditSolution(
        pzx=pzx, pzy=pzy, dzx=dzx, dzy=dzy,
        c=_term_values(c_terms, t),
        lr=_term_values(lr_terms, t),
        mc=_term_values(mc_terms, t),
        ml=_term_values(ml_terms, t),
    )


@dataclass(frozen=True)
class QuadraticInvariants:
    """Per-axis quadratics that are constant along exact trajectories."""

    imp_x: np.ndarray   # d_x*Px^2 - c_x*Dx^2
    imp_y: np.ndarray
    en_x: np.ndarray    # eta_x*ECx^2 - mu_x*ERx^2
    en_y: np.ndarray


def conserved_quadratics(state: ReducedState, params: ReducedParams) -> QuadraticInvariants:
    """Drift detectors: exact constants of the impulse and energy pairs."""
    if params.n != state.n:
        raise ValueError(f"params are for {params.n} axes, state for {state.n}")
    return QuadraticInvariants(
        imp_x=params.d_x * state.px ** 2 - params.c_x * state.dx ** 2,
        imp_y=params.d_y * state.py ** 2 - params.c_y * state.dy ** 2,
        en_x=params.eta_x * state.ecx ** 2 - params.mu_x * state.erx ** 2,
        en_y=params.eta_y * state.ecy ** 2 - params.mu_y * state.ery ** 2,
    )
