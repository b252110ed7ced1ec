"""Fit the business-cycle solution form to a time series.

Model (n risk axes, 6n + 3 free parameters):

    C(t) = C0 + sum_i [alpha_i sin(omega_i t) + beta_i cos(omega_i t)
                       + delta_i sin(nu_i t) + zeta_i cos(nu_i t)]
         + kappa * exp(gamma t)

i.e. two sinusoid families per axis superposed on a single exponential
growth trend (the collapsed single-trend form of the credit solution).

The model is separable: for fixed frequencies and growth rate it is linear
in (C0, amplitudes, kappa).  The solver therefore iterates a damped
Gauss-Newton (Levenberg-Marquardt style) on the nonlinear parameters
(omega, nu, gamma) only, re-solving the linear subproblem exactly at every
step, with analytic partial derivatives throughout; finite differences
would add noise exactly where the frequency estimates are most sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CycleModel", "FitResult", "fit_cycle_parameters", "cycle_model_values"]


@dataclass(frozen=True)
class CycleModel:
    """Parameter set of the cycle form; arrays have one entry per axis."""

    n: int
    c0: float = 0.0
    alpha: np.ndarray = None
    beta: np.ndarray = None
    delta: np.ndarray = None
    zeta: np.ndarray = None
    omega: np.ndarray = None
    nu: np.ndarray = None
    kappa: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "delta", "zeta", "omega", "nu"):
            value = getattr(self, name)
            arr = np.zeros(self.n) if value is None else \
                np.broadcast_to(np.asarray(value, dtype=float), (self.n,)).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def parameter_count(self) -> int:
        return 3 + 6 * self.n

    def pack(self) -> np.ndarray:
        return np.concatenate([
            [self.c0], self.alpha, self.beta, self.delta, self.zeta,
            self.omega, self.nu, [self.kappa, self.gamma],
        ])

    def parameter_names(self) -> list[str]:
        names = ["C0"]
        for label in ("alpha", "beta", "delta", "zeta", "omega", "nu"):
            names.extend(f"{label}{i + 1}" for i in range(self.n))
        names.extend(["kappa", "gamma"])
        return names


def cycle_model_values(model: CycleModel, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.full(t.shape, model.c0)
    for i in range(model.n):
        out += model.alpha[i] * np.sin(model.omega[i] * t)
        out += model.beta[i] * np.cos(model.omega[i] * t)
        out += model.delta[i] * np.sin(model.nu[i] * t)
        out += model.zeta[i] * np.cos(model.nu[i] * t)
    out += model.kappa * np.exp(model.gamma * t)
    return out


def _design(theta: np.ndarray, n: int, t: np.ndarray) -> np.ndarray:
    """Columns of the linear subproblem: [1, sin/cos pairs per axis, exp]."""
    omega, nu, gamma = theta[:n], theta[n:2 * n], theta[-1]
    columns = [np.ones_like(t)]
    for i in range(n):
        columns += [np.sin(omega[i] * t), np.cos(omega[i] * t)]
    for i in range(n):
        columns += [np.sin(nu[i] * t), np.cos(nu[i] * t)]
    columns.append(np.exp(np.clip(gamma * t, -700.0, 700.0)))
    return np.column_stack(columns)


def _solve_linear(theta: np.ndarray, n: int, t: np.ndarray,
                  y: np.ndarray) -> tuple[np.ndarray, np.ndarray, int, np.ndarray]:
    """Exact solve of the linear subproblem; returns (coef, residual, rank, Q)."""
    design = _design(theta, n, t)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    q, _ = np.linalg.qr(design)
    return coef, design @ coef - y, rank, q


def _theta_jacobian(theta: np.ndarray, coef: np.ndarray, n: int,
                    t: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Projected derivative of the residual w.r.t. (omega, nu, gamma).

    Analytic columns d(model)/d(theta_j) at fixed linear coefficients,
    projected onto the orthogonal complement of the design's range (the
    linear solve re-absorbs anything inside the range, so the unprojected
    columns wildly overestimate curvature along shallow directions).
    """
    omega, nu, gamma = theta[:n], theta[n:2 * n], theta[-1]
    cols = np.empty((2 * n + 1, t.size))
    for i in range(n):
        alpha, beta = coef[1 + 2 * i], coef[2 + 2 * i]
        cols[i] = t * (alpha * np.cos(omega[i] * t) - beta * np.sin(omega[i] * t))
        delta, zeta = coef[1 + 2 * n + 2 * i], coef[2 + 2 * n + 2 * i]
        cols[n + i] = t * (delta * np.cos(nu[i] * t) - zeta * np.sin(nu[i] * t))
    kappa = coef[-1]
    cols[-1] = kappa * t * np.exp(np.clip(gamma * t, -700.0, 700.0))
    jac = cols.T
    return jac - q @ (q.T @ jac)


def _model_from(theta: np.ndarray, coef: np.ndarray, n: int) -> CycleModel:
    alpha = np.array([coef[1 + 2 * i] for i in range(n)])
    beta = np.array([coef[2 + 2 * i] for i in range(n)])
    delta = np.array([coef[1 + 2 * n + 2 * i] for i in range(n)])
    zeta = np.array([coef[2 + 2 * n + 2 * i] for i in range(n)])
    return CycleModel(n=n, c0=float(coef[0]), alpha=alpha, beta=beta,
                      delta=delta, zeta=zeta, omega=theta[:n].copy(),
                      nu=theta[n:2 * n].copy(), kappa=float(coef[-1]),
                      gamma=float(theta[-1]))


@dataclass(frozen=True)
class FitResult:
    model: CycleModel
    rmse: float
    converged: bool
    rank_deficient: bool
    iterations: int
    parameter_converged: np.ndarray = None   # bool per packed parameter
    message: str = ""

    def as_dict(self) -> dict:
        names = self.model.parameter_names()
        packed = self.model.pack()
        return {
            "parameters": {name: float(v) for name, v in zip(names, packed)},
            "rmse": self.rmse,
            "converged": self.converged,
            "rank_deficient": self.rank_deficient,
            "iterations": self.iterations,
            "parameter_converged": {
                name: bool(flag)
                for name, flag in zip(names, self.parameter_converged)
            },
            "message": self.message,
        }


def fit_cycle_parameters(times, values, n: int, initial_guess: CycleModel, *,
                         max_iter: int = 100, xtol: float = 1e-13,
                         gtol: float = 1e-13) -> FitResult:
    """Separable damped Gauss-Newton fit; deterministic given the guess.

    Only the frequency/rate guesses matter (omega, nu, gamma); amplitude
    entries of the guess are ignored because the linear subproblem is solved
    exactly.  Non-convergence and rank deficiency are reported in the result,
    never raised.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != y.shape:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if initial_guess.n != n:
        raise ValueError(f"guess is for {initial_guess.n} axes, requested {n}")
    p_count = initial_guess.parameter_count
    if t.size < 3 * p_count:
        raise ValueError(
            f"series too short: need at least {3 * p_count} samples "
            f"for {p_count} parameters, got {t.size}"
        )
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("timestamps must be strictly increasing")

    n_linear = 2 + 4 * n
    theta = np.concatenate([initial_guess.omega, initial_guess.nu,
                            [initial_guess.gamma]])
    coef, residual, rank, q = _solve_linear(theta, n, t, y)
    rank_deficient = rank < n_linear
    cost = float(residual @ residual)
    y_scale = float(np.max(np.abs(y))) or 1.0

    lam = 1e-3
    converged = False
    message = "max iterations reached"
    iterations = 0
    theta_step = np.zeros_like(theta)

    # Columns below this norm carry no usable signal about their parameter
    # (e.g. a frequency whose sin/cos amplitudes fitted to ~0).
    column_floor = 1e-10 * y_scale * (1.0 + float(np.max(np.abs(t))))

    for iterations in range(1, max_iter + 1):
        jac = _theta_jacobian(theta, coef, n, t, q)
        column_norms = np.sqrt((jac ** 2).sum(axis=0))
        if np.any(column_norms <= column_floor) or \
                np.linalg.matrix_rank(jac) < jac.shape[1]:
            rank_deficient = True
        grad = jac.T @ residual
        if float(np.max(np.abs(grad))) <= gtol * max(1.0, cost):
            converged = True
            message = "gradient below tolerance"
            break
        hess = jac.T @ jac
        diag = np.maximum(np.diag(hess), 1e-12 * max(float(np.diag(hess).max()), 1.0))

        accepted = False
        for _ in range(60):
            try:
                theta_step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                if lam > 1e18:
                    break
                continue
            trial_theta = theta + theta_step
            trial = _solve_linear(trial_theta, n, t, y)
            trial_cost = float(trial[1] @ trial[1])
            if np.isfinite(trial_cost) and trial_cost < cost:
                theta, coef, residual, q = trial_theta, trial[0], trial[1], trial[3]
                improvement = cost - trial_cost
                cost = trial_cost
                rank_deficient = rank_deficient or trial[2] < n_linear
                lam = max(lam * 0.1, 1e-15)
                accepted = True
                small_step = float(np.max(np.abs(theta_step))) \
                    <= xtol * (1.0 + float(np.max(np.abs(theta))))
                tiny_gain = improvement <= 1e-28 * max(1.0, cost) + 1e-300
                if small_step or tiny_gain or cost <= (1e-15 * y_scale) ** 2 * t.size:
                    converged = True
                    message = "step below tolerance"
                break
            lam *= 10.0
            if lam > 1e18:
                break
        if not accepted:
            converged = True
            message = "no further improvement possible"
            break
        if converged:
            break

    packed_step = np.concatenate([
        [0.0], np.zeros(4 * n), np.abs(theta_step[:n]), np.abs(theta_step[n:2 * n]),
        [0.0], [abs(theta_step[-1])],
    ])
    parameter_converged = (packed_step <= xtol * (1.0 + np.abs(
        _model_from(theta, coef, n).pack()))) if converged \
        else np.zeros(3 + 6 * n, dtype=bool)
    rmse = float(np.sqrt(cost / t.size))
    return FitResult(model=_model_from(theta, coef, n), rmse=rmse,
                     converged=converged, rank_deficient=rank_deficient,
                     iterations=iterations,
                     parameter_converged=parameter_converged, message=message)
