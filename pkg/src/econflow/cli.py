"""Single executable for kinetic / hydro / ode / analytic / validate / fit runs.

Configs are strict TOML (unknown keys rejected, all numeric constraints
re-validated at parse time); series go to CSV with a fixed documented column
order; run metadata goes to a JSON manifest; validate/fit also write a JSON
report.  Exit codes: 0 success, 1 config error, 2 numerical failure,
3 validation failure.

Numbers are serialized with 17 significant digits so identical configs and
seeds reproduce byte-identical CSV and report files.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time as _time
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .domain import EconomicDomain, make_grid
from .errors import CFLViolation, ConfigError, NumericalBlowup
from .fitting import CycleModel, fit_cycle_parameters
from .hydro import HydroRun, initial_gaussian_state, run_hydro
from .kinetic import KineticConfig, run_kinetic
from .params import CouplingParams
from .reduced import (
    ReducedState,
    analytic_energies,
    analytic_impulses,
    analytic_pz_credit,
    integrate,
    vector_labels,
)
from .validation import (
    check_moment_budgets,
    compare_hydro_vs_ode,
    reduced_state_from_moments,
)

MODES = ("kinetic", "hydro", "ode", "analytic", "validate", "fit")
DEFAULT_CELL_CEILING = 2 ** 24

_COUPLING_KEYS = ("a", "b", "c_x", "c_y", "d_x", "d_y",
                  "mu_x", "mu_y", "eta_x", "eta_y")
_INITIAL_KEYS = ("C", "LR", "MC", "ML", "Px", "Py", "Dx", "Dy",
                 "Pzx", "Pzy", "Dzx", "Dzy", "ECx", "ECy", "ERx", "ERy")
_GAUSSIAN_KEYS = ("cl_center", "cl_width", "cl_mass", "lr_center", "lr_width",
                  "lr_mass", "cl_velocity", "lr_velocity")
_KINETIC_KEYS = ("agents", "theta", "sigma", "rate", "amount_scale", "amount_shape")
_HYDRO_KEYS = ("cfl_safety", "epsilon", "snapshot_every")
_VALIDATE_KEYS = ("exact_tolerance", "pz_tolerance", "compare", "compare_tolerance")
_FIT_KEYS = ("input", "column", "n", "max_iter", "guess")
_GUESS_KEYS = ("C0", "alpha", "beta", "delta", "zeta", "omega", "nu", "kappa", "gamma")

# Tables each mode may use, beyond the top-level scalars.
_MODE_TABLES = {
    "ode": {"domain", "time", "couplings", "initial"},
    "analytic": {"domain", "time", "couplings", "initial"},
    "hydro": {"domain", "time", "couplings", "grid", "gaussian", "hydro"},
    "validate": {"domain", "time", "couplings", "grid", "gaussian", "hydro", "validate"},
    "kinetic": {"domain", "time", "grid", "kinetic"},
    "fit": {"fit"},
}
_REQUIRED_TABLES = {
    "ode": {"domain", "time", "couplings", "initial"},
    "analytic": {"domain", "time", "couplings", "initial"},
    "hydro": {"domain", "time", "couplings", "grid", "gaussian"},
    "validate": {"domain", "time", "couplings", "grid", "gaussian"},
    "kinetic": {"domain", "time", "grid", "kinetic"},
    "fit": {"fit"},
}


@dataclass
class RunConfig:
    """Fully validated run description (one mode's worth of settings)."""

    mode: str
    seed: int
    out_dir: str | None
    raw: dict
    domain: EconomicDomain | None = None
    dt: float = 0.0
    steps: int = 0
    m: int = 0
    max_cells: int = DEFAULT_CELL_CEILING
    couplings: CouplingParams | None = None
    initial: ReducedState | None = None
    gaussian: dict | None = None
    cfl_safety: float = 0.5
    epsilon: float = 0.0
    snapshot_every: int = 0
    kinetic: KineticConfig | None = None
    exact_tolerance: float = 1e-10
    pz_tolerance: float = 0.05
    compare: bool = True
    compare_tolerance: float = 0.005
    fit_input: str = ""
    fit_column: str = "C"
    fit_n: int = 1
    fit_max_iter: int = 200
    fit_guess: CycleModel | None = None


def _require_table(data: dict, name: str) -> dict:
    table = data.get(name)
    if not isinstance(table, dict):
        raise ConfigError(f"missing required table [{name}]")
    return table


def _check_keys(table: dict, allowed, where: str) -> None:
    for key in table:
        if key not in allowed:
            if where == "couplings" and key in ("omega", "nu", "gamma",
                                                "gamma_x", "gamma_y"):
                raise ConfigError(
                    f"unknown key '{key}' in [couplings]: frequencies and growth "
                    f"rates are derived from (c, d, mu, eta), never set directly"
                )
            raise ConfigError(
                f"unknown key '{key}' in [{where}]; allowed keys: {', '.join(allowed)}"
            )


def _number(table: dict, key: str, where: str, default=None, *, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing key '{key}' in [{where}]")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{key}' in [{where}] must be a number")
    return float(value)


def _integer(table: dict, key: str, where: str, default=None, *, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"missing key '{key}' in [{where}]")
        return default
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key '{key}' in [{where}] must be an integer")
    return int(value)


def _vector(table: dict, key: str, where: str, default=None):
    if key not in table:
        return default
    value = table[key]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, list) and value and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return [float(v) for v in value]
    raise ConfigError(f"key '{key}' in [{where}] must be a number or list of numbers")


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a TOML run configuration (strict keys)."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"TOML parse error: {err}") from err

    mode = data.get("mode")
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {', '.join(MODES)}, got {mode!r}")

    allowed_top = {"mode", "seed", "out_dir"} | _MODE_TABLES[mode]
    _check_keys(data, sorted(allowed_top), "top level")
    for table in _REQUIRED_TABLES[mode]:
        _require_table(data, table)

    seed = _integer(data, "seed", "top level", default=0)
    out_dir = data.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("'out_dir' must be a string path")

    config = RunConfig(mode=mode, seed=seed, out_dir=out_dir, raw=data)

    if mode == "fit":
        _parse_fit(data, config)
        return config

    dom_table = _require_table(data, "domain")
    _check_keys(dom_table, ("n", "bounds"), "domain")
    n = _integer(dom_table, "n", "domain", required=True)
    bounds = _vector(dom_table, "bounds", "domain")
    try:
        if bounds is None:
            config.domain = EconomicDomain(n)
        else:
            if isinstance(bounds, float):
                bounds = [bounds] * n
            config.domain = EconomicDomain(n, tuple(bounds))
    except ValueError as err:
        raise ConfigError(f"[domain]: {err}") from err

    time_table = _require_table(data, "time")
    _check_keys(time_table, ("dt", "steps"), "time")
    config.dt = _number(time_table, "dt", "time", required=True)
    config.steps = _integer(time_table, "steps", "time", required=True)
    if config.dt <= 0.0:
        raise ConfigError(f"[time]: dt must be positive, got {config.dt}")
    if config.steps < 0:
        raise ConfigError(f"[time]: steps must be nonnegative, got {config.steps}")

    if "couplings" in _MODE_TABLES[mode]:
        config.couplings = _parse_couplings(_require_table(data, "couplings"), n)
    if "grid" in _MODE_TABLES[mode]:
        _parse_grid(_require_table(data, "grid"), config)
    if mode in ("ode", "analytic"):
        config.initial = _parse_initial(_require_table(data, "initial"), n)
    if mode in ("hydro", "validate"):
        config.gaussian = _parse_gaussian(_require_table(data, "gaussian"), 2 * n)
        _parse_hydro_options(data.get("hydro", {}), config)
    if mode == "validate":
        _parse_validate_options(data.get("validate", {}), config)
    if mode == "kinetic":
        _parse_kinetic(_require_table(data, "kinetic"), config)
    return config


def _parse_couplings(table: dict, n: int) -> CouplingParams:
    _check_keys(table, _COUPLING_KEYS, "couplings")
    values = {}
    for key in _COUPLING_KEYS:
        default = 0.0 if key in ("a", "b") else None
        value = _vector(table, key, "couplings", default=default)
        if value is None:
            raise ConfigError(f"missing key '{key}' in [couplings]")
        values[key] = value
    for key in ("a", "b"):
        if not isinstance(values[key], float):
            raise ConfigError(f"key '{key}' in [couplings] must be a scalar")
    try:
        return CouplingParams(n=n, **values)
    except ValueError as err:
        raise ConfigError(f"[couplings]: {err}") from err


def _parse_grid(table: dict, config: RunConfig) -> None:
    _check_keys(table, ("m", "max_cells"), "grid")
    config.m = _integer(table, "m", "grid", required=True)
    config.max_cells = _integer(table, "max_cells", "grid",
                                default=DEFAULT_CELL_CEILING)
    if config.m < 1:
        raise ConfigError(f"[grid]: m must be >= 1, got {config.m}")
    n = config.domain.n
    cells = config.m ** (2 * n)
    if cells > config.max_cells:
        raise ConfigError(
            f"[grid]: m={config.m} with n={n} gives {cells} cells, above the "
            f"ceiling {config.max_cells}; lower m or raise max_cells"
        )


def _parse_initial(table: dict, n: int) -> ReducedState:
    _check_keys(table, _INITIAL_KEYS, "initial")
    kwargs = {}
    mapping = {"C": "c", "LR": "lr", "MC": "mc", "ML": "ml",
               "Px": "px", "Py": "py", "Dx": "dx", "Dy": "dy",
               "Pzx": "pzx", "Pzy": "pzy", "Dzx": "dzx", "Dzy": "dzy",
               "ECx": "ecx", "ECy": "ecy", "ERx": "erx", "ERy": "ery"}
    for key, attr in mapping.items():
        value = _vector(table, key, "initial", default=0.0)
        if attr in ("c", "lr", "mc", "ml") and not isinstance(value, float):
            raise ConfigError(f"key '{key}' in [initial] must be a scalar")
        kwargs[attr] = value
    try:
        return ReducedState(time=0.0, n=n, **kwargs)
    except ValueError as err:
        raise ConfigError(f"[initial]: {err}") from err


def _parse_gaussian(table: dict, ndim: int) -> dict:
    _check_keys(table, _GAUSSIAN_KEYS, "gaussian")
    out = {}
    for key in _GAUSSIAN_KEYS:
        value = _vector(table, key, "gaussian")
        if value is None:
            raise ConfigError(f"missing key '{key}' in [gaussian]")
        if key.endswith(("center", "velocity")) and isinstance(value, list) \
                and len(value) != ndim:
            raise ConfigError(
                f"key '{key}' in [gaussian] needs {ndim} entries "
                f"(pair space has 2n axes), got {len(value)}"
            )
        out[key] = value
    for key in ("cl_mass", "lr_mass", "cl_width", "lr_width"):
        low = np.min(out[key]) if isinstance(out[key], list) else out[key]
        if low <= 0.0:
            raise ConfigError(f"key '{key}' in [gaussian] must be positive")
    return out


def _parse_hydro_options(table: dict, config: RunConfig) -> None:
    _check_keys(table, _HYDRO_KEYS, "hydro")
    config.cfl_safety = _number(table, "cfl_safety", "hydro", default=0.5)
    config.epsilon = _number(table, "epsilon", "hydro", default=0.0)
    config.snapshot_every = _integer(table, "snapshot_every", "hydro", default=0)
    if not 0.0 < config.cfl_safety <= 1.0:
        raise ConfigError(
            f"[hydro]: cfl_safety must be in (0, 1], got {config.cfl_safety}")
    if config.epsilon < 0.0:
        raise ConfigError(f"[hydro]: epsilon must be >= 0, got {config.epsilon}")
    if config.snapshot_every < 0:
        raise ConfigError(
            f"[hydro]: snapshot_every must be >= 0, got {config.snapshot_every}")


def _parse_validate_options(table: dict, config: RunConfig) -> None:
    _check_keys(table, _VALIDATE_KEYS, "validate")
    config.exact_tolerance = _number(table, "exact_tolerance", "validate",
                                     default=1e-10)
    config.pz_tolerance = _number(table, "pz_tolerance", "validate", default=0.05)
    config.compare_tolerance = _number(table, "compare_tolerance", "validate",
                                       default=0.005)
    compare = table.get("compare", True)
    if not isinstance(compare, bool):
        raise ConfigError("key 'compare' in [validate] must be a boolean")
    config.compare = compare


def _parse_kinetic(table: dict, config: RunConfig) -> None:
    _check_keys(table, _KINETIC_KEYS, "kinetic")
    agents = _integer(table, "agents", "kinetic", required=True)
    try:
        config.kinetic = KineticConfig(
            domain=config.domain,
            agent_count=agents,
            seed=config.seed,
            dt=config.dt,
            m=config.m,
            theta=_vector(table, "theta", "kinetic", default=0.0),
            sigma=_vector(table, "sigma", "kinetic", default=0.0),
            rate=_number(table, "rate", "kinetic", default=0.0),
            amount_scale=_number(table, "amount_scale", "kinetic", default=1.0),
            amount_shape=_number(table, "amount_shape", "kinetic", default=0.0),
        )
    except ValueError as err:
        raise ConfigError(f"[kinetic]: {err}") from err


def _parse_fit(data: dict, config: RunConfig) -> None:
    table = _require_table(data, "fit")
    _check_keys(table, _FIT_KEYS, "fit")
    fit_input = table.get("input")
    if not isinstance(fit_input, str) or not fit_input:
        raise ConfigError("missing key 'input' in [fit] (path to a moments CSV)")
    config.fit_input = fit_input
    column = table.get("column", "C")
    if not isinstance(column, str):
        raise ConfigError("key 'column' in [fit] must be a string")
    config.fit_column = column
    config.fit_n = _integer(table, "n", "fit", default=1)
    config.fit_max_iter = _integer(table, "max_iter", "fit", default=200)
    if config.fit_n < 1:
        raise ConfigError(f"[fit]: n must be >= 1, got {config.fit_n}")
    if config.fit_max_iter < 1:
        raise ConfigError(f"[fit]: max_iter must be >= 1, got {config.fit_max_iter}")
    guess_table = table.get("guess")
    if not isinstance(guess_table, dict):
        raise ConfigError("missing table [fit.guess] with frequency guesses")
    _check_keys(guess_table, _GUESS_KEYS, "fit.guess")
    for key in ("omega", "nu"):
        if key not in guess_table:
            raise ConfigError(f"missing key '{key}' in [fit.guess]")
    try:
        config.fit_guess = CycleModel(
            n=config.fit_n,
            c0=_number(guess_table, "C0", "fit.guess", default=0.0),
            alpha=_vector(guess_table, "alpha", "fit.guess", default=0.0),
            beta=_vector(guess_table, "beta", "fit.guess", default=0.0),
            delta=_vector(guess_table, "delta", "fit.guess", default=0.0),
            zeta=_vector(guess_table, "zeta", "fit.guess", default=0.0),
            omega=_vector(guess_table, "omega", "fit.guess"),
            nu=_vector(guess_table, "nu", "fit.guess"),
            kappa=_number(guess_table, "kappa", "fit.guess", default=0.0),
            gamma=_number(guess_table, "gamma", "fit.guess", default=0.0),
        )
    except ValueError as err:
        raise ConfigError(f"[fit.guess]: {err}") from err


# ---------------------------------------------------------------------------
# Serialization


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _hydro_columns(n: int) -> list[str]:
    cols = ["time"] + vector_labels(n)
    cols += [f"X_C_{i + 1}" for i in range(n)] + [f"X_L_{i + 1}" for i in range(n)]
    cols += ["boundary_flux", "min_CL", "closure_drift"]
    return cols


def _hydro_row(m) -> list[float]:
    nan = float("nan")
    row = [m.time, m.c, m.lr, m.mc, m.ml]
    for block in (m.px, m.py, m.dx, m.dy, m.pzx, m.pzy, m.dzx, m.dzy,
                  m.ecx, m.ecy, m.erx, m.ery):
        row.extend(block)
    row.extend(m.x_c if m.x_c is not None else [nan] * m.n)
    row.extend(m.x_l if m.x_l is not None else [nan] * m.n)
    row.extend([m.boundary_flux, m.min_cl, m.closure_drift])
    return row


def _kinetic_columns(n: int) -> list[str]:
    cols = ["time", "C", "MC"]
    for name in ("Px", "Py", "Pzx", "Pzy"):
        cols += [f"{name}{i + 1}" for i in range(n)]
    cols += [f"X_C_{i + 1}" for i in range(n)] + [f"X_L_{i + 1}" for i in range(n)]
    cols += ["min_CL"]
    return cols


def _kinetic_row(m) -> list[float]:
    nan = float("nan")
    row = [m.time, m.c, m.mc]
    for block in (m.px, m.py, m.pzx, m.pzy):
        row.extend(block)
    row.extend(m.x_c if m.x_c is not None else [nan] * m.n)
    row.extend(m.x_l if m.x_l is not None else [nan] * m.n)
    row.append(m.min_cl)
    return row


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_json_ready(v) for v in value.tolist()]
    return value


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(_json_ready(payload), indent=2, sort_keys=True) + "\n")


def _manifest(config: RunConfig, outputs: list[str], wall_time: float,
              extra: dict | None = None) -> dict:
    manifest = {
        "mode": config.mode,
        "seed": config.seed,
        "config": config.raw,
        "versions": {
            "econflow": __version__,
            "numpy": np.__version__,
            "python": ".".join(str(v) for v in sys.version_info[:3]),
        },
        "threads": _thread_cap(),
        "outputs": outputs,
        "wall_time_s": wall_time,
    }
    if config.couplings is not None:
        p = config.couplings
        manifest["derived"] = {
            "omega": p.omega.tolist(),
            "nu": p.nu.tolist(),
            "gamma_x": p.gamma_x.tolist(),
            "gamma_y": p.gamma_y.tolist(),
        }
    if extra:
        manifest.update(extra)
    return manifest


def _thread_cap() -> int:
    raw = os.environ.get("ECONFLOW_THREADS", "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"ECONFLOW_THREADS must be an integer, got {raw!r}")
    if cap < 0:
        raise ConfigError(f"ECONFLOW_THREADS must be >= 0, got {cap}")
    return cap


def _apply_thread_cap() -> None:
    # 0 = auto (leave the numeric libraries' defaults alone).
    cap = _thread_cap()
    if cap > 0:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, str(cap))


# ---------------------------------------------------------------------------
# Mode runners


def _initial_state_from_gaussian(config: RunConfig):
    grid = make_grid(config.domain, config.m)
    g = config.gaussian
    return grid, initial_gaussian_state(
        grid,
        cl_center=g["cl_center"], cl_width=g["cl_width"], cl_mass=g["cl_mass"],
        lr_center=g["lr_center"], lr_width=g["lr_width"], lr_mass=g["lr_mass"],
        cl_velocity=np.broadcast_to(np.asarray(g["cl_velocity"], dtype=float),
                                    (grid.ndim,)),
        lr_velocity=np.broadcast_to(np.asarray(g["lr_velocity"], dtype=float),
                                    (grid.ndim,)),
        epsilon=config.epsilon or None,
    )


def _run_hydro_mode(config: RunConfig, out_dir: Path) -> tuple[list[str], HydroRun]:
    _, initial = _initial_state_from_gaussian(config)
    run = run_hydro(
        initial, config.couplings, config.dt, config.steps,
        epsilon=config.epsilon or None,
        cfl_limit=config.cfl_safety,
        snapshot_every=config.snapshot_every,
    )
    n = config.domain.n
    _write_csv(out_dir / "moments.csv", _hydro_columns(n),
               (_hydro_row(m) for m in run.moments))
    outputs = ["moments.csv"]
    if config.snapshot_every > 0:
        for step, state in run.snapshots:
            fname = f"snapshot_{step:06d}.npz"
            np.savez(
                out_dir / fname,
                time=state.time,
                cl=state.cl.values,
                lr=state.lr.values,
                p=np.stack([c.values for c in state.p.components]),
                d=np.stack([c.values for c in state.d.components]),
                ec=np.stack([c.values for c in state.ec]),
                er=np.stack([c.values for c in state.er]),
            )
            outputs.append(fname)
    return outputs, run


def _run_ode_mode(config: RunConfig, out_dir: Path) -> list[str]:
    trajectory = integrate(config.initial, config.couplings, config.dt, config.steps)
    header = ["time"] + vector_labels(config.domain.n)
    rows = ([t] + list(row) for t, row in zip(trajectory.times, trajectory.values))
    _write_csv(out_dir / "moments.csv", header, rows)
    return ["moments.csv"]


def _run_analytic_mode(config: RunConfig, out_dir: Path) -> list[str]:
    n = config.domain.n
    times = config.initial.time + config.dt * np.arange(config.steps + 1)
    impulses = analytic_impulses(config.couplings, config.initial, times)
    energies = analytic_energies(config.couplings, config.initial, times)
    credit = analytic_pz_credit(config.couplings, config.initial, times)
    header = ["time"] + vector_labels(n)
    rows = []
    for k, t in enumerate(times):
        row = [t, credit.c[k], credit.lr[k], credit.mc[k], credit.ml[k]]
        for block in (impulses.px, impulses.py, impulses.dx, impulses.dy,
                      credit.pzx, credit.pzy, credit.dzx, credit.dzy,
                      energies.ecx, energies.ecy, energies.erx, energies.ery):
            row.extend(block[:, k])
        rows.append(row)
    _write_csv(out_dir / "moments.csv", header, rows)
    return ["moments.csv"]


def _run_kinetic_mode(config: RunConfig, out_dir: Path) -> list[str]:
    run = run_kinetic(config.kinetic, config.steps)
    n = config.domain.n
    _write_csv(out_dir / "moments.csv", _kinetic_columns(n),
               (_kinetic_row(s.moments) for s in run.steps))
    return ["moments.csv"]


def _run_validate_mode(config: RunConfig, out_dir: Path) -> tuple[list[str], bool]:
    outputs, run = _run_hydro_mode(config, out_dir)
    budgets = check_moment_budgets(
        run.moments, config.couplings, config.dt,
        exact_tolerance=config.exact_tolerance,
        pz_tolerance=config.pz_tolerance,
    )
    payload = {"budgets": budgets.as_dict(), "comparison": None}
    passed = budgets.passed
    if config.compare:
        initial = reduced_state_from_moments(run.moments[0])
        comparison = compare_hydro_vs_ode(
            run.moments, config.couplings, initial, config.dt,
            tolerance=config.compare_tolerance,
        )
        payload["comparison"] = comparison.as_dict()
        passed = passed and comparison.passed
    _write_json(out_dir / "report.json", payload)
    outputs.append("report.json")
    return outputs, passed


def _read_series_csv(path: Path, column: str) -> tuple[np.ndarray, np.ndarray]:
    import csv

    if not path.exists():
        raise ConfigError(f"fit input not found: {path}")
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or "time" not in reader.fieldnames:
            raise ConfigError(f"{path}: expected a CSV with a 'time' column")
        if column not in reader.fieldnames:
            raise ConfigError(
                f"{path}: no column '{column}'; available: {', '.join(reader.fieldnames)}")
        times, values = [], []
        for row in reader:
            times.append(float(row["time"]))
            values.append(float(row[column]))
    return np.asarray(times), np.asarray(values)


def _run_fit_mode(config: RunConfig, out_dir: Path) -> list[str]:
    times, values = _read_series_csv(Path(config.fit_input), config.fit_column)
    try:
        result = fit_cycle_parameters(times, values, config.fit_n, config.fit_guess,
                                      max_iter=config.fit_max_iter)
    except ValueError as err:
        raise ConfigError(f"fit: {err}") from err
    payload = result.as_dict()
    payload["input"] = config.fit_input
    payload["column"] = config.fit_column
    payload["samples"] = int(times.size)
    _write_json(out_dir / "report.json", payload)
    return ["report.json"]


def run(config: RunConfig, out_dir: Path) -> int:
    """Execute the configured mode, writing all artifacts under ``out_dir``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    started = _time.perf_counter()
    extra: dict = {}
    exit_code = 0
    if config.mode == "hydro":
        outputs, _ = _run_hydro_mode(config, out_dir)
    elif config.mode == "ode":
        outputs = _run_ode_mode(config, out_dir)
    elif config.mode == "analytic":
        outputs = _run_analytic_mode(config, out_dir)
    elif config.mode == "kinetic":
        outputs = _run_kinetic_mode(config, out_dir)
    elif config.mode == "validate":
        outputs, passed = _run_validate_mode(config, out_dir)
        extra["validation_passed"] = passed
        if not passed:
            exit_code = 3
    else:
        outputs = _run_fit_mode(config, out_dir)
    wall = _time.perf_counter() - started
    _write_json(out_dir / "manifest.json", _manifest(config, outputs, wall, extra))
    return exit_code


def _execute(mode: str, config_path: str, out_dir_flag: str | None) -> int:
    try:
        config = parse_config(Path(config_path).read_text())
        if config.mode != mode:
            raise ConfigError(
                f"config declares mode '{config.mode}' but the '{mode}' command "
                f"was invoked")
        _apply_thread_cap()
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        return 1
    except OSError as err:
        click.echo(f"config error: {err}", err=True)
        return 1
    out_dir = Path(out_dir_flag or config.out_dir or ".")
    try:
        return run(config, out_dir)
    except ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        return 1
    except (CFLViolation, NumericalBlowup) as err:
        click.echo(f"numerical failure: {err}", err=True)
        return 2


@click.group()
def main() -> None:
    """Simulate and validate credit-cycle dynamics on a bounded risk space."""


_MODE_HELP = {
    "kinetic": "Agent-based run: move, trade, bin, emit moments.",
    "hydro": "Finite-volume run of the coupled transaction-fluid system.",
    "ode": "RK4 integration of the reduced moment system.",
    "analytic": "Closed-form evaluation of the reduced system.",
    "validate": "Hydro run plus budget checks and ODE comparison.",
    "fit": "Fit the cycle form (sinusoids + exponential trend) to a CSV series.",
}


def _register(mode: str) -> None:
    @main.command(name=mode, help=_MODE_HELP[mode])
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="Path to the TOML run configuration.")
    @click.option("--out-dir", "out_dir", default=None,
                  type=click.Path(file_okay=False),
                  help="Output directory (defaults to the config's out_dir or '.').")
    def _command(config_path: str, out_dir: str | None, _mode: str = mode) -> None:
        sys.exit(_execute(_mode, config_path, out_dir))


for _mode in MODES:
    _register(_mode)


if __name__ == "__main__":
    main()
