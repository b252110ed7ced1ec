"""Monte Carlo layer: economic particles, pairwise credit transactions, binning.

Agents carry a risk-coordinate position and a velocity (rating drift per unit
time).  Velocities follow a mean-reverting diffusion, positions reflect at the
domain walls, and each ordered pair trades with a fixed per-step probability,
log-normal amounts.  Binning the realized transactions onto the pair-space
grid is the empirical counterpart of the ensemble averaging that defines the
macro fields: the credit density collects amount/cell-volume, the impulse
components collect amount*velocity/cell-volume.

The transaction kernel is declaredly synthetic: the model posits that
transactions exist but gives no generative law, so the kernel here is the
simplest strictly-positive choice with every knob surfaced in KineticConfig.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .domain import EconomicDomain, GridSpec, ScalarField, VectorField, make_grid
from .hydro import FluidState, MomentSet, compute_moments

__all__ = [
    "EParticle",
    "TransactionRecord",
    "KineticConfig",
    "Population",
    "KineticStep",
    "KineticRun",
    "step_agents",
    "generate_transactions",
    "bin_transactions",
    "run_kinetic",
]


@dataclass(frozen=True)
class EParticle:
    """One economic agent: id, risk position, rating velocity, cumulative totals."""

    id: int
    position: np.ndarray
    velocity: np.ndarray
    cumulative_credits_issued: float = 0.0
    cumulative_loans_received: float = 0.0


@dataclass(frozen=True)
class TransactionRecord:
    """One realized credit transaction (a volume rate, creditor -> borrower)."""

    creditor_id: int
    borrower_id: int
    amount: float
    time: float

    def __post_init__(self) -> None:
        if self.amount < 0.0:
            raise ValueError(f"amount must be nonnegative, got {self.amount}")
        if self.creditor_id == self.borrower_id:
            raise ValueError("creditor and borrower must differ")


@dataclass(frozen=True)
class KineticConfig:
    """Run parameters for the agent layer.

    theta/sigma may be scalars or per-axis arrays; ``rate`` is the Bernoulli
    transaction probability per ordered agent pair per unit time;
    ``amount_scale`` is the log-normal median and ``amount_shape`` the
    log-standard-deviation of transaction amounts.
    """

    domain: EconomicDomain
    agent_count: int
    seed: int
    dt: float
    m: int
    theta: float | np.ndarray = 0.0
    sigma: float | np.ndarray = 0.0
    rate: float = 0.0
    amount_scale: float = 1.0
    amount_shape: float = 0.0

    def __post_init__(self) -> None:
        if self.agent_count < 2:
            raise ValueError(f"need at least 2 agents, got {self.agent_count}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.rate < 0.0:
            raise ValueError(f"transaction rate must be nonnegative, got {self.rate}")
        if self.amount_scale <= 0.0:
            raise ValueError(f"amount scale must be positive, got {self.amount_scale}")


@dataclass(frozen=True)
class Population:
    """Struct-of-arrays view of all agents; positions always inside the domain."""

    domain: EconomicDomain
    time: float
    positions: np.ndarray       # (N, n)
    velocities: np.ndarray      # (N, n)
    credits_issued: np.ndarray  # (N,)
    loans_received: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        n = self.domain.n
        count = self.positions.shape[0]
        if self.positions.shape != (count, n) or self.velocities.shape != (count, n):
            raise ValueError("positions/velocities must be (N, n) arrays")
        bounds = np.asarray(self.domain.bounds)
        if np.any(self.positions < 0.0) or np.any(self.positions > bounds):
            raise ValueError("agent positions must lie inside the economic domain")

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def particle(self, i: int) -> EParticle:
        return EParticle(
            id=i,
            position=self.positions[i].copy(),
            velocity=self.velocities[i].copy(),
            cumulative_credits_issued=float(self.credits_issued[i]),
            cumulative_loans_received=float(self.loans_received[i]),
        )

    @classmethod
    def spawn(cls, domain: EconomicDomain, count: int,
              rng: np.random.Generator) -> "Population":
        """Uniform random positions, zero velocities and totals."""
        bounds = np.asarray(domain.bounds)
        positions = rng.random((count, domain.n)) * bounds
        return cls(
            domain=domain,
            time=0.0,
            positions=positions,
            velocities=np.zeros((count, domain.n)),
            credits_issued=np.zeros(count),
            loans_received=np.zeros(count),
        )


def _reflect(positions: np.ndarray, velocities: np.ndarray,
             bounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Triangle-wave fold with period 2X handles any overshoot in one pass;
    # an odd bounce count lands on the descending branch and flips velocity.
    period = 2.0 * bounds
    z = np.mod(positions, period)
    flipped = z > bounds
    folded = np.where(flipped, period - z, z)
    return folded, np.where(flipped, -velocities, velocities)


def step_agents(population: Population, dt: float, rng: np.random.Generator, *,
                theta=0.0, sigma=0.0) -> Population:
    """Advance velocities (mean-reverting diffusion) and positions (reflecting walls).

    v <- v - theta*v*dt + sigma*sqrt(dt)*xi with standard normal xi per axis,
    then x <- x + v*dt folded back into the box, the velocity component
    negated on each reflection.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    theta = np.asarray(theta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    noise = rng.standard_normal(population.velocities.shape)
    velocities = population.velocities * (1.0 - theta * dt) + sigma * np.sqrt(dt) * noise
    positions = population.positions + velocities * dt
    bounds = np.asarray(population.domain.bounds)
    positions, velocities = _reflect(positions, velocities, bounds)
    return replace(population, time=population.time + dt,
                   positions=positions, velocities=velocities)


def generate_transactions(population: Population, dt: float,
                          rng: np.random.Generator, *,
                          rate: float = 0.0,
                          amount_scale: float = 1.0,
                          amount_shape: float = 0.0) -> list[TransactionRecord]:
    """Draw this step's transactions over all ordered agent pairs.

    Each ordered pair (i, j), i != j, trades with probability min(1, rate*dt);
    the amount is log-normal with median ``amount_scale``.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    count = population.size
    p = min(1.0, rate * dt)
    if p <= 0.0 or count < 2:
        return []
    hits = rng.random((count, count)) < p
    np.fill_diagonal(hits, False)
    creditors, borrowers = np.nonzero(hits)
    amounts = amount_scale * np.exp(amount_shape * rng.standard_normal(creditors.size))
    t = population.time
    return [
        TransactionRecord(int(i), int(j), float(a), t)
        for i, j, a in zip(creditors, borrowers, amounts)
    ]


def bin_transactions(records: list[TransactionRecord], population: Population,
                     grid: GridSpec) -> tuple[ScalarField, VectorField]:
    """Accumulate records into the pair-space credit density and impulse fields.

    Each record lands in the cell of (creditor position, borrower position);
    the density cell gains amount/cell-volume, the x-side impulse components
    gain amount*(creditor velocity)/cell-volume and the y-side components
    amount*(borrower velocity)/cell-volume.
    """
    n = grid.domain.n
    if population.domain.bounds != grid.domain.bounds:
        raise ValueError("population domain does not match the grid domain")
    cl = np.zeros(grid.shape)
    p_comps = [np.zeros(grid.shape) for _ in range(grid.ndim)]
    if records:
        creditors = np.array([r.creditor_id for r in records], dtype=np.intp)
        borrowers = np.array([r.borrower_id for r in records], dtype=np.intp)
        amounts = np.array([r.amount for r in records])
        if creditors.min() < 0 or borrowers.min() < 0 or \
                creditors.max() >= population.size or borrowers.max() >= population.size:
            raise ValueError("transaction record references an unknown agent")
        x = population.positions[creditors]
        y = population.positions[borrowers]
        cell_index = tuple(
            grid.cell_index(axis, x[:, axis]) for axis in range(n)
        ) + tuple(
            grid.cell_index(n + axis, y[:, axis]) for axis in range(n)
        )
        weight = amounts / grid.cell_measure
        np.add.at(cl, cell_index, weight)
        for axis in range(n):
            np.add.at(p_comps[axis], cell_index,
                      weight * population.velocities[creditors, axis])
            np.add.at(p_comps[n + axis], cell_index,
                      weight * population.velocities[borrowers, axis])
    return ScalarField(grid, cl), VectorField.from_arrays(grid, p_comps)


@dataclass(frozen=True)
class KineticStep:
    """One emitted step: raw records, the population snapshot that produced
    them, the binned fields, and the extracted moments."""

    time: float
    records: list[TransactionRecord]
    positions: np.ndarray
    velocities: np.ndarray
    cl: ScalarField
    p: VectorField
    moments: MomentSet


@dataclass
class KineticRun:
    config: KineticConfig
    grid: GridSpec
    steps: list[KineticStep] = field(default_factory=list)
    final_population: Population | None = None


def run_kinetic(config: KineticConfig, steps: int) -> KineticRun:
    """Iterate move / trade / bin, emitting fields and moments each step.

    Deterministic given the config seed.  ``steps = 0`` emits an empty series.
    """
    rng = np.random.default_rng(config.seed)
    grid = make_grid(config.domain, config.m)
    population = Population.spawn(config.domain, config.agent_count, rng)
    run = KineticRun(config=config, grid=grid)
    zero = ScalarField.zeros(grid)
    zero_vec = VectorField.zeros(grid)
    zero_energy = tuple(zero for _ in range(grid.ndim))
    mc = 0.0
    for _ in range(steps):
        population = step_agents(population, config.dt, rng,
                                 theta=config.theta, sigma=config.sigma)
        records = generate_transactions(
            population, config.dt, rng,
            rate=config.rate, amount_scale=config.amount_scale,
            amount_shape=config.amount_shape,
        )
        cl, p = bin_transactions(records, population, grid)
        if records:
            creditors = np.array([r.creditor_id for r in records], dtype=np.intp)
            borrowers = np.array([r.borrower_id for r in records], dtype=np.intp)
            amounts = np.array([r.amount for r in records])
            credits = population.credits_issued.copy()
            loans = population.loans_received.copy()
            np.add.at(credits, creditors, amounts * config.dt)
            np.add.at(loans, borrowers, amounts * config.dt)
            population = replace(population, credits_issued=credits,
                                 loans_received=loans)
        state = FluidState(time=population.time, cl=cl, lr=zero, p=p,
                           d=zero_vec, ec=zero_energy, er=zero_energy)
        moments = compute_moments(state)
        # Cumulative credits through this step; matches the per-agent totals.
        mc += moments.c * config.dt
        moments = replace(moments, mc=mc)
        run.steps.append(KineticStep(
            time=population.time,
            records=records,
            positions=population.positions.copy(),
            velocities=population.velocities.copy(),
            cl=cl, p=p, moments=moments,
        ))
    run.final_population = population
    return run
