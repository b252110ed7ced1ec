import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from econflow.domain import EconomicDomain, integrate_field, make_grid
from econflow.kinetic import (
    KineticConfig,
    Population,
    TransactionRecord,
    bin_transactions,
    generate_transactions,
    run_kinetic,
    step_agents,
)

DOMAIN = EconomicDomain(1)


def single_agent(position, velocity):
    return Population(
        domain=DOMAIN, time=0.0,
        positions=np.array([[position]]), velocities=np.array([[velocity]]),
        credits_issued=np.zeros(1), loans_received=np.zeros(1),
    )


def test_particle_view(rng):
    pop = Population.spawn(DOMAIN, 4, rng)
    particle = pop.particle(2)
    assert particle.id == 2
    assert_allclose(particle.position, pop.positions[2])
    assert particle.cumulative_credits_issued == 0.0
    # the view is a copy, not an alias into the population arrays
    particle.position[0] = -5.0
    assert pop.positions[2, 0] != -5.0


def test_record_invariants():
    with pytest.raises(ValueError):
        TransactionRecord(1, 1, 1.0, 0.0)
    with pytest.raises(ValueError):
        TransactionRecord(0, 1, -1.0, 0.0)


def test_config_invariants():
    with pytest.raises(ValueError):
        KineticConfig(domain=DOMAIN, agent_count=1, seed=0, dt=0.1, m=4)
    with pytest.raises(ValueError):
        KineticConfig(domain=DOMAIN, agent_count=2, seed=0, dt=0.0, m=4)
    with pytest.raises(ValueError):
        KineticConfig(domain=DOMAIN, agent_count=2, seed=0, dt=0.1, m=4, rate=-1.0)
    with pytest.raises(ValueError):
        KineticConfig(domain=DOMAIN, agent_count=2, seed=0, dt=0.1, m=4,
                      amount_scale=0.0)


class TestStepAgents:
    def test_zero_velocity_identity(self, rng):
        pop = Population.spawn(DOMAIN, 50, rng)
        moved = step_agents(pop, 0.5, rng, theta=0.0, sigma=0.0)
        assert np.array_equal(moved.positions, pop.positions)

    def test_wall_reflection(self, rng):
        pop = single_agent(0.95, 1.0)
        moved = step_agents(pop, 0.1, rng, theta=0.0, sigma=0.0)
        assert moved.positions[0, 0] == pytest.approx(0.95)
        assert moved.velocities[0, 0] == pytest.approx(-1.0)

    def test_large_overshoot_folds_back(self, rng):
        # four wall bounces: 0.5 + 3.7 = 4.2 folds to 0.2, heading up again
        pop = single_agent(0.5, 37.0)
        moved = step_agents(pop, 0.1, rng, theta=0.0, sigma=0.0)
        assert moved.positions[0, 0] == pytest.approx(0.2)
        assert moved.velocities[0, 0] == pytest.approx(37.0)

    def test_containment_under_diffusion(self, rng):
        pop = Population.spawn(DOMAIN, 300, rng)
        for _ in range(200):
            pop = step_agents(pop, 0.05, rng, theta=0.5, sigma=1.0)
        assert np.all(pop.positions >= 0.0)
        assert np.all(pop.positions <= 1.0)

    def test_stationary_velocity_variance(self):
        # mean-reverting diffusion equilibrates at sigma^2/(2 theta) = 0.125
        rng = np.random.default_rng(7)
        pop = Population.spawn(DOMAIN, 10_000, rng)
        for _ in range(1000):
            pop = step_agents(pop, 0.01, rng, theta=1.0, sigma=0.5)
        variance = float(np.var(pop.velocities))
        assert variance == pytest.approx(0.125, rel=0.05)


class TestGenerateTransactions:
    def test_zero_rate(self, rng):
        pop = Population.spawn(DOMAIN, 10, rng)
        assert generate_transactions(pop, 1.0, rng, rate=0.0) == []

    def test_certain_event_all_ordered_pairs(self, rng):
        pop = Population.spawn(DOMAIN, 2, rng)
        records = generate_transactions(pop, 1.0, rng, rate=1.0, amount_shape=0.0)
        assert len(records) == 2
        assert {(r.creditor_id, r.borrower_id) for r in records} == {(0, 1), (1, 0)}
        assert all(r.amount == 1.0 for r in records)

    def test_mean_count_matches_binomial(self):
        # N(N-1)*p = 9900 * 0.01 = 99 expected records per draw
        rng = np.random.default_rng(11)
        pop = Population.spawn(DOMAIN, 100, rng)
        trials = 1000
        counts = [len(generate_transactions(pop, 1.0, rng, rate=0.01))
                  for _ in range(trials)]
        sigma_mean = math.sqrt(9900 * 0.01 * 0.99 / trials)
        assert abs(np.mean(counts) - 99.0) < 3 * sigma_mean


class TestBinTransactions:
    def test_empty_records(self, rng):
        grid = make_grid(DOMAIN, 4)
        pop = Population.spawn(DOMAIN, 5, rng)
        cl, p = bin_transactions([], pop, grid)
        assert not cl.values.any()
        assert not any(c.values.any() for c in p.components)

    def test_amounts_accumulate_per_cell(self):
        grid = make_grid(DOMAIN, 4)
        pop = Population(
            domain=DOMAIN, time=0.0,
            positions=np.array([[0.1], [0.2]]), velocities=np.zeros((2, 1)),
            credits_issued=np.zeros(2), loans_received=np.zeros(2),
        )
        records = [TransactionRecord(0, 1, 3.0, 0.0),
                   TransactionRecord(0, 1, 4.0, 0.0)]
        cl, _ = bin_transactions(records, pop, grid)
        assert cl.values[0, 0] == pytest.approx(7.0 / 0.0625)
        assert integrate_field(cl) == pytest.approx(7.0)

    def test_impulse_is_velocity_weighted(self):
        grid = make_grid(DOMAIN, 4)
        pop = Population(
            domain=DOMAIN, time=0.0,
            positions=np.array([[0.1], [0.9]]),
            velocities=np.array([[0.5], [-0.25]]),
            credits_issued=np.zeros(2), loans_received=np.zeros(2),
        )
        cl, p = bin_transactions([TransactionRecord(0, 1, 2.0, 0.0)], pop, grid)
        assert p.components[0].values[0, 3] == pytest.approx(1.0 / 0.0625)
        assert integrate_field(p.components[0]) == pytest.approx(1.0)
        assert integrate_field(p.components[1]) == pytest.approx(-0.5)

    def test_unknown_agent_rejected(self, rng):
        grid = make_grid(DOMAIN, 4)
        pop = Population.spawn(DOMAIN, 3, rng)
        with pytest.raises(ValueError):
            bin_transactions([TransactionRecord(0, 7, 1.0, 0.0)], pop, grid)


class TestRunKinetic:
    CONFIG = KineticConfig(
        domain=DOMAIN, agent_count=120, seed=5, dt=0.05, m=8,
        theta=1.0, sigma=0.4, rate=0.02, amount_scale=1.0, amount_shape=0.5,
    )

    def test_zero_steps(self):
        assert run_kinetic(self.CONFIG, 0).steps == []

    def test_determinism(self):
        a = run_kinetic(self.CONFIG, 10)
        b = run_kinetic(self.CONFIG, 10)
        for sa, sb in zip(a.steps, b.steps):
            assert sa.moments.c == sb.moments.c
            assert np.array_equal(sa.cl.values, sb.cl.values)
            assert np.array_equal(sa.positions, sb.positions)

    def test_aggregation_identity_every_step(self):
        run = run_kinetic(self.CONFIG, 25)
        assert any(step.records for step in run.steps)
        for step in run.steps:
            raw = math.fsum(r.amount for r in step.records)
            emitted = integrate_field(step.cl)
            assert emitted == pytest.approx(raw, rel=1e-12, abs=1e-300)

    def test_cumulative_totals_match_mc(self):
        run = run_kinetic(self.CONFIG, 25)
        issued = float(run.final_population.credits_issued.sum())
        assert run.steps[-1].moments.mc == pytest.approx(issued, rel=1e-10)
        received = float(run.final_population.loans_received.sum())
        assert issued == pytest.approx(received, rel=1e-12)

    def test_mean_risks_inside_domain(self):
        run = run_kinetic(self.CONFIG, 10)
        for step in run.steps:
            if step.moments.c > 0:
                assert 0.0 <= step.moments.x_c[0] <= 1.0
                assert 0.0 <= step.moments.x_l[0] <= 1.0
