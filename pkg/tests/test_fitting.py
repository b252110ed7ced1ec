import numpy as np
import pytest
from numpy.testing import assert_allclose

from econflow.fitting import CycleModel, cycle_model_values, fit_cycle_parameters

TRUE = CycleModel(n=1, c0=1.0, alpha=[0.6], beta=[-0.3], delta=[0.25], zeta=[0.4],
                  omega=[2.0], nu=[3.0], kappa=0.2, gamma=0.1)
GUESS = CycleModel(n=1, omega=[2.2], nu=[2.8], gamma=0.11)   # ~10% off
T = np.linspace(0.0, 10.0, 2001)


def test_model_evaluation_shape():
    values = cycle_model_values(TRUE, T)
    assert values.shape == T.shape
    assert values[0] == pytest.approx(1.0 - 0.3 + 0.4 + 0.2)


def test_noiseless_round_trip():
    y = cycle_model_values(TRUE, T)
    result = fit_cycle_parameters(T, y, 1, GUESS)
    assert result.converged
    assert not result.rank_deficient
    assert result.rmse < 1e-10
    recovered = result.model.pack()
    expected = TRUE.pack()
    assert np.max(np.abs(recovered - expected) / np.abs(expected)) < 1e-6


def test_constant_series_flags_rank_deficiency():
    result = fit_cycle_parameters(T, np.full_like(T, 3.7), 1, GUESS)
    assert result.model.c0 == pytest.approx(3.7)
    assert result.rank_deficient
    for amp in (result.model.alpha, result.model.beta,
                result.model.delta, result.model.zeta):
        assert abs(amp[0]) < 1e-10


def test_noisy_frequency_recovery():
    y = cycle_model_values(TRUE, T)
    amplitude = float(np.max(np.abs(y - y.mean())))
    errors = []
    for seed in range(100):
        noise = np.random.default_rng(seed).standard_normal(T.size)
        result = fit_cycle_parameters(T, y + 0.01 * amplitude * noise, 1, GUESS)
        errors.append(max(abs(result.model.omega[0] - 2.0) / 2.0,
                          abs(result.model.nu[0] - 3.0) / 3.0))
    assert np.quantile(errors, 0.95) < 0.01


def test_deterministic_given_guess():
    y = cycle_model_values(TRUE, T)
    a = fit_cycle_parameters(T, y, 1, GUESS)
    b = fit_cycle_parameters(T, y, 1, GUESS)
    assert np.array_equal(a.model.pack(), b.model.pack())
    assert a.iterations == b.iterations


def test_series_too_short_rejected():
    t = np.linspace(0, 1, 10)
    with pytest.raises(ValueError, match="too short"):
        fit_cycle_parameters(t, np.zeros(10), 1, GUESS)


def test_nonincreasing_timestamps_rejected():
    t = np.concatenate([T[:100], T[98:]])
    with pytest.raises(ValueError, match="increasing"):
        fit_cycle_parameters(t, np.zeros(t.size), 1, GUESS)


def test_two_axis_model():
    true = CycleModel(n=2, c0=0.5, alpha=[0.5, 0.2], beta=[0.1, -0.4],
                      delta=[0.3, 0.15], zeta=[-0.2, 0.1],
                      omega=[1.5, 4.0], nu=[2.5, 5.0], kappa=0.1, gamma=0.05)
    t = np.linspace(0.0, 20.0, 4001)
    y = cycle_model_values(true, t)
    guess = CycleModel(n=2, omega=[1.55, 3.9], nu=[2.45, 5.1], gamma=0.06)
    result = fit_cycle_parameters(t, y, 2, guess)
    assert result.converged
    assert_allclose(result.model.omega, [1.5, 4.0], rtol=1e-8)
    assert_allclose(result.model.nu, [2.5, 5.0], rtol=1e-8)


def test_report_dictionary_round_trip():
    y = cycle_model_values(TRUE, T)
    result = fit_cycle_parameters(T, y, 1, GUESS)
    payload = result.as_dict()
    assert payload["converged"] is True
    assert payload["parameters"]["omega1"] == pytest.approx(2.0, rel=1e-8)
    assert set(payload["parameter_converged"]) == set(TRUE.parameter_names())
