import math

import numpy as np
import pytest

from fragkill.errors import ConfigError, DomainError
from fragkill.levy import make_model, phi
from fragkill.spine import simulate_spine, spine_survival_mc


def test_path_reconstruction_identity(model_2c):
    rng = np.random.default_rng(5)
    for _ in range(200):
        path = simulate_spine(model_2c, None, 1.0, 30.0, rng)
        drop = sum(d for _, d in path.events)
        recon = path.x + model_2c.c * path.final_time - drop
        assert abs(recon - path.final_position) <= 1e-9
        times = [t for t, _ in path.events]
        assert times == sorted(times)
        assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
        assert all(d > 0 for _, d in path.events)


def test_drift_only_before_first_event(model_2c):
    # a path whose first event lands after the horizon is pure drift
    rng = np.random.default_rng(1)
    found = False
    for _ in range(200):
        path = simulate_spine(model_2c, None, 0.5, 0.05, rng)
        if not path.events and path.killed_at is None:
            assert path.final_position == pytest.approx(
                0.5 + model_2c.c * 0.05, abs=1e-15)
            found = True
    assert found


def test_mean_first_event_time(model_2c):
    # untilted binary spine: total event rate 1
    rng = np.random.default_rng(77)
    waits = []
    for _ in range(10_000):
        path = simulate_spine(model_2c, None, 50.0, 25.0, rng)
        if path.events:
            waits.append(path.events[0][0])
    mean = np.mean(waits)
    se = np.std(waits, ddof=1) / math.sqrt(len(waits))
    assert abs(mean - 1.0) <= 3 * se


def test_conservative_never_killed(model_2c):
    rng = np.random.default_rng(2)
    assert all(
        simulate_spine(model_2c, None, 1.0, 10.0, rng).killed_at is None
        for _ in range(1000)
    )


def test_death_frequency_dissipative(nu_half_quarter):
    model = make_model(1.0, nu_half_quarter)
    rng = np.random.default_rng(13)
    t, n = 2.0, 10_000
    dead = sum(
        1 for _ in range(n)
        if (p := simulate_spine(model, None, 100.0, t, rng)).killed_at is not None
    )
    target = 1.0 - math.exp(-nu_half_quarter.kappa * t)
    se = math.sqrt(target * (1 - target) / n)
    assert abs(dead / n - target) <= 3 * se


def test_death_sets_tau_minus(nu_half_quarter):
    model = make_model(1.0, nu_half_quarter)
    rng = np.random.default_rng(21)
    seen = 0
    for _ in range(2000):
        p = simulate_spine(model, None, 100.0, 2.0, rng)
        if p.killed_at is not None:
            assert p.tau_minus == p.killed_at
            assert not p.survived
            seen += 1
    assert seen > 100


def test_tilted_event_rate(model_2c):
    # under the tilt, total jump rate is rho - phi(p)
    p, horizon, n = 1.0, 40.0, 3000
    rate = model_2c.nu.rho - phi(model_2c.nu, p)
    rng = np.random.default_rng(8)
    counts = [
        len(simulate_spine(model_2c, p, 100.0, horizon, rng).events)
        for _ in range(n)
    ]
    mean = np.mean(counts)
    se = np.std(counts, ddof=1) / math.sqrt(n)
    assert abs(mean - rate * horizon) <= 3 * se


def test_tilted_never_killed(nu_half_quarter):
    model = make_model(1.0, nu_half_quarter)
    rng = np.random.default_rng(31)
    assert all(
        simulate_spine(model, 0.5, 0.0, 5.0, rng).killed_at is None
        for _ in range(500)
    )


def test_invalid_inputs(model_2c):
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        simulate_spine(model_2c, None, 1.0, 0.0, rng)
    with pytest.raises(DomainError):
        simulate_spine(model_2c, None, -0.5, 1.0, rng)


class TestSurvivalMc:
    def test_needs_enough_trials(self, model_2c):
        with pytest.raises(ConfigError):
            spine_survival_mc(model_2c, 1.0, 0.0, 10.0, 99,
                              np.random.default_rng(0))

    def test_monotone_in_offset(self, model_2c):
        rng = np.random.default_rng(17)
        freqs = [
            spine_survival_mc(model_2c, 1.0, x, 50.0, 4000, rng)
            for x in (0.0, 0.5, 1.0, 2.0)
        ]
        for a, b in zip(freqs, freqs[1:]):
            assert b.mean >= a.mean - 2.0 * math.hypot(a.stderr, b.stderr)

    def test_estimate_bounds_analytic_value(self, model_2c):
        from fragkill.levy import psi_prime_at_zero, scale_function
        st = scale_function(model_2c, 1.0, 2e-3, 6.0)
        analytic = psi_prime_at_zero(model_2c, 1.0) * st.value(1.0)
        est = spine_survival_mc(model_2c, 1.0, 1.0, 80.0, 4000,
                                np.random.default_rng(23))
        # truncation bias is one-sided: the estimate sits above the limit
        assert est.mean >= analytic - 3 * est.stderr
        assert est.mean <= analytic + 3 * est.stderr + 0.05
