import pytest

from fragkill.errors import ConfigError, InsufficientSurvivors
from fragkill.montecarlo import (
    EXPERIMENTS,
    ExperimentConfig,
    estimate_extinction,
    many_to_one_check,
    martingale_mean_suite,
    verify_spine_survival,
)

from helpers import CPBAR_BINARY

BINARY = {"atoms": [{"w": 1.0, "s": [0.5, 0.5]}]}
HALF_QUARTER = {"atoms": [{"w": 1.0, "s": [0.5, 0.25]}]}


def cfg_of(**kw) -> ExperimentConfig:
    base = dict(measure=BINARY, c=2 * CPBAR_BINARY, master_seed=101)
    base.update(kw)
    return ExperimentConfig.from_dict(base)


class TestConfig:
    def test_rejects_small_trials(self):
        with pytest.raises(ConfigError):
            cfg_of(trials=50)

    def test_rejects_unknown_fields(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(
                dict(measure=BINARY, c=1.0, master_seed=1, bogus=3))

    def test_rejects_bad_geometry(self):
        with pytest.raises(ConfigError):
            cfg_of(horizon=-1.0)
        with pytest.raises(ConfigError):
            cfg_of(x_values=(-1.0,))
        with pytest.raises(ConfigError):
            cfg_of(horizon=10.0, checkpoints=(20.0,))

    def test_round_trip(self):
        cfg = cfg_of(trials=200, x_values=(0.0, 1.0))
        again = ExperimentConfig.from_dict(cfg.to_dict())
        assert again == cfg


class TestDeterminism:
    def test_threads_do_not_change_results(self):
        results = [
            estimate_extinction(cfg_of(trials=150, horizon=15.0,
                                       x_values=(0.0, 1.0), max_blocks=1000,
                                       threads=threads))
            for threads in (1, 4)
        ]
        assert results[0].rows == results[1].rows

    def test_same_seed_same_rows(self):
        a = verify_spine_survival(cfg_of(trials=300, horizon=30.0,
                                         x_values=(0.0, 1.0)))
        b = verify_spine_survival(cfg_of(trials=300, horizon=30.0,
                                         x_values=(0.0, 1.0)))
        assert a.rows == b.rows

    def test_different_seed_differs(self):
        a = verify_spine_survival(cfg_of(trials=300, horizon=30.0))
        b = verify_spine_survival(cfg_of(trials=300, horizon=30.0,
                                         master_seed=999))
        assert a.rows != b.rows


class TestExtinction:
    def test_curve_monotone_and_doubling(self):
        res = estimate_extinction(cfg_of(
            trials=400, horizon=25.0, x_values=(0.0, 0.5, 1.0, 2.0),
            max_blocks=1500))
        assert res.checks["monotone_in_x_2se"]
        assert res.checks["doubling_moves_toward_one"]
        freqs = [row[1] for row in res.rows]
        assert all(0.0 <= f <= 1.0 for f in freqs)

    def test_subcritical_expectation_check(self):
        res = estimate_extinction(ExperimentConfig.from_dict(dict(
            measure=BINARY, c=0.9 * CPBAR_BINARY, master_seed=5,
            trials=300, horizon=80.0, x_values=(0.0,), max_blocks=50_000,
            expectations={"min_extinct_freq_at_first_x": 0.95})))
        assert res.checks["min_extinct_freq_at_first_x"]


class TestSpineSurvival:
    def test_degenerate_drift_reports_zero_analytic(self):
        res = verify_spine_survival(ExperimentConfig.from_dict(dict(
            measure=BINARY, c=0.2, master_seed=3, trials=400,
            horizon=60.0, x_values=(0.0, 0.5), p_values=(1.0,))))
        assert all(row[1] == 0.0 for row in res.rows)
        assert "degenerate_decays" in res.checks


class TestMartingales:
    def test_initial_time_targets_exact(self):
        res = martingale_mean_suite(cfg_of(
            trials=120, horizon=2.0, checkpoints=(0.0, 1.0),
            x_values=(1.0,), p_values=(1.0,), max_blocks=50_000))
        by_key = {(r[0], r[2]): r for r in res.rows}
        m0 = by_key[("M", 0.0)]
        assert m0[3] == 1.0 and m0[4] == 0.0   # exactly one block of mass 1
        mx0 = by_key[("Mx", 0.0)]
        assert mx0[3] == pytest.approx(mx0[5], rel=1e-12)
        assert mx0[4] == 0.0

    def test_z_column_present_with_table(self):
        res = martingale_mean_suite(cfg_of(
            trials=150, horizon=2.0, checkpoints=(1.0, 2.0),
            x_values=(0.5,), p_values=(1.0,), max_blocks=50_000,
            g_table={"x": [0.0, 1.0, 2.0], "y": [0.8, 0.5, 0.2],
                     "declared_error": 0.1}))
        kinds = {r[0] for r in res.rows}
        assert "Z" in kinds
        assert "z_means_within_band" in res.checks


class TestManyToOne:
    def test_conservative_constant_is_exact(self):
        res = many_to_one_check(cfg_of(
            c=1.0, trials=150, horizon=4.0, checkpoints=(2.0, 4.0),
            functional={"type": "constant_one"}))
        for row in res.rows:
            assert row[1] == pytest.approx(1.0, abs=1e-12)
            assert row[3] == pytest.approx(1.0, abs=1e-12)
        assert res.checks["paired_within_3_pooled_se"]

    def test_dissipative_paired(self):
        res = many_to_one_check(ExperimentConfig.from_dict(dict(
            measure=HALF_QUARTER, c=1.0, master_seed=8, trials=800,
            horizon=3.0, checkpoints=(1.5, 3.0), floor_eps=1e-8,
            functional={"type": "indicator_mass_above", "a": 0.1})))
        assert res.checks["paired_within_3_pooled_se"]

    def test_unknown_functional(self):
        with pytest.raises(ConfigError):
            many_to_one_check(cfg_of(trials=100, horizon=2.0,
                                     functional={"type": "nope"}))


class TestDecayGrowth:
    def test_decay_needs_supercritical(self):
        with pytest.raises(ConfigError):
            EXPERIMENTS["decay"](ExperimentConfig.from_dict(dict(
                measure=BINARY, c=0.5 * CPBAR_BINARY, master_seed=1,
                trials=100, horizon=10.0)))

    def test_decay_insufficient_survivors_at_spec_speed(self):
        # at twice the critical speed every survivor explodes past any
        # affordable cap long before the horizon
        with pytest.raises(InsufficientSurvivors):
            EXPERIMENTS["decay"](cfg_of(
                trials=100, horizon=50.0, x_values=(1.0,),
                max_blocks=20_000, baseline_trials=2, floor_eps=1e-5))

    def test_growth_medians_increase(self):
        res = EXPERIMENTS["growth"](ExperimentConfig.from_dict(dict(
            measure=BINARY, c=1.15 * CPBAR_BINARY, master_seed=77,
            trials=400, horizon=100.0, x_values=(2.0,),
            checkpoints=(50.0, 100.0), max_blocks=300_000,
            min_survivors=30)))
        assert res.checks["median_growth_strict"]
        assert res.checks["count_bound_never_exceeded"]


def test_multiplicative_tracks_extinction_indicator():
    """|Z_t - extinct indicator| shrinks in t along killed runs."""
    import numpy as np

    from fragkill.levy import make_model
    from fragkill.martingales import Snapshot, multiplicative
    from fragkill.measure import binary_measure
    from fragkill.montecarlo import _g_table_from_config
    from fragkill.population import Caps, run_killed
    from fragkill.rng import trial_key

    model = make_model(2 * CPBAR_BINARY, binary_measure())
    cfg = ExperimentConfig.from_dict(dict(
        measure=BINARY, c=2 * CPBAR_BINARY, master_seed=1,
        g_table={"x": [0.0, 0.5, 1.0, 2.0],
                 "y": [0.845, 0.581, 0.208, 0.001]}))
    g_fn = _g_table_from_config(cfg)
    x = 0.5
    gaps = {5.0: [], 15.0: []}

    def hook(t, lms):
        z = multiplicative(Snapshot(t=t, log_masses=lms), g_fn, model, x)
        return {"z": z}

    for i in range(500):
        traj = run_killed(model, x, 15.0, [5.0, 15.0], Caps(100_000),
                          trial_key(31337, i), snapshot_eval=hook)
        ind = 1.0 if traj.extinct else 0.0
        for cp in traj.checkpoints:
            gaps[cp.t].append(abs(cp.extras["z"] - ind))
    assert len(gaps[15.0]) == 500
    assert float(np.mean(gaps[15.0])) < float(np.mean(gaps[5.0]))
    assert float(np.mean(gaps[15.0])) < 0.1
