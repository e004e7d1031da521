import math

import numpy as np
import pytest

from fragkill.errors import DomainError, GridRange
from fragkill.levy import phi, scale_function
from fragkill.martingales import (
    ExtinctionCurve,
    FunctionTable,
    Snapshot,
    additive_intrinsic,
    additive_killed,
    multiplicative,
    sandwich_check,
)
from fragkill.stats import isotonize_nonincreasing


@pytest.fixture(scope="module")
def scale_1(model_2c):
    return scale_function(model_2c, 1.0, 2e-3, 10.0)


def snap(t, masses):
    return Snapshot(t=t, log_masses=np.asarray(masses, dtype=float))


class TestAdditiveIntrinsic:
    def test_initial_unit(self, model_2c):
        assert additive_intrinsic(snap(0.0, [0.0]), model_2c, 1.0) == 1.0

    def test_empty_is_zero(self, model_2c):
        assert additive_intrinsic(snap(3.0, []), model_2c, 1.0) == 0.0

    def test_hand_formula(self, model_2c):
        # two half blocks at time t: e^{phi(p) t} * 2 * (1/2)^(1+p)
        t, p = 1.7, 0.5
        got = additive_intrinsic(snap(t, [math.log(0.5)] * 2), model_2c, p)
        want = math.exp(phi(model_2c.nu, p) * t) * 2.0 * 0.5 ** (1 + p)
        assert got == pytest.approx(want, rel=1e-14)

    def test_domain(self, model_2c):
        with pytest.raises(DomainError):
            additive_intrinsic(snap(0.0, [0.0]), model_2c, -1.0)


class TestAdditiveKilled:
    def test_initial_is_scale_value(self, model_2c, scale_1):
        x = 1.0
        got = additive_killed(snap(0.0, [0.0]), model_2c, 1.0, scale_1, x)
        assert got == pytest.approx(scale_1.value(x), rel=1e-14)

    def test_extinct_is_zero(self, model_2c, scale_1):
        assert additive_killed(snap(5.0, []), model_2c, 1.0, scale_1, 1.0) == 0.0

    def test_table_too_short(self, model_2c):
        short = scale_function(model_2c, 1.0, 2e-3, 1.0)
        with pytest.raises(GridRange):
            additive_killed(snap(10.0, [0.0]), model_2c, 1.0, short, 1.0)


class TestMultiplicative:
    def test_empty_product_is_one(self, model_2c):
        f = FunctionTable(np.array([0.0, 1.0]), np.array([0.9, 0.1]), 0.9, 0.1)
        assert multiplicative(snap(9.0, []), f, model_2c, 1.0) == 1.0

    def test_constant_one(self, model_2c):
        f = FunctionTable(np.array([0.0, 1.0]), np.array([1.0, 1.0]), 1.0, 1.0)
        got = multiplicative(snap(2.0, [-0.7, -0.9]), f, model_2c, 0.5)
        assert got == 1.0

    def test_hand_product(self, model_2c):
        f = FunctionTable(np.array([0.0, 10.0]), np.array([1.0, 0.0]), 1.0, 0.0)
        t, x = 1.0, 0.5
        lms = [-0.3, -0.6]
        got = multiplicative(snap(t, lms), f, model_2c, x)
        want = np.prod([1.0 - (x + model_2c.c * t + lm) / 10.0 for lm in lms])
        assert got == pytest.approx(want, rel=1e-12)

    def test_range_validation(self):
        with pytest.raises(DomainError):
            FunctionTable(np.array([0.0, 1.0]), np.array([0.5, 1.2]), 0.5, 1.2)


class TestSandwich:
    def test_holds_on_random_snapshots(self, model_2c, scale_1):
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = rng.integers(1, 30)
            t = float(rng.random() * 4)
            lms = -rng.random(n) * (1.0 + model_2c.c * t)
            rep = sandwich_check(snap(t, lms), model_2c, 1.0, scale_1, 1.0)
            assert rep.holds

    def test_empty_snapshot(self, model_2c, scale_1):
        rep = sandwich_check(snap(1.0, []), model_2c, 1.0, scale_1, 1.0)
        assert rep.holds and rep.lower == 0.0 and rep.value == 0.0

    def test_single_block_slack_is_scale_ratio(self, model_2c, scale_1):
        # one block: value / lower = c * W_p(position)  >= 1
        t, x, lm = 2.0, 1.0, -0.4
        rep = sandwich_check(snap(t, [lm]), model_2c, 1.0, scale_1, x)
        ratio = rep.value / rep.lower
        want = model_2c.c * scale_1.value(x + model_2c.c * t + lm)
        assert ratio == pytest.approx(want, rel=1e-12)
        assert rep.holds


class TestIsotonize:
    def test_pav_pools_violators(self):
        got = isotonize_nonincreasing([1.0, 0.9, 0.95, 0.5])
        assert got == pytest.approx([1.0, 0.925, 0.925, 0.5])

    def test_already_monotone_untouched(self):
        y = [0.9, 0.5, 0.2]
        assert isotonize_nonincreasing(y) == pytest.approx(y)

    def test_preserves_mean(self):
        rng = np.random.default_rng(0)
        y = rng.random(50)
        assert isotonize_nonincreasing(y).mean() == pytest.approx(y.mean())


class TestExtinctionCurve:
    def test_isotonized_table(self):
        curve = ExtinctionCurve(
            x_grid=np.array([0.0, 0.5, 1.0, 2.0]),
            g_hat=np.array([0.8, 0.82, 0.6, 0.3]),
            stderr=np.full(4, 0.01),
            horizon=50.0, trials=1000)
        f = curve.isotonized()
        vals = f(curve.x_grid)
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        assert f(-1.0) == vals[0]
        assert f(99.0) == vals[-1]
        assert curve.declared_error() > 0.0
