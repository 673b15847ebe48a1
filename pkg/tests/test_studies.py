import logging

import numpy as np
import pytest

from storagemdp.dataio import DataError
from storagemdp.sdp import backward_induction
from storagemdp.studies import (
    CapacityCurve,
    benchmark,
    capacity_curve,
    capacity_sweep,
    optimal_value,
    parallel_map,
    periodicity_study,
    plan_capacity,
    slope_crossing,
    solver,
)

CAPS = [5.0, 10.0, 15.0, 20.0, 30.0, 40.0]


@pytest.fixture(scope="module")
def short_day(day):
    return day.replace(stages=day.stages[:96])


@pytest.fixture(scope="module")
def curve(short_day):
    return capacity_curve(short_day, CAPS, soc_per_mwh=1.0)


def test_solver_lookup():
    assert callable(solver("sdp")) and callable(solver("threshold"))
    with pytest.raises(ValueError):
        solver("simplex")


def test_parallel_map_keeps_order():
    assert parallel_map(lambda v: v * v, range(20), workers=4) == [v * v for v in range(20)]


class TestBenchmark:
    def test_tiny_grid_values_agree(self, short_day):
        rep = benchmark(short_day, [10, 20], repeats=1)
        assert rep.seconds.shape == rep.values.shape == (2, 2)
        np.testing.assert_allclose(rep.values[0], rep.values[1], rtol=5e-3)
        assert np.all(rep.seconds > 0)

    def test_values_repeat_exactly(self, short_day):
        a = benchmark(short_day, [10], repeats=1)
        b = benchmark(short_day, [10], repeats=1)
        np.testing.assert_array_equal(a.values, b.values)

    def test_exponent_of_synthetic_timings(self):
        from storagemdp.studies import BenchmarkReport
        grids = (10, 20, 40)
        rep = BenchmarkReport(("sdp", "threshold"), grids, np.array([[1.0, 4.0, 16.0], [1.0, 2.0, 4.0]]),
                              np.zeros((2, 3)))
        assert rep.exponent("sdp") == pytest.approx(2.0)
        assert rep.exponent("threshold") == pytest.approx(1.0)
        np.testing.assert_allclose(rep.speedup(), [1.0, 2.0, 4.0])

    def test_bad_repeats(self, short_day):
        with pytest.raises(ValueError):
            benchmark(short_day, [10], repeats=0)


class TestCapacity:
    def test_curve_saturates(self, curve):
        assert curve.monotonicity_violation() == 0.0
        assert curve.slope_increase() <= 1e-6

    def test_matches_direct_solves(self, curve, short_day):
        direct = backward_induction(short_day.replace(capacity=15.0, n_soc=15)).optimal_value
        assert curve.values[2] == direct

    def test_zero_cost_takes_largest(self, curve):
        assert plan_capacity(curve, 0.0).c_star == 40.0

    def test_prohibitive_cost_takes_smallest(self, curve):
        plan = plan_capacity(curve, float(curve.slopes.max()) + 1.0)
        assert plan.c_star == plan.c_star_argmax == 5.0

    def test_crossing_equals_argmax(self, curve):
        s = curve.slopes
        for rho in np.linspace(s.min() - 1, s.max() + 1, 25):
            plan = plan_capacity(curve, float(rho))
            assert plan.c_star == plan.c_star_argmax
            assert plan.net_values.max() == pytest.approx(
                float(curve.values[CAPS.index(plan.c_star)] - rho * plan.c_star))

    def test_refined_between_samples(self, curve):
        s = curve.slopes
        rho = 0.5 * (s[1] + s[2])
        plan = plan_capacity(curve, float(rho))
        assert 10.0 <= plan.c_star_refined <= 25.0

    def test_slope_crossing_hand(self):
        caps = np.array([0.0, 10.0, 20.0, 30.0])
        slopes = np.array([5.0, 3.0, 1.0])
        assert slope_crossing(caps, slopes, 3.0) == (1, 15.0)
        k, refined = slope_crossing(caps, slopes, 2.0)
        assert k == 2 and refined == pytest.approx(20.0)
        assert slope_crossing(caps, slopes, 0.5) == (3, 30.0)

    def test_non_concave_warns(self, caplog):
        c = CapacityCurve(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.0, 1.0, 1.1, 5.0]), 0.9, 0.9)
        with caplog.at_level(logging.WARNING):
            plan_capacity(c, 0.5)
        assert "disagree" in caplog.text

    def test_validation(self, short_day, curve):
        with pytest.raises(ValueError):
            capacity_curve(short_day, [10.0, 5.0])
        with pytest.raises(ValueError):
            plan_capacity(curve, -1.0)

    def test_workers_do_not_change_results(self, short_day):
        a = capacity_sweep(short_day, [5.0, 10.0, 20.0], 30.0, workers=1)
        b = capacity_sweep(short_day, [5.0, 10.0, 20.0], 30.0, workers=3)
        np.testing.assert_array_equal(a.curve.values, b.curve.values)
        assert a.c_star == b.c_star


class TestPeriodicity:
    def test_single_cell_is_normalized_optimum(self, scenario):
        st = periodicity_study(scenario, [288], [0.0], start=0)
        windows = [optimal_value(scenario.instance(k * 288, 288, x_init=0.0)) for k in range(st.windows[0])]
        assert st.values[0, 0] == pytest.approx(np.mean(windows) * 72 / 288, rel=1e-12)

    def test_shape_and_band(self, scenario):
        T = [72 * m for m in (1, 2, 3, 4, 5, 6)]
        st = periodicity_study(scenario, T, [0.0, 10.0, 20.0])
        assert st.values.shape == (6, 3)
        # quarter- and half-day windows start at different hours, so only
        # the day-scale periodicities are expected to ignore the start level
        long = st.values[2:]
        spread = long.max(axis=1) - long.min(axis=1)
        assert np.all(spread <= 0.1 * np.abs(long).max(axis=1))

    def test_insufficient_data(self, scenario):
        with pytest.raises(DataError):
            periodicity_study(scenario, [scenario.n_stages + 1], [0.0])
        with pytest.raises(DataError):
            periodicity_study(scenario, [0], [0.0])

    def test_workers_do_not_change_results(self, scenario):
        a = periodicity_study(scenario, [144, 288], [0.0, 20.0], workers=1)
        b = periodicity_study(scenario, [144, 288], [0.0, 20.0], workers=4)
        np.testing.assert_array_equal(a.values, b.values)
