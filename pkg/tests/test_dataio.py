from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from storagemdp.dataio import (
    DataError,
    RunConfig,
    assemble,
    load_series,
    read_policy,
    read_values,
    scenario_from_config,
    write_policy,
    write_series,
    write_values,
)
from storagemdp.market import ObjectiveMode
from storagemdp.sdp import backward_induction
from storagemdp.threshold import solve as threshold_solve

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


def write_csv(path, header, rows):
    path.write_text("\n".join([header] + rows) + "\n")
    return path


class TestLoadSeries:
    def test_hourly_to_half_hour(self, tmp_path):
        p = write_csv(tmp_path / "s.csv", "timestamp,re_mwh",
                      ["2021-01-01T00:00:00Z,2.0", "2021-01-01T01:00:00Z,4.0"])
        s = load_series(p, stage_minutes=30)
        np.testing.assert_array_equal(s.values, [2.0, 3.0, 4.0])
        assert s.timestamps[1] == T0 + timedelta(minutes=30)

    def test_passthrough(self, tmp_path):
        stamps = [T0 + timedelta(minutes=5 * i) for i in range(6)]
        p = tmp_path / "p.csv"
        write_series(p, stamps, [1.5, 2.5, 0.1, 7.0, 3.0, 3.0], "price_usd_per_mwh")
        s = load_series(p, stage_minutes=5)
        np.testing.assert_array_equal(s.values, [1.5, 2.5, 0.1, 7.0, 3.0, 3.0])
        assert s.timestamps == tuple(stamps) and s.name == "price_usd_per_mwh"

    def test_shuffled(self, tmp_path):
        p = write_csv(tmp_path / "s.csv", "timestamp,re_mwh",
                      ["2021-01-01T00:10:00Z,2.0", "2021-01-01T00:05:00Z,4.0"])
        with pytest.raises(DataError, match=":3:"):
            load_series(p)

    @pytest.mark.parametrize("row, where", [("2021-01-01T00:05:00Z,abc", ":3:"), ("2021-01-01T00:05:00Z", ":3:"),
                                            ("not-a-time,1.0", ":3:"), ("2021-01-01T00:05:00Z,nan", ":3:")])
    def test_malformed_row(self, tmp_path, row, where):
        p = write_csv(tmp_path / "s.csv", "timestamp,re_mwh", ["2021-01-01T00:00:00Z,1.0", row])
        with pytest.raises(DataError, match=where):
            load_series(p)

    def test_bad_header_and_empty(self, tmp_path):
        with pytest.raises(DataError):
            load_series(write_csv(tmp_path / "a.csv", "time,value", ["2021-01-01T00:00:00Z,1"]))
        with pytest.raises(DataError):
            load_series(write_csv(tmp_path / "b.csv", "timestamp,value", []))


class TestConfig:
    def test_bundled_default(self):
        cfg = RunConfig.from_file("bundled:paper_default.cfg")
        assert (cfg.capacity, cfg.eta_c, cfg.eta_d, cfg.b, cfg.b_all) == (20.0, 0.9, 0.9, 0.2, 0.5)
        assert cfg.mode is ObjectiveMode.WELFARE_MAX and cfg.soc_per_mwh is None
        assert cfg.capacities == [5.0, 10.0, 15.0, 20.0, 30.0, 40.0]

    def test_round_trip(self):
        cfg = RunConfig(capacity=12.0, mode=ObjectiveMode.PROFIT_MAX, grids=[5, 7], soc_per_mwh=2.0)
        back = RunConfig.from_string(cfg.to_string())
        for key in ("capacity", "mode", "grids", "soc_per_mwh", "capacities", "load"):
            assert getattr(back, key) == getattr(cfg, key)

    @pytest.mark.parametrize("text", ["[storage]\ncolour = red\n", "[weather]\nx = 1\n",
                                      "[storage]\ncapacity = big\n", "[objective]\nmode = greedy\n"])
    def test_rejects(self, text):
        with pytest.raises(DataError):
            RunConfig.from_string(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            RunConfig.from_file(tmp_path / "nope.cfg")
        with pytest.raises(FileNotFoundError):
            assemble(RunConfig(prices=str(tmp_path / "missing.csv")))


class TestAssemble:
    def test_defaults(self):
        inst = assemble(RunConfig())
        assert inst.T == 288 and inst.spec.capacity == 20.0 and inst.chain.n_states == 3
        assert inst.mp.b_all == 0.5 and inst.mp.demand.b == 0.2
        assert inst.stages[0].h == inst.mp.slope_table.slopes[
            np.searchsorted(inst.mp.slope_table.edges, inst.stages[0].p0_forecast, side="right") - 1]

    def test_b_all_not_above_b(self):
        with pytest.raises(ValueError):
            assemble(RunConfig(b_all=0.2))

    def test_single_stage(self):
        inst = assemble(RunConfig(stages=1))
        assert inst.T == 1 and backward_induction(inst).optimal_value == 0.0

    def test_constant_load_when_absent(self):
        sc = scenario_from_config(RunConfig(load=None, a=11.0))
        assert np.all(sc.load == 11.0)

    def test_window_outside_data(self):
        with pytest.raises(DataError):
            assemble(RunConfig(start=4300, stages=288))

    def test_length_mismatch(self, tmp_path):
        stamps = [T0 + timedelta(minutes=5 * i) for i in range(10)]
        write_series(tmp_path / "p.csv", stamps, np.linspace(10, 40, 10), "price_usd_per_mwh")
        write_series(tmp_path / "r.csv", stamps[:8], np.linspace(0, 4, 8), "re_mwh")
        cfg = RunConfig(prices="p.csv", renewable="r.csv", load=None, stages=None, base_dir=tmp_path)
        with pytest.raises(DataError):
            assemble(cfg)

    def test_relative_paths_follow_config(self, tmp_path):
        stamps = [T0 + timedelta(minutes=5 * i) for i in range(12)]
        write_series(tmp_path / "p.csv", stamps, np.linspace(10, 40, 12), "price_usd_per_mwh")
        write_series(tmp_path / "r.csv", stamps, np.linspace(0, 4, 12), "re_mwh")
        (tmp_path / "run.cfg").write_text("[data]\nprices = p.csv\nrenewable = r.csv\nload = none\n"
                                          "[horizon]\nstages = none\n")
        inst = assemble(RunConfig.from_file(tmp_path / "run.cfg"))
        assert inst.T == 12


class TestTables:
    @pytest.mark.parametrize("solver", [backward_induction, threshold_solve])
    def test_policy_round_trip_bit_exact(self, tmp_path, day, solver):
        res = solver(day)
        write_policy(tmp_path / "policy.csv", res.policy)
        back = read_policy(tmp_path / "policy.csv", day.spec.capacity)
        assert np.array_equal(back.u, res.policy.u) and np.array_equal(back.w, res.policy.w)
        np.testing.assert_array_equal(back.levels, res.policy.levels)
        write_values(tmp_path / "values.csv", res.values)
        assert np.array_equal(read_values(tmp_path / "values.csv", day.spec.capacity).v, res.values.v)

    def test_incomplete_table(self, tmp_path):
        p = write_csv(tmp_path / "policy.csv", "t,x_index,re_index,u_mwh,w_mwh",
                      ["0,0,0,1.0,0.0", "0,1,0,0.0,0.0", "1,0,0,0.0,0.0"])
        with pytest.raises(DataError):
            read_policy(p, 10.0)

    def test_wrong_header(self, tmp_path):
        p = write_csv(tmp_path / "policy.csv", "t,k,r,u,w", ["0,0,0,1.0,0.0"])
        with pytest.raises(DataError):
            read_policy(p, 10.0)
