import datetime as dt
import math

import numpy as np
import pytest
from conftest import constant_cycle
from hypothesis import given
from hypothesis import strategies as st
from ten_day_expected import DEMAND_FIRST_ROWS, MEF_FIRST_ROWS

from resopt import kernels
from resopt.hydroseries import DailySeries
from resopt.reservoir import (
    Formulation,
    PolicyParams,
    ReservoirConfig,
    SimTrace,
    head,
    normalized_storage,
    rbf_release,
    simulate,
    simulate_many,
    step,
)
from resopt.thresholds import FloodThreshold, MefSchedule

P_HALF = PolicyParams((0.5,), (0.5,))


def make_cfg(mef=0.0, dd=0.0, cap=5733.0, max_inflow=0.0, qhp=101.9, table=((0, 60), (5733, 120))):
    return ReservoirConfig(
        mef=MefSchedule(constant_cycle(mef), "test"),
        flood=FloodThreshold(1e9),
        demand=constant_cycle(dd),
        elevation_storage=table,
        live_capacity=cap,
        hp_release_cap=qhp,
        max_inflow=max_inflow,
    )


class TestNormalizedStorage:
    def test_zero(self):
        assert normalized_storage(0.0, make_cfg()) == 0.0

    def test_with_max_inflow(self):
        assert normalized_storage(2866.5, make_cfg(max_inflow=1000.0)) == pytest.approx(
            0.42574, abs=5e-6)

    def test_full(self):
        assert normalized_storage(5733.0, make_cfg()) == 1.0


class TestRbf:
    def test_peak(self):
        assert rbf_release(0.3, PolicyParams((0.3,), (0.2,)), make_cfg()) == 101.9

    def test_one_radius_away(self):
        got = rbf_release(0.75, PolicyParams((0.5,), (0.25,)), make_cfg())
        assert got == pytest.approx(101.9 * math.exp(-1), rel=1e-15)
        assert got == pytest.approx(37.49, abs=5e-3)

    def test_narrow_decays_to_zero(self):
        assert rbf_release(0.9, PolicyParams((0.1,), (1e-3,)), make_cfg()) == 0.0

    @given(st.floats(0, 1),
           st.lists(st.tuples(st.floats(-1, 1), st.floats(1e-3, 1)), min_size=1, max_size=5),
           st.randoms())
    def test_permutation_invariant(self, ns, pairs, rnd):
        cfg = make_cfg()
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        a = rbf_release(ns, PolicyParams(*zip(*pairs)), cfg)
        b = rbf_release(ns, PolicyParams(*zip(*shuffled)), cfg)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)
        assert 0.0 <= a <= cfg.hp_release_cap


class TestPolicyParams:
    @pytest.mark.parametrize("c, r", [((0.0,), (0.0,)), ((0.0,), (-0.1,)), ((1.5,), (0.5,)),
                                      ((0.0, 0.1), (0.5,)), ((), ())])
    def test_invalid(self, c, r):
        with pytest.raises(ValueError):
            PolicyParams(c, r)

    def test_genome_round_trip(self):
        p = PolicyParams((0.1, -0.2), (0.3, 0.4))
        assert PolicyParams.from_genome(p.genome()) == p


class TestHead:
    def test_endpoint(self):
        assert head(0.0, make_cfg()) == 60.0

    def test_midpoint(self):
        assert head(2866.5, make_cfg()) == 90.0

    @given(st.floats(0, 5733), st.floats(0, 5733))
    def test_monotone(self, a, b):
        cfg = make_cfg(table=((0, 40), (2000, 75), (5733, 95)))
        lo, hi = sorted((a, b))
        assert head(lo, cfg) <= head(hi, cfg)

    def test_table_must_increase(self):
        with pytest.raises(ValueError):
            make_cfg(table=((0, 60), (0, 70)))


class TestStep:
    def test_mef_first_ample(self):
        f = step(1000, 200, 0, Formulation.MEF_FIRST, P_HALF, make_cfg(50, 100), hp_target=80)
        assert (f.efr, f.dr, f.hpr, f.ewr, f.storage) == (50, 100, 80, 0, 970)

    def test_priority_flip_under_scarcity(self):
        cfg = make_cfg(50, 100)
        a = step(0, 120, 0, Formulation.MEF_FIRST, P_HALF, cfg, hp_target=80)
        assert (a.efr, a.dr, a.hpr, a.storage) == (50, 70, 0, 0)
        b = step(0, 120, 0, Formulation.DEMAND_FIRST, P_HALF, cfg, hp_target=80)
        assert (b.dr, b.hpr, b.efr, b.storage) == (100, 20, 0, 0)

    def test_spill(self):
        f = step(5733, 300, 0, Formulation.MEF_FIRST, P_HALF, make_cfg(), hp_target=0)
        assert (f.ewr, f.storage) == (300, 5733)

    @given(st.floats(0, 100), st.floats(0, 200), st.floats(0, 50), st.floats(0, 80),
           st.floats(0, 30))
    def test_priority_dominance(self, s_prev, q, mef, dd, target):
        cfg = make_cfg(mef, dd, cap=100.0, qhp=30.0)
        a = step(s_prev, q, 0, Formulation.MEF_FIRST, P_HALF, cfg, hp_target=target)
        b = step(s_prev, q, 0, Formulation.DEMAND_FIRST, P_HALF, cfg, hp_target=target)
        assert a.efr >= b.efr and b.dr >= a.dr
        for f in (a, b):
            assert f.efr <= mef and f.dr <= dd and f.hpr <= target
            assert 0 <= f.storage <= 100.0
            assert f.ewr == 0 or f.storage == 100.0
            assert math.isclose(f.storage, s_prev + q - f.efr - f.dr - f.hpr - f.ewr,
                                abs_tol=1e-9)


class TestSimulate:
    def test_no_flux_fixed_point(self):
        cfg = make_cfg()
        tr = simulate(DailySeries(dt.date(2000, 6, 1), np.zeros(50)), 1234.0, Formulation.MEF_FIRST,
                      PolicyParams((1.0,), (1e-4,)), cfg)
        assert np.all(tr.storage == 1234.0)

    @pytest.mark.parametrize("backend", sorted(kernels.backends()))
    @pytest.mark.parametrize("form, rows", [(Formulation.MEF_FIRST, MEF_FIRST_ROWS),
                                            (Formulation.DEMAND_FIRST, DEMAND_FIRST_ROWS)])
    def test_ten_day_oracle(self, ten_day_cfg, ten_day_inflow, form, rows, backend, monkeypatch):
        monkeypatch.setattr(kernels, "simulate_batch", kernels.backends()[backend].simulate_batch)
        tr = simulate(ten_day_inflow, 50.0, form, P_HALF, ten_day_cfg)
        got = np.column_stack([tr.storage, tr.efr, tr.dr, tr.hpr, tr.ewr, tr.head])
        np.testing.assert_allclose(got, np.array(rows), rtol=0, atol=1e-9)
        assert abs(tr.mass_balance_error()) <= 1e-9

    def test_step_agrees_with_simulate(self, ns_cfg, ns_history):
        window = DailySeries(ns_history.start, ns_history.values[:800])
        p = PolicyParams((0.2, 0.7), (0.3, 0.6))
        for form in Formulation:
            tr = simulate(window, 2000.0, form, p, ns_cfg)
            s = 2000.0
            for t, (q, cyc) in enumerate(zip(window.values, tr.cycle)):
                f = step(s, q, cyc, form, p, ns_cfg)
                assert f.storage == pytest.approx(tr.storage[t], abs=1e-9)
                s = tr.storage[t]

    def test_s0_range(self):
        with pytest.raises(ValueError):
            simulate(DailySeries(dt.date(2000, 6, 1), [1.0]), -1.0, Formulation.MEF_FIRST, P_HALF,
                     make_cfg())

    def test_trace_csv(self, ten_day_cfg, ten_day_inflow, tmp_path):
        tr = simulate(ten_day_inflow, 50.0, Formulation.MEF_FIRST, P_HALF, ten_day_cfg)
        tr.to_csv(tmp_path / "t.csv")
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "date,s,q,efr,dr,hpr,ewr,r,head"
        assert len(lines) == 11 and lines[1].startswith("2001-06-01,13.0,0.0,5.0")


@given(st.integers(0, 2**32 - 1))
def test_randomized_invariants(seed):
    rng = np.random.default_rng(seed)
    cap = rng.uniform(50, 500)
    cfg = make_cfg(rng.uniform(0, 20), rng.uniform(0, 30), cap=cap, qhp=rng.uniform(1, 40),
                   max_inflow=rng.uniform(0, 100), table=((0, 10), (cap, 80)))
    k = int(rng.integers(1, 4))
    p = PolicyParams(tuple(rng.uniform(-1, 1, k)), tuple(rng.uniform(0.01, 1, k)))
    flows = rng.gamma(0.7, 20, size=(3, 200))
    for form in Formulation:
        for tr in simulate_many(flows, dt.date(2003, 1, 1), rng.uniform(0, cap), form, p, cfg):
            assert abs(tr.mass_balance_error()) <= 1e-9 * max(1.0, tr.inflow.sum())
            for a in (tr.efr, tr.dr, tr.hpr, tr.ewr):
                assert np.all(a >= 0)
            assert np.all((tr.storage >= 0) & (tr.storage <= cap))
            assert np.all(tr.efr <= cfg.mef.values[tr.cycle])
            assert np.all(tr.dr <= cfg.demand[tr.cycle])
            assert np.all(tr.hpr <= cfg.hp_release_cap)
            assert np.all(tr.storage[tr.ewr > 0] == cap)


def test_from_observed_length_check():
    with pytest.raises(ValueError):
        SimTrace.from_observed(dt.date(2000, 6, 1), [1, 2], [1, 2], [0, 0], [0, 0], [0, 0],
                               [0, 0], [60])


def test_formulation_aliases():
    assert Formulation.parse("PF_MEF") is Formulation.MEF_FIRST
    assert Formulation.parse("demand_first") is Formulation.DEMAND_FIRST
    with pytest.raises(ValueError):
        Formulation.parse("nope")


def test_config_with_mef_keeps_rest(ten_day_cfg):
    new = ten_day_cfg.with_mef(MefSchedule(constant_cycle(1.0), "x"))
    assert new.live_capacity == ten_day_cfg.live_capacity
    assert np.all(new.mef.values == 1.0)
