"""Transmission and distribution Volt-VAR controller logic."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from gridfed.controllers import (
    DerEnvelope,
    PvUnit,
    ShuntState,
    distribution_vvc,
    transmission_vvc,
)

WIDE = DerEnvelope(
    pv_p_curtail_max=2000.0,
    pv_q_max=5000.0,
    pv_q_min=-5000.0,
    dr_p_max=0.0,
    dr_p_min=0.0,
    losses=0.0,
)


def test_request_from_rest_recovers_error_through_sensitivity():
    s_vq = 0.04
    for v in (0.985, 0.9975, 1.0, 1.002, 1.02):
        plan = transmission_vvc(v, WIDE, s_vq, {}, base_mva=10.0)
        e = 1.0 - v
        assert plan.q_req_kvar / (10.0 * 1000.0) * s_vq == pytest.approx(e, abs=1e-12)


def test_request_accumulates_on_previous_dispatch():
    plan = transmission_vvc(
        0.998, WIDE, 0.05, {}, base_mva=10.0, prev_q_req_kvar=700.0
    )
    assert plan.q_req_kvar == pytest.approx(700.0 + 0.002 / 0.05 * 10_000.0)
    # overshoot unwinds: above-target voltage subtracts from the standing request
    plan = transmission_vvc(
        1.004, WIDE, 0.05, {}, base_mva=10.0, prev_q_req_kvar=700.0
    )
    assert plan.q_req_kvar == pytest.approx(700.0 - 0.004 / 0.05 * 10_000.0)


def test_request_clamps_to_envelope():
    narrow = DerEnvelope(
        pv_p_curtail_max=0.0, pv_q_max=300.0, pv_q_min=-300.0,
        dr_p_max=0.0, dr_p_min=0.0, losses=0.0,
    )
    low = transmission_vvc(0.90, narrow, 0.02, {}, base_mva=10.0)
    assert low.q_req_kvar == 300.0
    high = transmission_vvc(1.10, narrow, 0.02, {}, base_mva=10.0)
    assert high.q_req_kvar == -300.0


def test_tiny_sensitivity_holds_previous_request():
    plan = transmission_vvc(
        0.97, WIDE, 1e-9, {}, base_mva=10.0, prev_q_req_kvar=1234.0
    )
    assert plan.q_req_kvar == 1234.0


def test_gen_nudge_is_half_error_capped():
    sets = {"G1": 1.02, "G2": 1.015}
    plan = transmission_vvc(0.999, WIDE, 0.05, sets, base_mva=10.0)
    # half of the 0.001 error is under the cap
    assert plan.gen_v_sets["G1"] == pytest.approx(1.0205)
    assert plan.gen_v_sets["G2"] == pytest.approx(1.0155)

    plan = transmission_vvc(0.97, WIDE, 0.05, sets, base_mva=10.0)
    assert plan.gen_v_sets["G1"] == pytest.approx(1.022)

    plan = transmission_vvc(1.04, WIDE, 0.05, sets, base_mva=10.0)
    assert plan.gen_v_sets["G1"] == pytest.approx(1.018)


def test_gen_nudge_respects_band_limits():
    plan = transmission_vvc(0.97, WIDE, 0.05, {"G": 1.049}, base_mva=10.0)
    assert plan.gen_v_sets["G"] == 1.05
    plan = transmission_vvc(1.04, WIDE, 0.05, {"G": 0.9505}, base_mva=10.0)
    assert plan.gen_v_sets["G"] == pytest.approx(0.95)


def test_curtailment_only_after_reactive_range_exhausted():
    env = DerEnvelope(
        pv_p_curtail_max=3000.0, pv_q_max=200.0, pv_q_min=-200.0,
        dr_p_max=0.0, dr_p_min=0.0, losses=0.0,
    )
    # overvoltage but reactive room remains: no curtailment
    mild = transmission_vvc(1.06, env, 5.0, {}, base_mva=10.0)
    assert mild.q_req_kvar == pytest.approx(-120.0)
    assert mild.q_req_kvar > env.pv_q_min
    assert mild.p_curtail_req_kw == 0.0
    # reactive range pinned at the absorbing end: curtail proportionally
    hard = transmission_vvc(1.06, env, 0.001, {}, base_mva=10.0, s_vp=0.05)
    assert hard.q_req_kvar == env.pv_q_min
    assert hard.p_curtail_req_kw == pytest.approx((1.06 - 1.05) / 0.05 * 10_000.0)
    # capped by what the fleet can actually shed
    worse = transmission_vvc(1.20, env, 0.001, {}, base_mva=10.0, s_vp=0.05)
    assert worse.p_curtail_req_kw == 3000.0


def _units():
    return [
        PvUnit("near", s_rating=500.0, k=1.1),
        PvUnit("far", s_rating=500.0, k=1.1),
        PvUnit("hw", s_rating=1000.0, k=1.1, is_hw=True),
    ]


def _sens():
    # per-kvar columns; 'far' moves the monitored nodes hardest, then 'hw'
    return {
        "near": [1.0e-6, 0.5e-6],
        "far": [5.0e-6, 6.0e-6],
        "hw": [3.0e-6, 4.0e-6],
    }


def test_greedy_fill_orders_by_effectiveness():
    units = _units()
    plan = distribution_vvc(
        q_req_kvar=800.0,
        units=units,
        shunts=[],
        v_meas=[1.0, 1.0],
        sens_q=_sens(),
        sens_shunt={},
    )
    # far saturates at k*s = 550, hw takes the rest, near untouched
    assert plan.q_kvar["far"] == pytest.approx(550.0)
    assert plan.q_kvar["hw"] == pytest.approx(250.0)
    assert plan.q_kvar["near"] == 0.0
    assert plan.delivered_kvar == pytest.approx(800.0)
    assert plan.shortfall_kvar == pytest.approx(0.0)
    assert plan.feasible


def test_negative_request_fills_symmetrically():
    plan = distribution_vvc(
        q_req_kvar=-1300.0,
        units=_units(),
        shunts=[],
        v_meas=[1.0, 1.0],
        sens_q=_sens(),
        sens_shunt={},
    )
    assert plan.q_kvar["far"] == pytest.approx(-550.0)
    assert plan.q_kvar["hw"] == pytest.approx(-750.0)
    assert plan.delivered_kvar == pytest.approx(-1300.0)


def test_oversized_request_reports_shortfall():
    plan = distribution_vvc(
        q_req_kvar=5000.0,
        units=_units(),
        shunts=[],
        v_meas=[1.0, 1.0],
        sens_q=_sens(),
        sens_shunt={},
    )
    cap = 550.0 + 550.0 + 1100.0
    assert plan.delivered_kvar == pytest.approx(cap)
    assert plan.shortfall_kvar == pytest.approx(5000.0 - cap)


def test_hw_allocation_reported_per_unit_rating():
    plan = distribution_vvc(
        q_req_kvar=800.0,
        units=_units(),
        shunts=[],
        v_meas=[1.0, 1.0],
        sens_q=_sens(),
        sens_shunt={},
    )
    assert set(plan.hw_q_pu) == {"hw"}
    assert plan.hw_q_pu["hw"] == pytest.approx(plan.q_kvar["hw"] / 1000.0)


def test_repair_shrinks_allocation_to_hold_band():
    # the full request would push node 0 over the band; repair walks the
    # most effective unit back just enough
    units = [PvUnit("u1", s_rating=500.0, k=1.1)]
    sens = {"u1": [0.001]}
    plan = distribution_vvc(
        q_req_kvar=500.0,
        units=units,
        shunts=[],
        v_meas=[1.049],
        sens_q=sens,
        sens_shunt={},
    )
    # 500 kvar * 0.001 = +0.5 predicted rise; only 0.001 of headroom exists
    assert plan.q_kvar["u1"] == pytest.approx(1.0, abs=1e-6)
    assert plan.feasible
    assert plan.delivered_kvar < 500.0
    assert plan.shortfall_kvar == pytest.approx(500.0 - plan.q_kvar["u1"])


def test_repair_never_out_dispatches_the_request():
    # node already below band with zero allocations: nothing to shrink,
    # so the controller reports infeasible instead of inventing injection
    units = [PvUnit("u1", s_rating=500.0, k=1.1)]
    sens = {"u1": [0.001]}
    plan = distribution_vvc(
        q_req_kvar=0.0,
        units=units,
        shunts=[],
        v_meas=[0.94],
        sens_q=sens,
        sens_shunt={},
    )
    assert plan.q_kvar["u1"] == 0.0
    assert plan.delivered_kvar == 0.0
    assert not plan.feasible


def test_absorption_shrinks_for_undervoltage():
    units = [PvUnit("u1", s_rating=500.0, k=1.1)]
    sens = {"u1": [0.002]}
    plan = distribution_vvc(
        q_req_kvar=-400.0,
        units=units,
        shunts=[],
        v_meas=[0.9505],
        sens_q=sens,
        sens_shunt={},
    )
    # -400 * 0.002 = -0.8 predicted sag; keep only what the band allows
    # (allocation walks back toward zero, never past it)
    assert plan.q_kvar["u1"] == pytest.approx(-0.25, abs=1e-6)
    assert plan.feasible


def test_shunt_engages_only_when_pv_exhausted():
    units = [PvUnit("u1", s_rating=100.0, k=1.1)]
    sens = {"u1": [0.0001]}
    shunts = [ShuntState("c1", kvar_per_block=300.0, n_blocks=3, n_on=0)]
    sens_shunt = {"c1": [0.0002]}
    # deep undervoltage: the unit's full +110 kvar cannot close the gap
    plan = distribution_vvc(
        q_req_kvar=110.0,
        units=units,
        shunts=shunts,
        v_meas=[0.93],
        sens_q=sens,
        sens_shunt=sens_shunt,
    )
    assert plan.q_kvar["u1"] == pytest.approx(110.0)
    assert plan.shunt_on["c1"] > 0


def test_shunt_untouched_when_pv_suffices():
    units = [PvUnit("u1", s_rating=5000.0, k=1.1)]
    sens = {"u1": [0.001]}
    shunts = [ShuntState("c1", kvar_per_block=300.0, n_blocks=3, n_on=1)]
    plan = distribution_vvc(
        q_req_kvar=200.0,
        units=units,
        shunts=shunts,
        v_meas=[1.0],
        sens_q=sens,
        sens_shunt={"c1": [0.0002]},
    )
    assert plan.shunt_on["c1"] == 1


def test_shunt_sheds_blocks_on_overvoltage():
    # no PV absorption available at all, node over band: drop a block
    units = []
    shunts = [ShuntState("c1", kvar_per_block=400.0, n_blocks=2, n_on=2)]
    plan = distribution_vvc(
        q_req_kvar=0.0,
        units=units,
        shunts=shunts,
        v_meas=[1.052],
        sens_q={},
        sens_shunt={"c1": [0.00003]},
    )
    assert plan.shunt_on["c1"] < 2


def test_scenario_ctr_passes_through():
    plan = distribution_vvc(
        q_req_kvar=0.0, units=[], shunts=[], v_meas=[], sens_q={},
        sens_shunt={}, scenario_ctr=17,
    )
    assert plan.scenario_ctr == 17
    assert plan.feasible


@settings(max_examples=150, deadline=None)
@given(
    q_req=st.floats(min_value=-4000.0, max_value=4000.0),
    v0=st.floats(min_value=0.97, max_value=1.03),
    v1=st.floats(min_value=0.97, max_value=1.03),
)
def test_dispatch_respects_unit_swings_and_accounting(q_req, v0, v1):
    units = _units()
    plan = distribution_vvc(
        q_req_kvar=q_req,
        units=units,
        shunts=[],
        v_meas=[v0, v1],
        sens_q=_sens(),
        sens_shunt={},
    )
    for u in units:
        assert abs(plan.q_kvar[u.id]) <= u.q_cap + 1e-9
    assert plan.delivered_kvar == pytest.approx(sum(plan.q_kvar.values()))
    assert plan.shortfall_kvar == pytest.approx(q_req - plan.delivered_kvar)
    # greedy fill never flips sign against the request
    for q in plan.q_kvar.values():
        if q_req >= 0.0:
            assert q >= -1e-9
        else:
            assert q <= 1e-9
