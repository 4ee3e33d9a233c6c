"""Flexibility envelope aggregation and voltage-sensitivity columns."""

from __future__ import annotations

import math

import pytest

from gridfed.controllers import DerEnvelope, PvUnit, compute_der_envelope
from gridfed.grid.netfile import parse_grid_file
from gridfed.powerflow.sweep import (
    Injection,
    PhasorState,
    PowerFlowError,
    head_from_boundary,
    solve_feeder,
)
from gridfed.powerflow.vsm import Actuator, Vsm, compute_vsm

CHAIN = """\
[buses]
B1, abc, 12.47, slack
B2, abc, 12.47, pq
B3, abc, 12.47, pq

[branches]
B1, B2, 0.01, 0.03, 0.01, 0.03, 0.01, 0.03, 0.002, 0.006, 0.002, 0.006, 0.002, 0.006
B2, B3, 0.015, 0.04, 0.015, 0.04, 0.015, 0.04, 0.003, 0.008, 0.003, 0.008, 0.003, 0.008

[loads]
B2, abc, constant_power, 600.0, 200.0
B3, abc, constant_current, 450.0, 150.0
"""


def _chain_model():
    return parse_grid_file(CHAIN, base_mva=3.0)


def central_difference_columns(model, head, monitored, actuators, delta=0.01):
    """Independent slopes from solves at +delta/2 and -delta/2."""
    dq_half = 0.5 * delta * model.base_mva * 1000.0
    cols = []
    for act in actuators:
        states = []
        for sign in (+1.0, -1.0):
            inj = Injection(bus=act.bus, phases=act.phases, p_kw=0.0,
                            q_kvar=sign * dq_half)
            st = solve_feeder(model, head, injections=[inj], tol=1e-10)
            assert st.converged
            states.append(st)
        plus, minus = states
        cols.append([
            (plus.vmag(b, p) - minus.vmag(b, p)) / delta for b, p in monitored
        ])
    return cols


def test_vsm_matches_central_difference_on_chain():
    model = _chain_model()
    head = head_from_boundary(1.0, 0.0)
    monitored = [(b, p) for b in ("B2", "B3") for p in "abc"]
    actuators = [Actuator("u2", "B2", "abc"), Actuator("u3", "B3", "abc")]

    vsm = compute_vsm(model, head, monitored, actuators)
    oracle = central_difference_columns(model, head, monitored, actuators)

    assert vsm.failed == frozenset()
    for j, act in enumerate(actuators):
        col = vsm.column(act.id)
        for r in range(len(monitored)):
            assert col[r] == pytest.approx(oracle[j][r], rel=0.05), (act.id, monitored[r])


def test_downstream_capacitive_injection_raises_all_voltages():
    model = _chain_model()
    head = head_from_boundary(1.0, 0.0)
    monitored = [(b, p) for b in ("B2", "B3") for p in "abc"]
    vsm = compute_vsm(model, head, monitored, [Actuator("u3", "B3", "abc")])
    assert all(entry > 0.0 for entry in vsm.column("u3"))


def test_sensitivity_grows_with_electrical_distance():
    model = _chain_model()
    head = head_from_boundary(1.0, 0.0)
    monitored = [("B3", "a")]
    vsm = compute_vsm(
        model, head, monitored,
        [Actuator("u2", "B2", "abc"), Actuator("u3", "B3", "abc")],
    )
    assert vsm.column("u3")[0] > vsm.column("u2")[0]


def test_two_bus_slope_close_to_x_over_v():
    # single-phase pair: dv/dq ~= x / |V2| in per-phase per-unit
    text = """\
[buses]
B1, a, 12.47, slack
B2, a, 12.47, pq

[branches]
B1, B2, 0.01, 0.02

[loads]
B2, a, constant_power, 1000.0, 500.0
"""
    model = parse_grid_file(text, base_mva=3.0)
    head = head_from_boundary(1.0, 0.0, "a")
    s_base_phase = 1000.0
    delta_pu = 0.01
    dq_half_kvar = 0.5 * delta_pu * s_base_phase
    vals = []
    for sign in (+1.0, -1.0):
        st = solve_feeder(
            model, head,
            injections=[Injection("B2", "a", 0.0, sign * dq_half_kvar)],
            tol=1e-10,
        )
        vals.append(st.vmag("B2", "a"))
    slope = (vals[0] - vals[1]) / delta_pu
    base = solve_feeder(model, head, tol=1e-10)
    expected = 0.02 / base.vmag("B2", "a")
    assert slope == pytest.approx(expected, rel=0.05)
    assert slope > 0.0


def test_failed_actuator_gets_nan_column():
    model = _chain_model()
    head = head_from_boundary(1.0, 0.0)
    monitored = [("B2", "a")]
    vsm = compute_vsm(
        model, head, monitored,
        [Actuator("ok", "B3", "abc"), Actuator("ghost", "B9", "abc")],
    )
    assert vsm.failed == frozenset({"ghost"})
    assert all(math.isnan(x) for x in vsm.column("ghost"))
    assert all(math.isfinite(x) for x in vsm.column("ok"))
    assert vsm.column_norm("ghost") == 0.0
    assert vsm.column_norm("ok") > 0.0


def test_predict_is_linear_combination():
    vsm = Vsm(
        entries=[[0.1, 0.3], [0.2, 0.5]],
        nodes=[("B2", "a"), ("B3", "a")],
        actuators=["u2", "u3"],
        failed=frozenset(),
    )
    out = vsm.predict({"u2": 2.0, "u3": -1.0})
    assert out[0] == pytest.approx(0.1 * 2.0 - 0.3)
    assert out[1] == pytest.approx(0.2 * 2.0 - 0.5)
    assert vsm.predict({}) == [0.0, 0.0]
    assert vsm.predict({"u2": 0.0}) == [0.0, 0.0]


def test_perturbation_must_be_positive():
    model = _chain_model()
    with pytest.raises(ValueError, match="positive"):
        compute_vsm(model, head_from_boundary(1.0, 0.0), [("B2", "a")],
                    [Actuator("u", "B2", "abc")], perturbation=0.0)


def test_non_converged_base_state_rejected():
    model = _chain_model()
    fake = PhasorState(voltages={}, iterations=1, converged=False)
    with pytest.raises(PowerFlowError, match="base state"):
        compute_vsm(model, head_from_boundary(1.0, 0.0), [("B2", "a")],
                    [Actuator("u", "B2", "abc")], base_state=fake)


def test_envelope_aggregates_fleet_bounds():
    units = [
        PvUnit("a", s_rating=1000.0, k=1.1),
        PvUnit("b", s_rating=500.0, k=1.2),
    ]
    env = compute_der_envelope(
        units, {"a": 700.0, "b": -3.0}, dr_p_max=120.0, dr_p_min=-60.0,
        losses_kw=14.5,
    )
    assert env.pv_q_max == pytest.approx(1100.0 + 600.0)
    assert env.pv_q_min == pytest.approx(-1700.0)
    # negative production contributes nothing curtailable
    assert env.pv_p_curtail_max == pytest.approx(700.0)
    assert env.dr_p_max == 120.0
    assert env.dr_p_min == -60.0
    assert env.losses == 14.5


def test_envelope_of_empty_fleet_is_zero():
    env = compute_der_envelope([], {})
    assert env.pv_q_max == 0.0
    assert env.pv_q_min == 0.0
    assert env.pv_p_curtail_max == 0.0


def test_envelope_validation():
    with pytest.raises(ValueError, match="pv_q_min"):
        DerEnvelope(pv_p_curtail_max=0.0, pv_q_max=-1.0, pv_q_min=1.0,
                    dr_p_max=0.0, dr_p_min=0.0, losses=0.0)
    with pytest.raises(ValueError, match="dr_p_min"):
        DerEnvelope(pv_p_curtail_max=0.0, pv_q_max=0.0, pv_q_min=0.0,
                    dr_p_max=-1.0, dr_p_min=1.0, losses=0.0)
    with pytest.raises(ValueError, match="non-negative"):
        DerEnvelope(pv_p_curtail_max=-0.1, pv_q_max=0.0, pv_q_min=0.0,
                    dr_p_max=0.0, dr_p_min=0.0, losses=0.0)


def test_pv_unit_q_cap():
    assert PvUnit("u", s_rating=200.0, k=1.1).q_cap == pytest.approx(220.0)
