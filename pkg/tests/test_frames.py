"""Wire frame encoding, strict decoding, and counter staleness."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from gridfed.federation.frames import (
    DpvCommand,
    DtBoundary,
    DtConstraints,
    FrameError,
    PvdResponse,
    TdBoundary,
    TdRequest,
    FRAME_TYPES,
    decode_frame,
    encode_frame,
    frame_type,
    staleness_check,
)

EXAMPLES = [
    TdBoundary(sim_time=300.0, v_mag=1.0123456, v_angle_a=-0.5, scenario_ctr=3),
    TdRequest(sim_time=300.0, p_curtail_req=0.0, q_req=412.125, scenario_ctr=3),
    DtBoundary(sim_time=310.5, p_total=5123.25, q_total=-1311.5, scenario_ctr=3),
    DtConstraints(
        sim_time=310.5,
        pv_p_curtail_max=900.0,
        pv_q_max=1430.0,
        pv_q_min=-1430.0,
        dr_p_max=0.0,
        dr_p_min=0.0,
        losses=42.5,
    ),
    DpvCommand(sim_time=330.0, q_req=-0.25),
    PvdResponse(exec_time=360.0, q_resp=-0.249999),
]


@pytest.mark.parametrize("frame", EXAMPLES, ids=lambda f: type(f).__name__)
def test_round_trip(frame):
    line = encode_frame(frame)
    assert line.endswith("\n")
    assert line.count("\n") == 1
    decoded = decode_frame(line)
    assert type(decoded) is type(frame)
    for name in vars(frame):
        original = getattr(frame, name)
        value = getattr(decoded, name)
        if isinstance(original, int):
            assert value == original
        else:
            assert value == pytest.approx(original, abs=5e-7)


def test_exact_wire_text():
    frame = TdBoundary(sim_time=300.0, v_mag=1.05, v_angle_a=-0.5, scenario_ctr=7)
    assert encode_frame(frame) == (
        "TD_BOUNDARY|sim_time=300.000000|v_mag=1.050000|v_angle_a=-0.500000|scenario_ctr=7\n"
    )


def test_decoded_values_are_the_quantized_ones():
    frame = DpvCommand(sim_time=0.0, q_req=0.123456789)
    decoded = decode_frame(encode_frame(frame))
    assert decoded.q_req == 0.123457


def test_unknown_tag_rejected():
    with pytest.raises(FrameError, match="unknown frame type"):
        decode_frame("XX_FRAME|sim_time=0.000000\n")


def test_field_count_enforced():
    with pytest.raises(FrameError, match="expects 2 fields, got 1"):
        decode_frame("DPV_COMMAND|sim_time=0.000000\n")
    with pytest.raises(FrameError, match="expects 2 fields, got 3"):
        decode_frame("DPV_COMMAND|sim_time=0.000000|q_req=1.000000|extra=2.000000\n")


def test_field_order_enforced():
    with pytest.raises(FrameError, match="expected field sim_time"):
        decode_frame("DPV_COMMAND|q_req=1.000000|sim_time=0.000000\n")


def test_missing_equals_rejected():
    with pytest.raises(FrameError, match="lacks '='"):
        decode_frame("DPV_COMMAND|sim_time|q_req=1.000000\n")


def test_non_numeric_value_rejected():
    with pytest.raises(FrameError, match="not a number"):
        decode_frame("DPV_COMMAND|sim_time=zero|q_req=1.000000\n")


def test_non_finite_value_rejected_both_ways():
    with pytest.raises(FrameError, match="not finite"):
        encode_frame(DpvCommand(sim_time=0.0, q_req=float("nan")))
    with pytest.raises(FrameError, match="not finite"):
        decode_frame("DPV_COMMAND|sim_time=0.000000|q_req=inf\n")


def test_counter_must_be_integer():
    with pytest.raises(FrameError, match="must be an integer"):
        encode_frame(TdRequest(sim_time=0.0, p_curtail_req=0.0, q_req=0.0, scenario_ctr=1.5))
    with pytest.raises(FrameError, match="must be an integer"):
        encode_frame(TdRequest(sim_time=0.0, p_curtail_req=0.0, q_req=0.0, scenario_ctr=True))
    with pytest.raises(FrameError, match="not an integer"):
        decode_frame(
            "TD_REQUEST|sim_time=0.000000|p_curtail_req=0.000000|q_req=0.000000|scenario_ctr=1.5\n"
        )


def test_multi_line_and_empty_rejected():
    with pytest.raises(FrameError, match="single non-empty line"):
        decode_frame("")
    with pytest.raises(FrameError, match="single non-empty line"):
        decode_frame("DPV_COMMAND|sim_time=0.000000|q_req=1.000000\nextra\n")


def test_frame_type_rejects_foreign_objects():
    with pytest.raises(FrameError, match="not a frame type"):
        frame_type(object())


def test_all_six_types_registered():
    assert set(FRAME_TYPES) == {
        "TD_BOUNDARY",
        "TD_REQUEST",
        "DT_BOUNDARY",
        "DT_CONSTRAINTS",
        "DPV_COMMAND",
        "PVD_RESPONSE",
    }


def test_staleness_classification():
    assert staleness_check(4, 5) == "stale"
    assert staleness_check(0, 3) == "stale"
    assert staleness_check(5, 5) == "fresh"
    assert staleness_check(6, 5) == "fresh"
    assert staleness_check(7, 5) == "gap"
    assert staleness_check(12, 5) == "gap"


@given(
    sim_time=st.floats(min_value=0.0, max_value=1e7),
    p=st.floats(min_value=-1e7, max_value=1e7),
    q=st.floats(min_value=-1e7, max_value=1e7),
    ctr=st.integers(min_value=0, max_value=10**9),
)
def test_round_trip_is_stable_after_first_pass(sim_time, p, q, ctr):
    # quantization happens once: decode(encode(x)) is a fixed point
    frame = DtBoundary(sim_time=sim_time, p_total=p, q_total=q, scenario_ctr=ctr)
    once = decode_frame(encode_frame(frame))
    twice = decode_frame(encode_frame(once))
    assert once == twice
