"""Wire frames exchanged between federates.

Encoding is a single text line: the type tag, then ``name=value`` pairs
in declared order, all joined by ``|`` and terminated by a newline.
Floats are rendered with six decimals, counters as plain integers, so a
decoded frame carries exactly the quantized values that crossed the wire.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


class FrameError(Exception):
    """Raised for malformed wire text or unencodable field values."""


@dataclass(frozen=True)
class TdBoundary:
    """Transmission to distribution: boundary bus voltage phasor."""

    sim_time: float
    v_mag: float
    v_angle_a: float
    scenario_ctr: int


@dataclass(frozen=True)
class TdRequest:
    """Transmission to distribution: curtailment and reactive setpoints."""

    sim_time: float
    p_curtail_req: float
    q_req: float
    scenario_ctr: int


@dataclass(frozen=True)
class DtBoundary:
    """Distribution to transmission: aggregate feeder draw."""

    sim_time: float
    p_total: float
    q_total: float
    scenario_ctr: int


@dataclass(frozen=True)
class DtConstraints:
    """Distribution to transmission: flexibility envelope for one interval."""

    sim_time: float
    pv_p_curtail_max: float
    pv_q_max: float
    pv_q_min: float
    dr_p_max: float
    dr_p_min: float
    losses: float


@dataclass(frozen=True)
class DpvCommand:
    """Distribution controller to a hardware inverter: reactive setpoint."""

    sim_time: float
    q_req: float


@dataclass(frozen=True)
class PvdResponse:
    """Hardware inverter back to distribution: measured reactive output."""

    exec_time: float
    q_resp: float


FRAME_TYPES = {
    "TD_BOUNDARY": TdBoundary,
    "TD_REQUEST": TdRequest,
    "DT_BOUNDARY": DtBoundary,
    "DT_CONSTRAINTS": DtConstraints,
    "DPV_COMMAND": DpvCommand,
    "PVD_RESPONSE": PvdResponse,
}


def staleness_check(received_ctr: int, last_ctr: int) -> str:
    """Classify a scenario counter against the last one seen.

    'fresh' for the next interval or a repeat of the current one; 'stale'
    for anything older (discard); 'gap' when intervals were skipped
    (accept, but the caller should log received_ctr - last_ctr - 1 missed).
    """
    if received_ctr < last_ctr:
        return "stale"
    if received_ctr > last_ctr + 1:
        return "gap"
    return "fresh"

_TYPE_NAMES = {cls: name for name, cls in FRAME_TYPES.items()}
_INT_FIELDS = {"scenario_ctr"}


def frame_type(frame) -> str:
    """Wire tag for a frame instance."""
    try:
        return _TYPE_NAMES[type(frame)]
    except KeyError:
        raise FrameError(f"not a frame type: {type(frame).__name__}") from None


def encode_frame(frame) -> str:
    """Render a frame as its newline-terminated wire line."""
    tag = frame_type(frame)
    parts = [tag]
    for f in fields(frame):
        value = getattr(frame, f.name)
        if f.name in _INT_FIELDS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise FrameError(f"field {f.name} must be an integer, got {value!r}")
            parts.append(f"{f.name}={value}")
        else:
            value = float(value)
            if not math.isfinite(value):
                raise FrameError(f"field {f.name} is not finite: {value!r}")
            parts.append(f"{f.name}={value:.6f}")
    return "|".join(parts) + "\n"


def decode_frame(line: str):
    """Parse one wire line back into its frame dataclass.

    Fields must appear exactly in declared order; unknown tags, missing,
    reordered, duplicate, or unparseable fields all raise FrameError.
    """
    text = line.rstrip("\n")
    if "\n" in text or not text:
        raise FrameError("frame must be a single non-empty line")
    parts = text.split("|")
    tag = parts[0]
    cls = FRAME_TYPES.get(tag)
    if cls is None:
        raise FrameError(f"unknown frame type: {tag!r}")
    declared = fields(cls)
    if len(parts) - 1 != len(declared):
        raise FrameError(
            f"{tag} expects {len(declared)} fields, got {len(parts) - 1}"
        )
    kwargs = {}
    for f, token in zip(declared, parts[1:]):
        name, eq, raw = token.partition("=")
        if not eq:
            raise FrameError(f"{tag}: field token {token!r} lacks '='")
        if name != f.name:
            raise FrameError(f"{tag}: expected field {f.name}, got {name!r}")
        if f.name in _INT_FIELDS:
            try:
                kwargs[name] = int(raw)
            except ValueError:
                raise FrameError(f"{tag}: field {name} is not an integer: {raw!r}") from None
        else:
            try:
                value = float(raw)
            except ValueError:
                raise FrameError(f"{tag}: field {name} is not a number: {raw!r}") from None
            if not math.isfinite(value):
                raise FrameError(f"{tag}: field {name} is not finite: {raw!r}")
            kwargs[name] = value
    return cls(**kwargs)
