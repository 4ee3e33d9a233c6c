"""Message frames, lossy links, and the deterministic event clock."""

from gridfed.federation.frames import (
    FRAME_TYPES,
    DpvCommand,
    DtBoundary,
    DtConstraints,
    FrameError,
    PvdResponse,
    TdBoundary,
    TdRequest,
    decode_frame,
    encode_frame,
    frame_type,
    staleness_check,
)
from gridfed.federation.links import (
    LATENCY_PRESETS,
    Channel,
    LatencySpec,
    LinkModel,
    parse_latency,
)
from gridfed.federation.clock import EventQueue

__all__ = [
    "FRAME_TYPES",
    "TdBoundary",
    "TdRequest",
    "DtBoundary",
    "DtConstraints",
    "DpvCommand",
    "PvdResponse",
    "FrameError",
    "encode_frame",
    "decode_frame",
    "frame_type",
    "staleness_check",
    "LatencySpec",
    "LinkModel",
    "Channel",
    "LATENCY_PRESETS",
    "parse_latency",
    "EventQueue",
]
