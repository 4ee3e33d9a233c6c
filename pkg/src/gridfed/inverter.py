"""PV inverter capability and response dynamics.

The reactive range is widened past the apparent-power rating by an
overbuild factor ``k``: output must satisfy (p/s)^2 + (q/(k*s))^2 <= 1.
A reactive command is clamped to [-k*s, k*s] first, then active power is
the smaller of the remaining ellipse headroom and the available DC power
(reactive priority).  Between commands the reactive output settles
toward the clamped command as a first-order lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class InverterParams:
    """Static ratings: apparent power in kVA, reactive overbuild factor."""

    s_rating: float
    k: float = 1.1
    settle_tau: float = 10.0

    def __post_init__(self):
        if self.s_rating <= 0.0:
            raise ValueError("s_rating must be positive")
        if self.k < 1.0:
            raise ValueError("overbuild factor k must be at least 1")
        if self.settle_tau < 0.0:
            raise ValueError("settle_tau must be non-negative")


@dataclass
class InverterState:
    """Operating point; advance() moves it forward in time."""

    p_avail: float = 0.0
    q_cmd: float = 0.0
    p_out: float = 0.0
    q_out: float = 0.0
    q_reported: float = 0.0
    p_limit: float = math.inf
    time: float = 0.0


def apply_q_command(q_cm: float, p_avail: float, params: InverterParams) -> tuple[float, float]:
    """Achievable (p_out, q_out) for a reactive command at the given available power."""
    if p_avail < 0.0:
        raise ValueError("p_avail must be non-negative")
    s = params.s_rating
    ks = params.k * s
    q_out = max(min(q_cm, ks), -ks)
    headroom = s * s - (q_out / params.k) ** 2
    p_out = min(math.sqrt(max(headroom, 0.0)), p_avail)
    return p_out, q_out


def capability_ok(p: float, q: float, params: InverterParams, tol: float = 1e-12) -> bool:
    """Whether (p, q) lies on or inside the capability ellipse within ``tol``."""
    s = params.s_rating
    return (p / s) ** 2 + (q / (params.k * s)) ** 2 <= 1.0 + tol


def update_irradiance(params: InverterParams, state: InverterState, sample_kw: float) -> None:
    """Track an irradiance change; available power is capped at the rating."""
    state.p_avail = min(max(sample_kw, 0.0), params.s_rating)
    _refresh_output(params, state)


def command(params: InverterParams, state: InverterState, q_cm: float, time: float,
            p_limit: float | None = None) -> float:
    """Advance to ``time``, then adopt a new reactive command.

    Returns the clamped target the output will settle toward.
    """
    advance(params, state, time)
    state.q_cmd = q_cm
    if p_limit is not None:
        state.p_limit = max(p_limit, 0.0)
    _refresh_output(params, state)
    ks = params.k * params.s_rating
    return max(min(q_cm, ks), -ks)


def advance(params: InverterParams, state: InverterState, time: float) -> None:
    """Relax q_out toward the clamped command over the elapsed interval."""
    dt = time - state.time
    if dt < 0.0:
        raise ValueError("time may not move backwards")
    ks = params.k * params.s_rating
    target = max(min(state.q_cmd, ks), -ks)
    if dt > 0.0:
        if params.settle_tau == 0.0:
            state.q_out = target
        else:
            state.q_out += (target - state.q_out) * (1.0 - math.exp(-dt / params.settle_tau))
        state.time = time
    _refresh_output(params, state)


def response_value(state: InverterState) -> float:
    """Reactive output to report on the response cadence; records it as sent."""
    state.q_reported = state.q_out
    return state.q_reported


def _refresh_output(params: InverterParams, state: InverterState) -> None:
    s = params.s_rating
    headroom = s * s - (state.q_out / params.k) ** 2
    state.p_out = min(math.sqrt(max(headroom, 0.0)), state.p_avail, state.p_limit)
