"""Volt-VAR controller logic for the transmission and distribution sides.

Both controllers are pure functions: measurements and device data in,
plans out.  The transmission side runs a bounded integrator on the
boundary-voltage error and turns it into an aggregate reactive request;
the distribution side allocates that request across PV units greedily by
voltage effectiveness, then repairs any predicted band violations, using
shunt blocks only when the PV range alone cannot restore the band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

_EPS_SENS = 1e-12
_EPS_V = 1e-9
_MAX_REPAIR_STEPS = 200


@dataclass(frozen=True)
class DerEnvelope:
    """Aggregate flexibility a feeder group can offer for one interval."""

    pv_p_curtail_max: float
    pv_q_max: float
    pv_q_min: float
    dr_p_max: float
    dr_p_min: float
    losses: float

    def __post_init__(self):
        if self.pv_q_min > self.pv_q_max:
            raise ValueError("pv_q_min must not exceed pv_q_max")
        if self.dr_p_min > self.dr_p_max:
            raise ValueError("dr_p_min must not exceed dr_p_max")
        if self.pv_p_curtail_max < 0.0:
            raise ValueError("pv_p_curtail_max must be non-negative")


@dataclass(frozen=True)
class PvUnit:
    """One dispatchable PV resource as the distribution controller sees it."""

    id: str
    s_rating: float
    k: float = 1.1
    prev_q_kvar: float = 0.0
    is_hw: bool = False

    @property
    def q_cap(self) -> float:
        return self.k * self.s_rating


@dataclass(frozen=True)
class ShuntState:
    """Switchable capacitor bank position at dispatch time."""

    id: str
    kvar_per_block: float
    n_blocks: int
    n_on: int


@dataclass
class DispatchPlan:
    """Device setpoints for one control interval."""

    q_kvar: dict[str, float]
    hw_q_pu: dict[str, float]
    shunt_on: dict[str, int]
    dr_p_kw: float
    delivered_kvar: float
    shortfall_kvar: float
    feasible: bool
    scenario_ctr: int


@dataclass
class TransmissionPlan:
    """Transmission VVC output: DER request plus generator setpoints."""

    q_req_kvar: float
    p_curtail_req_kw: float
    gen_v_sets: dict[str, float]
    degraded: bool = False


def compute_der_envelope(
    units: list[PvUnit],
    p_out_kw: dict[str, float],
    dr_p_max: float = 0.0,
    dr_p_min: float = 0.0,
    losses_kw: float = 0.0,
) -> DerEnvelope:
    """Aggregate the reactive swing and curtailable power of the PV fleet.

    Reactive priority lets every unit reach +-k*s, so the envelope is the
    sum of those bounds; curtailment can remove at most what is currently
    being produced.
    """
    q_cap = sum(u.q_cap for u in units)
    curtail = sum(max(p_out_kw.get(u.id, 0.0), 0.0) for u in units)
    return DerEnvelope(
        pv_p_curtail_max=curtail,
        pv_q_max=q_cap,
        pv_q_min=-q_cap,
        dr_p_max=dr_p_max,
        dr_p_min=dr_p_min,
        losses=losses_kw,
    )


def transmission_vvc(
    v_boundary: float,
    envelope: DerEnvelope,
    s_vq: float,
    gen_v_sets: dict[str, float],
    base_mva: float,
    prev_q_req_kvar: float = 0.0,
    s_vp: float = 0.0,
    v_target: float = 1.0,
    v_upper: float = 1.05,
    v_lower: float = 0.95,
    gen_v_step: float = 0.002,
    min_sensitivity: float = 1e-6,
) -> TransmissionPlan:
    """One transmission VVC step from the measured boundary voltage.

    The correction is the voltage error divided by the boundary
    sensitivity ``s_vq`` (p.u. voltage per p.u. reactive, both on
    ``base_mva``): from rest, q_req * s_vq recovers the error.  Because
    ``v_boundary`` is measured with the previous request still dispatched,
    the correction is added to ``prev_q_req_kvar`` rather than replacing
    it; replacement would flip the error's sign every interval.  The sum
    is clamped to the advertised envelope.  Generator setpoints move
    toward reducing the same error by at most ``gen_v_step`` per call.
    Curtailment is requested only when the boundary is above ``v_upper``
    with the reactive range exhausted.
    """
    e = v_target - v_boundary
    if s_vq < min_sensitivity:
        q_req = prev_q_req_kvar
    else:
        q_req = prev_q_req_kvar + e / s_vq * base_mva * 1000.0
    q_req = max(min(q_req, envelope.pv_q_max), envelope.pv_q_min)

    p_curtail = 0.0
    if v_boundary > v_upper and q_req <= envelope.pv_q_min + _EPS_V:
        s_p = max(s_vp, min_sensitivity)
        p_curtail = min(
            envelope.pv_p_curtail_max,
            (v_boundary - v_upper) / s_p * base_mva * 1000.0,
        )
        p_curtail = max(p_curtail, 0.0)

    # Setpoints land one interval after the request, so take half the
    # remaining error per call; a full step resonates with the reactive loop.
    nudged = {}
    step = max(min(0.5 * e, gen_v_step), -gen_v_step)
    for gen_id, v_set in gen_v_sets.items():
        nudged[gen_id] = min(max(v_set + step, v_lower), v_upper)

    return TransmissionPlan(
        q_req_kvar=q_req,
        p_curtail_req_kw=p_curtail,
        gen_v_sets=nudged,
    )


def _predicted(node_count, v_meas, moves_q, sens_q, moves_shunt, sens_shunt):
    pred = list(v_meas)
    for uid, dq in moves_q.items():
        if dq == 0.0:
            continue
        col = sens_q[uid]
        for n in range(node_count):
            pred[n] += col[n] * dq
    for sid, dkvar in moves_shunt.items():
        if dkvar == 0.0:
            continue
        col = sens_shunt[sid]
        for n in range(node_count):
            pred[n] += col[n] * dkvar
    return pred


def _worst_violation(pred, v_lower, v_upper):
    worst = None
    for n, v in enumerate(pred):
        if v > v_upper + _EPS_V:
            excess = v - v_upper
            if worst is None or excess > worst[1]:
                worst = (n, excess, "over")
        elif v < v_lower - _EPS_V:
            deficit = v_lower - v
            if worst is None or deficit > worst[1]:
                worst = (n, deficit, "under")
    return worst


def distribution_vvc(
    q_req_kvar: float,
    units: list[PvUnit],
    shunts: list[ShuntState],
    v_meas: list[float],
    sens_q: dict[str, list[float]],
    sens_shunt: dict[str, list[float]],
    v_lower: float = 0.95,
    v_upper: float = 1.05,
    scenario_ctr: int = 0,
) -> DispatchPlan:
    """Allocate an aggregate reactive request across the PV fleet.

    Units are filled most-voltage-effective first (descending sensitivity
    column norm, ties by id) up to their +-k*s swing.  Predicted node
    voltages (measured + sensitivity * setpoint changes) are then checked
    against the band; a violation is repaired by minimally adjusting the
    most effective unit for the violated node, and shunt blocks are
    toggled only if the PV range cannot finish the job.
    """
    def norm(uid):
        col = sens_q[uid]
        return math.sqrt(sum(x * x for x in col))

    order = sorted(units, key=lambda u: (-norm(u.id), u.id))
    alloc: dict[str, float] = {}
    remaining = q_req_kvar
    for u in order:
        share = max(min(remaining, u.q_cap), -u.q_cap)
        alloc[u.id] = share
        remaining -= share

    by_id = {u.id: u for u in units}
    node_count = len(v_meas)
    shunt_on = {s.id: s.n_on for s in shunts}
    shunt_by_id = {s.id: s for s in shunts}

    def q_moves():
        return {uid: alloc[uid] - by_id[uid].prev_q_kvar for uid in alloc}

    def shunt_moves():
        return {
            sid: (shunt_on[sid] - shunt_by_id[sid].n_on) * shunt_by_id[sid].kvar_per_block
            for sid in shunt_on
        }

    pv_exhausted = False
    for _ in range(_MAX_REPAIR_STEPS):
        pred = _predicted(node_count, v_meas, q_moves(), sens_q, shunt_moves(), sens_shunt)
        worst = _worst_violation(pred, v_lower, v_upper)
        if worst is None:
            break
        n, gap, side = worst
        best = None
        for u in sorted(units, key=lambda u: u.id):
            s = sens_q[u.id][n]
            if s <= _EPS_SENS:
                continue
            # Repair only walks an allocation back toward zero; a violation
            # that would exist with no setpoint change at all is not fought
            # by out-dispatching the aggregate request.
            if side == "over":
                room = max(alloc[u.id], 0.0)
            else:
                room = max(-alloc[u.id], 0.0)
            if room <= 0.0:
                continue
            need = gap / s
            move = min(need, room)
            # Prefer the unit needing the smallest total adjustment.
            if best is None or need < best[1]:
                best = (u.id, need, move)
        if best is None:
            pv_exhausted = True
            break
        uid, _need, move = best
        if side == "over":
            alloc[uid] -= move
        else:
            alloc[uid] += move

    if pv_exhausted:
        for _ in range(_MAX_REPAIR_STEPS):
            pred = _predicted(node_count, v_meas, q_moves(), sens_q, shunt_moves(), sens_shunt)
            worst = _worst_violation(pred, v_lower, v_upper)
            if worst is None:
                break
            n, gap, side = worst
            best = None
            for s in sorted(shunts, key=lambda s: s.id):
                col = sens_shunt[s.id][n]
                if col <= _EPS_SENS or s.kvar_per_block <= 0.0:
                    continue
                if side == "over" and shunt_on[s.id] > 0:
                    effect = col * s.kvar_per_block
                elif side == "under" and shunt_on[s.id] < s.n_blocks:
                    effect = col * s.kvar_per_block
                else:
                    continue
                if best is None or effect > best[1]:
                    best = (s.id, effect)
            if best is None:
                break
            sid, _eff = best
            shunt_on[sid] += -1 if side == "over" else 1

    pred = _predicted(node_count, v_meas, q_moves(), sens_q, shunt_moves(), sens_shunt)
    feasible = _worst_violation(pred, v_lower, v_upper) is None

    delivered = sum(alloc.values())
    hw_q_pu = {
        u.id: alloc[u.id] / u.s_rating for u in units if u.is_hw
    }
    return DispatchPlan(
        q_kvar=dict(alloc),
        hw_q_pu=hw_q_pu,
        shunt_on=shunt_on,
        dr_p_kw=0.0,
        delivered_kvar=delivered,
        shortfall_kvar=q_req_kvar - delivered,
        feasible=feasible,
        scenario_ctr=scenario_ctr,
    )
