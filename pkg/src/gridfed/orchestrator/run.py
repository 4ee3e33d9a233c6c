"""The federation run loop.

One Simulation owns the event queue and all federate state.  Network
solves are event-driven: each network tracks a version number bumped by
every input change (boundary frames, profile steps, dispatch, inverter
settling), and ensure() re-solves only when the version moved.  All
values that cross the wire or land in telemetry are quantized to six
decimals, so identical scenarios and seeds reproduce output files byte
for byte.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from pathlib import Path

from gridfed import controllers as ctl
from gridfed.federation.clock import EventQueue
from gridfed.federation.frames import (
    DpvCommand,
    DtBoundary,
    DtConstraints,
    PvdResponse,
    TdBoundary,
    TdRequest,
    encode_frame,
    staleness_check,
)
from gridfed.federation.links import Channel, LinkModel
from gridfed.grid.model import GridModel
from gridfed.grid.profiles import PROFILE_STEP_S, disaggregate_feeder_profile
from gridfed.inverter import (
    InverterParams,
    InverterState,
    advance,
    apply_q_command,
    command,
    response_value,
    update_irradiance,
)
from gridfed.orchestrator.scenario import (
    CTL_DIST,
    CTL_TRANS,
    DIST_HIL,
    LoadedScenario,
    required_channels,
)
from gridfed.powerflow.newton import solve_transmission
from gridfed.powerflow.sweep import (
    Injection,
    feeder_aggregate,
    head_from_boundary,
    solve_feeder,
)
from gridfed.powerflow.vsm import Actuator, compute_vsm


class SimulationError(Exception):
    """A federate failed to initialize or a solve failed mid-run."""


def _q6(v: float) -> float:
    return round(v, 6)


# Owner strings order same-time events: profiles step first, then the
# distribution controller (measurement pull), the transmission controller,
# boundary publishers, inverters, deliveries, and sampling last.  The
# numeric prefix keeps the order independent of federate names.
_OWN_PROFILES = "00:profiles"
_OWN_SAMPLE = "99:sample"


def _own_dist_ctl() -> str:
    return "10:" + CTL_DIST


def _own_trans_ctl() -> str:
    return "20:" + CTL_TRANS


def _own_hil(name: str) -> str:
    return "30:" + name


def _own_hw(name: str) -> str:
    return "40:" + name


def _own_rx(name: str) -> str:
    return "50:" + name


@dataclass
class _Farm:
    id: str
    bus: str
    s_rating: float
    k: float
    dispatchable: bool
    p_avail: float = 0.0
    q_alloc: float = 0.0
    p_limit: float = math.inf

    def injection(self) -> Injection:
        params = InverterParams(s_rating=self.s_rating, k=self.k, settle_tau=0.0)
        p_out, q_out = apply_q_command(self.q_alloc, min(self.p_avail, self.s_rating), params)
        p_out = min(p_out, self.p_limit)
        return Injection(bus=self.bus, phases="abc", p_kw=p_out, q_kvar=q_out)


@dataclass
class _Hw:
    name: str
    feeder: str
    bus: str
    phase: str
    params: InverterParams
    profile_id: str | None
    state: InverterState = field(default_factory=InverterState)
    q_elec: float = 0.0
    p_elec: float = 0.0

    def refresh_electrical(self) -> bool:
        """Quantized electrical output; True when the feeder must re-solve."""
        q = _q6(self.state.q_out)
        p = _q6(self.state.p_out)
        if q != self.q_elec or p != self.p_elec:
            self.q_elec = q
            self.p_elec = p
            return True
        return False

    def injection(self) -> Injection:
        return Injection(bus=self.bus, phases=self.phase, p_kw=self.p_elec, q_kvar=self.q_elec)


class _FeederRt:
    def __init__(self, spec, model: GridModel):
        self.spec = spec
        self.model = model
        self.head_vmag = 1.0
        self.head_angle = 0.0
        self.ratings: list[tuple[float, float]] | None = None
        self.load_series: list[list[tuple[float, float]]] | None = None
        self.farms: list[_Farm] = []
        self.hw: list[_Hw] = []
        self.shunt_on: list[int] = [sh.n_on for sh in model.shunts]
        self.nodes: list[tuple[str, str]] = [
            (b.id, ph) for b in model.buses for ph in b.phases
        ]
        self.version = 0
        self.solved_version = -1
        self.solution = None
        self.aggregate = None

    def injections(self) -> list[Injection]:
        inj = [farm.injection() for farm in self.farms]
        inj.extend(hw.injection() for hw in self.hw)
        return inj

    def head(self) -> dict[str, complex]:
        return head_from_boundary(self.head_vmag, self.head_angle)

    def ensure(self):
        if self.version == self.solved_version:
            return
        inj = self.injections()
        state = solve_feeder(
            self.model, self.head(), inj, self.ratings, self.shunt_on
        )
        if not state.converged:
            raise SimulationError(
                f"feeder {self.spec.name}: power flow did not converge"
            )
        self.solution = state
        self.aggregate = feeder_aggregate(
            self.model, state, inj, self.ratings, self.shunt_on
        )
        self.solved_version = self.version


class _TransRt:
    def __init__(self, spec, model: GridModel, boundary_bus: str):
        self.spec = spec
        self.model = model
        self.boundary_bus = boundary_bus
        self.ratings: list[tuple[float, float]] | None = None
        self.load_series: list[list[tuple[float, float]]] | None = None
        self.boundary_pq = 0j
        self.v_overrides: dict[str, float] = {}
        self.version = 0
        self.solved_version = -1
        self.solution = None

    def ensure(self):
        if self.version == self.solved_version:
            return
        sol = solve_transmission(
            self.model,
            boundary_loads={self.boundary_bus: self.boundary_pq},
            load_ratings=self.ratings,
            v_set_overrides=self.v_overrides or None,
        )
        if sol.state is None or not sol.state.converged:
            raise SimulationError(
                f"transmission {self.spec.name}: power flow did not converge"
            )
        self.solution = sol
        self.solved_version = self.version

    def boundary_v(self) -> float:
        self.ensure()
        return abs(self.solution.state.v(self.boundary_bus, "a"))


@dataclass
class _IntervalRecord:
    q_req_kvar: float = 0.0
    software_kvar: float = 0.0
    hw_alloc: dict[str, float] = field(default_factory=dict)
    shortfall_kvar: float = 0.0
    feasible: bool = True
    planned: bool = False


class Simulation:
    """One scenario execution: wires federates, runs the clock, writes files."""

    def __init__(self, loaded: LoadedScenario, out_dir: str | Path,
                 mode: str | None = None, seed: int | None = None,
                 tap: tuple[str, int] | None = None):
        self.spec = loaded.spec
        self.controls = self.spec.controls
        self.mode = mode or self.spec.mode
        self.seed = self.spec.seed if seed is None else seed
        self.duration = self.spec.duration_s
        self.out_dir = Path(out_dir)
        self.tap_addr = tap
        self.queue = EventQueue()
        self.profiles = loaded.profiles

        c = self.controls
        self.interval_s = c.interval_s

        try:
            self.trans = _TransRt(self.spec.transmission, loaded.trans_model,
                                  self.spec.boundary_bus)
        except Exception as exc:
            raise SimulationError(
                f"federate {self.spec.transmission.name}: {exc}"
            ) from exc

        self.feeders: dict[str, _FeederRt] = {}
        for fed_spec in self.spec.feeders:
            try:
                rt = _FeederRt(fed_spec, loaded.feeder_models[fed_spec.name])
                for farm in rt.model.solar:
                    rt.farms.append(_Farm(
                        id=farm.id,
                        bus=farm.bus,
                        s_rating=farm.s_rating,
                        k=c.pv_k,
                        dispatchable=(farm.id == fed_spec.vvc_farm),
                    ))
                self.feeders[fed_spec.name] = rt
            except Exception as exc:
                raise SimulationError(f"federate {fed_spec.name}: {exc}") from exc

        self.hw_units: dict[str, _Hw] = {}
        for inv in self.spec.inverters:
            try:
                hw = _Hw(
                    name=inv.name,
                    feeder=inv.feeder,
                    bus=inv.bus,
                    phase=inv.phase,
                    params=InverterParams(inv.s_kva, inv.k, inv.settle_tau),
                    profile_id=inv.profile,
                )
                self.hw_units[inv.name] = hw
                self.feeders[inv.feeder].hw.append(hw)
            except Exception as exc:
                raise SimulationError(f"federate {inv.name}: {exc}") from exc

        self._build_series()
        self._build_channels()

        # Transmission-controller state.
        self.ts_last_constraints: DtConstraints | None = None
        self.ts_constraints_time = -1.0
        self.ts_vvc_interval = -1
        self.ts_held = 0
        self.ts_pending_v_sets: dict[str, float] | None = None
        self.ts_last_plan: ctl.TransmissionPlan | None = None
        self.ts_prev_q_req = 0.0

        # Distribution-controller state.
        self.ds_snapshot = None
        self.ds_last_req: TdRequest | None = None
        self.ds_req_ctr = 0
        self.ds_dvvc_interval = -1
        self.ds_held = 0
        self.ds_hw_belief: dict[str, float] = {h: 0.0 for h in self.hw_units}
        self.ds_responses: dict[str, list[tuple[float, float]]] = {
            h: [] for h in self.hw_units
        }

        self.interval_idx = -1
        self.records: dict[int, _IntervalRecord] = {}
        self.summary_rows: list[tuple[int, float, float, float, float]] = []
        self.v_max = float("-inf")
        self.v_min = float("inf")
        self.violations = 0
        self.max_abs_err = 0.0

        self._tfile = None
        self._efile = None
        self._tap_sock = None

    # ----- setup -----------------------------------------------------

    def _build_series(self):
        n_steps = int(self.duration // PROFILE_STEP_S) + 1 if self.duration > 0 else 0
        self.n_steps = n_steps
        times = [i * PROFILE_STEP_S for i in range(n_steps)]
        self.step_times = times

        def series_for(model, profile_id, name):
            if profile_id is None or not times:
                return None, None
            prof = self.profiles[profile_id]
            head = [prof.sample(t) for t in times]
            total_p = sum(load.rated_p for load in model.loads)
            if total_p <= 0.0:
                raise ValueError(
                    f"{name}: load profile given but rated load totals zero"
                )
            per_load = disaggregate_feeder_profile(head, model.loads)
            out = []
            for li, load in enumerate(model.loads):
                q = [
                    load.rated_q * (head[i] / total_p) for i in range(n_steps)
                ]
                out.append([(per_load[li][i], q[i]) for i in range(n_steps)])
            return head, out

        try:
            self.trans_head, self.trans.load_series = series_for(
                self.trans.model, self.spec.transmission.load_profile,
                self.spec.transmission.name,
            )
        except ValueError as exc:
            raise SimulationError(
                f"federate {self.spec.transmission.name}: {exc}"
            ) from exc

        self.feeder_heads: dict[str, list[float] | None] = {}
        for fed_spec in self.spec.feeders:
            rt = self.feeders[fed_spec.name]
            try:
                head, series = series_for(rt.model, fed_spec.load_profile, fed_spec.name)
            except ValueError as exc:
                raise SimulationError(f"federate {fed_spec.name}: {exc}") from exc
            self.feeder_heads[fed_spec.name] = head
            rt.load_series = series

    def _build_channels(self):
        sever_map: dict[tuple[str, str], list[tuple[float, float]]] = {}
        for sev in self.spec.severs:
            sever_map.setdefault((sev.sender, sev.receiver), []).append(
                (sev.t0_s, sev.t1_s)
            )
        self.channels: dict[tuple[str, str, str], Channel] = {}
        for link in self.spec.links:
            windows = tuple(sever_map.get((link.sender, link.receiver), ()))
            model = LinkModel(
                latency=link.latency,
                drop_prob=link.drop_prob,
                sever_windows=windows,
            )
            key = (link.sender, link.receiver, link.frame_tag)
            self.channels[key] = Channel(
                self.seed, link.sender, link.receiver, link.frame_tag, model
            )
        for chan in required_channels(self.spec):
            if chan not in self.channels:
                raise SimulationError(
                    f"missing link configuration for {chan[0]}>{chan[1]}:{chan[2]}"
                )

    # ----- output ----------------------------------------------------

    def _telemetry(self, t: float, stream: str, value: float, unit: str):
        self._tfile.write(f"{t:.6f},{stream},{value:.6f},{unit}\n")

    def _log_event(self, t: float, channel: str, direction: str, text: str):
        self._efile.write(f"{t:.6f},{channel},{direction},{text}\n")

    # ----- frame transport -------------------------------------------

    def _send(self, sender: str, receiver: str, tag: str, frame):
        t = self.queue.now
        line = encode_frame(frame).rstrip("\n")
        chan = self.channels[(sender, receiver, tag)]
        self._log_event(t, chan.name, "send", line)
        if self._tap_sock is not None:
            self._tap_sock.sendall((line + "\n").encode("utf-8"))
        delivery = chan.offer(t)
        if delivery is None:
            self._log_event(t, chan.name, "drop", line)
            return
        self.queue.schedule(
            delivery, _own_rx(receiver), lambda: self._deliver(chan, frame, line)
        )

    def _deliver(self, chan: Channel, frame, line: str):
        self._log_event(self.queue.now, chan.name, "deliver", line)
        tag = chan.frame_tag
        if tag == "TD_BOUNDARY":
            self._on_td_boundary(frame)
        elif tag == "DT_BOUNDARY":
            self._on_dt_boundary(frame)
        elif tag == "DT_CONSTRAINTS":
            self._on_dt_constraints(frame)
        elif tag == "TD_REQUEST":
            self._on_td_request(frame)
        elif tag == "DPV_COMMAND":
            self._on_dpv_command(chan.receiver, frame)
        elif tag == "PVD_RESPONSE":
            self._on_pvd_response(chan.sender, frame)

    # ----- profile steps ---------------------------------------------

    def _profile_step(self, idx: int):
        t = self.queue.now

        if self.trans.load_series is not None:
            self.trans.ratings = [s[idx] for s in self.trans.load_series]
            self.trans.version += 1
            self._telemetry(t, f"head_p.{self.spec.transmission.name}",
                            _q6(self.trans_head[idx]), "kw")

        for fed_spec in self.spec.feeders:
            rt = self.feeders[fed_spec.name]
            changed = False
            if rt.load_series is not None:
                rt.ratings = [s[idx] for s in rt.load_series]
                changed = True
                head = self.feeder_heads[fed_spec.name][idx]
                self._telemetry(t, f"head_p.{fed_spec.name}", _q6(head), "kw")
                self._telemetry(t, f"head_q.{fed_spec.name}",
                                _q6(sum(s[idx][1] for s in rt.load_series)), "kvar")
                for li in range(len(rt.model.loads)):
                    self._telemetry(t, f"load_p.{fed_spec.name}.L{li:02d}",
                                    _q6(rt.load_series[li][idx][0]), "kw")
            if fed_spec.solar_profile is not None and rt.farms:
                total = self.profiles[fed_spec.solar_profile].sample(t)
                s_sum = sum(f.s_rating for f in rt.farms)
                for farm in rt.farms:
                    farm.p_avail = total * farm.s_rating / s_sum
                    self._telemetry(t, f"solar_p.{fed_spec.name}.{farm.id}",
                                    _q6(farm.p_avail), "kw")
                changed = True
            if changed:
                rt.version += 1

        for hw in self.hw_units.values():
            if hw.profile_id is None:
                continue
            sample = self.profiles[hw.profile_id].sample(t)
            advance(hw.params, hw.state, t)
            update_irradiance(hw.params, hw.state, sample)
            self._telemetry(t, f"hw_avail.{hw.name}", _q6(hw.state.p_avail), "kw")
            if hw.refresh_electrical():
                self.feeders[hw.feeder].version += 1

        if idx + 1 < self.n_steps:
            self.queue.schedule(self.step_times[idx + 1], _OWN_PROFILES,
                                lambda: self._profile_step(idx + 1))

    # ----- boundary exchange -----------------------------------------

    def _tick_td(self, n: int):
        t = self.queue.now
        self.trans.ensure()
        v = self.trans.solution.state.v(self.spec.boundary_bus, "a")
        frame = TdBoundary(
            sim_time=t,
            v_mag=abs(v),
            v_angle_a=math.degrees(cmath.phase(v)),
            scenario_ctr=self.interval_idx + 1,
        )
        self._send(self.spec.transmission.name, DIST_HIL, "TD_BOUNDARY", frame)
        nxt = (n + 1) * self.controls.boundary_period_s
        if nxt <= self.duration:
            self.queue.schedule(nxt, _own_hil(self.spec.transmission.name),
                                lambda: self._tick_td(n + 1))

    def _tick_dt(self, n: int):
        t = self.queue.now
        p_total = 0.0
        q_total = 0.0
        for rt in self.feeders.values():
            rt.ensure()
            p_total += rt.aggregate.p_total
            q_total += rt.aggregate.q_total
        frame = DtBoundary(
            sim_time=t, p_total=p_total, q_total=q_total,
            scenario_ctr=self.interval_idx + 1,
        )
        self._send(DIST_HIL, self.spec.transmission.name, "DT_BOUNDARY", frame)
        nxt = (n + 1) * self.controls.boundary_period_s
        if nxt <= self.duration:
            self.queue.schedule(nxt, _own_hil(DIST_HIL),
                                lambda: self._tick_dt(n + 1))

    def _on_td_boundary(self, frame: TdBoundary):
        for rt in self.feeders.values():
            if rt.head_vmag != frame.v_mag or rt.head_angle != frame.v_angle_a:
                rt.head_vmag = frame.v_mag
                rt.head_angle = frame.v_angle_a
                rt.version += 1

    def _on_dt_boundary(self, frame: DtBoundary):
        pq = complex(frame.p_total, frame.q_total)
        if pq != self.trans.boundary_pq:
            self.trans.boundary_pq = pq
            self.trans.version += 1

    # ----- hardware inverter -----------------------------------------

    def _response_tick(self, hw: _Hw, n: int):
        t = self.queue.now
        advance(hw.params, hw.state, t)
        if hw.refresh_electrical():
            self.feeders[hw.feeder].version += 1
        q_pu = response_value(hw.state) / hw.params.s_rating
        frame = PvdResponse(exec_time=t, q_resp=q_pu)
        self._send(hw.name, CTL_DIST, "PVD_RESPONSE", frame)
        nxt = (n + 1) * self.controls.response_period_s
        if nxt <= self.duration:
            self.queue.schedule(nxt, _own_hw(hw.name),
                                lambda: self._response_tick(hw, n + 1))

    def _on_dpv_command(self, hw_name: str, frame: DpvCommand):
        hw = self.hw_units[hw_name]
        q_kvar = frame.q_req * hw.params.s_rating
        command(hw.params, hw.state, q_kvar, self.queue.now)
        if hw.refresh_electrical():
            self.feeders[hw.feeder].version += 1

    def _on_pvd_response(self, hw_name: str, frame: PvdResponse):
        self.ds_responses[hw_name].append((self.queue.now, frame.q_resp))

    # ----- distribution controller -----------------------------------

    def _pull(self, k: int):
        t = self.queue.now
        c = self.controls
        if k > 0:
            self._finalize_interval(k - 1, t)
        self.interval_idx = k
        self._log_event(t, CTL_DIST, "action", "MEASUREMENT_PULL")

        nodes: list[tuple[str, str, str]] = []
        v_meas: list[float] = []
        units: list[ctl.PvUnit] = []
        shunt_states: list[ctl.ShuntState] = []
        sens_q: dict[str, list[float]] = {}
        sens_shunt: dict[str, list[float]] = {}
        unit_site: dict[str, tuple[str, str]] = {}
        losses = 0.0
        q_baseline = 0.0
        p_out_map: dict[str, float] = {}
        dr_max = 0.0
        dr_min = 0.0

        offsets: dict[str, int] = {}
        for fed_spec in self.spec.feeders:
            rt = self.feeders[fed_spec.name]
            rt.ensure()
            offsets[fed_spec.name] = len(nodes)
            for bus, ph in rt.nodes:
                nodes.append((fed_spec.name, bus, ph))
                v_meas.append(rt.solution.vmag(bus, ph))
            losses += rt.aggregate.losses
            dr_max += fed_spec.dr_p_max
            dr_min += fed_spec.dr_p_min
            q_baseline += self._baseline_q(rt)

        n_nodes = len(nodes)

        for fed_spec in self.spec.feeders:
            rt = self.feeders[fed_spec.name]
            base = offsets[fed_spec.name]
            actuators = []
            shunt_ids = set()
            for farm in rt.farms:
                if not farm.dispatchable:
                    continue
                uid = f"{fed_spec.name}:{farm.id}"
                units.append(ctl.PvUnit(
                    id=uid, s_rating=farm.s_rating, k=farm.k,
                    prev_q_kvar=farm.q_alloc, is_hw=False,
                ))
                p_out_map[uid] = farm.injection().p_kw
                unit_site[uid] = (fed_spec.name, farm.id)
                actuators.append(Actuator(id=uid, bus=farm.bus, phases="abc"))
            for hw in rt.hw:
                uid = f"{fed_spec.name}:{hw.name}"
                units.append(ctl.PvUnit(
                    id=uid, s_rating=hw.params.s_rating, k=hw.params.k,
                    prev_q_kvar=self.ds_hw_belief[hw.name], is_hw=True,
                ))
                p_out_map[uid] = hw.p_elec
                unit_site[uid] = (fed_spec.name, hw.name)
                actuators.append(Actuator(id=uid, bus=hw.bus, phases=hw.phase))
            for si, sh in enumerate(rt.model.shunts):
                sid = f"{fed_spec.name}:{sh.id}"
                shunt_ids.add(sid)
                shunt_states.append(ctl.ShuntState(
                    id=sid, kvar_per_block=sh.kvar_per_block,
                    n_blocks=sh.n_blocks, n_on=rt.shunt_on[si],
                ))
                actuators.append(Actuator(id=sid, bus=sh.bus, phases=sh.phases))

            if actuators:
                vsm = compute_vsm(
                    rt.model, rt.head(), rt.nodes, actuators,
                    injections=rt.injections(), load_ratings=rt.ratings,
                    shunt_on=rt.shunt_on, perturbation=c.vsm_delta_pu,
                    base_state=rt.solution,
                )
                per_kvar = 1.0 / (1000.0 * rt.model.base_mva)
                for j, act in enumerate(actuators):
                    col = [0.0] * n_nodes
                    for r in range(len(rt.nodes)):
                        entry = vsm.entries[r][j]
                        if math.isnan(entry):
                            entry = 0.0
                        col[base + r] = entry * per_kvar
                    if act.id in shunt_ids:
                        sens_shunt[act.id] = col
                    else:
                        sens_q[act.id] = col

        envelope = ctl.compute_der_envelope(units, p_out_map, dr_max, dr_min, losses)
        self.ds_snapshot = {
            "k": k,
            "nodes": nodes,
            "v_meas": v_meas,
            "units": units,
            "shunts": shunt_states,
            "sens_q": sens_q,
            "sens_shunt": sens_shunt,
            "unit_site": unit_site,
            "envelope": envelope,
        }
        self._telemetry(t, "vvc.q_baseline", _q6(q_baseline), "kvar")

        send_at = t + c.dist_compute_s
        frame = DtConstraints(
            sim_time=t,
            pv_p_curtail_max=envelope.pv_p_curtail_max,
            pv_q_max=envelope.pv_q_max,
            pv_q_min=envelope.pv_q_min,
            dr_p_max=envelope.dr_p_max,
            dr_p_min=envelope.dr_p_min,
            losses=envelope.losses,
        )
        self.queue.schedule(send_at, _own_dist_ctl(),
                            lambda: self._send(CTL_DIST, CTL_TRANS,
                                               "DT_CONSTRAINTS", frame))

        self.queue.schedule(t + c.trans_deadline_s, _own_trans_ctl(),
                            lambda: self._tvvc_guard(k))
        self.queue.schedule(t + c.dist_deadline_s, _own_dist_ctl(),
                            lambda: self._dvvc_guard(k))

        nxt = (k + 1) * self.interval_s
        if nxt < self.duration:
            self.queue.schedule(nxt, _own_dist_ctl(), lambda: self._pull(k + 1))

    def _baseline_q(self, rt: _FeederRt) -> float:
        """Feeder head Q with no control actions applied (shadow solve)."""
        inj = []
        for farm in rt.farms:
            inj.append(Injection(bus=farm.bus, phases="abc",
                                 p_kw=min(farm.p_avail, farm.s_rating), q_kvar=0.0))
        for hw in rt.hw:
            inj.append(Injection(bus=hw.bus, phases=hw.phase,
                                 p_kw=min(hw.state.p_avail, hw.params.s_rating),
                                 q_kvar=0.0))
        base_on = [sh.n_on for sh in rt.model.shunts]
        state = solve_feeder(rt.model, rt.head(), inj, rt.ratings, base_on)
        if not state.converged:
            raise SimulationError(
                f"feeder {rt.spec.name}: baseline power flow did not converge"
            )
        agg = feeder_aggregate(rt.model, state, inj, rt.ratings, base_on)
        return agg.q_total

    # ----- transmission controller -----------------------------------

    def _gen_commands(self, k: int):
        t = self.queue.now
        self._log_event(t, CTL_TRANS, "action", "GEN_COMMANDS")
        if self.ts_pending_v_sets:
            changed = False
            for bus, v in self.ts_pending_v_sets.items():
                if self.trans.v_overrides.get(bus) != v:
                    self.trans.v_overrides[bus] = v
                    changed = True
            if changed:
                self.trans.version += 1
            self.ts_pending_v_sets = None

    def _on_dt_constraints(self, frame: DtConstraints):
        t = self.queue.now
        self.ts_last_constraints = frame
        self.ts_constraints_time = t
        k = self.interval_idx
        start = k * self.interval_s
        if abs(frame.sim_time - start) < 1e-3 and self.ts_vvc_interval < k:
            self.queue.schedule(t + self.controls.trans_compute_s,
                                _own_trans_ctl(),
                                lambda: self._tvvc(k, degraded=False))

    def _tvvc_guard(self, k: int):
        if self.ts_vvc_interval < k:
            self._tvvc(k, degraded=True)

    def _tvvc(self, k: int, degraded: bool):
        if self.ts_vvc_interval >= k:
            return
        self.ts_vvc_interval = k
        t = self.queue.now
        c = self.controls
        base_mva = self.spec.transmission.base_mva

        if degraded:
            if self.ts_last_plan is not None and self.ts_held < c.hold_max_intervals:
                self.ts_held += 1
                self._log_event(t, CTL_TRANS, "action", "TRANSMISSION_VVC_DEGRADED_HOLD")
                plan = self.ts_last_plan
            else:
                self._log_event(t, CTL_TRANS, "action", "TRANSMISSION_VVC_DEGRADED_NEUTRAL")
                plan = ctl.TransmissionPlan(
                    q_req_kvar=0.0, p_curtail_req_kw=0.0,
                    gen_v_sets={}, degraded=True,
                )
                self.ts_prev_q_req = 0.0
        else:
            self.ts_held = 0
            env_frame = self.ts_last_constraints
            envelope = ctl.DerEnvelope(
                pv_p_curtail_max=env_frame.pv_p_curtail_max,
                pv_q_max=env_frame.pv_q_max,
                pv_q_min=env_frame.pv_q_min,
                dr_p_max=env_frame.dr_p_max,
                dr_p_min=env_frame.dr_p_min,
                losses=env_frame.losses,
            )
            v_b = self.trans.boundary_v()
            s_vq, s_vp = self._boundary_sensitivity()
            gen_sets = {
                g.bus: self.trans.v_overrides.get(g.bus, g.v_set)
                for g in self.trans.model.generators
            }
            plan = ctl.transmission_vvc(
                v_boundary=v_b,
                envelope=envelope,
                s_vq=s_vq,
                gen_v_sets=gen_sets,
                base_mva=base_mva,
                prev_q_req_kvar=self.ts_prev_q_req,
                s_vp=s_vp,
                v_target=c.v_target,
                v_upper=c.v_upper,
                v_lower=c.v_lower,
                gen_v_step=c.gen_v_step,
            )
            self.ts_pending_v_sets = plan.gen_v_sets
            self.ts_last_plan = plan
            self.ts_prev_q_req = plan.q_req_kvar
            self._log_event(t, CTL_TRANS, "action", "TRANSMISSION_VVC")

        frame = TdRequest(
            sim_time=k * self.interval_s,
            p_curtail_req=plan.p_curtail_req_kw / (1000.0 * base_mva),
            q_req=plan.q_req_kvar / (1000.0 * base_mva),
            scenario_ctr=k + 1,
        )
        self._send(CTL_TRANS, CTL_DIST, "TD_REQUEST", frame)

    def _boundary_sensitivity(self) -> tuple[float, float]:
        c = self.controls
        base_mva = self.spec.transmission.base_mva
        delta_kw = c.vsm_delta_pu * base_mva * 1000.0
        v0 = self.trans.boundary_v()

        def probe(extra: complex) -> float:
            sol = solve_transmission(
                self.trans.model,
                boundary_loads={self.spec.boundary_bus: self.trans.boundary_pq},
                load_ratings=self.trans.ratings,
                v_set_overrides=self.trans.v_overrides or None,
                injections={self.spec.boundary_bus: extra},
            )
            if sol.state is None or not sol.state.converged:
                raise SimulationError(
                    "transmission sensitivity probe did not converge"
                )
            return abs(sol.state.v(self.spec.boundary_bus, "a"))

        s_vq = (probe(complex(0.0, delta_kw)) - v0) / c.vsm_delta_pu
        s_vp = (probe(complex(delta_kw, 0.0)) - v0) / c.vsm_delta_pu
        return s_vq, s_vp

    # ----- distribution dispatch -------------------------------------

    def _on_td_request(self, frame: TdRequest):
        t = self.queue.now
        verdict = staleness_check(frame.scenario_ctr, self.ds_req_ctr)
        if verdict == "stale":
            self._log_event(t, CTL_DIST, "action", "STALE_REQUEST_DISCARDED")
            return
        if verdict == "gap":
            missed = frame.scenario_ctr - self.ds_req_ctr - 1
            self._log_event(t, CTL_DIST, "action", f"REQUEST_GAP_{missed}")
        self.ds_req_ctr = frame.scenario_ctr
        self.ds_last_req = frame
        k = frame.scenario_ctr - 1
        if self.ds_dvvc_interval < k:
            self.queue.schedule(t + self.controls.dist_compute_s,
                                _own_dist_ctl(),
                                lambda: self._dvvc(k, degraded=False))

    def _dvvc_guard(self, k: int):
        if self.ds_dvvc_interval < k:
            self._dvvc(k, degraded=True)

    def _dvvc(self, k: int, degraded: bool):
        if self.ds_dvvc_interval >= k:
            return
        self.ds_dvvc_interval = k
        t = self.queue.now
        c = self.controls
        base_mva = self.spec.transmission.base_mva

        if degraded:
            if self.ds_last_req is not None and self.ds_held < c.hold_max_intervals:
                self.ds_held += 1
                self._log_event(t, CTL_DIST, "action", "DISTRIBUTION_VVC_DEGRADED_HOLD")
                req = self.ds_last_req
                q_req_kvar = req.q_req * base_mva * 1000.0
                p_curtail_kw = req.p_curtail_req * base_mva * 1000.0
            else:
                self._log_event(t, CTL_DIST, "action", "DISTRIBUTION_VVC_DEGRADED_NEUTRAL")
                q_req_kvar = 0.0
                p_curtail_kw = 0.0
        else:
            self.ds_held = 0
            req = self.ds_last_req
            q_req_kvar = req.q_req * base_mva * 1000.0
            p_curtail_kw = req.p_curtail_req * base_mva * 1000.0
            self._log_event(t, CTL_DIST, "action", "DISTRIBUTION_VVC")

        snap = self.ds_snapshot
        plan = ctl.distribution_vvc(
            q_req_kvar=q_req_kvar,
            units=snap["units"],
            shunts=snap["shunts"],
            v_meas=snap["v_meas"],
            sens_q=snap["sens_q"],
            sens_shunt=snap["sens_shunt"],
            v_lower=c.v_lower,
            v_upper=c.v_upper,
            scenario_ctr=k + 1,
        )

        rec = _IntervalRecord(q_req_kvar=q_req_kvar, planned=True,
                              shortfall_kvar=plan.shortfall_kvar,
                              feasible=plan.feasible)
        software = 0.0
        for unit in snap["units"]:
            fed_name, device = snap["unit_site"][unit.id]
            rt = self.feeders[fed_name]
            alloc = plan.q_kvar[unit.id]
            if unit.is_hw:
                hw = self.hw_units[device]
                q_pu = plan.hw_q_pu[unit.id]
                self._send(CTL_DIST, hw.name, "DPV_COMMAND",
                           DpvCommand(sim_time=k * self.interval_s, q_req=q_pu))
                self.ds_hw_belief[hw.name] = alloc
                rec.hw_alloc[hw.name] = alloc
            else:
                farm = next(f for f in rt.farms if f.id == device)
                if farm.q_alloc != alloc:
                    farm.q_alloc = alloc
                    rt.version += 1
                software += alloc
        rec.software_kvar = software

        self._apply_curtailment(p_curtail_kw, snap)

        for sh_state in snap["shunts"]:
            fed_name, sid = sh_state.id.split(":", 1)
            rt = self.feeders[fed_name]
            for si, sh in enumerate(rt.model.shunts):
                if sh.id == sid and rt.shunt_on[si] != plan.shunt_on[sh_state.id]:
                    rt.shunt_on[si] = plan.shunt_on[sh_state.id]
                    rt.version += 1

        self.records[k] = rec

    def _apply_curtailment(self, p_curtail_kw: float, snap) -> None:
        """Spread a curtailment request over the software units' p_limit."""
        software_units = [u for u in snap["units"] if not u.is_hw]
        current = {}
        for u in software_units:
            fed_name, device = snap["unit_site"][u.id]
            farm = next(f for f in self.feeders[fed_name].farms if f.id == device)
            current[u.id] = (fed_name, farm, farm.injection().p_kw)
        total = sum(p for _fed, _f, p in current.values())
        for u in software_units:
            fed_name, farm, p_now = current[u.id]
            if p_curtail_kw <= 0.0 or total <= 0.0:
                limit = math.inf
            else:
                limit = max(p_now - p_curtail_kw * (p_now / total), 0.0)
            if farm.p_limit != limit:
                farm.p_limit = limit
                self.feeders[fed_name].version += 1

    # ----- sampling and metrics --------------------------------------

    def _sample(self, n: int):
        t = self.queue.now
        c = self.controls
        for fed_spec in self.spec.feeders:
            rt = self.feeders[fed_spec.name]
            rt.ensure()
            for bus, ph in rt.nodes:
                v = _q6(rt.solution.vmag(bus, ph))
                self._telemetry(t, f"v.{fed_spec.name}.{bus}.{ph}", v, "pu")
                if v > self.v_max:
                    self.v_max = v
                if v < self.v_min:
                    self.v_min = v
                if v > c.v_upper or v < c.v_lower:
                    self.violations += 1
            self._telemetry(t, f"agg_p.{fed_spec.name}", _q6(rt.aggregate.p_total), "kw")
            self._telemetry(t, f"agg_q.{fed_spec.name}", _q6(rt.aggregate.q_total), "kvar")
        self._telemetry(t, "trans.v_boundary", _q6(self.trans.boundary_v()), "pu")
        nxt = (n + 1) * c.response_period_s
        if nxt <= self.duration:
            self.queue.schedule(nxt, _OWN_SAMPLE, lambda: self._sample(n + 1))

    def _finalize_interval(self, k: int, t_end: float):
        rec = self.records.get(k, _IntervalRecord())
        t0 = k * self.interval_s
        hw_total = 0.0
        for hw_name, responses in self.ds_responses.items():
            latest = None
            for rt_t, q_pu in responses:
                if t0 < rt_t <= t_end + 1e-9:
                    latest = q_pu
            if latest is not None:
                hw_total += latest * self.hw_units[hw_name].params.s_rating
            alloc = rec.hw_alloc.get(hw_name, 0.0)
            self._telemetry(t_end, f"vvc.hw_alloc.{hw_name}", _q6(alloc), "kvar")

        q_req = _q6(rec.q_req_kvar)
        q_resp = _q6(rec.software_kvar + hw_total)
        q_err = _q6(q_resp - q_req)
        self._telemetry(t_end, "vvc.q_req", q_req, "kvar")
        self._telemetry(t_end, "vvc.q_resp", q_resp, "kvar")
        self._telemetry(t_end, "vvc.q_error", q_err, "kvar")
        self._telemetry(t_end, "vvc.q_shortfall", _q6(rec.shortfall_kvar), "kvar")
        if abs(q_err) > self.max_abs_err:
            self.max_abs_err = abs(q_err)
        self.summary_rows.append((k, t0, q_req, q_resp, q_err))

    # ----- top level --------------------------------------------------

    def run(self) -> dict:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if self.tap_addr is not None:
            import socket
            try:
                self._tap_sock = socket.create_connection(self.tap_addr, timeout=5.0)
            except OSError as exc:
                raise SimulationError(f"cannot connect tap to {self.tap_addr}: {exc}") from exc

        try:
            with open(self.out_dir / "telemetry.csv", "w", encoding="utf-8") as tf, \
                 open(self.out_dir / "events.csv", "w", encoding="utf-8") as ef:
                self._tfile = tf
                self._efile = ef
                tf.write("time_s,stream,value,unit\n")
                ef.write("time_s,channel,direction,frame\n")

                if self.duration > 0.0:
                    self.queue.schedule(0.0, _OWN_PROFILES,
                                        lambda: self._profile_step(0))
                    self.queue.schedule(0.0, _own_dist_ctl(), lambda: self._pull(0))
                    self._schedule_gen_commands()
                    self.queue.schedule(0.0, _own_hil(self.spec.transmission.name),
                                        lambda: self._tick_td(0))
                    self.queue.schedule(0.0, _own_hil(DIST_HIL),
                                        lambda: self._tick_dt(0))
                    period = self.controls.response_period_s
                    for hw in self.hw_units.values():
                        if period <= self.duration:
                            self.queue.schedule(
                                period, _own_hw(hw.name),
                                lambda hw=hw: self._response_tick(hw, 1),
                            )
                    self.queue.schedule(0.0, _OWN_SAMPLE, lambda: self._sample(0))

                    pace = 1.0 if self.mode == "realtime" else None
                    self.queue.run(self.duration, pace=pace)
                    self._finalize_interval(self.interval_idx, self.duration)
        finally:
            self._tfile = None
            self._efile = None
            if self._tap_sock is not None:
                self._tap_sock.close()
                self._tap_sock = None

        summary = self._write_summary()
        return summary

    def _schedule_gen_commands(self):
        k = 0
        t = 0.0
        while t < self.duration:
            self.queue.schedule(t, _own_trans_ctl(),
                                lambda k=k: self._gen_commands(k))
            k += 1
            t = k * self.interval_s

    def _write_summary(self) -> dict:
        v_max = self.v_max if self.v_max != float("-inf") else 0.0
        v_min = self.v_min if self.v_min != float("inf") else 0.0
        lines = [
            f"max_node_v_pu {v_max:.6f}",
            f"min_node_v_pu {v_min:.6f}",
            f"max_abs_tracking_error_kvar {self.max_abs_err:.6f}",
            f"band_violation_count {self.violations}",
            f"intervals {len(self.summary_rows)}",
            "interval t_start_s q_req_kvar q_resp_kvar q_error_kvar",
        ]
        for k, t0, q_req, q_resp, q_err in self.summary_rows:
            lines.append(
                f"{k} {t0:.6f} {q_req:.6f} {q_resp:.6f} {q_err:.6f}"
            )
        text = "\n".join(lines) + "\n"
        (self.out_dir / "summary.txt").write_text(text, encoding="utf-8")
        return {
            "max_node_v_pu": v_max,
            "min_node_v_pu": v_min,
            "max_abs_tracking_error_kvar": self.max_abs_err,
            "band_violation_count": self.violations,
            "intervals": len(self.summary_rows),
        }


def run_scenario(loaded: LoadedScenario, out_dir: str | Path,
                 mode: str | None = None, seed: int | None = None,
                 tap: tuple[str, int] | None = None) -> dict:
    """Execute a loaded scenario and write telemetry, events, and summary."""
    sim = Simulation(loaded, out_dir, mode=mode, seed=seed, tap=tap)
    return sim.run()
