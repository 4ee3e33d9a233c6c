"""Backward/forward sweep power flow for radial unbalanced feeders.

Voltages are complex per-unit phasors per (bus, phase).  Powers at the
device level are kW / kVAR; internally everything runs on a per-phase
power base of ``base_mva * 1000 / 3`` kW so that a balanced three-phase
device rated ``base_mva`` MVA is 1.0 p.u. on each phase.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from gridfed.grid.model import GridModel, ModelError, ZipLoad, canonical_phases

# Angle offsets for a positive-sequence a/b/c set, radians.
_PHASE_ANGLE = {"a": 0.0, "b": -2.0 * math.pi / 3.0, "c": 2.0 * math.pi / 3.0}

# Below this magnitude the solution is treated as collapsed rather than
# letting load currents blow up in the next backward pass.
_COLLAPSE_V = 0.05

_ZIP_EXPONENT = {"constant_power": 0, "constant_current": 1, "constant_impedance": 2}


class PowerFlowError(Exception):
    """Raised when a solve cannot produce a usable state."""


@dataclass
class PhasorState:
    """Solved complex voltages keyed by bus id then phase letter."""

    voltages: dict[str, dict[str, complex]]
    iterations: int
    converged: bool

    def v(self, bus: str, phase: str) -> complex:
        return self.voltages[bus][phase]

    def vmag(self, bus: str, phase: str) -> float:
        return abs(self.voltages[bus][phase])


@dataclass(frozen=True)
class Injection:
    """Constant-power generation at a bus, split equally across phases."""

    bus: str
    phases: str
    p_kw: float
    q_kvar: float


@dataclass(frozen=True)
class FeederAggregate:
    """Net complex power drawn through the feeder head, plus series losses."""

    p_total: float
    q_total: float
    losses: float


def evaluate_zip(load: ZipLoad, v: complex) -> complex:
    """Complex power drawn by ``load`` at voltage ``v``, in rating units.

    constant_power ignores |v|, constant_current scales with |v|,
    constant_impedance with |v| squared.
    """
    mag = abs(v)
    if mag == 0.0:
        raise PowerFlowError("zero voltage magnitude in load evaluation")
    scale = mag ** _ZIP_EXPONENT[load.kind]
    return complex(load.rated_p, load.rated_q) * scale


def head_from_boundary(v_mag: float, angle_a_deg: float, phases: str = "abc") -> dict[str, complex]:
    """Balanced head phasors from a magnitude and a phase-a angle."""
    out = {}
    for ph in canonical_phases(phases):
        out[ph] = cmath.rect(v_mag, math.radians(angle_a_deg) + _PHASE_ANGLE[ph])
    return out


@dataclass
class _FeederPlan:
    """Topology compiled once per model: BFS order plus parent branches."""

    order: list[str]                       # bus ids, root first
    parent: dict[str, str]                 # child bus -> parent bus
    parent_z: dict[str, tuple]            # child bus -> branch z rows (tuple of tuples)
    parent_phases: dict[str, str]          # child bus -> branch phase letters
    children: dict[str, list[str]]         # bus -> child buses
    bus_phases: dict[str, str]
    loads_at: dict[str, list[int]]         # bus -> indices into model.loads
    shunts_at: dict[str, list[int]]
    inj_cache: dict = field(default_factory=dict)


_plan_cache: dict[int, tuple] = {}


def _plan(model: GridModel) -> _FeederPlan:
    key = id(model)
    hit = _plan_cache.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]

    model.validate(require_radial=True)
    root = model.slack_bus.id
    adj: dict[str, list[tuple[str, object]]] = {b.id: [] for b in model.buses}
    for br in model.branches:
        adj[br.from_bus].append((br.to_bus, br))
        adj[br.to_bus].append((br.from_bus, br))

    bus_phases = {b.id: b.phases for b in model.buses}
    order = [root]
    parent: dict[str, str] = {}
    parent_z: dict[str, tuple] = {}
    parent_phases: dict[str, str] = {}
    children: dict[str, list[str]] = {b.id: [] for b in model.buses}
    seen = {root}
    frontier = [root]
    while frontier:
        nxt = []
        for bus in frontier:
            for other, br in adj[bus]:
                if other in seen:
                    continue
                seen.add(other)
                shared = model.shared_phases(br)
                child_ph = bus_phases[other]
                missing = [p for p in child_ph if p not in shared]
                if missing:
                    raise ModelError(
                        f"phase {missing[0]} of bus {other} is not carried by its supply branch"
                    )
                order.append(other)
                parent[other] = bus
                parent_phases[other] = shared
                parent_z[other] = _permute_z(br.z_matrix, shared, shared)
                children[bus].append(other)
                nxt.append(other)
        frontier = nxt

    loads_at: dict[str, list[int]] = {b.id: [] for b in model.buses}
    for i, load in enumerate(model.loads):
        loads_at[load.bus].append(i)
    shunts_at: dict[str, list[int]] = {b.id: [] for b in model.buses}
    for i, sh in enumerate(model.shunts):
        shunts_at[sh.bus].append(i)

    plan = _FeederPlan(
        order=order,
        parent=parent,
        parent_z=parent_z,
        parent_phases=parent_phases,
        children=children,
        bus_phases=bus_phases,
        loads_at=loads_at,
        shunts_at=shunts_at,
    )
    _plan_cache[key] = (model, plan)
    return plan


def _permute_z(z: tuple, branch_phases: str, want: str) -> tuple:
    """Rows/cols of the branch impedance for the requested phase subset."""
    idx = [branch_phases.index(p) for p in want]
    return tuple(tuple(z[i][j] for j in idx) for i in idx)


def _per_phase_draws(
    model: GridModel,
    plan: _FeederPlan,
    injections,
    load_ratings,
    shunt_on,
    s_base_phase: float,
):
    """Constant coefficients of the per-(bus, phase) draw: one entry per ZIP kind.

    Returns dict bus -> dict phase -> [s_cp, s_ci, s_cz] in per-unit, where the
    actual draw at voltage v is s_cp + s_ci*|v| + s_cz*|v|^2.
    """
    draws: dict[str, dict[str, list[complex]]] = {}
    for bus_id, phs in plan.bus_phases.items():
        draws[bus_id] = {p: [0j, 0j, 0j] for p in phs}

    for i, load in enumerate(model.loads):
        if load_ratings is not None and load_ratings[i] is not None:
            p_kw, q_kvar = load_ratings[i]
        else:
            p_kw, q_kvar = load.rated_p, load.rated_q
        nph = len(load.phases)
        s = complex(p_kw, q_kvar) / nph / s_base_phase
        slot = _ZIP_EXPONENT[load.kind]
        for ph in load.phases:
            draws[load.bus][ph][slot] += s

    for i, sh in enumerate(model.shunts):
        n_on = sh.n_on if shunt_on is None or shunt_on[i] is None else shunt_on[i]
        if n_on < 0 or n_on > sh.n_blocks:
            raise PowerFlowError(
                f"shunt {sh.id}: {n_on} blocks requested, {sh.n_blocks} installed"
            )
        if n_on == 0:
            continue
        q_kvar = sh.kvar_per_block * n_on
        nph = len(sh.phases)
        s = complex(0.0, -q_kvar) / nph / s_base_phase
        for ph in sh.phases:
            draws[sh.bus][ph][2] += s

    for inj in injections:
        phs = canonical_phases(inj.phases)
        bus = plan.bus_phases.get(inj.bus)
        if bus is None:
            raise PowerFlowError(f"injection references unknown bus {inj.bus}")
        for ph in phs:
            if ph not in bus:
                raise PowerFlowError(
                    f"injection at bus {inj.bus} uses phase {ph} absent from that bus"
                )
        s = -complex(inj.p_kw, inj.q_kvar) / len(phs) / s_base_phase
        for ph in phs:
            draws[inj.bus][ph][0] += s

    return draws


def solve_feeder(
    model: GridModel,
    head_voltage: dict[str, complex],
    injections=(),
    load_ratings=None,
    shunt_on=None,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PhasorState:
    """Solve a radial feeder against a fixed head voltage.

    ``head_voltage`` maps each phase of the slack bus to its complex p.u.
    phasor.  ``injections`` add constant-power generation; ``load_ratings``
    optionally overrides (p_kw, q_kvar) per load index; ``shunt_on``
    optionally overrides energized block counts per shunt index.
    """
    plan = _plan(model)
    root = plan.order[0]
    s_base_phase = model.base_mva * 1000.0 / 3.0

    head = {}
    for ph in plan.bus_phases[root]:
        if ph not in head_voltage:
            raise PowerFlowError(f"head voltage missing phase {ph}")
        v = complex(head_voltage[ph])
        if not 0.5 < abs(v) < 1.5:
            raise PowerFlowError(f"head voltage magnitude {abs(v):.4f} outside (0.5, 1.5)")
        head[ph] = v

    draws = _per_phase_draws(model, plan, injections, load_ratings, shunt_on, s_base_phase)

    # Flat start: every bus at the head phasor of its phase.
    volt: dict[str, dict[str, complex]] = {}
    ref = head_from_boundary(1.0, 0.0)
    for bus_id, phs in plan.bus_phases.items():
        if bus_id == root:
            volt[bus_id] = dict(head)
        else:
            volt[bus_id] = {p: head.get(p, ref[p]) for p in phs}

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        branch_i = _branch_currents(plan, draws, volt)
        if branch_i is None:
            return PhasorState(voltages=volt, iterations=iterations, converged=False)

        delta = 0.0
        for bus_id in plan.order[1:]:
            parent = plan.parent[bus_id]
            phs = plan.parent_phases[bus_id]
            z = plan.parent_z[bus_id]
            cur = branch_i[bus_id]
            vp = volt[parent]
            for r, ph in enumerate(phs):
                drop = sum(z[r][c] * cur[pc] for c, pc in enumerate(phs))
                v_new = vp[ph] - drop
                if not cmath.isfinite(v_new):
                    return PhasorState(voltages=volt, iterations=iterations,
                                       converged=False)
                d = abs(v_new - volt[bus_id][ph])
                if d > delta:
                    delta = d
                volt[bus_id][ph] = v_new
        if delta < tol:
            converged = True
            break

    return PhasorState(voltages=volt, iterations=iterations, converged=converged)


def _branch_currents(plan: _FeederPlan, draws, volt):
    """Per-branch phase currents (keyed by child bus) for the present voltages.

    Returns None when any voltage has collapsed below the usable range.
    """
    inj: dict[str, dict[str, complex]] = {}
    for bus_id in plan.order:
        bus_i = {}
        for ph, (s_cp, s_ci, s_cz) in draws[bus_id].items():
            v = volt[bus_id][ph]
            mag = abs(v)
            if mag < _COLLAPSE_V:
                return None
            s = s_cp + s_ci * mag + s_cz * mag * mag
            bus_i[ph] = (s / v).conjugate() if s != 0j else 0j
        inj[bus_id] = bus_i

    flows: dict[str, dict[str, complex]] = {}
    for bus_id in reversed(plan.order):
        if bus_id == plan.order[0]:
            continue
        acc = dict(inj[bus_id])
        for child in plan.children[bus_id]:
            for ph, cur in flows[child].items():
                acc[ph] = acc.get(ph, 0j) + cur
        flows[bus_id] = {p: acc.get(p, 0j) for p in plan.parent_phases[bus_id]}
    return flows


def feeder_aggregate(
    model: GridModel,
    state: PhasorState,
    injections=(),
    load_ratings=None,
    shunt_on=None,
) -> FeederAggregate:
    """Head power draw and series losses for a solved feeder state, in kW/kVAR."""
    if not state.converged:
        raise PowerFlowError("cannot aggregate a non-converged state")
    plan = _plan(model)
    s_base_phase = model.base_mva * 1000.0 / 3.0
    draws = _per_phase_draws(model, plan, injections, load_ratings, shunt_on, s_base_phase)
    flows = _branch_currents(plan, draws, state.voltages)
    if flows is None:
        raise PowerFlowError("cannot aggregate a collapsed state")

    root = plan.order[0]
    head_s = 0j
    for child in plan.children[root]:
        for ph, cur in flows[child].items():
            head_s += state.voltages[root][ph] * cur.conjugate()

    loss = 0j
    for bus_id in plan.order[1:]:
        phs = plan.parent_phases[bus_id]
        z = plan.parent_z[bus_id]
        cur = flows[bus_id]
        for r, ph in enumerate(phs):
            drop = sum(z[r][c] * cur[pc] for c, pc in enumerate(phs))
            loss += drop * cur[ph].conjugate()

    head_s *= s_base_phase
    loss *= s_base_phase
    return FeederAggregate(p_total=head_s.real, q_total=head_s.imag, losses=loss.real)


def feeder_balance(
    model: GridModel,
    state: PhasorState,
    injections=(),
    load_ratings=None,
    shunt_on=None,
) -> float:
    """Residual of head power minus (loads + losses - injections), kW magnitude.

    A converged state on valid data keeps this near zero; tests use it as
    an energy-balance invariant.
    """
    plan = _plan(model)
    s_base_phase = model.base_mva * 1000.0 / 3.0
    agg = feeder_aggregate(model, state, injections, load_ratings, shunt_on)
    draws = _per_phase_draws(model, plan, injections, load_ratings, shunt_on, s_base_phase)

    drawn = 0j
    for bus_id, per_phase in draws.items():
        for ph, (s_cp, s_ci, s_cz) in per_phase.items():
            mag = abs(state.voltages[bus_id][ph])
            drawn += s_cp + s_ci * mag + s_cz * mag * mag
    drawn *= s_base_phase

    # Complex series drop, reactive part included.
    flows = _branch_currents(plan, draws, state.voltages)
    loss = 0j
    for bus_id in plan.order[1:]:
        phs = plan.parent_phases[bus_id]
        z = plan.parent_z[bus_id]
        cur = flows[bus_id]
        for r, ph in enumerate(phs):
            drop = sum(z[r][c] * cur[pc] for c, pc in enumerate(phs))
            loss += drop * cur[ph].conjugate()

    residual = complex(agg.p_total, agg.q_total) - drawn - loss * s_base_phase
    return abs(residual)
