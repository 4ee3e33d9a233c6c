"""Balanced positive-sequence Newton-Raphson power flow.

Transmission models are authored as single-phase ("a") networks whose
branch impedances are already positive-sequence per-unit values.  Power
conversion uses the full system base: a load record of ``p_kw`` kW is
``p_kw / (1000 * base_mva)`` p.u., generator setpoints are MW / MVAr.
Loads keep their ZIP behavior; generator buses hold voltage until a
reactive limit binds, then are pinned at that limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gridfed.grid.model import GridModel
from gridfed.powerflow.sweep import PhasorState, PowerFlowError

_ZIP_EXPONENT = {"constant_power": 0, "constant_current": 1, "constant_impedance": 2}


@dataclass
class TransmissionSolution:
    """Solved state plus generator operating points."""

    state: PhasorState
    gen_q_mvar: dict[str, float]
    slack_p_mw: float
    slack_q_mvar: float
    q_limited: frozenset[str]


def solve_transmission(
    model: GridModel,
    boundary_loads: dict[str, complex] | None = None,
    injections: dict[str, complex] | None = None,
    load_ratings=None,
    v_set_overrides: dict[str, float] | None = None,
    shunt_on=None,
    tol: float = 1e-8,
    max_iter: int = 30,
) -> TransmissionSolution:
    """Solve the balanced network against its generator setpoints.

    ``boundary_loads`` adds constant-power draws in kW/kVAR (complex) per
    bus; ``injections`` adds constant-power generation the same way.
    ``v_set_overrides`` replaces generator voltage setpoints per bus.
    """
    model.validate()
    for bus in model.buses:
        if bus.phases != "a":
            raise PowerFlowError(
                f"balanced solver expects single-phase buses, bus {bus.id} has '{bus.phases}'"
            )

    n = len(model.buses)
    index = {b.id: i for i, b in enumerate(model.buses)}
    s_base_kw = model.base_mva * 1000.0

    gens = {}
    for g in model.generators:
        if g.bus in gens:
            raise PowerFlowError(f"more than one generator at bus {g.bus}")
        gens[g.bus] = g

    slack_id = model.slack_bus.id
    slack_i = index[slack_id]
    slack_g = gens.get(slack_id)
    v_sets = {}
    for bus_id, g in gens.items():
        v_sets[bus_id] = g.v_set
    if v_set_overrides:
        for bus_id, v in v_set_overrides.items():
            if bus_id not in gens:
                raise PowerFlowError(f"voltage setpoint override at non-generator bus {bus_id}")
            v_sets[bus_id] = v

    pv = sorted(
        (index[b] for b in gens if b != slack_id and gens[b].p_set is not None),
        key=lambda i: i,
    )
    for bus_id, g in gens.items():
        if bus_id != slack_id and g.p_set is None:
            raise PowerFlowError(f"generator at non-slack bus {bus_id} needs a p_set")

    # Admittance matrix.
    ybus = np.zeros((n, n), dtype=complex)
    for br in model.branches:
        i, j = index[br.from_bus], index[br.to_bus]
        y = 1.0 / br.z_matrix[0][0]
        ybus[i, i] += y
        ybus[j, j] += y
        ybus[i, j] -= y
        ybus[j, i] -= y
    for k, sh in enumerate(model.shunts):
        n_on = sh.n_on if shunt_on is None or shunt_on[k] is None else shunt_on[k]
        if n_on < 0 or n_on > sh.n_blocks:
            raise PowerFlowError(
                f"shunt {sh.id}: {n_on} blocks requested, {sh.n_blocks} installed"
            )
        b_pu = sh.kvar_per_block * n_on / s_base_kw
        ybus[index[sh.bus], index[sh.bus]] += complex(0.0, b_pu)

    # Per-bus ZIP coefficients: draw = cp + ci*Vm + cz*Vm^2, per-unit.
    zip_c = np.zeros((3, n), dtype=complex)
    for k, load in enumerate(model.loads):
        if load_ratings is not None and load_ratings[k] is not None:
            p_kw, q_kvar = load_ratings[k]
        else:
            p_kw, q_kvar = load.rated_p, load.rated_q
        zip_c[_ZIP_EXPONENT[load.kind], index[load.bus]] += complex(p_kw, q_kvar) / s_base_kw
    if boundary_loads:
        for bus_id, s_kw in boundary_loads.items():
            zip_c[0, index[bus_id]] += complex(s_kw) / s_base_kw

    gen_p = np.zeros(n)
    if injections:
        for bus_id, s_kw in injections.items():
            s = complex(s_kw) / s_base_kw
            zip_c[0, index[bus_id]] -= s
    for bus_id, g in gens.items():
        if g.p_set is not None:
            gen_p[index[bus_id]] += g.p_set / model.base_mva

    # Reactive pins for generator buses driven to a limit (p.u.).
    q_pinned: dict[int, float] = {}
    pv_set = list(pv)

    vm = np.ones(n)
    va = np.zeros(n)
    vm[slack_i] = v_sets.get(slack_id, 1.0)
    for i in pv_set:
        vm[i] = v_sets[model.buses[i].id]

    state = None
    for _round in range(n + 2):
        vm, va, iterations, converged = _nr_iterate(
            ybus, zip_c, gen_p, q_pinned, vm, va, slack_i, pv_set, tol, max_iter
        )
        volts = {
            model.buses[i].id: {"a": complex(vm[i] * np.cos(va[i]), vm[i] * np.sin(va[i]))}
            for i in range(n)
        }
        state = PhasorState(voltages=volts, iterations=iterations, converged=converged)
        if not converged:
            break

        # Generator reactive output = network demand + local load draw.
        v = vm * np.exp(1j * va)
        s_calc = v * np.conj(ybus @ v)
        load_s = zip_c[0] + zip_c[1] * vm + zip_c[2] * vm * vm
        violated = None
        for i in list(pv_set):
            g = gens[model.buses[i].id]
            q_gen = s_calc[i].imag + load_s[i].imag
            q_min = g.q_min / model.base_mva
            q_max = g.q_max / model.base_mva
            if q_gen < q_min - 1e-9:
                violated = (i, q_min)
                break
            if q_gen > q_max + 1e-9:
                violated = (i, q_max)
                break
        if violated is None:
            break
        i, q_lim = violated
        pv_set.remove(i)
        q_pinned[i] = q_lim

    if state is None or not state.converged:
        return TransmissionSolution(
            state=state,
            gen_q_mvar={},
            slack_p_mw=float("nan"),
            slack_q_mvar=float("nan"),
            q_limited=frozenset(),
        )

    v = vm * np.exp(1j * va)
    s_calc = v * np.conj(ybus @ v)
    load_s = zip_c[0] + zip_c[1] * vm + zip_c[2] * vm * vm
    gen_q = {}
    for bus_id in gens:
        i = index[bus_id]
        if i == slack_i:
            continue
        gen_q[bus_id] = (s_calc[i].imag + load_s[i].imag) * model.base_mva
    slack_p = (s_calc[slack_i].real + load_s[slack_i].real) * model.base_mva
    slack_q = (s_calc[slack_i].imag + load_s[slack_i].imag) * model.base_mva
    limited = frozenset(model.buses[i].id for i in q_pinned)
    return TransmissionSolution(
        state=state,
        gen_q_mvar=gen_q,
        slack_p_mw=slack_p,
        slack_q_mvar=slack_q,
        q_limited=limited,
    )


def _nr_iterate(ybus, zip_c, gen_p, q_pinned, vm, va, slack_i, pv_set, tol, max_iter):
    """Newton iterations on the polar mismatch; returns (vm, va, iters, ok)."""
    n = ybus.shape[0]
    pv_mask = np.zeros(n, dtype=bool)
    pv_mask[list(pv_set)] = True
    pq = [i for i in range(n) if i != slack_i and not pv_mask[i]]
    pvpq = [i for i in range(n) if i != slack_i and pv_mask[i]] + pq
    pvpq.sort()
    pq.sort()

    q_pin = np.zeros(n)
    for i, q in q_pinned.items():
        q_pin[i] = q

    vm = vm.copy()
    va = va.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v = vm * np.exp(1j * va)
        ibus = ybus @ v
        s_calc = v * np.conj(ibus)
        load_s = zip_c[0] + zip_c[1] * vm + zip_c[2] * vm * vm
        s_inj = gen_p + 1j * q_pin - load_s

        f_p = (s_calc.real - s_inj.real)[pvpq]
        f_q = (s_calc.imag - s_inj.imag)[pq]
        f = np.concatenate([f_p, f_q])
        if f.size == 0 or np.max(np.abs(f)) < tol:
            converged = True
            break

        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_vn = np.diag(v / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
        ds_dvm = diag_v @ np.conj(ybus @ diag_vn) + np.conj(diag_i) @ diag_vn

        # ZIP load voltage sensitivity enters through the injection side.
        dload_dvm = zip_c[1] + 2.0 * zip_c[2] * vm
        ds_dvm = ds_dvm + np.diag(dload_dvm)

        j11 = ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = ds_dvm[np.ix_(pvpq, pq)].real
        j21 = ds_dva[np.ix_(pq, pvpq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        jac = np.block([[j11, j12], [j21, j22]])

        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError("singular Jacobian in transmission solve") from exc

        va[pvpq] += dx[: len(pvpq)]
        vm[pq] += dx[len(pvpq):]
        if np.any(vm <= 0.0):
            return vm, va, iterations, False

    return vm, va, iterations, converged
