"""Voltage sensitivity extraction by perturb-and-re-solve.

Each actuator column is (|V| after a small reactive injection minus the
base |V|) divided by the injection size.  Injections are expressed in
per-unit on the model's full base, so predicted deviations are simply
``entries @ delta_q_pu`` regardless of how many phases an actuator spans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from gridfed.grid.model import GridModel
from gridfed.powerflow.sweep import (
    Injection,
    PhasorState,
    PowerFlowError,
    solve_feeder,
)


@dataclass(frozen=True)
class Actuator:
    """A reactive injection site used when building sensitivity columns."""

    id: str
    bus: str
    phases: str


@dataclass
class Vsm:
    """Sensitivity of monitored |V| (rows) to actuator Q (columns), p.u./p.u."""

    entries: list[list[float]]
    nodes: list[tuple[str, str]]
    actuators: list[str]
    failed: frozenset[str]

    def column(self, actuator_id: str) -> list[float]:
        j = self.actuators.index(actuator_id)
        return [row[j] for row in self.entries]

    def column_norm(self, actuator_id: str) -> float:
        col = self.column(actuator_id)
        if any(math.isnan(x) for x in col):
            return 0.0
        return math.sqrt(sum(x * x for x in col))

    def predict(self, delta_q_pu: dict[str, float]) -> list[float]:
        """Predicted |V| deviation per monitored node for actuator moves."""
        out = [0.0] * len(self.nodes)
        for act_id, dq in delta_q_pu.items():
            if dq == 0.0:
                continue
            col = self.column(act_id)
            for r, s in enumerate(col):
                out[r] += s * dq
        return out


def compute_vsm(
    model: GridModel,
    head_voltage: dict[str, complex],
    monitored: list[tuple[str, str]],
    actuators: list[Actuator],
    injections=(),
    load_ratings=None,
    shunt_on=None,
    perturbation: float = 0.01,
    base_state: PhasorState | None = None,
) -> Vsm:
    """Forward-difference sensitivities around the given operating point.

    ``perturbation`` is the per-unit reactive step on the model base.  An
    actuator whose perturbed solve fails gets a NaN column and lands in
    ``failed`` instead of raising.
    """
    if perturbation <= 0.0:
        raise ValueError("perturbation must be positive")
    if base_state is None:
        base_state = solve_feeder(
            model, head_voltage, injections, load_ratings, shunt_on
        )
    if not base_state.converged:
        raise PowerFlowError("base state did not converge")

    base_mag = [base_state.vmag(bus, ph) for bus, ph in monitored]
    dq_kvar = perturbation * model.base_mva * 1000.0

    entries = [[0.0] * len(actuators) for _ in monitored]
    failed = set()
    for j, act in enumerate(actuators):
        probe = list(injections) + [
            Injection(bus=act.bus, phases=act.phases, p_kw=0.0, q_kvar=dq_kvar)
        ]
        try:
            st = solve_feeder(model, head_voltage, probe, load_ratings, shunt_on)
        except PowerFlowError:
            st = None
        if st is None or not st.converged:
            failed.add(act.id)
            for r in range(len(monitored)):
                entries[r][j] = float("nan")
            continue
        for r, (bus, ph) in enumerate(monitored):
            entries[r][j] = (st.vmag(bus, ph) - base_mag[r]) / perturbation

    return Vsm(
        entries=entries,
        nodes=list(monitored),
        actuators=[a.id for a in actuators],
        failed=frozenset(failed),
    )
