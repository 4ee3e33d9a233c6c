"""Quasi-static phasor power-flow solvers and derived quantities."""

from gridfed.powerflow.sweep import (
    FeederAggregate,
    Injection,
    PhasorState,
    PowerFlowError,
    evaluate_zip,
    feeder_aggregate,
    feeder_balance,
    head_from_boundary,
    solve_feeder,
)
from gridfed.powerflow.newton import TransmissionSolution, solve_transmission
from gridfed.powerflow.vsm import Actuator, Vsm, compute_vsm

__all__ = [
    "PhasorState",
    "FeederAggregate",
    "Injection",
    "PowerFlowError",
    "evaluate_zip",
    "solve_feeder",
    "feeder_aggregate",
    "feeder_balance",
    "head_from_boundary",
    "TransmissionSolution",
    "solve_transmission",
    "Actuator",
    "Vsm",
    "compute_vsm",
]
