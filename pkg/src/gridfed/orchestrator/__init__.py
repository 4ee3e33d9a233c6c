"""Scenario definition, run loop, and command-line entry points."""

from gridfed.orchestrator.scenario import (
    ControllerSettings,
    FeederSpec,
    InverterSpec,
    LinkSpec,
    LoadedScenario,
    ScenarioError,
    ScenarioSpec,
    SeverSpec,
    TransmissionSpec,
    load_scenario,
    parse_scenario,
)
from gridfed.orchestrator.run import Simulation, SimulationError, run_scenario

__all__ = [
    "ScenarioError",
    "ScenarioSpec",
    "LoadedScenario",
    "TransmissionSpec",
    "FeederSpec",
    "InverterSpec",
    "LinkSpec",
    "SeverSpec",
    "ControllerSettings",
    "parse_scenario",
    "load_scenario",
    "Simulation",
    "SimulationError",
    "run_scenario",
]
