"""Shared fixtures: scenario runs are expensive, so each one runs once per session."""

from __future__ import annotations

import time
from pathlib import Path

import pytest

from gridfed.orchestrator.run import run_scenario
from gridfed.orchestrator.scenario import load_scenario

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"


def run_once(name: str, out_dir: Path, seed: int | None = None) -> dict:
    loaded = load_scenario(SCENARIOS / name)
    return run_scenario(loaded, out_dir, mode="sim", seed=seed)


class RunResult:
    def __init__(self, out_dir: Path, summary: dict, wall_s: float = 0.0):
        self.out_dir = out_dir
        self.summary = summary
        self.wall_s = wall_s

    @property
    def telemetry(self) -> Path:
        return self.out_dir / "telemetry.csv"

    @property
    def events(self) -> Path:
        return self.out_dir / "events.csv"

    @property
    def summary_txt(self) -> Path:
        return self.out_dir / "summary.txt"

    def telemetry_rows(self) -> list[tuple[float, str, float, str]]:
        rows = []
        with open(self.telemetry, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                t, stream, value, unit = line.rstrip("\n").split(",")
                rows.append((float(t), stream, float(value), unit))
        return rows

    def event_rows(self) -> list[tuple[float, str, str, str]]:
        rows = []
        with open(self.events, encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                t, channel, direction, frame = line.rstrip("\n").split(",", 3)
                rows.append((float(t), channel, direction, frame))
        return rows


def _session_run(tmp_path_factory, name: str, label: str) -> RunResult:
    out = tmp_path_factory.mktemp(label)
    start = time.perf_counter()
    summary = run_once(name, out)
    return RunResult(out, summary, wall_s=time.perf_counter() - start)


@pytest.fixture(scope="session")
def healthy_run(tmp_path_factory) -> RunResult:
    return _session_run(tmp_path_factory, "healthy.scn", "healthy")


@pytest.fixture(scope="session")
def sever_run(tmp_path_factory) -> RunResult:
    return _session_run(tmp_path_factory, "sever.scn", "sever")


@pytest.fixture(scope="session")
def timeline_run(tmp_path_factory) -> RunResult:
    return _session_run(tmp_path_factory, "timeline.scn", "timeline")


@pytest.fixture(scope="session")
def demo_runs(tmp_path_factory) -> tuple[RunResult, RunResult]:
    """The demo scenario executed twice with the same seed, for determinism checks."""
    out_a = tmp_path_factory.mktemp("demo_a")
    out_b = tmp_path_factory.mktemp("demo_b")
    loaded = load_scenario(SCENARIOS / "demo.scn")
    sum_a = run_scenario(loaded, out_a, mode="sim", seed=42)
    loaded = load_scenario(SCENARIOS / "demo.scn")
    sum_b = run_scenario(loaded, out_b, mode="sim", seed=42)
    return RunResult(out_a, sum_a), RunResult(out_b, sum_b)
