"""Time-series profiles and feeder-head load disaggregation.

Profiles are CSV documents with header ``time_s,value`` sampled at a fixed
300 s spacing; sampling is piecewise-constant (hold last value).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

from gridfed.grid.model import GridFileError, ZipLoad

PROFILE_STEP_S = 300.0

# disaggregated load values are quantized to 0.01 kW so the residual rule can
# be stated and checked exactly
QUANTUM = 0.01


@dataclass(frozen=True)
class Profile:
    times: tuple  # seconds, ascending, 300 s spacing
    values: tuple

    def sample(self, t: float) -> float:
        """Value at time t: the last sample at or before t (first one before)."""
        idx = bisect_right(self.times, t) - 1
        if idx < 0:
            idx = 0
        return self.values[idx]

    def __len__(self) -> int:
        return len(self.times)


def parse_profile_csv(text: str) -> Profile:
    """Parse a time_s,value CSV at 300 s spacing."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GridFileError("empty profile document")
    header = [h.strip() for h in lines[0].split(",")]
    if header != ["time_s", "value"]:
        raise GridFileError(f"profile header must be 'time_s,value', got {lines[0]!r}", 1)
    times: list[float] = []
    values: list[float] = []
    for line_no, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise GridFileError("profile rows need exactly time_s,value", line_no)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise GridFileError(f"non-numeric profile row {line!r}", line_no) from None
        times.append(t)
        values.append(v)
    if not times:
        raise GridFileError("profile has no samples")
    for prev, cur, line_no in zip(times, times[1:], range(3, len(times) + 2)):
        if abs((cur - prev) - PROFILE_STEP_S) > 1e-9:
            raise GridFileError(
                f"profile spacing must be {PROFILE_STEP_S:g} s, got {cur - prev:g}",
                line_no,
            )
    return Profile(tuple(times), tuple(values))


def disaggregate_feeder_profile(
    head: list[float], loads: list[ZipLoad]
) -> list[list[float]]:
    """Split a feeder-head series onto loads in proportion to rated_p.

    Values are quantized to 0.01 kW and the last load in file order absorbs
    the rounding residual, so at every step the per-load values sum back to
    the head value exactly in the quantized domain.
    """
    if not loads:
        raise ValueError("no loads to disaggregate onto")
    total = sum(ld.rated_p for ld in loads)
    if total <= 0:
        raise ValueError("total rated_p must be > 0")
    weights = [ld.rated_p / total for ld in loads]
    series: list[list[float]] = [[] for _ in loads]
    for h in head:
        head_q = round(h / QUANTUM)
        acc = 0
        for i in range(len(loads) - 1):
            q = round(head_q * weights[i])
            series[i].append(q * QUANTUM)
            acc += q
        series[-1].append((head_q - acc) * QUANTUM)
    return series
