"""Deterministic discrete-event clock shared by all federates.

Events fire in (time, owner, sequence) order: simultaneous events run
in owner-name order, and two events from the same owner at the same
instant run in the order they were scheduled.  Identical inputs always
produce the identical execution trace.
"""

from __future__ import annotations

import heapq
import time as _time
from typing import Callable


class EventQueue:
    def __init__(self):
        self._heap: list[tuple[float, str, int, Callable[[], None]]] = []
        self._seq = 0
        self._now = 0.0

    @property
    def now(self) -> float:
        """Simulated time of the event currently (or last) executed."""
        return self._now

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, when: float, owner: str, action: Callable[[], None]) -> None:
        if when < self._now:
            raise ValueError(f"cannot schedule at {when} before current time {self._now}")
        heapq.heappush(self._heap, (when, owner, self._seq, action))
        self._seq += 1

    def run(self, until: float, pace: float | None = None) -> None:
        """Execute events with time <= until, advancing the clock.

        With ``pace`` set, execution is slowed so one simulated second
        takes ``pace`` wall seconds (1.0 approximates real time); events
        that fall behind run immediately without trying to catch up.
        """
        wall_start = _time.monotonic() if pace is not None else 0.0
        sim_start = self._now
        while self._heap and self._heap[0][0] <= until:
            when, _owner, _seq, action = heapq.heappop(self._heap)
            if pace is not None:
                ahead = (when - sim_start) * pace - (_time.monotonic() - wall_start)
                if ahead > 0.0:
                    _time.sleep(ahead)
            self._now = when
            action()
        if until > self._now:
            self._now = until
