"""Lossy-link models: latency distributions, drops, sever windows.

Each directed (sender, receiver, frame type) tuple gets its own channel
with an independently seeded random stream, so adding traffic on one
channel never disturbs the draws on another.  Deliveries on a channel
are monotonized: a frame never arrives before one sent earlier.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class LatencySpec:
    """One-way delay distribution in seconds.

    kind 'fixed' uses ``a``; 'uniform' draws from [a, b]; 'normal' draws
    mean ``a``, sigma ``b``.  Negative draws clamp to zero.
    """

    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "normal"):
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if self.kind == "uniform" and self.b < self.a:
            raise ValueError("uniform latency needs lo <= hi")
        if self.kind == "normal" and self.b < 0.0:
            raise ValueError("normal latency needs sigma >= 0")

    def sample(self, rng: random.Random) -> float:
        if self.kind == "fixed":
            return max(self.a, 0.0)
        if self.kind == "uniform":
            return max(rng.uniform(self.a, self.b), 0.0)
        return max(rng.gauss(self.a, self.b), 0.0)


LATENCY_PRESETS = {
    "vpn": LatencySpec("normal", 0.110, 0.02),
    "fileshare": LatencySpec("uniform", 30.0, 90.0),
}


def parse_latency(text: str) -> LatencySpec:
    """Parse 'vpn', 'fileshare', 'fixed:X', 'uniform:LO:HI', 'normal:MU:SIGMA'."""
    if text in LATENCY_PRESETS:
        return LATENCY_PRESETS[text]
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "fixed" and len(parts) == 2:
            return LatencySpec("fixed", float(parts[1]))
        if kind in ("uniform", "normal") and len(parts) == 3:
            return LatencySpec(kind, float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad latency spec {text!r}") from exc
    raise ValueError(f"bad latency spec {text!r}")


@dataclass(frozen=True)
class LinkModel:
    """Delay plus loss behavior for one directed link."""

    latency: LatencySpec
    drop_prob: float = 0.0
    sever_windows: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.drop_prob < 1.0:
            raise ValueError("drop_prob must be in [0, 1)")
        for t0, t1 in self.sever_windows:
            if t1 <= t0:
                raise ValueError(f"sever window [{t0}, {t1}) is empty")

    def severed_at(self, t: float) -> bool:
        return any(t0 <= t < t1 for t0, t1 in self.sever_windows)


class Channel:
    """Delivery schedule for one (sender, receiver, frame type) stream.

    The stream seed is derived from the scenario seed and the channel
    identity, so results are reproducible regardless of what the other
    channels do.
    """

    def __init__(self, seed: int, sender: str, receiver: str, frame_tag: str,
                 link: LinkModel):
        self.sender = sender
        self.receiver = receiver
        self.frame_tag = frame_tag
        self.link = link
        self.rng = random.Random(f"{seed}:{sender}>{receiver}:{frame_tag}")
        self.last_delivery = float("-inf")

    @property
    def name(self) -> str:
        return f"{self.sender}>{self.receiver}:{self.frame_tag}"

    def offer(self, send_time: float) -> float | None:
        """Delivery time for a frame sent now, or None if it is lost.

        A severed link consumes no randomness; otherwise one drop draw
        is taken, then (for random latencies) one latency draw.  A frame
        still in flight when a sever window opens is lost with it: no
        delivery ever lands inside a window.
        """
        if self.link.severed_at(send_time):
            return None
        if self.rng.random() < self.link.drop_prob:
            return None
        delay = self.link.latency.sample(self.rng)
        delivery = max(send_time + delay, self.last_delivery)
        if self.link.severed_at(delivery):
            # lost mid-flight; must not advance the FIFO floor, or a
            # later frame would inherit this one's in-window arrival
            return None
        self.last_delivery = delivery
        return delivery
