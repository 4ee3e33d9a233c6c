"""Latency distributions, drop/sever behavior, and per-channel determinism."""

from __future__ import annotations

import math
import random

import pytest

from gridfed.federation.links import (
    LATENCY_PRESETS,
    Channel,
    LatencySpec,
    LinkModel,
    parse_latency,
)


def test_fixed_latency_ignores_rng():
    spec = LatencySpec("fixed", 0.25)
    rng = random.Random(1)
    before = rng.getstate()
    assert spec.sample(rng) == 0.25
    assert rng.getstate() == before


def test_negative_draws_clamp_to_zero():
    assert LatencySpec("fixed", -2.0).sample(random.Random(0)) == 0.0
    spec = LatencySpec("normal", 0.0, 1.0)
    rng = random.Random(3)
    draws = [spec.sample(rng) for _ in range(200)]
    assert min(draws) == 0.0
    assert all(d >= 0.0 for d in draws)


def test_uniform_draws_stay_in_range():
    spec = LatencySpec("uniform", 30.0, 90.0)
    rng = random.Random(11)
    for _ in range(500):
        d = spec.sample(rng)
        assert 30.0 <= d <= 90.0


def test_latency_spec_validation():
    with pytest.raises(ValueError, match="unknown latency kind"):
        LatencySpec("poisson", 1.0)
    with pytest.raises(ValueError, match="lo <= hi"):
        LatencySpec("uniform", 5.0, 1.0)
    with pytest.raises(ValueError, match="sigma"):
        LatencySpec("normal", 1.0, -0.1)


def test_presets():
    assert LATENCY_PRESETS["vpn"] == LatencySpec("normal", 0.110, 0.02)
    assert LATENCY_PRESETS["fileshare"] == LatencySpec("uniform", 30.0, 90.0)


def test_parse_latency_forms():
    assert parse_latency("vpn") == LATENCY_PRESETS["vpn"]
    assert parse_latency("fileshare") == LATENCY_PRESETS["fileshare"]
    assert parse_latency("fixed:1.5") == LatencySpec("fixed", 1.5)
    assert parse_latency("uniform:2:4") == LatencySpec("uniform", 2.0, 4.0)
    assert parse_latency("normal:0.1:0.01") == LatencySpec("normal", 0.1, 0.01)


@pytest.mark.parametrize(
    "text", ["", "fixed", "fixed:a", "uniform:1", "normal:1:2:3", "gauss:1:2"]
)
def test_parse_latency_rejects_malformed(text):
    with pytest.raises(ValueError, match="bad latency spec"):
        parse_latency(text)


def test_link_model_validation():
    with pytest.raises(ValueError, match="drop_prob"):
        LinkModel(LatencySpec("fixed", 0.1), drop_prob=1.0)
    with pytest.raises(ValueError, match="drop_prob"):
        LinkModel(LatencySpec("fixed", 0.1), drop_prob=-0.1)
    with pytest.raises(ValueError, match="empty"):
        LinkModel(LatencySpec("fixed", 0.1), sever_windows=((5.0, 5.0),))


def test_sever_window_is_half_open():
    link = LinkModel(LatencySpec("fixed", 0.1), sever_windows=((10.0, 20.0),))
    assert not link.severed_at(9.999)
    assert link.severed_at(10.0)
    assert link.severed_at(19.999)
    assert not link.severed_at(20.0)


def test_vpn_mean_within_three_standard_errors():
    link = LinkModel(LATENCY_PRESETS["vpn"])
    chan = Channel(42, "a", "b", "T", link)
    n = 10_000
    delays = []
    t = 0.0
    for _ in range(n):
        t += 1.0
        delivery = chan.offer(t)
        assert delivery is not None
        delays.append(delivery - t)
    mean = sum(delays) / n
    se = 0.02 / math.sqrt(n)
    assert abs(mean - 0.110) < 3.0 * se


def test_channel_streams_are_reproducible_and_independent():
    link = LinkModel(LATENCY_PRESETS["vpn"], drop_prob=0.1)
    a1 = Channel(7, "x", "y", "T", link)
    a2 = Channel(7, "x", "y", "T", link)
    other = Channel(7, "x", "y", "U", link)
    seq1 = [a1.offer(float(t)) for t in range(50)]
    seq2 = [a2.offer(float(t)) for t in range(50)]
    seq3 = [other.offer(float(t)) for t in range(50)]
    assert seq1 == seq2
    assert seq1 != seq3


def test_different_seed_changes_stream():
    link = LinkModel(LATENCY_PRESETS["vpn"])
    a = Channel(1, "x", "y", "T", link)
    b = Channel(2, "x", "y", "T", link)
    assert [a.offer(float(t)) for t in range(20)] != [
        b.offer(float(t)) for t in range(20)
    ]


def test_severed_offer_consumes_no_randomness():
    link_plain = LinkModel(LATENCY_PRESETS["vpn"], drop_prob=0.05)
    link_sever = LinkModel(
        LATENCY_PRESETS["vpn"], drop_prob=0.05, sever_windows=((10.0, 20.0),)
    )
    plain = Channel(9, "x", "y", "T", link_plain)
    severed = Channel(9, "x", "y", "T", link_sever)

    # same draws before the window
    for t in (0.0, 4.0, 8.0):
        assert severed.offer(t) == plain.offer(t)
    # inside the window: nothing delivered, stream untouched
    state_before = severed.rng.getstate()
    for t in (10.0, 12.0, 19.9):
        assert severed.offer(t) is None
    assert severed.rng.getstate() == state_before
    # after the window the streams align again
    for t in (20.0, 25.0, 30.0):
        assert severed.offer(t) == plain.offer(t)


def test_deliveries_never_land_inside_sever_window():
    # fileshare latency is 30-90 s, so sends shortly before the window
    # would arrive inside it; those frames must be lost mid-flight
    link = LinkModel(LATENCY_PRESETS["fileshare"], sever_windows=((100.0, 200.0),))
    chan = Channel(5, "x", "y", "T", link)
    lost_in_flight = 0
    delivered = 0
    for t in range(0, 300, 7):
        delivery = chan.offer(float(t))
        if 100.0 <= t < 200.0:
            assert delivery is None
        elif delivery is None:
            lost_in_flight += 1
        else:
            delivered += 1
            assert not 100.0 <= delivery < 200.0
    assert lost_in_flight > 0
    assert delivered > 0


def test_fifo_monotonization():
    # fileshare jitter can reorder raw draws; the channel must not
    link = LinkModel(LATENCY_PRESETS["fileshare"])
    chan = Channel(13, "x", "y", "T", link)
    last = float("-inf")
    t = 0.0
    for _ in range(2000):
        t += 1.0
        delivery = chan.offer(t)
        assert delivery is not None
        assert delivery >= last
        last = delivery


def test_drop_probability_roughly_respected():
    link = LinkModel(LatencySpec("fixed", 0.1), drop_prob=0.2)
    chan = Channel(21, "x", "y", "T", link)
    n = 5000
    dropped = sum(1 for t in range(n) if chan.offer(float(t)) is None)
    assert abs(dropped / n - 0.2) < 0.02


def test_channel_name():
    chan = Channel(0, "ctl", "pv1", "DPV_COMMAND", LinkModel(LatencySpec("fixed", 0.0)))
    assert chan.name == "ctl>pv1:DPV_COMMAND"
