import math

import pytest
from hypothesis import given, strategies as st

import oracles
from spacecc.channel import (
    FORWARD,
    REVERSE,
    Channel,
    LinkSpec,
    OutageWindow,
    Outcome,
    PathSpec,
    WindowNotElapsed,
)
from spacecc.sim_core import RngFactory, Simulator, seconds_to_us


def make(links, outages=(), seed=1):
    sim = Simulator()
    ch = Channel(PathSpec(tuple(links), tuple(outages)), sim, RngFactory(seed))
    return sim, ch


def test_delivery_time_is_delay_plus_serialization():
    sim, ch = make([LinkSpec(0.25, 10e6, 1e6)])
    res = ch.transmit(1000, FORWARD, at=0)
    expected = 0.25 + oracles.serialization_s(1000, 10_000_000)
    assert res.outcome is Outcome.DELIVERED
    assert res.at == seconds_to_us(float(expected))
    assert res.at == 250_800


def test_reverse_direction_uses_reverse_rate():
    sim, ch = make([LinkSpec(0.25, 10e6, 1e6)])
    res = ch.transmit(40, REVERSE, at=0)
    assert res.at == 250_000 + 320


def test_certain_loss():
    sim, ch = make([LinkSpec(0.1, 1e6, 1e6, loss_prob=1.0)])
    assert all(ch.transmit(100, FORWARD, at=0).outcome is Outcome.LOST_RANDOM for _ in range(20))


def test_outage_blackholes():
    sim, ch = make([LinkSpec(0.1, 1e6, 1e6)], [(OutageWindow.from_seconds(1, 2),)])
    sim.run_until(seconds_to_us(1.5))
    assert ch.transmit(100, FORWARD).outcome is Outcome.BLACKHOLED_OUTAGE
    # leaves just before the window but is still in flight when it opens
    sim2, ch2 = make([LinkSpec(0.1, 1e6, 1e6)], [(OutageWindow.from_seconds(1, 2),)])
    sim2.run_until(seconds_to_us(0.95))
    assert ch2.transmit(100, FORWARD).outcome is Outcome.BLACKHOLED_OUTAGE


def test_queue_overflow_drops():
    sim, ch = make([LinkSpec(0.1, 1e6, 1e6, queue_capacity=5)])
    outcomes = [ch.transmit(1000, FORWARD, at=0).outcome for _ in range(10)]
    # one packet in service plus five queued
    assert outcomes.count(Outcome.DELIVERED) == 6
    assert outcomes.count(Outcome.DROPPED_QUEUE_FULL) == 4


def test_utilization_one_packet():
    sim, ch = make([LinkSpec(0.0, 10e6, 10e6)])
    ch.transmit(1000, FORWARD, at=0)
    sim.run_until(seconds_to_us(1))
    assert ch.utilization_sample((0, seconds_to_us(1))) == pytest.approx(0.0008)


def test_utilization_idle_and_saturated():
    sim, ch = make([LinkSpec(0.0, 8e3, 8e3, queue_capacity=1000)])
    sim.run_until(seconds_to_us(1))
    assert ch.utilization_sample((0, seconds_to_us(1))) == 0.0
    for _ in range(10):
        ch.transmit(1000, FORWARD, at=seconds_to_us(1))  # 1 s of airtime each
    sim.run_until(seconds_to_us(11))
    assert ch.utilization_sample((seconds_to_us(1), seconds_to_us(11))) == pytest.approx(1.0)


def test_utilization_rejects_future_window():
    sim, ch = make([LinkSpec(0.0, 1e6, 1e6)])
    with pytest.raises(WindowNotElapsed):
        ch.utilization_sample((0, 10))


def test_link_validation():
    with pytest.raises(ValueError):
        LinkSpec(0.1, 0, 1e6)
    with pytest.raises(ValueError):
        LinkSpec(0.1, 1e6, 1e6, loss_prob=1.5)
    with pytest.raises(ValueError):
        OutageWindow(5, 5)
    assert LinkSpec(0.1, 1e9, 1e6).asymmetry == 1000


@pytest.mark.parametrize("p", [0.005, 0.05, 0.3])
def test_loss_fraction_within_three_sigma(p):
    n = 100_000
    sim, ch = make([LinkSpec(0.0, 1e12, 1e12, loss_prob=p, queue_capacity=10**6)], seed=5)
    lost = sum(ch.transmit(40, FORWARD, at=0).outcome is Outcome.LOST_RANDOM for _ in range(n))
    assert abs(lost / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_loss_decisions_paired_by_packet_index():
    def pattern(sizes):
        sim, ch = make([LinkSpec(0.1, 1e6, 1e6, loss_prob=0.3, queue_capacity=10**6)], seed=9)
        return [ch.transmit(s, FORWARD, at=0).outcome is Outcome.LOST_RANDOM for s in sizes]

    # different traffic, same stream: the i-th data packet meets the same fate
    assert pattern([1064] * 200) == pattern([40, 500, 1064, 7] * 50)


sends = st.lists(
    st.tuples(st.integers(0, 2_000_000), st.integers(1, 1500), st.sampled_from([FORWARD, REVERSE])),
    min_size=1, max_size=60,
)


@given(sends, st.floats(0, 0.5), st.integers(1, 20), st.integers(0, 2**32))
def test_conservation_and_fifo(plan, loss, cap, seed):
    links = [LinkSpec(0.01, 2e6, 5e5, loss_prob=loss, queue_capacity=cap),
             LinkSpec(0.02, 1e6, 1e6, loss_prob=loss, queue_capacity=cap)]
    outages = [(OutageWindow(300_000, 600_000),), ()]
    sim, ch = make(links, outages, seed)
    plan = sorted(plan, key=lambda x: x[0])
    results = {FORWARD: [], REVERSE: []}
    for at, size, d in plan:
        res = ch.transmit(size, d, at=at)
        results[d].append((at, res))
    assert sum(ch.counts.values()) == len(plan) == ch.sent
    for d, rs in results.items():
        times = [r.at for _, r in rs if r.delivered]
        assert times == sorted(times)
        for at, r in rs:
            if r.delivered:
                assert r.at >= at + 30_000


@given(st.lists(st.integers(0, 3_000_000), min_size=1, max_size=80), st.integers(0, 2**32))
def test_no_delivery_overlaps_an_outage(times, seed):
    window = OutageWindow(1_000_000, 2_000_000)
    sim, ch = make([LinkSpec(0.25, 1e6, 1e6, queue_capacity=1000)], [(window,)], seed)
    for at in sorted(times):
        res = ch.transmit(500, FORWARD, at=at)
        if res.delivered:
            assert not window.overlaps(at, res.at)
        else:
            assert res.outcome is Outcome.BLACKHOLED_OUTAGE
