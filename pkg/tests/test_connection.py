import pytest
from hypothesis import given, settings, strategies as st

from netkit import events, transfer
from spacecc.transport import Phase

ALGS = ["aggressive", "tahoe", "reno", "vegas", "westwood_lite"]


@pytest.mark.parametrize("alg", ALGS)
def test_lossless_transfer_is_intact(alg):
    conn, sim, _, data = transfer(alg, 200_000, keep_data=True, queue=10_000)
    assert conn.sender.completed_at is not None
    assert bytes(conn.receiver.data) == data
    assert conn.sender.retransmissions == 0


@pytest.mark.parametrize("alg", ALGS)
def test_lossy_transfer_is_intact(alg):
    conn, *_ = transfer(alg, 300_000, loss=0.05, seed=3)
    assert conn.sender.completed_at is not None
    assert conn.intact
    assert conn.sender.retransmissions > 0


def test_fast_start_sends_one_empty_per_data_segment():
    conn, *_ = transfer("aggressive", 10 * 1024, ssthresh=1e6)
    assert conn.receiver.empty_received == conn.receiver.segments_received == 10


def test_timeout_backoff_doubles_to_cap():
    # everything lost: the timer keeps backing off
    conn, sim, *_ = transfer("reno", 2048, loss=1.0, end=400.0, max_rto=64.0)
    rtos = [e["rto"] for e in events(conn, "timeout")]
    assert rtos[:3] == [pytest.approx(0.55 * 2), pytest.approx(2.2), pytest.approx(4.4)]
    assert max(rtos) == 64.0
    assert all(b == min(64.0, 2 * a) for a, b in zip(rtos, rtos[1:]))


def test_maintenance_freezes_and_resumes():
    conn, sim, _, _ = transfer("aggressive", 3_000_000, delay=0.24, rtt_est=0.48,
                               outages=[(8.0, 38.0)], end=300.0, ssthresh=60)
    s = conn.sender
    assert s.completed_at is not None and conn.intact
    assert len(s.maintenance_history) == 1
    rec = s.maintenance_history[0]
    enter = [e for e in s.log.events if e["kind"] == "maintenance_enter"][0]
    exit_ = [e for e in s.log.events if e["kind"] == "maintenance_exit"][0]
    assert exit_["cwnd"] == enter["cwnd"] == rec.cwnd
    assert not [e for e in events(conn, "timeout") if rec.entered_at < e["t"] < rec.exited_at]
    gaps = {b - a for a, b in zip(rec.probes, rec.probes[1:])}
    assert gaps == {960_000}
    # frozen phase never grows or shrinks the window
    frozen = [row for row in s.log.trace if rec.entered_at <= row[0] < rec.exited_at]
    assert all(row[3] == Phase.MAINTENANCE_FROZEN.value for row in frozen)
    assert {row[1] for row in frozen} == {rec.cwnd}


def test_baselines_do_not_enter_maintenance():
    conn, *_ = transfer("reno", 500_000, delay=0.24, outages=[(3.0, 20.0)], end=400.0)
    assert conn.sender.maintenance_history == []
    assert conn.sender.timeouts > 0 and conn.intact


@settings(max_examples=1000)
@given(st.sampled_from(ALGS), st.integers(1, 30_000), st.floats(0, 0.3), st.integers(0, 2**32),
       st.integers(2, 60))
def test_reliability_and_window_gating(alg, nbytes, loss, seed, queue):
    conn, *_ = transfer(alg, nbytes, loss=loss, seed=seed, delay=0.01, fwd=5e6, rev=1e6,
                        queue=queue, record_gating=True, end=3000.0)
    s = conn.sender
    assert s.completed_at is not None
    assert conn.intact
    for t, pipe, window, bypass in s.log.sends:
        if not bypass:
            # new data and ordinary retransmissions respect floor(cwnd)
            assert pipe < window
    # the only window bypass is the fast retransmit, once per recovery episode
    bypass_times = [t for t, *_, b in s.log.sends if b]
    assert bypass_times == [e["t"] for e in events(conn, "triple_dup")]
