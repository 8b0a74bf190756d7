import math

import pytest
from hypothesis import assume, given, strategies as st

import oracles
from spacecc.transport import (
    BETA,
    CcState,
    CongestionSignal,
    EmptyHistory,
    Phase,
    RttHistory,
    compute_sigma,
    congestion_avoidance_on_ack,
    enter_maintenance,
    exit_maintenance,
    fast_start_on_ack,
    maintenance_check,
    on_timeout,
    on_triple_dup_ack,
    smoothed_rtt,
)

S = 1_000_000


def hist(*pairs):
    return RttHistory.from_pairs([(t * S, r) for t, r in pairs])


def test_smoothed_single_sample():
    assert smoothed_rtt(hist((3, 0.5)), 10 * S) == 0.5


def test_smoothed_two_samples_matches_oracle():
    got = smoothed_rtt(hist((0, 0.5), (1, 0.7)), 1 * S)
    want = oracles.smoothed([(0, 0.5), (1, 0.7)], 1)
    assert got == pytest.approx(float(want), rel=1e-12)
    assert got == pytest.approx(0.6462, abs=5e-5)


def test_smoothed_requires_samples():
    with pytest.raises(EmptyHistory):
        smoothed_rtt(RttHistory(), 0)


def test_sigma_and_k_worked_example():
    h = hist((0, 0.5), (1, 0.7))
    state = CcState(cwnd=20, ssthresh=100, base_rtt=0.5, phase=Phase.CONGESTION_AVOIDANCE)
    sig = compute_sigma(state, h, 1 * S)
    r = oracles.smoothed([(0, 0.5), (1, 0.7)], 1)
    sigma = 20 * (1 - 0.5 / r)
    assert sig.expected == pytest.approx(40.0)
    assert sig.actual == pytest.approx(float(20 / r), rel=1e-12)
    assert sig.sigma == pytest.approx(float(sigma), rel=1e-12)
    assert sig.k == pytest.approx(float(3 / sigma * 0.5 / r), rel=1e-12)
    # the rounded figures quoted for this example
    assert round(sig.actual, 2) == 30.95
    assert sig.sigma == pytest.approx(4.52, abs=0.01)
    assert sig.k == pytest.approx(0.5136, abs=1e-3)
    after = on_triple_dup_ack(state, sig)
    assert (after.ssthresh, after.cwnd) == (10.0, 13.0)
    assert after.phase is Phase.CONGESTION_AVOIDANCE


def test_random_loss_branch():
    state = CcState(cwnd=20, ssthresh=100, base_rtt=0.5, phase=Phase.CONGESTION_AVOIDANCE)
    after = on_triple_dup_ack(state, CongestionSignal(2.0, 0, 0, 0.5, 0.5))
    assert (after.ssthresh, after.cwnd) == (20.0, 23.0)


def test_small_window_clamps_ssthresh():
    state = CcState(cwnd=4, ssthresh=100, base_rtt=0.5)
    after = on_triple_dup_ack(state, CongestionSignal(50.0, 0, 0, 5.0, 0.5, k=0.006))
    assert (after.ssthresh, after.cwnd) == (2.0, 5.0)


def test_timeout_halves_ssthresh():
    after = on_timeout(CcState(cwnd=30, ssthresh=20, phase=Phase.CONGESTION_AVOIDANCE))
    assert (after.ssthresh, after.cwnd, after.phase) == (10.0, 1.0, Phase.FAST_START)
    assert on_timeout(CcState(cwnd=5, ssthresh=3)).ssthresh == 2.0


def test_fast_start_triples_per_round():
    s = CcState(cwnd=1, ssthresh=100, phase=Phase.FAST_START)
    seen = []
    for _ in range(3):
        # each data segment in flight returns one data ACK and one empty ACK
        s = fast_start_on_ack(s, 2 * s.window)
        seen.append(s.cwnd)
    assert seen == [3, 9, 27]


def test_fast_start_hands_over_at_threshold():
    s = fast_start_on_ack(CcState(cwnd=80, ssthresh=81, phase=Phase.FAST_START), 1)
    assert s.cwnd == 81 and s.phase is Phase.CONGESTION_AVOIDANCE


def test_empty_ack_alone_counts():
    s = fast_start_on_ack(CcState(cwnd=5, ssthresh=100, phase=Phase.FAST_START), 1)
    assert s.cwnd == 6


def test_additive_increase():
    s = CcState(cwnd=10, ssthresh=5, phase=Phase.CONGESTION_AVOIDANCE)
    after = congestion_avoidance_on_ack(s, 10)
    assert after.cwnd == pytest.approx(11, abs=0.05)
    assert congestion_avoidance_on_ack(CcState(cwnd=1, ssthresh=2, phase=Phase.CONGESTION_AVOIDANCE)).cwnd == 2
    assert CcState(cwnd=10.5).window == 10


def test_maintenance_threshold():
    assert maintenance_check(None, 0.48, latest_rtt=5.0)
    assert not maintenance_check(None, 0.48, latest_rtt=4.8)
    assert maintenance_check(None, 0.48, silence=6.0)
    assert not maintenance_check(None, 0.48, latest_rtt=0.6, silence=1.0)


def test_maintenance_round_trip_restores_window():
    s = CcState(cwnd=40, ssthresh=30, phase=Phase.CONGESTION_AVOIDANCE)
    frozen = enter_maintenance(s)
    assert frozen.phase is Phase.MAINTENANCE_FROZEN
    back = exit_maintenance(frozen, s.cwnd, s.ssthresh)
    assert (back.cwnd, back.ssthresh, back.phase) == (40, 30, Phase.CONGESTION_AVOIDANCE)


def test_history_rules():
    h = RttHistory(capacity=3)
    for t in range(5):
        h.add(t, 0.1 * t)
    assert [t for t, _ in h.samples] == [2, 3, 4]
    h.add(4, 9.0)
    assert h.latest == 9.0
    with pytest.raises(ValueError):
        h.add(3, 1.0)


rtts = st.floats(0.01, 10.0)
histories = st.lists(st.tuples(st.integers(0, 100 * S), rtts), min_size=1, max_size=64,
                     unique_by=lambda x: x[0])


@given(histories, st.integers(0, 50 * S))
def test_smoothed_is_convex(pairs, extra):
    h = RttHistory.from_pairs(sorted(pairs))
    now = max(t for t, _ in pairs) + extra
    v = smoothed_rtt(h, now)
    rs = [r for _, r in pairs]
    assert min(rs) <= v <= max(rs)


@given(st.lists(st.integers(0, 100 * S), min_size=1, max_size=30, unique=True), rtts,
       st.floats(1, 500))
def test_sigma_zero_iff_constant_history(times, r, cwnd):
    h = RttHistory.from_pairs([(t, r) for t in sorted(times)])
    state = CcState(cwnd=cwnd, base_rtt=r)
    assert compute_sigma(state, h, max(times)).sigma == 0.0


@given(histories, st.floats(1, 500))
def test_sigma_positive_when_smoothed_exceeds_base(pairs, cwnd):
    h = RttHistory.from_pairs(sorted(pairs))
    base = min(r for _, r in pairs)
    now = max(t for t, _ in pairs)
    sig = compute_sigma(CcState(cwnd=cwnd, base_rtt=base), h, now)
    assert (sig.sigma == 0.0) == (sig.smoothed_rtt == base)
    assert sig.sigma >= 0.0


@given(st.floats(1, 2000), st.floats(2, 1e6), st.floats(-10, 3))
def test_random_branch_never_shrinks(cwnd, ssthresh, sigma):
    s = CcState(cwnd=cwnd, ssthresh=ssthresh, base_rtt=0.5, phase=Phase.CONGESTION_AVOIDANCE)
    after = on_triple_dup_ack(s, CongestionSignal(sigma, 0, 0, 0.5, 0.5))
    assert after.cwnd == s.cwnd + 3 and after.ssthresh == max(2.0, s.cwnd)


@given(st.floats(1, 2000), st.floats(3.0001, 1e4), st.floats(1e-6, 5))
def test_congestive_branch_shrinks_threshold(cwnd, sigma, k):
    s = CcState(cwnd=cwnd, ssthresh=1e6, base_rtt=0.5, phase=Phase.CONGESTION_AVOIDANCE)
    after = on_triple_dup_ack(s, CongestionSignal(sigma, 0, 0, 0.6, 0.5, k=k))
    assert after.ssthresh <= max(2.0, round(s.cwnd))
    assert after.cwnd == after.ssthresh + 3


@given(st.floats(1, 2000), st.floats(2, 1e6), st.lists(st.sampled_from(["loss", "timeout"]), max_size=20))
def test_frozen_phase_is_fixed_point(cwnd, ssthresh, events):
    s = enter_maintenance(CcState(cwnd=cwnd, ssthresh=ssthresh, base_rtt=0.5))
    for e in events:
        s = on_timeout(s) if e == "timeout" else on_triple_dup_ack(s, CongestionSignal(10, 0, 0, 1, 0.5, k=0.1))
    assert (s.cwnd, s.ssthresh, s.phase) == (cwnd if cwnd >= 1 else 1.0, max(2.0, ssthresh), Phase.MAINTENANCE_FROZEN)


@given(st.integers(0, 6))
def test_lossless_fast_start_is_power_of_three(rounds):
    s = CcState(cwnd=1, ssthresh=1e6, phase=Phase.FAST_START)
    for _ in range(rounds):
        s = fast_start_on_ack(s, 2 * s.window)
    assert s.cwnd == 3 ** rounds


def test_beta_constant():
    assert BETA == 3.0
    assert not CongestionSignal(3.0, 0, 0, 0, 0).congestive
    assert CongestionSignal(3.01, 0, 0, 0, 0).congestive
