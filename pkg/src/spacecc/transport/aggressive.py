"""Pure state transitions of the aggressive congestion controller.

Every function takes the current window state and returns a new one; none of
them touch the simulator, which keeps them property-testable in isolation.
"""

from __future__ import annotations

import math
from dataclasses import replace

from ..sim_core import SimTime, US_PER_S
from .state import BETA, CcState, CongestionSignal, EmptyHistory, Phase, RttHistory

INTERRUPTION_FACTOR = 10.0


def smoothed_rtt(hist: RttHistory, now: SimTime, decay_tau: float = 1.0) -> float:
    """Exponentially time-decayed mean of the recorded RTT samples.

    Sample ``i`` recorded at ``T_i`` gets weight ``exp(-(now - T_i)/decay_tau)``;
    the weights are normalized so the result is a convex combination of the
    samples.
    """
    if not hist:
        raise EmptyHistory("no RTT samples recorded")
    # measuring ages from the newest sample instead of `now` rescales every
    # weight by the same factor, which normalization cancels; it keeps the
    # weights from underflowing when `now` is far past the history
    ref = max(t for t, _ in hist.samples)
    num = 0.0
    den = 0.0
    for t, rtt in hist.samples:
        w = math.exp(-((ref - t) / US_PER_S) / decay_tau)
        num += w * rtt
        den += w
    lo = min(r for _, r in hist.samples)
    hi = max(r for _, r in hist.samples)
    return min(hi, max(lo, num / den))


def compute_sigma(state: CcState, hist: RttHistory, now: SimTime,
                  decay_tau: float = 1.0) -> CongestionSignal:
    """Throughput-gap signal in segments and, if congestive, the threshold coefficient."""
    if not state.base_rtt > 0 or math.isinf(state.base_rtt):
        raise ValueError("base_rtt must be a positive measured value")
    rtt_s = smoothed_rtt(hist, now, decay_tau)
    expected = state.cwnd / state.base_rtt
    actual = state.cwnd / rtt_s
    sigma = (expected - actual) * state.base_rtt
    k = None
    if sigma > BETA:
        k = (BETA / sigma) * (state.base_rtt / rtt_s)
    return CongestionSignal(sigma, expected, actual, rtt_s, state.base_rtt, k)


def on_triple_dup_ack(state: CcState, sig: CongestionSignal) -> CcState:
    """Random loss keeps the window and adds three; congestive loss scales ssthresh by k."""
    if state.phase is Phase.MAINTENANCE_FROZEN:
        return state
    if sig.sigma <= sig.beta:
        ssthresh = state.cwnd
    else:
        k = min(1.0, sig.k if sig.k is not None else 1.0)
        ssthresh = max(2.0, float(round(state.cwnd * k)))
    return replace(state, ssthresh=ssthresh, cwnd=ssthresh + 3.0,
                   phase=Phase.CONGESTION_AVOIDANCE)


def on_timeout(state: CcState) -> CcState:
    if state.phase is Phase.MAINTENANCE_FROZEN:
        return state
    return replace(state, ssthresh=max(2.0, state.ssthresh / 2.0), cwnd=1.0,
                   phase=Phase.FAST_START)


def fast_start_on_ack(state: CcState, acks: int = 1) -> CcState:
    """One segment per ACK, data or empty; hands over to additive increase at ssthresh."""
    if state.phase is not Phase.FAST_START:
        return state
    cwnd = state.cwnd
    for _ in range(acks):
        if cwnd >= state.ssthresh:
            cwnd += 1.0 / cwnd
        else:
            cwnd += 1.0
    phase = Phase.CONGESTION_AVOIDANCE if cwnd >= state.ssthresh else Phase.FAST_START
    return replace(state, cwnd=cwnd, phase=phase)


def congestion_avoidance_on_ack(state: CcState, acks: int = 1) -> CcState:
    if state.phase is not Phase.CONGESTION_AVOIDANCE:
        return state
    cwnd = state.cwnd
    for _ in range(acks):
        cwnd += 1.0 / cwnd
    return replace(state, cwnd=cwnd)


def maintenance_check(hist: RttHistory | None, rtt_est: float, latest_rtt: float | None = None,
                      silence: float | None = None) -> bool:
    """True when the newest RTT, or the time since the last ACK, exceeds 10 x rtt_est."""
    if not rtt_est > 0:
        raise ValueError("rtt_est must be positive")
    threshold = INTERRUPTION_FACTOR * rtt_est
    if latest_rtt is None and hist:
        latest_rtt = hist.latest
    if latest_rtt is not None and latest_rtt > threshold:
        return True
    return silence is not None and silence > threshold


def enter_maintenance(state: CcState) -> CcState:
    return replace(state, phase=Phase.MAINTENANCE_FROZEN)


def exit_maintenance(state: CcState, cwnd: float, ssthresh: float) -> CcState:
    return replace(state, cwnd=cwnd, ssthresh=ssthresh, phase=Phase.CONGESTION_AVOIDANCE)
