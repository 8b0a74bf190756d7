"""Textbook window rules for the comparison controllers."""

from __future__ import annotations

from dataclasses import replace

from .state import CcState, Phase

ALGORITHMS = ("tahoe", "reno", "vegas", "westwood_lite")
EVENTS = ("ack", "triple_dup", "timeout", "recovery_exit", "round")

VEGAS_ALPHA = 1.0
VEGAS_BETA = 3.0
VEGAS_GAMMA = 1.0


class UnknownAlgorithm(ValueError):
    pass


def slow_start_on_ack(state: CcState, acks: int = 1) -> CcState:
    cwnd = state.cwnd
    phase = state.phase
    for _ in range(acks):
        if phase is Phase.SLOW_START:
            cwnd += 1.0
            if cwnd >= state.ssthresh:
                phase = Phase.CONGESTION_AVOIDANCE
        else:
            cwnd += 1.0 / cwnd
    return replace(state, cwnd=cwnd, phase=phase)


def _halve(cwnd: float) -> float:
    return max(2.0, cwnd / 2.0)


def baseline_cc(algorithm: str, event: str, state: CcState, *, acks: int = 1,
                diff: float | None = None, bw_estimate: float | None = None,
                segment_size: int = 1024) -> CcState:
    """Apply one event to a baseline controller's window state.

    ``diff`` is the Vegas per-round backlog estimate in segments and
    ``bw_estimate`` the Westwood bandwidth estimate in bytes/second; both are
    only consulted by their own algorithm.
    """
    if algorithm not in ALGORITHMS:
        raise UnknownAlgorithm(algorithm)
    if event not in EVENTS:
        raise ValueError(f"unknown event {event!r}")
    if state.phase is Phase.MAINTENANCE_FROZEN:
        return state

    if event == "ack":
        if algorithm == "vegas" and state.phase is Phase.CONGESTION_AVOIDANCE:
            # Vegas adjusts once per round, not per ACK
            return state
        return slow_start_on_ack(state, acks)

    if event == "round":
        if algorithm != "vegas" or diff is None:
            return state
        if state.phase is Phase.SLOW_START:
            if diff > VEGAS_GAMMA:
                return replace(state, ssthresh=max(2.0, state.cwnd), phase=Phase.CONGESTION_AVOIDANCE)
            return state
        if state.phase is not Phase.CONGESTION_AVOIDANCE:
            return state
        if diff < VEGAS_ALPHA:
            return replace(state, cwnd=state.cwnd + 1.0)
        if diff > VEGAS_BETA:
            return replace(state, cwnd=max(2.0, state.cwnd - 1.0))
        return state

    if algorithm == "westwood_lite":
        if bw_estimate and state.base_rtt < float("inf"):
            target = max(2.0, bw_estimate * state.base_rtt / segment_size)
        else:
            target = _halve(state.cwnd)
        if event == "timeout":
            return replace(state, ssthresh=target, cwnd=1.0, phase=Phase.SLOW_START)
        if event == "triple_dup":
            return replace(state, ssthresh=target, cwnd=min(state.cwnd, target),
                           phase=Phase.FAST_RECOVERY)
        if state.phase is Phase.FAST_RECOVERY:
            return replace(state, cwnd=min(state.cwnd, state.ssthresh),
                           phase=Phase.CONGESTION_AVOIDANCE)
        return state

    if event == "timeout":
        return replace(state, ssthresh=_halve(state.cwnd), cwnd=1.0, phase=Phase.SLOW_START)

    if algorithm == "tahoe":
        if event == "triple_dup":
            return replace(state, ssthresh=_halve(state.cwnd), cwnd=1.0, phase=Phase.SLOW_START)
        return state

    # reno and vegas share fast retransmit / fast recovery
    if event == "triple_dup":
        ssthresh = _halve(state.cwnd)
        return replace(state, ssthresh=ssthresh, cwnd=ssthresh + 3.0, phase=Phase.FAST_RECOVERY)
    if state.phase is Phase.FAST_RECOVERY:
        return replace(state, cwnd=state.ssthresh, phase=Phase.CONGESTION_AVOIDANCE)
    return state
