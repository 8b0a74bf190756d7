"""Congestion controllers as pluggable objects.

A controller owns whatever memory its algorithm needs (RTT history, Vegas
round markers, Westwood bandwidth filter) and maps sender events onto the
pure window transitions in :mod:`.aggressive` and :mod:`.baselines`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..sim_core import SimTime, US_PER_S
from . import aggressive as agg
from .baselines import ALGORITHMS, UnknownAlgorithm, baseline_cc
from .state import CcState, CongestionSignal, Phase, RttHistory

CC_NAMES = ("aggressive",) + ALGORITHMS

WESTWOOD_GAIN = 0.1


@dataclass(frozen=True)
class AckContext:
    now: SimTime
    rtt: float | None = None
    growth_acks: int = 1
    delivered_bytes: int = 0
    snd_una: int = 0
    snd_nxt: int = 0


class CongestionController:
    name = ""
    uses_empty_segments = False
    supports_maintenance = False

    def __init__(self, initial_ssthresh: float = 1e6, mss: int = 1024,
                 history_capacity: int = 64, decay_tau: float = 1.0):
        self.initial_ssthresh = float(initial_ssthresh)
        self.mss = mss
        self.decay_tau = decay_tau
        self.history = RttHistory(history_capacity)
        self.last_decision: dict | None = None

    def initial_state(self) -> CcState:
        return CcState(cwnd=1.0, ssthresh=self.initial_ssthresh, phase=Phase.SLOW_START)

    def observe_rtt(self, state: CcState, now: SimTime, rtt: float) -> CcState:
        self.history.add(now, rtt)
        if rtt < state.base_rtt:
            return replace(state, base_rtt=rtt)
        return state

    def sends_empty(self, state: CcState) -> bool:
        return False

    def on_ack(self, state: CcState, ctx: AckContext) -> CcState:
        raise NotImplementedError

    def on_loss(self, state: CcState, now: SimTime) -> CcState:
        raise NotImplementedError

    def on_timeout(self, state: CcState, now: SimTime) -> CcState:
        raise NotImplementedError

    def on_recovery_exit(self, state: CcState) -> CcState:
        return state


class AggressiveCc(CongestionController):
    """Fast start, RTT-history loss classification and window maintenance."""

    name = "aggressive"
    uses_empty_segments = True
    supports_maintenance = True

    def __init__(self, *args, empty_segments_in_ca: bool = False, **kwargs):
        super().__init__(*args, **kwargs)
        self.empty_segments_in_ca = empty_segments_in_ca

    def initial_state(self) -> CcState:
        return CcState(cwnd=1.0, ssthresh=self.initial_ssthresh, phase=Phase.FAST_START)

    def sends_empty(self, state: CcState) -> bool:
        if state.phase is Phase.FAST_START:
            return True
        return self.empty_segments_in_ca and state.phase is Phase.CONGESTION_AVOIDANCE

    def on_ack(self, state: CcState, ctx: AckContext) -> CcState:
        if ctx.growth_acks <= 0:
            return state
        if state.phase is Phase.FAST_START:
            return agg.fast_start_on_ack(state, ctx.growth_acks)
        return agg.congestion_avoidance_on_ack(state, ctx.growth_acks)

    def signal(self, state: CcState, now: SimTime) -> CongestionSignal:
        if not self.history or math.isinf(state.base_rtt):
            # no measurement yet: nothing suggests queueing
            return CongestionSignal(0.0, 0.0, 0.0, state.base_rtt, state.base_rtt)
        return agg.compute_sigma(state, self.history, now, self.decay_tau)

    def on_loss(self, state: CcState, now: SimTime) -> CcState:
        sig = self.signal(state, now)
        new = agg.on_triple_dup_ack(state, sig)
        self.last_decision = {
            "branch": "eq5" if sig.congestive else "eq4",
            "sigma": sig.sigma,
            "k": sig.k,
            "smoothed_rtt": sig.smoothed_rtt,
            "base_rtt": sig.base_rtt,
        }
        return new

    def on_timeout(self, state: CcState, now: SimTime) -> CcState:
        return agg.on_timeout(state)


class BaselineCc(CongestionController):
    def __init__(self, algorithm: str, *args, **kwargs):
        if algorithm not in ALGORITHMS:
            raise UnknownAlgorithm(algorithm)
        super().__init__(*args, **kwargs)
        self.name = algorithm
        self._round_end: int | None = None
        self._round_min_rtt = math.inf
        self.bw_estimate: float | None = None
        self._bw_bytes = 0
        self._bw_since: SimTime | None = None

    def _apply(self, event: str, state: CcState, **kw) -> CcState:
        return baseline_cc(self.name, event, state, segment_size=self.mss,
                           bw_estimate=self.bw_estimate, **kw)

    def on_ack(self, state: CcState, ctx: AckContext) -> CcState:
        if self.name == "vegas":
            state = self._vegas_round(state, ctx)
        elif self.name == "westwood_lite":
            self._westwood_sample(state, ctx)
        if ctx.growth_acks <= 0:
            return state
        return self._apply("ack", state, acks=ctx.growth_acks)

    def _vegas_round(self, state: CcState, ctx: AckContext) -> CcState:
        if ctx.rtt is not None:
            self._round_min_rtt = min(self._round_min_rtt, ctx.rtt)
        if self._round_end is None:
            self._round_end = ctx.snd_nxt
            return state
        if ctx.snd_una < self._round_end:
            return state
        if not math.isinf(self._round_min_rtt) and not math.isinf(state.base_rtt):
            diff = state.cwnd * (1.0 - state.base_rtt / self._round_min_rtt)
            state = self._apply("round", state, diff=diff)
        self._round_end = ctx.snd_nxt
        self._round_min_rtt = math.inf
        return state

    def _westwood_sample(self, state: CcState, ctx: AckContext) -> None:
        if self._bw_since is None:
            self._bw_since = ctx.now
            return
        self._bw_bytes += ctx.delivered_bytes
        interval = state.base_rtt if not math.isinf(state.base_rtt) else 0.1
        elapsed = (ctx.now - self._bw_since) / US_PER_S
        if elapsed < interval:
            return
        sample = self._bw_bytes / elapsed
        if self.bw_estimate is None:
            self.bw_estimate = sample
        else:
            self.bw_estimate += WESTWOOD_GAIN * (sample - self.bw_estimate)
        self._bw_bytes = 0
        self._bw_since = ctx.now

    def on_loss(self, state: CcState, now: SimTime) -> CcState:
        new = self._apply("triple_dup", state)
        self.last_decision = {"branch": self.name}
        return new

    def on_timeout(self, state: CcState, now: SimTime) -> CcState:
        self._round_end = None
        return self._apply("timeout", state)

    def on_recovery_exit(self, state: CcState) -> CcState:
        return self._apply("recovery_exit", state)


def make_controller(name: str, **kwargs) -> CongestionController:
    name = name.lower().replace("-", "_")
    if name == "aggressive":
        return AggressiveCc(**kwargs)
    kwargs.pop("empty_segments_in_ca", None)
    if name in ALGORITHMS:
        return BaselineCc(name, **kwargs)
    raise UnknownAlgorithm(name)
