"""Point-to-point link chain with delay, asymmetric rates, random loss, drop-tail
queues and scheduled outages.

Each hop has one independent FIFO queue per direction. Serialization is tracked
in integer nanoseconds inside a hop; delivery times are rounded up to the
microsecond clock so causality and per-direction FIFO order are preserved.
"""

from __future__ import annotations

import bisect
import enum
import math
from collections import deque
from dataclasses import dataclass, field

from .sim_core import RngFactory, SimTime, Simulator, seconds_to_us

FORWARD = "forward"
REVERSE = "reverse"

_NS_PER_US = 1000


class WindowNotElapsed(ValueError):
    pass


@dataclass(frozen=True)
class LinkSpec:
    """One hop. Delay in seconds, rates in bits/second."""

    prop_delay: float
    forward_rate: float
    reverse_rate: float
    loss_prob: float = 0.0
    queue_capacity: int = 100

    def __post_init__(self):
        if self.prop_delay < 0:
            raise ValueError("prop_delay must be non-negative")
        if self.forward_rate <= 0 or self.reverse_rate <= 0:
            raise ValueError("link rates must be positive")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError(f"loss_prob {self.loss_prob} outside [0, 1]")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be at least 1")

    @property
    def asymmetry(self) -> float:
        return self.forward_rate / self.reverse_rate


@dataclass(frozen=True)
class OutageWindow:
    start: SimTime
    end: SimTime

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"outage start {self.start} must precede end {self.end}")

    @classmethod
    def from_seconds(cls, start: float, end: float) -> "OutageWindow":
        return cls(seconds_to_us(start), seconds_to_us(end))

    def overlaps(self, t0: SimTime, t1: SimTime) -> bool:
        return t0 < self.end and t1 > self.start


@dataclass(frozen=True)
class PathSpec:
    links: tuple[LinkSpec, ...]
    outages: tuple[tuple[OutageWindow, ...], ...] = ()

    def __post_init__(self):
        if not self.links:
            raise ValueError("a path needs at least one link")
        outages = tuple(tuple(w) for w in self.outages) or tuple(() for _ in self.links)
        if len(outages) != len(self.links):
            raise ValueError("outages must list one window sequence per link")
        for windows in outages:
            for a, b in zip(windows, windows[1:]):
                if not a.end <= b.start:
                    raise ValueError("outage windows must be sorted and non-overlapping")
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "outages", outages)

    @property
    def one_way_delay(self) -> float:
        return sum(link.prop_delay for link in self.links)

    @property
    def bottleneck_index(self) -> int:
        rates = [link.forward_rate for link in self.links]
        return rates.index(min(rates))


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    LOST_RANDOM = "lost_random"
    DROPPED_QUEUE_FULL = "dropped_queue_full"
    BLACKHOLED_OUTAGE = "blackholed_outage"


@dataclass(frozen=True)
class DeliveryOutcome:
    outcome: Outcome
    at: SimTime | None = None
    hop: int | None = None

    @property
    def delivered(self) -> bool:
        return self.outcome is Outcome.DELIVERED


@dataclass
class _HopQueue:
    """Drop-tail FIFO in front of one hop direction."""

    rate: float
    capacity: int
    busy_until_ns: int = 0
    waiting: deque = field(default_factory=deque)  # serialization start times, ns
    starts: list = field(default_factory=list)
    ends: list = field(default_factory=list)
    busy_prefix: list = field(default_factory=lambda: [0])
    record: bool = False

    def enqueue(self, arrive_ns: int, bits: int) -> int | None:
        """Return serialization end time in ns, or None when the buffer is full."""
        w = self.waiting
        while w and w[0] <= arrive_ns:
            w.popleft()
        start = max(arrive_ns, self.busy_until_ns)
        if start > arrive_ns:
            if len(w) >= self.capacity:
                return None
            w.append(start)
        end = start + math.ceil(bits * 1e9 / self.rate)
        self.busy_until_ns = end
        if self.record:
            self.starts.append(start)
            self.ends.append(end)
            self.busy_prefix.append(self.busy_prefix[-1] + (end - start))
        return end

    def busy_ns(self, t0: int, t1: int) -> int:
        """Nanoseconds spent serializing within [t0, t1]."""
        if t1 <= t0 or not self.starts:
            return 0
        i = bisect.bisect_right(self.ends, t0)
        j = bisect.bisect_left(self.starts, t1)
        if i >= j:
            return 0
        total = self.busy_prefix[j] - self.busy_prefix[i]
        total -= max(0, t0 - self.starts[i])
        total -= max(0, self.ends[j - 1] - t1)
        return total


class Channel:
    """Runtime state of a PathSpec inside one simulation run.

    Loss draws come from named streams keyed by direction and packet kind
    (``data``, ``ctrl``, ``ack``); each packet consumes exactly one draw per
    hop regardless of its fate, so the i-th data packet sees the same loss
    decisions whatever congestion controller produced it.
    """

    def __init__(self, spec: PathSpec, sim: Simulator, rng: RngFactory):
        self.spec = spec
        self.sim = sim
        self.rng = rng
        self._hops = {
            FORWARD: [
                _HopQueue(link.forward_rate, link.queue_capacity) for link in spec.links
            ],
            REVERSE: [
                _HopQueue(link.reverse_rate, link.queue_capacity) for link in spec.links
            ],
        }
        self._delay_ns = [seconds_to_us(link.prop_delay) * _NS_PER_US for link in spec.links]
        self._bottleneck = self._hops[FORWARD][spec.bottleneck_index]
        self._bottleneck.record = True
        self.counts = {o: 0 for o in Outcome}
        self.sent = 0

    def transmit(self, size_bytes: int, direction: str, at: SimTime | None = None,
                 kind: str = "data") -> DeliveryOutcome:
        """Push one packet through every hop and decide its fate.

        Reverse-direction packets traverse the hops in reverse order.
        """
        if at is None:
            at = self.sim.now
        n = len(self.spec.links)
        order = range(n) if direction == FORWARD else range(n - 1, -1, -1)
        stream = self.rng.stream(f"loss/{direction}/{kind}")
        draws = [stream.random() for _ in range(n)]
        hops = self._hops[direction]
        bits = 8 * size_bytes
        t_ns = at * _NS_PER_US
        self.sent += 1
        for hop in order:
            link = self.spec.links[hop]
            q = hops[hop]
            ser_end = q.enqueue(t_ns, bits)
            if ser_end is None:
                return self._done(Outcome.DROPPED_QUEUE_FULL, None, hop)
            arrive_ns = ser_end + self._delay_ns[hop]
            t0_us = t_ns // _NS_PER_US
            t1_us = -(-arrive_ns // _NS_PER_US)
            if any(w.overlaps(t0_us, t1_us) for w in self.spec.outages[hop]):
                return self._done(Outcome.BLACKHOLED_OUTAGE, None, hop)
            if draws[hop] < link.loss_prob:
                return self._done(Outcome.LOST_RANDOM, None, hop)
            t_ns = arrive_ns
        return self._done(Outcome.DELIVERED, -(-t_ns // _NS_PER_US), None)

    def _done(self, outcome: Outcome, at, hop) -> DeliveryOutcome:
        self.counts[outcome] += 1
        return DeliveryOutcome(outcome, at, hop)

    def utilization_sample(self, window: tuple[SimTime, SimTime]) -> float:
        """Fraction of the bottleneck forward capacity used during ``window``."""
        t0, t1 = window
        if t1 <= t0:
            raise ValueError("utilization window must have positive length")
        if t1 > self.sim.now:
            raise WindowNotElapsed(f"window ends at {t1} us but clock is {self.sim.now} us")
        busy = self._bottleneck.busy_ns(t0 * _NS_PER_US, t1 * _NS_PER_US)
        return min(1.0, busy / ((t1 - t0) * _NS_PER_US))
