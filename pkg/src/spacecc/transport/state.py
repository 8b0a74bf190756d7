from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from ..sim_core import SimTime, US_PER_S

HEADER_BYTES = 40
BETA = 3.0
DUP_ACK_THRESHOLD = 3


class EmptyHistory(ValueError):
    pass


class Phase(enum.Enum):
    SLOW_START = "slow_start"
    FAST_START = "fast_start"
    CONGESTION_AVOIDANCE = "congestion_avoidance"
    FAST_RECOVERY = "fast_recovery"
    MAINTENANCE_FROZEN = "maintenance_frozen"


@dataclass(frozen=True)
class Segment:
    seq: int
    len: int
    sent_at: SimTime
    is_empty: bool = False
    is_retransmit: bool = False
    is_probe: bool = False
    conn_id: int = 0
    payload: bytes = b""
    xmit: int = 0

    def __post_init__(self):
        if self.is_empty and self.len != 0:
            raise ValueError("empty segments carry no payload")

    @property
    def wire_bytes(self) -> int:
        return self.len + HEADER_BYTES


@dataclass(frozen=True)
class Ack:
    cum_ack: int
    echo_sent_at: SimTime
    recv_at: SimTime
    echo_empty: bool = False
    echo_probe: bool = False
    echo_seq: int = 0
    echo_xmit: int = 0
    conn_id: int = 0

    wire_bytes = HEADER_BYTES


@dataclass(frozen=True)
class CcState:
    """Window state shared by every congestion controller.

    ``cwnd`` and ``ssthresh`` are in segments; ``cwnd`` keeps its fractional
    part and is floored only when gating transmission.
    """

    cwnd: float = 1.0
    ssthresh: float = 64.0
    base_rtt: float = math.inf
    phase: Phase = Phase.SLOW_START

    def __post_init__(self):
        if self.cwnd < 1.0:
            object.__setattr__(self, "cwnd", 1.0)
        if self.ssthresh < 2.0:
            object.__setattr__(self, "ssthresh", 2.0)

    @property
    def window(self) -> int:
        return int(math.floor(self.cwnd))


class RttHistory:
    """Timestamped RTT samples, oldest evicted first."""

    def __init__(self, capacity: int = 64):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.samples: deque[tuple[SimTime, float]] = deque(maxlen=capacity)

    def add(self, at: SimTime, rtt: float) -> None:
        if self.samples and at <= self.samples[-1][0]:
            # same clock tick: keep the later measurement only
            if at == self.samples[-1][0]:
                self.samples[-1] = (at, rtt)
                return
            raise ValueError("RTT sample timestamps must be strictly increasing")
        self.samples.append((at, rtt))

    def __len__(self) -> int:
        return len(self.samples)

    def __bool__(self) -> bool:
        return bool(self.samples)

    @property
    def latest(self) -> float:
        return self.samples[-1][1]

    @classmethod
    def from_pairs(cls, pairs, capacity: int = 64) -> "RttHistory":
        h = cls(capacity)
        for t, r in pairs:
            h.add(int(t), float(r))
        return h


@dataclass(frozen=True)
class CongestionSignal:
    sigma: float
    expected: float
    actual: float
    smoothed_rtt: float
    base_rtt: float
    k: float | None = None
    beta: float = BETA

    @property
    def congestive(self) -> bool:
        return self.sigma > self.beta


@dataclass
class MaintenanceRecord:
    """What the sender froze when the link was judged broken."""

    cwnd: float
    ssthresh: float
    entered_at: SimTime
    rto_remaining: SimTime | None
    reason: str
    exited_at: SimTime | None = None
    probes: list[SimTime] = field(default_factory=list)


def us(seconds: float) -> SimTime:
    return int(round(seconds * US_PER_S))
