"""Deterministic discrete-event engine.

Simulation time is kept as integer microseconds so that event ordering never
depends on floating-point rounding. Public helpers convert to and from decimal
seconds.
"""

from __future__ import annotations

import hashlib
import heapq
import itertools
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Callable

import numpy as np

US_PER_S = 1_000_000

SimTime = int
"""Simulated time in integer microseconds."""


class SchedulingInPast(ValueError):
    """Raised when an event is scheduled before the current clock."""


def seconds_to_us(seconds: float | str | Decimal) -> SimTime:
    """Convert decimal seconds to integer microseconds (round half to even)."""
    if isinstance(seconds, int):
        return seconds * US_PER_S
    value = Decimal(str(seconds)) * US_PER_S
    return int(value.to_integral_value())


def us_to_seconds(t: SimTime) -> float:
    return t / US_PER_S


@dataclass(order=True)
class Event:
    fire_at: SimTime
    sequence_no: int
    action: Callable[..., Any] = field(compare=False)
    args: tuple = field(default=(), compare=False)


class Simulator:
    """Virtual clock plus a time-ordered event queue.

    Events with equal ``fire_at`` run in insertion order. Cancelled events are
    removed lazily when they reach the head of the heap.
    """

    def __init__(self):
        self.now: SimTime = 0
        self._heap: list[Event] = []
        self._counter = itertools.count(1)
        self._pending: dict[int, Event] = {}
        self.events_processed = 0
        self._log = hashlib.blake2b(digest_size=16)

    def schedule(self, event: Event) -> int:
        """Enqueue ``event`` and return its ticket.

        The simulator stamps ``sequence_no`` itself so tickets stay unique and
        ties resolve in insertion order.
        """
        if event.fire_at < self.now:
            raise SchedulingInPast(
                f"event at {event.fire_at} us scheduled when clock is {self.now} us"
            )
        event.sequence_no = next(self._counter)
        heapq.heappush(self._heap, event)
        self._pending[event.sequence_no] = event
        return event.sequence_no

    def call_at(self, fire_at: SimTime, action: Callable[..., Any], *args) -> int:
        return self.schedule(Event(int(fire_at), 0, action, args))

    def call_later(self, delay: SimTime, action: Callable[..., Any], *args) -> int:
        return self.call_at(self.now + int(delay), action, *args)

    def cancel(self, ticket: int) -> bool:
        return self._pending.pop(ticket, None) is not None

    def is_pending(self, ticket: int | None) -> bool:
        return ticket is not None and ticket in self._pending

    def fire_time(self, ticket: int) -> SimTime | None:
        ev = self._pending.get(ticket)
        return None if ev is None else ev.fire_at

    def peek_time(self) -> SimTime | None:
        while self._heap and self._heap[0].sequence_no not in self._pending:
            heapq.heappop(self._heap)
        return self._heap[0].fire_at if self._heap else None

    def run_until(self, end: SimTime) -> int:
        """Deliver every event with ``fire_at <= end``; return how many ran."""
        processed = 0
        heap = self._heap
        pending = self._pending
        while heap:
            ev = heap[0]
            if ev.sequence_no not in pending:
                heapq.heappop(heap)
                continue
            if ev.fire_at > end:
                break
            heapq.heappop(heap)
            del pending[ev.sequence_no]
            self.now = ev.fire_at
            self._log.update(ev.fire_at.to_bytes(8, "little"))
            self._log.update(ev.sequence_no.to_bytes(8, "little"))
            ev.action(*ev.args)
            processed += 1
        if end > self.now:
            self.now = end
        self.events_processed += processed
        return processed

    def run(self, stop: Callable[[], bool] | None = None, end: SimTime | None = None) -> int:
        """Run until the queue drains, ``stop()`` turns true, or ``end`` passes."""
        processed = 0
        while True:
            t = self.peek_time()
            if t is None or (end is not None and t > end):
                break
            processed += self.run_until(t)
            if stop is not None and stop():
                break
        return processed

    def log_digest(self) -> str:
        """Hash of the (time, sequence) pairs delivered so far."""
        return self._log.copy().hexdigest()


def _derive_key(seed: int, stream_id: str) -> int:
    h = hashlib.blake2b(
        f"{int(seed)}/{stream_id}".encode(), digest_size=16, person=b"spacecc-rng"
    )
    return int.from_bytes(h.digest(), "little")


class RngStream:
    """Named pseudo-random stream backed by a counter-based Philox generator.

    The sample sequence depends only on ``(seed, stream_id)``, so streams for
    different stochastic processes never perturb each other.
    """

    _MAX_BLOCK = 4096

    def __init__(self, seed: int, stream_id: str):
        self.seed = int(seed)
        self.stream_id = stream_id
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(seed, stream_id)))
        self._buf = np.empty(0)
        self._pos = 0
        self._block = 16
        self.draws = 0

    def random(self) -> float:
        """Uniform sample on [0, 1)."""
        if self._pos >= len(self._buf):
            # prefetch sizes grow so thousands of short-lived streams stay cheap
            self._buf = self._gen.random(self._block)
            self._block = min(self._MAX_BLOCK, self._block * 2)
            self._pos = 0
        u = float(self._buf[self._pos])
        self._pos += 1
        self.draws += 1
        return u

    def uniform_open_closed(self) -> float:
        """Uniform sample on (0, 1]."""
        return 1.0 - self.random()

    def random_array(self, n: int) -> np.ndarray:
        """``n`` consecutive [0, 1) samples, continuing the scalar sequence."""
        head = self._buf[self._pos:self._pos + n]
        self._pos += len(head)
        self.draws += n
        if len(head) == n:
            return head.copy()
        return np.concatenate([head, self._gen.random(n - len(head))])


    def bytes(self, n: int) -> bytes:
        """Pseudo-random payload bytes; use a stream dedicated to payloads."""
        return self._gen.bytes(n)


class RngFactory:
    """Hands out one RngStream per label for a given run seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        if stream_id not in self._streams:
            self._streams[stream_id] = RngStream(self.seed, stream_id)
        return self._streams[stream_id]

    def release(self, stream_id: str) -> None:
        """Forget a stream; asking for it again restarts its sequence."""
        self._streams.pop(stream_id, None)
