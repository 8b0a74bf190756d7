"""Reliable-transfer sender and receiver driven by the event simulator.

Loss recovery is shared by every congestion controller: each ACK echoes the
transmission that triggered it, the sender keeps a per-segment scoreboard, and
a segment is declared lost once ``dupthresh`` later transmissions have been
acknowledged. Only the window reactions differ between controllers.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from ..channel import FORWARD, REVERSE, Channel
from ..sim_core import SimTime, Simulator, US_PER_S
from . import aggressive as agg
from .controllers import AckContext, CongestionController
from .state import (
    DUP_ACK_THRESHOLD,
    Ack,
    CcState,
    MaintenanceRecord,
    Phase,
    Segment,
)


@dataclass
class SenderParams:
    mss: int = 1024
    min_rto: float = 1.0
    max_rto: float = 64.0
    initial_rto: float | None = None
    rtt_est: float | None = None
    probe_interval: float | None = None
    dupthresh: int = DUP_ACK_THRESHOLD
    companion_loss_inference: bool = True
    rollback_on_silence: bool = True

    def initial_rto_s(self) -> float:
        if self.initial_rto is not None:
            return self.initial_rto
        if self.rtt_est:
            return 2.0 * self.rtt_est
        return 1.0

    def probe_interval_s(self) -> float | None:
        if self.probe_interval is not None:
            return self.probe_interval
        return 2.0 * self.rtt_est if self.rtt_est else None


class _Seg:
    __slots__ = ("seq", "len", "sent_at", "xmit", "sacked", "lost", "in_flight", "retrans")

    def __init__(self, seq: int, length: int):
        self.seq = seq
        self.len = length
        self.sent_at = 0
        self.xmit = -1
        self.sacked = False
        self.lost = False
        self.in_flight = False
        self.retrans = 0


class Receiver:
    """Cumulative-ACK receiver that acknowledges every arriving segment."""

    def __init__(self, sim: Simulator, send_ack: Callable[[Ack], None], keep_data: bool = False):
        self.sim = sim
        self.send_ack = send_ack
        self.rcv_nxt = 0
        self._ooo: dict[int, bytes] = {}
        self._hash = hashlib.sha256()
        self.keep_data = keep_data
        self.data = bytearray()
        self.segments_received = 0
        self.empty_received = 0

    def on_segment(self, seg: Segment) -> None:
        if seg.is_empty:
            self.empty_received += 1
        else:
            self.segments_received += 1
            if seg.seq == self.rcv_nxt:
                self._consume(seg.payload)
                while self.rcv_nxt in self._ooo:
                    self._consume(self._ooo.pop(self.rcv_nxt))
            elif seg.seq > self.rcv_nxt and seg.seq not in self._ooo:
                self._ooo[seg.seq] = seg.payload
        self.send_ack(Ack(
            cum_ack=self.rcv_nxt,
            echo_sent_at=seg.sent_at,
            recv_at=self.sim.now,
            echo_empty=seg.is_empty,
            echo_probe=seg.is_probe,
            echo_seq=seg.seq,
            echo_xmit=seg.xmit,
            conn_id=seg.conn_id,
        ))

    def _consume(self, payload: bytes) -> None:
        self._hash.update(payload)
        if self.keep_data:
            self.data += payload
        self.rcv_nxt += len(payload)

    def digest(self) -> str:
        return self._hash.hexdigest()


@dataclass
class SenderLog:
    trace: list = field(default_factory=list)      # (t, cwnd, ssthresh, phase)
    events: list = field(default_factory=list)     # dicts
    acked: list = field(default_factory=list)      # (t, cumulative payload bytes acked)
    sends: list = field(default_factory=list)      # (t, pipe_before, window, bypass) when recording gating


class Sender:
    def __init__(self, sim: Simulator, controller: CongestionController,
                 transmit: Callable[[Segment], None], params: SenderParams | None = None,
                 conn_id: int = 0, on_complete: Callable[["Sender"], None] | None = None,
                 on_first_ack: Callable[["Sender"], None] | None = None,
                 record_gating: bool = False):
        self.sim = sim
        self.cc = controller
        self.params = params or SenderParams()
        self._transmit = transmit
        self.conn_id = conn_id
        self.on_complete = on_complete
        self.on_first_ack = on_first_ack
        self.record_gating = record_gating
        self.log = SenderLog()

        self.state: CcState = controller.initial_state()
        self._log_state()

        self._buf = bytearray()
        self._buf_base = 0
        self._hash = hashlib.sha256()
        self.app_bytes = 0
        self.app_closed = False

        self.snd_una = 0
        self.snd_nxt = 0
        self.snd_max = 0
        self._segs: dict[int, _Seg] = {}
        self._order: deque[int] = deque()          # outstanding seqs, ascending
        self._xmit_log: deque = deque()            # (xmit, seq, is_empty)
        self._recent: deque = deque(maxlen=self.params.dupthresh)
        self._lost: list[int] = []                 # heap of seqs awaiting retransmission
        self._xmit_counter = 0
        self.pipe = 0

        self.in_recovery = False
        self.recover = -1

        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = self.params.initial_rto_s()
        self._rto_timer: int | None = None

        self.last_ack_at: SimTime | None = None
        self._quiet_since: SimTime = 0
        self._watchdog: int | None = None
        self._probe_timer: int | None = None
        self.maintenance: MaintenanceRecord | None = None
        self.maintenance_history: list[MaintenanceRecord] = []
        self._samples_valid_after: SimTime = 0
        self._state_at_last_ack = self.state

        self.first_ack_at: SimTime | None = None
        self.completed_at: SimTime | None = None
        self.closed = False
        self.timeouts = 0
        self.retransmissions = 0

    # -- application side -------------------------------------------------

    def write(self, data: bytes, close: bool = False) -> None:
        if self.app_closed:
            raise RuntimeError("write after close")
        self._buf += data
        self._hash.update(data)
        self.app_bytes += len(data)
        self.app_closed = close
        self._send_available()

    def close(self) -> None:
        self.app_closed = True
        self._check_complete()

    def abort(self) -> None:
        """Stop all activity (used when a call is blocked)."""
        self.closed = True
        for t in (self._rto_timer, self._watchdog, self._probe_timer):
            if t is not None:
                self.sim.cancel(t)
        self._rto_timer = self._watchdog = self._probe_timer = None

    def input_digest(self) -> str:
        return self._hash.hexdigest()

    @property
    def frozen(self) -> bool:
        return self.state.phase is Phase.MAINTENANCE_FROZEN

    @property
    def outstanding(self) -> bool:
        return self.snd_una < self.snd_max

    # -- state bookkeeping ------------------------------------------------

    def _set_state(self, new: CcState) -> None:
        if new != self.state:
            self.state = new
            self._log_state()

    def _log_state(self) -> None:
        s = self.state
        self.log.trace.append((self.sim.now, s.cwnd, s.ssthresh, s.phase.value))

    def _event(self, kind: str, **info) -> None:
        info["t"] = self.sim.now
        info["kind"] = kind
        self.log.events.append(info)

    # -- transmission -----------------------------------------------------

    def _payload(self, seq: int, length: int) -> bytes:
        off = seq - self._buf_base
        return bytes(self._buf[off:off + length])

    def _emit(self, seq: int, length: int, *, empty: bool = False, probe: bool = False,
              retransmit: bool = False) -> int:
        self._xmit_counter += 1
        xmit = self._xmit_counter
        seg = Segment(
            seq=seq, len=0 if empty else length, sent_at=self.sim.now, is_empty=empty,
            is_retransmit=retransmit, is_probe=probe, conn_id=self.conn_id,
            payload=b"" if empty else self._payload(seq, length), xmit=xmit,
        )
        self._xmit_log.append((xmit, seq, empty))
        self._transmit(seg)
        return xmit

    def _send_one(self, seg: _Seg, retransmit: bool, bypass: bool = False) -> None:
        if self.record_gating:
            self.log.sends.append((self.sim.now, self.pipe, self.state.window, bypass))
        seg.sent_at = self.sim.now
        seg.lost = False
        seg.in_flight = True
        self.pipe += 1
        if retransmit:
            seg.retrans += 1
            self.retransmissions += 1
        seg.xmit = self._emit(seg.seq, seg.len, retransmit=retransmit)
        if self.cc.sends_empty(self.state):
            self._emit(seg.seq + seg.len, 0, empty=True)

    def _next_lost(self) -> _Seg | None:
        while self._lost:
            seq = self._lost[0]
            seg = self._segs.get(seq)
            if seg is not None and seg.lost and not seg.sacked:
                return seg
            heapq.heappop(self._lost)
        return None

    def _send_available(self) -> None:
        if self.closed or self.frozen:
            return
        if not self.outstanding:
            self._quiet_since = self.sim.now
        while self.pipe < self.state.window:
            seg = self._next_lost()
            if seg is not None:
                heapq.heappop(self._lost)
                self._send_one(seg, retransmit=True)
                continue
            if self.snd_nxt >= self.app_bytes:
                break
            length = min(self.params.mss, self.app_bytes - self.snd_nxt)
            seg = _Seg(self.snd_nxt, length)
            self._segs[seg.seq] = seg
            self._order.append(seg.seq)
            self.snd_nxt += length
            self.snd_max = max(self.snd_max, self.snd_nxt)
            self._send_one(seg, retransmit=False)
        if self.outstanding:
            self._arm_rto()
            self._arm_watchdog()

    # -- timers -----------------------------------------------------------

    def _arm_rto(self, restart: bool = False, duration: SimTime | None = None) -> None:
        if self.closed or self.frozen:
            return
        if self._rto_timer is not None and self.sim.is_pending(self._rto_timer):
            if not restart:
                return
            self.sim.cancel(self._rto_timer)
        if duration is None:
            duration = int(round(self.rto * US_PER_S))
        self._rto_timer = self.sim.call_later(duration, self._on_rto)

    def _on_rto(self) -> None:
        self._rto_timer = None
        if self.closed or not self.outstanding:
            return
        if self.frozen:
            # held clocks never fire; defensive only
            return
        self.timeouts += 1
        before = self.state
        self._set_state(self.cc.on_timeout(self.state, self.sim.now))
        self._event("timeout", cwnd_before=before.cwnd, ssthresh_after=self.state.ssthresh,
                    rto=self.rto)
        self.rto = min(self.params.max_rto, self.rto * 2.0)
        self._mark_all_lost()
        self.in_recovery = False
        self.recover = self.snd_max
        self._send_available()
        self._arm_rto()

    def _mark_all_lost(self) -> None:
        for seq in self._order:
            seg = self._segs[seq]
            if not seg.sacked and not seg.lost:
                self._mark_lost(seg)

    def _mark_lost(self, seg: _Seg) -> None:
        seg.lost = True
        if seg.in_flight:
            seg.in_flight = False
            self.pipe -= 1
        heapq.heappush(self._lost, seg.seq)

    def _update_rto(self, rtt: float) -> None:
        if self.srtt is None:
            self.srtt = rtt
            self.rttvar = rtt / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
            self.srtt = 0.875 * self.srtt + 0.125 * rtt
        self.rto = min(self.params.max_rto, max(self.params.min_rto, self.srtt + 4.0 * self.rttvar))

    # -- maintenance ------------------------------------------------------

    @property
    def maintenance_enabled(self) -> bool:
        return self.cc.supports_maintenance and bool(self.params.rtt_est)

    @property
    def interruption_threshold(self) -> float:
        return agg.INTERRUPTION_FACTOR * self.params.rtt_est

    def _arm_watchdog(self) -> None:
        if not self.maintenance_enabled or self.frozen or self.closed:
            return
        if self.sim.is_pending(self._watchdog):
            return
        heard = max(self._quiet_since, self.last_ack_at if self.last_ack_at is not None else 0)
        at = heard + int(round(self.interruption_threshold * US_PER_S)) + 1
        self._watchdog = self.sim.call_at(max(at, self.sim.now), self._on_watchdog)

    def _on_watchdog(self) -> None:
        self._watchdog = None
        if self.closed or self.frozen or not self.outstanding:
            return
        heard = max(self._quiet_since, self.last_ack_at if self.last_ack_at is not None else 0)
        silence = (self.sim.now - heard) / US_PER_S
        if agg.maintenance_check(None, self.params.rtt_est, silence=silence):
            self._enter_maintenance("silence")
        else:
            self._arm_watchdog()

    def _enter_maintenance(self, reason: str) -> None:
        snapshot = self.state
        if reason == "silence" and self.params.rollback_on_silence:
            # timeouts that fired while the link was silent were caused by the break
            snapshot = self._state_at_last_ack
        remaining = None
        if self._rto_timer is not None and self.sim.is_pending(self._rto_timer):
            ev_time = self.sim.fire_time(self._rto_timer)
            remaining = max(0, ev_time - self.sim.now)
            self.sim.cancel(self._rto_timer)
        self._rto_timer = None
        if self._watchdog is not None:
            self.sim.cancel(self._watchdog)
            self._watchdog = None
        self.maintenance = MaintenanceRecord(
            cwnd=snapshot.cwnd, ssthresh=snapshot.ssthresh, entered_at=self.sim.now,
            rto_remaining=remaining, reason=reason,
        )
        self._set_state(agg.enter_maintenance(snapshot))
        self._event("maintenance_enter", reason=reason, cwnd=snapshot.cwnd,
                    ssthresh=snapshot.ssthresh)
        self._send_probe()

    def _send_probe(self) -> None:
        self._probe_timer = None
        if not self.frozen or self.closed:
            return
        self.maintenance.probes.append(self.sim.now)
        self._event("probe")
        self._emit(self.snd_una, 0, empty=True, probe=True)
        interval = self.params.probe_interval_s()
        self._probe_timer = self.sim.call_later(int(round(interval * US_PER_S)), self._send_probe)

    def _exit_maintenance(self) -> None:
        rec = self.maintenance
        if self._probe_timer is not None:
            self.sim.cancel(self._probe_timer)
            self._probe_timer = None
        self._set_state(agg.exit_maintenance(self.state, rec.cwnd, rec.ssthresh))
        rec.exited_at = self.sim.now
        self.maintenance_history.append(rec)
        self.maintenance = None
        self._samples_valid_after = self.sim.now
        self._event("maintenance_exit", cwnd=self.state.cwnd, ssthresh=self.state.ssthresh)
        # everything in flight when the link broke is gone: resume from the oldest hole
        self._mark_all_lost()
        self.in_recovery = False
        self.recover = self.snd_max
        self._quiet_since = self.sim.now
        if rec.rto_remaining is not None:
            self._arm_rto(restart=True, duration=rec.rto_remaining)

    # -- ACK processing ---------------------------------------------------

    def on_ack(self, ack: Ack) -> None:
        if self.closed:
            return
        now = self.sim.now
        self.last_ack_at = now
        if self.first_ack_at is None:
            self.first_ack_at = now
            if self.on_first_ack is not None:
                self.on_first_ack(self)
        resumed = False
        if self.frozen:
            self._exit_maintenance()
            resumed = True

        rtt = None
        if ack.echo_sent_at >= self._samples_valid_after:
            rtt = (now - ack.echo_sent_at) / US_PER_S
            self._set_state(self.cc.observe_rtt(self.state, now, rtt))
            if not ack.echo_probe:
                self._update_rto(rtt)
            if (self.maintenance_enabled and not resumed
                    and agg.maintenance_check(None, self.params.rtt_est, latest_rtt=rtt)):
                self._enter_maintenance("rtt")
                return

        newly_delivered = self._note_delivery(ack)
        advanced = ack.cum_ack > self.snd_una
        acked_bytes = 0
        if advanced:
            acked_bytes = self._advance(ack.cum_ack)

        if not resumed:
            growth = 0
            if not self.in_recovery:
                if advanced or ack.echo_empty:
                    growth = 1
            ctx = AckContext(now=now, rtt=rtt, growth_acks=growth,
                             delivered_bytes=acked_bytes + newly_delivered,
                             snd_una=self.snd_una, snd_nxt=self.snd_max)
            self._set_state(self.cc.on_ack(self.state, ctx))

        if self.in_recovery and self.snd_una >= self.recover:
            self.in_recovery = False
            self._set_state(self.cc.on_recovery_exit(self.state))
            self._event("recovery_exit")

        if not resumed:
            self._detect_losses(ack)

        if advanced:
            self.rto_backoff_reset()
            if self.outstanding:
                self._arm_rto(restart=True)
            elif self._rto_timer is not None:
                self.sim.cancel(self._rto_timer)
                self._rto_timer = None
        if self.maintenance_enabled and self._watchdog is not None:
            self.sim.cancel(self._watchdog)
            self._watchdog = None
        self._state_at_last_ack = self.state

        self._send_available()
        self._check_complete()

    def rto_backoff_reset(self) -> None:
        if self.srtt is not None:
            self.rto = min(self.params.max_rto,
                           max(self.params.min_rto, self.srtt + 4.0 * self.rttvar))

    def _note_delivery(self, ack: Ack) -> int:
        """Mark the echoed transmission as delivered; return payload bytes newly known received."""
        self._recent.append(ack.echo_xmit)
        if ack.echo_empty:
            return 0
        seg = self._segs.get(ack.echo_seq)
        if seg is None or seg.sacked:
            return 0
        seg.sacked = True
        if seg.in_flight:
            seg.in_flight = False
            self.pipe -= 1
        seg.lost = False
        return seg.len

    def _advance(self, cum_ack: int) -> int:
        acked = 0
        while self._order and self._order[0] < cum_ack:
            seq = self._order.popleft()
            seg = self._segs.pop(seq)
            if seg.in_flight:
                self.pipe -= 1
            if not seg.sacked:
                acked += seg.len
        self.snd_una = cum_ack
        if self.snd_nxt < cum_ack:
            self.snd_nxt = cum_ack
        self.log.acked.append((self.sim.now, cum_ack))
        trim = self.snd_una - self._buf_base
        if trim > (1 << 20):
            del self._buf[:trim]
            self._buf_base = self.snd_una
        return acked

    def _detect_losses(self, ack: Ack) -> None:
        newly_lost: list[_Seg] = []
        if len(self._recent) == self._recent.maxlen:
            threshold = min(self._recent)
            log = self._xmit_log
            while log and log[0][0] < threshold:
                xmit, seq, empty = log.popleft()
                if empty:
                    continue
                seg = self._segs.get(seq)
                if seg is not None and seg.xmit == xmit and not seg.sacked and not seg.lost:
                    self._mark_lost(seg)
                    newly_lost.append(seg)
        if ack.echo_empty and not ack.echo_probe and self.params.companion_loss_inference:
            # the empty companion follows its data segment on a FIFO path, so an
            # ACK for the companion with the data still unacknowledged means loss
            for seq, seg in self._companion_candidates(ack):
                if not seg.sacked and not seg.lost and seg.xmit < ack.echo_xmit:
                    self._mark_lost(seg)
                    newly_lost.append(seg)
        if not newly_lost:
            return
        first = min(s.seq for s in newly_lost)
        if not self.in_recovery and first >= self.recover:
            before = self.state
            self._set_state(self.cc.on_loss(self.state, self.sim.now))
            self.in_recovery = True
            self.recover = self.snd_max
            decision = dict(self.cc.last_decision or {})
            self._event("triple_dup", cwnd_before=before.cwnd, ssthresh_before=before.ssthresh,
                        cwnd_after=self.state.cwnd, ssthresh_after=self.state.ssthresh,
                        seq=first, **decision)
            # fast retransmit ignores the window; later holes wait for pipe room
            seg = self._next_lost()
            if seg is not None:
                heapq.heappop(self._lost)
                self._send_one(seg, retransmit=True, bypass=True)
                self._arm_rto(restart=True)
        else:
            self._event("loss_in_recovery", seq=first, count=len(newly_lost))

    def _companion_candidates(self, ack: Ack):
        # an empty segment is numbered at the end of the data segment it accompanies
        for seq in reversed(self._order):
            seg = self._segs[seq]
            if seq + seg.len == ack.echo_seq:
                yield seq, seg
                return
            if seq + seg.len < ack.echo_seq:
                return

    def _check_complete(self) -> None:
        if (self.completed_at is None and self.app_closed
                and self.snd_una >= self.app_bytes):
            self.completed_at = self.sim.now
            if self._rto_timer is not None:
                self.sim.cancel(self._rto_timer)
                self._rto_timer = None
            if self._watchdog is not None:
                self.sim.cancel(self._watchdog)
                self._watchdog = None
            if self.on_complete is not None:
                self.on_complete(self)


class Connection:
    """A sender/receiver pair wired through a shared channel."""

    def __init__(self, sim: Simulator, channel: Channel, controller: CongestionController,
                 params: SenderParams | None = None, conn_id: int = 0,
                 on_complete=None, on_first_ack=None, keep_data: bool = False,
                 record_gating: bool = False, loss_key: str | None = None):
        self.sim = sim
        self.channel = channel
        # a per-connection key gives each connection its own loss streams, so
        # the i-th packet of a given call is paired across algorithms
        self._suffix = f"/{loss_key}" if loss_key else ""
        self.receiver = Receiver(sim, self._send_ack, keep_data=keep_data)
        self.sender = Sender(sim, controller, self._send_segment, params, conn_id,
                             on_complete=on_complete, on_first_ack=on_first_ack,
                             record_gating=record_gating)
        self.outcomes: dict = {}

    def _count(self, key) -> None:
        self.outcomes[key] = self.outcomes.get(key, 0) + 1

    def _send_segment(self, seg: Segment) -> None:
        kind = ("ctrl" if seg.is_empty else "data") + self._suffix
        res = self.channel.transmit(seg.wire_bytes, FORWARD, self.sim.now, kind=kind)
        self._count((FORWARD, res.outcome))
        if res.delivered:
            self.sim.call_at(res.at, self.receiver.on_segment, seg)

    def _send_ack(self, ack: Ack) -> None:
        res = self.channel.transmit(ack.wire_bytes, REVERSE, self.sim.now,
                                     kind="ack" + self._suffix)
        self._count((REVERSE, res.outcome))
        if res.delivered:
            self.sim.call_at(res.at, self.sender.on_ack, ack)

    def release_streams(self) -> None:
        if not self._suffix:
            return
        for direction, kind in ((FORWARD, "data"), (FORWARD, "ctrl"), (REVERSE, "ack")):
            self.channel.rng.release(f"loss/{direction}/{kind}{self._suffix}")

    @property
    def intact(self) -> bool:
        return (self.receiver.rcv_nxt == self.sender.app_bytes
                and self.receiver.digest() == self.sender.input_digest())
