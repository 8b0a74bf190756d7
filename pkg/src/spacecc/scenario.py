"""Build one simulation from a ScenarioConfig and run it to a RunReport."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .channel import Channel, Outcome
from .config import ScenarioConfig
from .metrics import CallStats, RunRecord, RunReport, summarize, write_report
from .sim_core import RngFactory, Simulator, seconds_to_us
from .traffic import generate_workload
from .transport import Connection, SenderParams, make_controller

CALL_DRAIN_LIMIT = 3600.0  # seconds past the arrival horizon before giving up


@dataclass
class RunResult:
    config: ScenarioConfig
    seed: int
    report: RunReport
    connections: list = field(default_factory=list)
    channel: Channel | None = None

    @property
    def summary(self) -> dict:
        return self.report.summary


def _controller(cfg: ScenarioConfig):
    t = cfg.transport
    return make_controller(cfg.algorithm, initial_ssthresh=t.initial_ssthresh, mss=t.mss,
                           history_capacity=t.rtt_history, decay_tau=t.rtt_decay_tau,
                           empty_segments_in_ca=t.empty_segments_in_ca)


def _params(cfg: ScenarioConfig) -> SenderParams:
    t = cfg.transport
    return SenderParams(mss=t.mss, min_rto=t.min_rto, max_rto=t.max_rto,
                        rtt_est=cfg.path.resolve_rtt_est(), probe_interval=t.probe_interval)


def _increments(acked) -> list:
    out, prev = [], 0
    for t, cum in acked:
        if cum > prev:
            out.append((t, cum - prev))
            prev = cum
    return out


def _channel_extra(channel: Channel) -> dict:
    return {
        "packets_sent": channel.sent,
        "random_losses": channel.counts[Outcome.LOST_RANDOM],
        "queue_drops": channel.counts[Outcome.DROPPED_QUEUE_FULL],
        "outage_drops": channel.counts[Outcome.BLACKHOLED_OUTAGE],
    }


def run_once(cfg: ScenarioConfig, seed: int | None = None) -> RunResult:
    """Simulate ``cfg`` under one seed (the first configured seed by default)."""
    seed = cfg.seeds[0] if seed is None else int(seed)
    sim = Simulator()
    rng = RngFactory(seed)
    channel = Channel(cfg.path.to_spec(), sim, rng)
    kind = cfg.workload.kind
    runner = {"ftp": _run_ftp, "calls": _run_calls, "vbr": _run_vbr}[kind]
    record, conns = runner(cfg, sim, rng, channel)
    record.busy_fraction = lambda t0, t1: channel.utilization_sample((t0, t1))
    record.sample_interval = cfg.sample_interval
    record.extra = {"seed": seed, **_channel_extra(channel), **record.extra}
    return RunResult(cfg, seed, summarize(record), conns, channel)


def _base_record(cfg: ScenarioConfig, kind: str) -> RunRecord:
    return RunRecord(algorithm=cfg.algorithm, loss_rate=cfg.path.effective_loss(),
                     kind=kind, end=0)


def _run_ftp(cfg, sim, rng, channel):
    wl = cfg.workload.ftp
    conn = Connection(sim, channel, _controller(cfg), _params(cfg))
    payload = rng.stream("payload").bytes(wl.total_bytes)
    for at, nbytes in generate_workload("ftp", wl, rng.stream("workload")):
        sim.call_at(at, conn.sender.write, payload[:nbytes], True)
    end = seconds_to_us(cfg.duration)
    sim.run(stop=lambda: conn.sender.completed_at is not None, end=end)
    s = conn.sender
    if s.completed_at is None:
        sim.run_until(end)
    rec = _base_record(cfg, "ftp")
    rec.end = s.completed_at if s.completed_at is not None else end
    rec.completion_time = s.completed_at
    rec.delivered = _increments(s.log.acked)
    rec.cwnd_trace = [(t, cwnd) for t, cwnd, _, _ in s.log.trace]
    rec.extra = {
        "data_intact": conn.intact if s.completed_at is not None else False,
        "timeouts": s.timeouts,
        "retransmissions": s.retransmissions,
        "maintenance_entries": len(s.maintenance_history) + (s.maintenance is not None),
    }
    return rec, [conn]


class _CallTracker:
    def __init__(self, cfg, sim, rng, channel):
        self.cfg = cfg
        self.sim = sim
        self.rng = rng
        self.channel = channel
        self.params = _params(cfg)
        self.calls = cfg.workload.calls
        self.stats = CallStats()
        self.delivered: list = []
        self.active = 0
        self.arrivals = generate_workload("calls", self.calls, rng.stream("workload"))
        self.exhausted = False
        self.last_event = 0
        self.timeouts = 0
        self.next_id = 0

    def schedule_next(self) -> None:
        nxt = next(self.arrivals, None)
        if nxt is None:
            self.exhausted = True
            return
        self.sim.call_at(nxt[0], self.arrive, nxt[1])

    def arrive(self, nbytes: int) -> None:
        cid = self.next_id
        self.next_id += 1
        arrived = self.sim.now
        state = {"resolved": False}

        def resolve():
            state["resolved"] = True
            self.active -= 1
            self.last_event = self.sim.now
            self.timeouts += conn.sender.timeouts
            conn.release_streams()

        def complete(sender):
            if state["resolved"]:
                return
            self.stats.record_completed((self.sim.now - arrived) / 1e6, sender.app_bytes)
            self.delivered.extend(_increments(sender.log.acked))
            self.sim.cancel(block_timer)
            resolve()

        def check_open():
            if state["resolved"] or conn.sender.first_ack_at is not None:
                return
            self.stats.record_blocked()
            conn.sender.abort()
            resolve()

        conn = Connection(self.sim, self.channel, _controller(self.cfg), self.params,
                          conn_id=cid, on_complete=complete, loss_key=f"c{cid}")
        self.active += 1
        block_timer = self.sim.call_later(seconds_to_us(self.calls.block_timeout), check_open)
        conn.sender.write(self.rng.stream("payload").bytes(nbytes), close=True)
        self.schedule_next()

    def done(self) -> bool:
        return self.exhausted and self.active == 0


def _run_calls(cfg, sim, rng, channel):
    tr = _CallTracker(cfg, sim, rng, channel)
    tr.schedule_next()
    hard_end = seconds_to_us(cfg.workload.calls.horizon[1] + CALL_DRAIN_LIMIT)
    sim.run(stop=tr.done, end=hard_end)
    rec = _base_record(cfg, "calls")
    rec.end = max(tr.last_event, 1)
    rec.completion_time = tr.last_event
    rec.delivered = sorted(tr.delivered)
    rec.calls = tr.stats
    rec.extra = {"calls_unfinished": tr.active, "timeouts": tr.timeouts}
    return rec, []


def _run_vbr(cfg, sim, rng, channel):
    wl = cfg.workload.vbr
    conn = Connection(sim, channel, _controller(cfg), _params(cfg))
    payload = rng.stream("payload")
    frames = generate_workload("vbr", wl, rng.stream("workload"), end=cfg.duration)

    def feed():
        item = next(frames, None)
        if item is None:
            return
        at, nbytes = item
        sim.call_at(at, emit, nbytes)

    def emit(nbytes):
        conn.sender.write(payload.bytes(nbytes))
        feed()

    feed()
    end = seconds_to_us(cfg.duration)
    sim.run_until(end)
    s = conn.sender
    rec = _base_record(cfg, "vbr")
    rec.end = end
    rec.delivered = _increments(s.log.acked)
    rec.extra = {"offered_bytes": s.app_bytes, "timeouts": s.timeouts}
    return rec, [conn]


def output_dir(root, cfg: ScenarioConfig, seed: int) -> Path:
    return Path(root) / cfg.name / cfg.algorithm / str(seed)


def run_and_write(cfg: ScenarioConfig, out_root, seed: int) -> RunResult:
    res = run_once(cfg, seed)
    write_report(res.report, output_dir(out_root, cfg, seed))
    return res


def sweep_cells(cfg: ScenarioConfig):
    """Yield one concrete config per (loss rate, algorithm, seed) cell.

    Each loss rate becomes its own scenario directory, ``<name>_loss<rate>``.
    """
    sweep = cfg.sweep
    for loss in sweep.loss_rates:
        for alg in sweep.algorithms:
            for seed in cfg.seeds:
                yield replace(cfg, name=f"{cfg.name}_loss{loss:g}", algorithm=alg,
                              seeds=(seed,), path=replace(cfg.path, loss_rate=loss)), seed
