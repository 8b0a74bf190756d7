"""Per-run time series, call statistics and deterministic output writers."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sim_core import SimTime, US_PER_S, us_to_seconds

SUMMARY_FIELDS = (
    "algorithm",
    "loss_rate",
    "completion_time_s",
    "mean_throughput_bps",
    "mean_utilization",
    "mean_hold_on_s",
    "blocking_rate",
)


class NoCalls(ValueError):
    pass


class MetricSeries:
    """Named ``(SimTime, value)`` samples with non-decreasing timestamps."""

    def __init__(self, name: str, points=()):
        self.name = name
        self.points: list[tuple[SimTime, float]] = []
        for t, v in points:
            self.append(t, v)

    def append(self, t: SimTime, value: float) -> None:
        if self.points and t < self.points[-1][0]:
            raise ValueError(f"{self.name}: timestamp {t} precedes {self.points[-1][0]}")
        self.points.append((int(t), float(value)))

    def __len__(self) -> int:
        return len(self.points)

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.points], dtype=float)

    def to_csv(self) -> str:
        lines = ["time_s,value"]
        lines.extend(f"{_fmt_time(t)},{_fmt(v)}" for t, v in self.points)
        return "\n".join(lines) + "\n"


@dataclass
class CallStats:
    completed: int = 0
    blocked: int = 0
    hold_on_times: list[float] = field(default_factory=list)
    bytes_completed: int = 0

    @property
    def attempted(self) -> int:
        return self.completed + self.blocked

    def record_completed(self, hold_on: float, nbytes: int) -> None:
        self.completed += 1
        self.hold_on_times.append(hold_on)
        self.bytes_completed += nbytes

    def record_blocked(self) -> None:
        self.blocked += 1

    @property
    def mean_hold_on(self) -> float | None:
        return float(np.mean(self.hold_on_times)) if self.hold_on_times else None

    @property
    def p95_hold_on(self) -> float | None:
        if not self.hold_on_times:
            return None
        return float(np.percentile(self.hold_on_times, 95))


def time_avg_throughput(delivered, at: SimTime) -> float:
    """Running average in bits/s of payload bytes ACKed in ``(0, at]``.

    ``delivered`` holds ``(time, bytes)`` increments, sorted by time.
    """
    if at <= 0:
        raise ValueError("at must be positive")
    total = sum(b for t, b in delivered if t <= at)
    return 8.0 * total * US_PER_S / at


def blocking_rate(stats: CallStats) -> float:
    if stats.attempted == 0:
        raise NoCalls("no calls were attempted")
    return stats.blocked / stats.attempted


@dataclass
class RunRecord:
    """Raw observations gathered by one simulation run."""

    algorithm: str
    loss_rate: float
    kind: str
    end: SimTime
    delivered: list = field(default_factory=list)     # (t, payload bytes newly ACKed)
    cwnd_trace: list = field(default_factory=list)    # (t, cwnd)
    busy_fraction: object = None                      # callable (t0, t1) -> utilization
    completion_time: SimTime | None = None
    calls: CallStats | None = None
    sample_interval: float = 1.0
    extra: dict = field(default_factory=dict)


@dataclass
class RunReport:
    series: dict[str, MetricSeries]
    summary: dict


def _sample_times(end: SimTime, interval: float) -> list[SimTime]:
    step = max(1, int(round(interval * US_PER_S)))
    times = list(range(step, end + 1, step))
    if not times or times[-1] != end:
        times.append(end)
    return [t for t in times if t > 0]


def summarize(run: RunRecord) -> RunReport:
    end = run.end
    series: dict[str, MetricSeries] = {}
    times = _sample_times(end, run.sample_interval) if end > 0 else []

    thr = MetricSeries("throughput")
    dt = [t for t, _ in run.delivered]
    cum = np.cumsum([b for _, b in run.delivered]) if run.delivered else np.array([])
    for t in times:
        i = bisect.bisect_right(dt, t)
        total = float(cum[i - 1]) if i else 0.0
        thr.append(t, 8.0 * total * US_PER_S / t)
    series["throughput"] = thr

    if run.kind != "vbr":
        if run.kind == "ftp":
            series["cwnd"] = MetricSeries("cwnd", run.cwnd_trace)
        if run.busy_fraction is not None:
            series["utilization"] = MetricSeries(
                "utilization", ((t, run.busy_fraction(0, t)) for t in times))

    mean_thr = thr.points[-1][1] if thr.points else 0.0
    mean_util = run.busy_fraction(0, end) if run.busy_fraction is not None and end > 0 else None
    summary = {
        "algorithm": run.algorithm,
        "loss_rate": run.loss_rate,
        "completion_time_s": (us_to_seconds(run.completion_time)
                              if run.completion_time is not None else None),
        "mean_throughput_bps": mean_thr,
        "mean_utilization": mean_util,
        "mean_hold_on_s": None,
        "blocking_rate": None,
    }
    if run.calls is not None:
        summary["mean_hold_on_s"] = run.calls.mean_hold_on
        summary["blocking_rate"] = (blocking_rate(run.calls)
                                    if run.calls.attempted else None)
        summary["p95_hold_on_s"] = run.calls.p95_hold_on
        summary["calls_attempted"] = run.calls.attempted
        summary["calls_completed"] = run.calls.completed
        summary["calls_blocked"] = run.calls.blocked
    summary["workload"] = run.kind
    summary["duration_s"] = us_to_seconds(end)
    summary.update(run.extra)
    return RunReport(series, summary)


def _fmt_time(t: SimTime) -> str:
    s, us = divmod(int(t), US_PER_S)
    return f"{s}.{us:06d}"


def _fmt(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return str(v)
    return repr(float(v))


def write_csv(series: MetricSeries, path: Path) -> None:
    Path(path).write_text(series.to_csv(), encoding="utf-8")


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, allow_nan=False) + "\n"


def write_report(report: RunReport, directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, s in report.series.items():
        p = directory / f"{name}.csv"
        write_csv(s, p)
        written.append(p)
    p = directory / "summary.json"
    p.write_text(summary_json(report.summary), encoding="utf-8")
    written.append(p)
    return written
