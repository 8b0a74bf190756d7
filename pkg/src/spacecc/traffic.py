"""Workload generators: bulk FTP, Poisson call arrivals and Pareto VBR frames."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .sim_core import RngStream, SimTime, seconds_to_us

MB = 1 << 20


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class FtpWorkload:
    total_bytes: int = 10 * MB
    start: float = 0.0

    def __post_init__(self):
        if self.total_bytes <= 0:
            raise InvalidConfig("total_bytes must be positive")
        if self.start < 0:
            raise InvalidConfig("start must be non-negative")


@dataclass(frozen=True)
class PoissonCallConfig:
    lam: float = 14.0
    horizon: tuple[float, float] = (0.0, 3600.0)
    bytes_per_call: int = 500
    target_total_calls: int = 50_000
    block_timeout: float = 2.0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidConfig("lam must be positive")
        start, end = self.horizon
        if not start < end:
            raise InvalidConfig("horizon start must precede end")
        if self.bytes_per_call <= 0:
            raise InvalidConfig("bytes_per_call must be positive")
        if self.block_timeout <= 0:
            raise InvalidConfig("block_timeout must be positive")

    @property
    def expected_calls(self) -> float:
        return self.lam * (self.horizon[1] - self.horizon[0])


@dataclass(frozen=True)
class ParetoConfig:
    """Per-frame VBR sizes: ``round(x * unit)`` bytes with x ~ Pareto(x_min, alpha).

    The default unit maps the mean frame (alpha*x_min/(alpha-1) = 3) to 12 000 bytes.
    """

    x_min: float = 1.0
    alpha: float = 1.5
    unit: float = 4000.0
    frame_interval: float = 0.04

    def __post_init__(self):
        if not self.alpha > 1:
            raise InvalidConfig("alpha must exceed 1 for a finite mean")
        if not self.x_min > 0:
            raise InvalidConfig("x_min must be positive")
        if not self.unit > 0 or not self.frame_interval > 0:
            raise InvalidConfig("unit and frame_interval must be positive")

    @property
    def mean(self) -> float:
        return self.alpha * self.x_min / (self.alpha - 1.0)


def next_poisson_arrival(rng: RngStream, lam: float, u: float | None = None) -> float:
    """Exponential inter-arrival gap by inverse CDF, ``-ln(U)/lam`` with U on (0, 1]."""
    if not lam > 0:
        raise InvalidConfig("lam must be positive")
    if u is None:
        u = rng.uniform_open_closed()
    return -math.log(u) / lam


def sample_pareto(rng: RngStream, cfg: ParetoConfig, u: float | None = None) -> float:
    if u is None:
        u = rng.uniform_open_closed()
    return cfg.x_min * u ** (-1.0 / cfg.alpha)


def pareto_samples(rng: RngStream, cfg: ParetoConfig, n: int) -> np.ndarray:
    """Vectorized draws; same sequence as ``n`` calls to :func:`sample_pareto`."""
    u = 1.0 - rng.random_array(n)
    return cfg.x_min * u ** (-1.0 / cfg.alpha)


def poisson_arrival_times(rng: RngStream, cfg: PoissonCallConfig) -> Iterator[float]:
    t, end = cfg.horizon
    while True:
        t += next_poisson_arrival(rng, cfg.lam)
        if t > end:
            return
        yield t


def generate_workload(kind: str, config, rng: RngStream,
                      end: float | None = None) -> Iterator[tuple[SimTime, int]]:
    """Yield ``(time, bytes)`` send requests for one workload.

    ``end`` bounds the VBR frame sequence (seconds); the other kinds carry
    their own extent.
    """
    if kind == "ftp":
        if not isinstance(config, FtpWorkload):
            raise InvalidConfig("ftp workload needs an FtpWorkload")
        yield seconds_to_us(config.start), config.total_bytes
    elif kind == "calls":
        if not isinstance(config, PoissonCallConfig):
            raise InvalidConfig("calls workload needs a PoissonCallConfig")
        for t in poisson_arrival_times(rng, config):
            yield seconds_to_us(t), config.bytes_per_call
    elif kind == "vbr":
        if not isinstance(config, ParetoConfig):
            raise InvalidConfig("vbr workload needs a ParetoConfig")
        if end is None:
            raise InvalidConfig("vbr workload needs an end time")
        step = seconds_to_us(config.frame_interval)
        stop = seconds_to_us(end)
        t = 0
        while t < stop:
            yield t, max(1, int(round(sample_pareto(rng, config) * config.unit)))
            t += step
    else:
        raise InvalidConfig(f"unknown workload kind {kind!r}")
