"""Scenario configuration: YAML in, frozen dataclasses out, and back again.

Every field has a default, so a config only needs the parts it changes.
Errors carry the dotted field path and, when known, the source line.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .channel import LinkSpec, OutageWindow, PathSpec
from .geometry import GeometryConstants, SubSatellitePoint, path_geometry
from .traffic import FtpWorkload, InvalidConfig, ParetoConfig, PoissonCallConfig
from .transport.controllers import CC_NAMES

WORKLOAD_KINDS = ("ftp", "calls", "vbr")

# libyaml bindings when present; same documents, much faster
_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
_Dumper = getattr(yaml, "CSafeDumper", yaml.SafeDumper)


class ConfigParse(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(field)
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class LinkConfig:
    prop_delay: float = 0.275
    forward_rate: float = 10e6
    reverse_rate: float = 1e6
    loss_prob: float = 0.0
    queue_capacity: int = 100
    lossy: bool = True
    outages: tuple[tuple[float, float], ...] = ()


@dataclass(frozen=True)
class PathConfig:
    links: tuple[LinkConfig, ...] = (LinkConfig(),)
    loss_rate: float | None = None
    rtt_est: float | None = None
    geometry: tuple[tuple[float, float, float], ...] = ()

    def effective_loss(self) -> float:
        if self.loss_rate is not None:
            return self.loss_rate
        return max(link.loss_prob for link in self.links)

    def to_spec(self) -> PathSpec:
        links = []
        for link in self.links:
            loss = link.loss_prob
            if self.loss_rate is not None and link.lossy:
                loss = self.loss_rate
            links.append(LinkSpec(link.prop_delay, link.forward_rate, link.reverse_rate,
                                  loss, link.queue_capacity))
        outages = [tuple(OutageWindow.from_seconds(a, b) for a, b in link.outages)
                   for link in self.links]
        return PathSpec(tuple(links), tuple(outages))

    def resolve_rtt_est(self) -> float:
        """Explicit value, else geometric 2D/c, else twice the propagation delay."""
        if self.rtt_est is not None:
            return self.rtt_est
        if self.geometry:
            pts = [SubSatellitePoint.from_degrees(*p) for p in self.geometry]
            return path_geometry(pts, GeometryConstants()).rtt_est
        return 2.0 * sum(link.prop_delay for link in self.links)


@dataclass(frozen=True)
class WorkloadConfig:
    kind: str = "ftp"
    ftp: FtpWorkload = FtpWorkload()
    calls: PoissonCallConfig = PoissonCallConfig()
    vbr: ParetoConfig = ParetoConfig()


@dataclass(frozen=True)
class TransportConfig:
    mss: int = 1024
    initial_ssthresh: float = 1e6
    min_rto: float = 1.0
    max_rto: float = 64.0
    rtt_history: int = 64
    rtt_decay_tau: float = 1.0
    empty_segments_in_ca: bool = False
    probe_interval: float | None = None


@dataclass(frozen=True)
class AnalysisConfig:
    bandwidth: float = 10e6
    segment_bits: float = 8192.0
    rtt: float | None = None


@dataclass(frozen=True)
class SweepConfig:
    algorithms: tuple[str, ...] = CC_NAMES
    loss_rates: tuple[float, ...] = (0.005, 0.01, 0.05)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    algorithm: str = "aggressive"
    seeds: tuple[int, ...] = (1,)
    duration: float = 1200.0
    sample_interval: float = 1.0
    path: PathConfig = PathConfig()
    workload: WorkloadConfig = WorkloadConfig()
    transport: TransportConfig = TransportConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    sweep: SweepConfig | None = None

    def with_overrides(self, *, seed: int | None = None, algorithm: str | None = None,
                       loss_rate: float | None = None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seeds=(int(seed),))
        if algorithm is not None:
            _check_algorithm(algorithm, "algorithm")
            cfg = replace(cfg, algorithm=algorithm)
        if loss_rate is not None:
            cfg = replace(cfg, path=replace(cfg.path, loss_rate=float(loss_rate)))
        return cfg


# -- parsing -----------------------------------------------------------------


class _Lines:
    """Maps dotted field paths to YAML source lines."""

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        try:
            node = yaml.compose(text, Loader=_Loader)
        except yaml.YAMLError:
            node = None
        if node is not None:
            self._walk(node, "")

    def _walk(self, node, prefix: str) -> None:
        self.lines.setdefault(prefix, node.start_mark.line + 1)
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                self.lines[key] = k.start_mark.line + 1
                self._walk(v, key)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, f"{prefix}[{i}]")

    def get(self, path: str) -> int | None:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rsplit(".", 1)[0] if "." in path else ""
        return None


class _Parser:
    def __init__(self, lines: _Lines | None = None):
        self.lines = lines or _Lines("")

    def fail(self, path: str, msg: str):
        raise ConfigParse(msg, path, self.lines.get(path))

    def mapping(self, raw, path: str, allowed) -> dict:
        if raw is None:
            return {}
        if not isinstance(raw, dict):
            self.fail(path, "expected a mapping")
        unknown = sorted(set(map(str, raw)) - set(allowed))
        if unknown:
            sub = f"{path}.{unknown[0]}" if path else unknown[0]
            self.fail(sub, f"unknown field {unknown[0]!r}")
        return raw

    def number(self, v, path: str, *, integer=False, positive=False, nonneg=False,
               optional=False):
        if v is None:
            if optional:
                return None
            self.fail(path, "value required")
        if isinstance(v, bool):
            self.fail(path, "expected a number, got a boolean")
        if isinstance(v, str):
            # YAML 1.1 reads 10e6 as a string
            try:
                v = float(v)
            except ValueError:
                self.fail(path, f"expected a number, got {v!r}")
        if not isinstance(v, (int, float)) or math.isnan(v):
            self.fail(path, f"expected a number, got {v!r}")
        if integer:
            if isinstance(v, int):
                pass
            elif math.isinf(v) or float(v) != int(v):
                self.fail(path, f"expected an integer, got {v!r}")
            v = int(v)
        else:
            v = float(v)
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v}")
        if nonneg and v < 0:
            self.fail(path, f"must be non-negative, got {v}")
        return v

    def boolean(self, v, path: str) -> bool:
        if not isinstance(v, bool):
            self.fail(path, f"expected true or false, got {v!r}")
        return v

    def seq(self, v, path: str) -> list:
        if not isinstance(v, (list, tuple)):
            self.fail(path, "expected a list")
        return list(v)

    def build(self, cls, kwargs: dict, path: str):
        try:
            return cls(**kwargs)
        except (InvalidConfig, ValueError, TypeError) as exc:
            self.fail(path, str(exc))


def _check_algorithm(name, path, parser: _Parser | None = None):
    if name not in CC_NAMES:
        msg = f"unknown algorithm {name!r}; choose from {', '.join(CC_NAMES)}"
        if parser is not None:
            parser.fail(path, msg)
        raise ConfigParse(msg, path)
    return name


def _parse_simple(p: _Parser, cls, raw, path: str, specs: dict):
    """Parse a flat dataclass whose fields are numbers or booleans."""
    raw = p.mapping(raw, path, [f.name for f in fields(cls)])
    kwargs = {}
    for name, spec in specs.items():
        if name in raw:
            sub = f"{path}.{name}"
            if spec == "bool":
                kwargs[name] = p.boolean(raw[name], sub)
            else:
                kwargs[name] = p.number(raw[name], sub, **spec)
    return kwargs


def _parse_link(p: _Parser, raw, path: str) -> LinkConfig:
    kw = _parse_simple(p, LinkConfig, raw, path, {
        "prop_delay": dict(nonneg=True),
        "forward_rate": dict(positive=True),
        "reverse_rate": dict(positive=True),
        "loss_prob": dict(nonneg=True),
        "queue_capacity": dict(integer=True, positive=True),
        "lossy": "bool",
    })
    if "outages" in raw:
        windows = []
        for i, w in enumerate(p.seq(raw["outages"], f"{path}.outages")):
            wp = f"{path}.outages[{i}]"
            w = p.seq(w, wp)
            if len(w) != 2:
                p.fail(wp, "an outage is [start, end] in seconds")
            a = p.number(w[0], wp, nonneg=True)
            b = p.number(w[1], wp, nonneg=True)
            if not a < b:
                p.fail(wp, "outage start must precede end")
            windows.append((a, b))
        kw["outages"] = tuple(windows)
    link = p.build(LinkConfig, kw, path)
    p.build(LinkSpec, dict(prop_delay=link.prop_delay, forward_rate=link.forward_rate,
                           reverse_rate=link.reverse_rate, loss_prob=link.loss_prob,
                           queue_capacity=link.queue_capacity), path)
    return link


def _parse_path(p: _Parser, raw, path: str) -> PathConfig:
    raw = p.mapping(raw, path, [f.name for f in fields(PathConfig)])
    kw = {}
    if "links" in raw:
        items = p.seq(raw["links"], f"{path}.links")
        if not items:
            p.fail(f"{path}.links", "a path needs at least one link")
        kw["links"] = tuple(_parse_link(p, x, f"{path}.links[{i}]") for i, x in enumerate(items))
    if "loss_rate" in raw:
        v = p.number(raw["loss_rate"], f"{path}.loss_rate", optional=True)
        if v is not None and not 0 <= v <= 1:
            p.fail(f"{path}.loss_rate", "must lie in [0, 1]")
        kw["loss_rate"] = v
    if "rtt_est" in raw:
        kw["rtt_est"] = p.number(raw["rtt_est"], f"{path}.rtt_est", positive=True, optional=True)
    if "geometry" in raw:
        pts = []
        for i, pt in enumerate(p.seq(raw["geometry"], f"{path}.geometry")):
            gp = f"{path}.geometry[{i}]"
            pt = p.seq(pt, gp)
            if len(pt) != 3:
                p.fail(gp, "a point is [lat_deg, lon_deg, alt_km]")
            trip = tuple(p.number(x, gp) for x in pt)
            p.build(SubSatellitePoint.from_degrees, dict(zip(("lat_deg", "lon_deg", "alt_km"), trip)), gp)
            pts.append(trip)
        if len(pts) == 1:
            p.fail(f"{path}.geometry", "geometry needs at least two points")
        kw["geometry"] = tuple(pts)
    cfg = p.build(PathConfig, kw, path)
    for i, link in enumerate(cfg.links):
        ws = sorted(link.outages)
        for a, b in zip(ws, ws[1:]):
            if b[0] < a[1]:
                p.fail(f"{path}.links[{i}].outages", "outage windows overlap")
    return cfg


def _parse_workload(p: _Parser, raw, path: str) -> WorkloadConfig:
    raw = p.mapping(raw, path, [f.name for f in fields(WorkloadConfig)])
    kw = {}
    if "kind" in raw:
        if raw["kind"] not in WORKLOAD_KINDS:
            p.fail(f"{path}.kind", f"kind must be one of {', '.join(WORKLOAD_KINDS)}")
        kw["kind"] = raw["kind"]
    if "ftp" in raw:
        sub = f"{path}.ftp"
        f = _parse_simple(p, FtpWorkload, raw["ftp"], sub, {
            "total_bytes": dict(integer=True, positive=True),
            "start": dict(nonneg=True),
        })
        kw["ftp"] = p.build(FtpWorkload, f, sub)
    if "calls" in raw:
        sub = f"{path}.calls"
        c = _parse_simple(p, PoissonCallConfig, raw["calls"], sub, {
            "lam": dict(positive=True),
            "bytes_per_call": dict(integer=True, positive=True),
            "target_total_calls": dict(integer=True, nonneg=True),
            "block_timeout": dict(positive=True),
        })
        if "horizon" in raw["calls"]:
            hp = f"{sub}.horizon"
            h = p.seq(raw["calls"]["horizon"], hp)
            if len(h) != 2:
                p.fail(hp, "horizon is [start, end] in seconds")
            c["horizon"] = (p.number(h[0], hp, nonneg=True), p.number(h[1], hp, nonneg=True))
        kw["calls"] = p.build(PoissonCallConfig, c, sub)
    if "vbr" in raw:
        sub = f"{path}.vbr"
        v = _parse_simple(p, ParetoConfig, raw["vbr"], sub, {
            "x_min": dict(positive=True),
            "alpha": dict(positive=True),
            "unit": dict(positive=True),
            "frame_interval": dict(positive=True),
        })
        kw["vbr"] = p.build(ParetoConfig, v, sub)
    return WorkloadConfig(**kw)


def _parse_sweep(p: _Parser, raw, path: str) -> SweepConfig | None:
    if raw is None:
        return None
    raw = p.mapping(raw, path, [f.name for f in fields(SweepConfig)])
    kw = {}
    if "algorithms" in raw:
        algs = p.seq(raw["algorithms"], f"{path}.algorithms")
        for i, a in enumerate(algs):
            _check_algorithm(a, f"{path}.algorithms[{i}]", p)
        kw["algorithms"] = tuple(algs)
    if "loss_rates" in raw:
        rates = []
        for i, r in enumerate(p.seq(raw["loss_rates"], f"{path}.loss_rates")):
            r = p.number(r, f"{path}.loss_rates[{i}]", nonneg=True)
            if r > 1:
                p.fail(f"{path}.loss_rates[{i}]", "must lie in [0, 1]")
            rates.append(r)
        kw["loss_rates"] = tuple(rates)
    return SweepConfig(**kw)


def config_from_dict(raw, lines: _Lines | None = None) -> ScenarioConfig:
    p = _Parser(lines)
    raw = p.mapping(raw, "", [f.name for f in fields(ScenarioConfig)])
    kw = {}
    if "name" in raw:
        name = raw["name"]
        if not isinstance(name, str) or not name or "/" in name or name in (".", ".."):
            p.fail("name", "name must be a non-empty string usable as a directory")
        kw["name"] = name
    if "algorithm" in raw:
        kw["algorithm"] = _check_algorithm(raw["algorithm"], "algorithm", p)
    if "seeds" in raw:
        seeds = raw["seeds"]
        if not isinstance(seeds, list):
            seeds = [seeds]
        seeds = [p.number(s, f"seeds[{i}]", integer=True, nonneg=True) for i, s in enumerate(seeds)]
        if not seeds:
            p.fail("seeds", "at least one seed is required")
        kw["seeds"] = tuple(seeds)
    if "duration" in raw:
        kw["duration"] = p.number(raw["duration"], "duration", positive=True)
    if "sample_interval" in raw:
        kw["sample_interval"] = p.number(raw["sample_interval"], "sample_interval", positive=True)
    if "path" in raw:
        kw["path"] = _parse_path(p, raw["path"], "path")
    if "workload" in raw:
        kw["workload"] = _parse_workload(p, raw["workload"], "workload")
    if "transport" in raw:
        t = _parse_simple(p, TransportConfig, raw["transport"], "transport", {
            "mss": dict(integer=True, positive=True),
            "initial_ssthresh": dict(positive=True),
            "min_rto": dict(positive=True),
            "max_rto": dict(positive=True),
            "rtt_history": dict(integer=True, positive=True),
            "rtt_decay_tau": dict(positive=True),
            "empty_segments_in_ca": "bool",
            "probe_interval": dict(positive=True, optional=True),
        })
        kw["transport"] = TransportConfig(**t)
        if kw["transport"].max_rto < kw["transport"].min_rto:
            p.fail("transport.max_rto", "max_rto must not be below min_rto")
    if "analysis" in raw:
        a = _parse_simple(p, AnalysisConfig, raw["analysis"], "analysis", {
            "bandwidth": dict(positive=True),
            "segment_bits": dict(positive=True),
            "rtt": dict(positive=True, optional=True),
        })
        kw["analysis"] = AnalysisConfig(**a)
    if "sweep" in raw:
        kw["sweep"] = _parse_sweep(p, raw["sweep"], "sweep")
    return ScenarioConfig(**kw)


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigParse(f"invalid YAML: {problem}", None, line) from None
    if raw is None:
        raw = {}
    return config_from_dict(raw, _Lines(text))


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"cannot read config: {exc.strerror or exc}") from None
    return parse_config(text)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return _plain(asdict(cfg))


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.dump(config_to_dict(cfg), Dumper=_Dumper, sort_keys=False)
