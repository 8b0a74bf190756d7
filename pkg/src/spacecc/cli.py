"""Command-line entry point: ``spacecc run|compare|geometry|analyze-slowstart``.

Exit status is 0 on success, 1 for configuration errors and 2 for failures
while simulating or writing output.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigParse, ScenarioConfig, load_config
from .geometry import GeometryConstants, SubSatellitePoint, path_geometry
from .metrics import summary_json
from .scenario import run_and_write, sweep_cells

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("spacecc")


class DegenerateBdp(ValueError):
    pass


class MismatchedSweep(ValueError):
    pass


def analyze_slow_start(rtt: float, bandwidth: float, segment_bits: float) -> float:
    """Time for slow start to reach the bandwidth-delay product.

    Parameters
    ----------
    rtt : float
        Round-trip time in seconds.
    bandwidth : float
        Link rate B in bits/second.
    segment_bits : float
        Segment size l in bits.

    Returns
    -------
    float
        ``rtt * (1 + log2(B*rtt/l))`` seconds.
    """
    if rtt <= 0 or bandwidth <= 0 or segment_bits <= 0:
        raise ValueError("rtt, bandwidth and segment size must be positive")
    ratio = bandwidth * rtt / segment_bits
    if ratio < 1:
        raise DegenerateBdp(f"bandwidth-delay product {ratio:.3g} segments is below one")
    return rtt * (1.0 + math.log2(ratio))


# -- compare -----------------------------------------------------------------

RANK_METRICS = {
    # metric: True when larger is better
    "mean_throughput_bps": True,
    "completion_time_s": False,
    "mean_utilization": True,
    "mean_hold_on_s": False,
    "blocking_rate": False,
}


def _run_cell(args):
    cfg, out, seed = args
    return run_and_write(cfg, out, seed).summary


def compare(cfg: ScenarioConfig, out, jobs: int = 1) -> dict:
    """Run the algorithm x loss-rate x seed cross product and rank the algorithms."""
    if cfg.sweep is None:
        raise MismatchedSweep("compare needs a 'sweep' section")
    algs = cfg.sweep.algorithms
    if len(algs) < 2:
        raise MismatchedSweep("compare needs at least two algorithms")
    if len(set(algs)) != len(algs):
        raise MismatchedSweep("sweep lists an algorithm twice")
    if not cfg.sweep.loss_rates:
        raise MismatchedSweep("sweep needs at least one loss rate")
    cells = [(c, out, seed) for c, seed in sweep_cells(cfg)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    return {"rows": rows, "rankings": rankings(rows)}


def rankings(rows: list[dict]) -> dict:
    """Per loss rate and metric, algorithms ordered best first by their seed mean."""
    out: dict = {}
    for loss in sorted({r["loss_rate"] for r in rows}):
        sub = [r for r in rows if r["loss_rate"] == loss]
        per_metric = {}
        for metric, higher in RANK_METRICS.items():
            means = {}
            for alg in dict.fromkeys(r["algorithm"] for r in sub):
                vals = [r[metric] for r in sub if r["algorithm"] == alg and r[metric] is not None]
                if vals:
                    means[alg] = float(np.mean(vals))
            if means:
                order = sorted(means, key=lambda a: -means[a] if higher else means[a])
                per_metric[metric] = [{"algorithm": a, "mean": means[a]} for a in order]
        out[f"{loss:g}"] = per_metric
    return out


def _table(result: dict) -> str:
    lines = []
    for loss, metrics in result["rankings"].items():
        ranked = metrics.get("mean_throughput_bps", [])
        order = ", ".join(f"{r['algorithm']} ({r['mean'] / 1e6:.3f} Mbps)" for r in ranked)
        lines.append(f"loss {loss}: {order}")
    return "\n".join(lines)


# -- argument handling ---------------------------------------------------------


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    algorithm = getattr(args, "algorithm", None)
    return cfg.with_overrides(seed=args.seed, algorithm=algorithm)


def _cmd_run(args) -> int:
    cfg = _config(args)
    for seed in cfg.seeds:
        res = run_and_write(cfg, args.out, seed)
        print(summary_json(res.summary), end="")
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _config(args)
    result = compare(cfg, args.out, jobs=args.jobs)
    out = Path(args.out) / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "comparison.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
    print(_table(result))
    return EXIT_OK


def _parse_point(text: str):
    try:
        lat, lon, alt = (float(x) for x in text.split(","))
    except ValueError:
        raise ConfigParse(f"point {text!r} is not lat_deg,lon_deg,alt_km") from None
    return lat, lon, alt


def _cmd_geometry(args) -> int:
    if args.point:
        triples = [_parse_point(p) for p in args.point]
    elif args.config:
        triples = list(load_config(args.config).path.geometry)
    else:
        raise ConfigParse("geometry needs --point values or a config with path.geometry")
    try:
        pts = [SubSatellitePoint.from_degrees(*t) for t in triples]
        geom = path_geometry(pts, GeometryConstants())
    except ValueError as exc:
        raise ConfigParse(str(exc)) from None
    report = {
        "theta_rad": list(geom.thetas),
        "hop_distance_m": list(geom.hop_distances),
        "total_distance_m": geom.total_distance,
        "rtt_est_s": geom.rtt_est,
        "interruption_threshold_s": 10.0 * geom.rtt_est,
        "wide_hops": list(geom.wide_hops),
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.json:
        print(text, end="")
    else:
        for i, (th, d) in enumerate(zip(geom.thetas, geom.hop_distances)):
            flag = "  (theta above 2pi/3)" if i in geom.wide_hops else ""
            print(f"hop {i}: theta={th:.6f} rad  d={d / 1e3:.3f} km{flag}")
        print(f"D={geom.total_distance / 1e3:.3f} km  RTT_est={geom.rtt_est:.6f} s  "
              f"threshold={10.0 * geom.rtt_est:.6f} s")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "geometry.json").write_text(text, encoding="utf-8")
    return EXIT_OK


def _cmd_slowstart(args) -> int:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    a = cfg.analysis
    rtt = args.rtt if args.rtt is not None else (a.rtt or cfg.path.resolve_rtt_est())
    bandwidth = args.bandwidth if args.bandwidth is not None else a.bandwidth
    bits = args.segment_bits if args.segment_bits is not None else a.segment_bits
    try:
        t = analyze_slow_start(rtt, bandwidth, bits)
    except ValueError as exc:
        raise ConfigParse(str(exc)) from None
    result = {"rtt_s": rtt, "bandwidth_bps": bandwidth, "segment_bits": bits, "t_ss_s": t}
    print(f"t_ss = {t:.4f} s")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "slowstart.json").write_text(json.dumps(result, indent=2) + "\n",
                                                       encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spacecc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default="out"):
        p.add_argument("--config", type=Path, help="scenario YAML file")
        p.add_argument("--out", type=Path, default=out_default, help="output directory")
        p.add_argument("--seed", type=int, help="run this seed instead of the configured list")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.add_argument("--algorithm", help="override the configured algorithm")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="sweep algorithms and loss rates")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("geometry", help="link distances and RTT estimate")
    common(p, out_default=None)
    p.add_argument("--point", action="append", metavar="LAT,LON,ALT_KM",
                   help="sub-satellite point; repeat for each node on the path")
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    p.set_defaults(func=_cmd_geometry)

    p = sub.add_parser("analyze-slowstart", help="slow-start duration to fill the pipe")
    common(p, out_default=None)
    p.add_argument("--rtt", type=float, help="seconds")
    p.add_argument("--bandwidth", type=float, help="bits/second")
    p.add_argument("--segment-bits", type=float, help="bits per segment")
    p.set_defaults(func=_cmd_slowstart)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # bad flags are a configuration problem, not a simulation failure
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigParse, MismatchedSweep) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("run failed", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
