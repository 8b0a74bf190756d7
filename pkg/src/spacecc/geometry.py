"""Orbital link geometry: geocentric angle, slant distance and path RTT estimate."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EARTH_RADIUS_M = 6_371_000.0
LIGHT_SPEED_M_S = 299_792_458.0

#: hops wider than this geocentric angle fall outside the visibility assumption
MAX_VISIBLE_THETA = 2.0 * math.pi / 3.0

INTERRUPTION_FACTOR = 10.0


class TooFewPoints(ValueError):
    pass


class DegeneratePath(ValueError):
    pass


@dataclass(frozen=True)
class SubSatellitePoint:
    """Sub-satellite latitude/longitude in radians and orbital altitude in meters."""

    latitude: float
    longitude: float
    altitude: float

    def __post_init__(self):
        if not -math.pi / 2 <= self.latitude <= math.pi / 2:
            raise ValueError(f"latitude {self.latitude} rad outside [-pi/2, pi/2]")
        if not -math.pi < self.longitude <= math.pi:
            raise ValueError(f"longitude {self.longitude} rad outside (-pi, pi]")
        if not self.altitude > 0:
            raise ValueError(f"altitude must be positive, got {self.altitude}")

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float, alt_km: float) -> "SubSatellitePoint":
        lon = math.radians(lon_deg)
        # fold longitude into (-pi, pi]
        lon = math.atan2(math.sin(lon), math.cos(lon))
        if lon == -math.pi:
            lon = math.pi
        return cls(math.radians(lat_deg), lon, alt_km * 1000.0)


@dataclass(frozen=True)
class GeometryConstants:
    earth_radius: float = EARTH_RADIUS_M
    light_speed: float = LIGHT_SPEED_M_S

    def __post_init__(self):
        if self.earth_radius <= 0 or self.light_speed <= 0:
            raise ValueError("earth_radius and light_speed must be positive")


@dataclass(frozen=True)
class LinkGeometry:
    thetas: tuple[float, ...]
    hop_distances: tuple[float, ...]
    total_distance: float
    rtt_est: float
    wide_hops: tuple[int, ...] = field(default=())
    """Indices of hops whose geocentric angle exceeds 2*pi/3."""

    @property
    def interruption_threshold(self) -> float:
        return interruption_threshold(self)


def geocentric_angle(a: SubSatellitePoint, b: SubSatellitePoint) -> float:
    """Angle at the earth's centre between two sub-satellite points."""
    c = (
        math.sin(a.latitude) * math.sin(b.latitude)
        + math.cos(a.latitude) * math.cos(b.latitude) * math.cos(a.longitude - b.longitude)
    )
    return math.acos(min(1.0, max(-1.0, c)))


def link_distance(
    a: SubSatellitePoint, b: SubSatellitePoint, consts: GeometryConstants = GeometryConstants()
) -> float:
    """Straight-line distance between two satellites (law of cosines)."""
    ra = consts.earth_radius + a.altitude
    rb = consts.earth_radius + b.altitude
    theta = geocentric_angle(a, b)
    sq = ra * ra + rb * rb - 2.0 * ra * rb * math.cos(theta)
    return math.sqrt(max(0.0, sq))


def path_geometry(
    points: list[SubSatellitePoint], consts: GeometryConstants = GeometryConstants()
) -> LinkGeometry:
    if len(points) < 2:
        raise TooFewPoints(f"a path needs at least 2 points, got {len(points)}")
    thetas = []
    dists = []
    for a, b in zip(points, points[1:]):
        thetas.append(geocentric_angle(a, b))
        dists.append(link_distance(a, b, consts))
    total = sum(dists)
    wide = tuple(i for i, th in enumerate(thetas) if th > MAX_VISIBLE_THETA)
    return LinkGeometry(
        thetas=tuple(thetas),
        hop_distances=tuple(dists),
        total_distance=total,
        rtt_est=2.0 * total / consts.light_speed,
        wide_hops=wide,
    )


def interruption_threshold(geom: LinkGeometry | float) -> float:
    """Ten times the geometric RTT estimate; accepts a LinkGeometry or a bare rtt_est."""
    rtt_est = geom.rtt_est if isinstance(geom, LinkGeometry) else float(geom)
    if rtt_est <= 0:
        raise DegeneratePath("rtt_est must be positive to derive an interruption threshold")
    return INTERRUPTION_FACTOR * rtt_est
