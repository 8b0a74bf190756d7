import math

import pytest
from hypothesis import given, strategies as st

import oracles
from spacecc.geometry import (
    DegeneratePath,
    GeometryConstants,
    SubSatellitePoint,
    TooFewPoints,
    geocentric_angle,
    interruption_threshold,
    link_distance,
    path_geometry,
)

GEO_H = 35_786_000.0


def pt(lat, lon, h=GEO_H):
    return SubSatellitePoint(lat, lon, h)


def test_identical_points_have_zero_angle():
    a = pt(0.3, -1.2)
    assert geocentric_angle(a, a) == 0.0


def test_quarter_turn_along_equator():
    assert geocentric_angle(pt(0, 0), pt(0, math.pi / 2)) == pytest.approx(math.pi / 2, abs=1e-15)


def test_angle_matches_high_precision_oracle():
    a, b = pt(math.pi / 4, 0), pt(-math.pi / 4, math.pi / 3)
    expected = float(oracles.angle(math.pi / 4, 0, -math.pi / 4, math.pi / 3))
    assert geocentric_angle(a, b) == pytest.approx(expected, rel=1e-14)


def test_geo_quarter_turn_distance():
    d = link_distance(pt(0, 0), pt(0, math.pi / 2))
    expected = float(oracles.distance(0, 0, GEO_H, 0, math.pi / 2, GEO_H))
    assert d == pytest.approx(expected, rel=1e-12)
    assert d == pytest.approx(math.sqrt(2) * 42_157_000, rel=1e-12)
    assert round(d / 1000) == 59_619


def test_coincident_and_diametric_cases():
    assert link_distance(pt(0.1, 0.2), pt(0.1, 0.2)) == 0.0
    d = link_distance(pt(0, 0), pt(0, math.pi))
    assert d == pytest.approx(2 * (6_371_000 + GEO_H), rel=1e-12)


def test_rtt_estimate_from_total_distance():
    assert 2 * 72_000_000 / 299_792_458 == pytest.approx(0.4803, abs=5e-5)
    geom = path_geometry([pt(0, 0), pt(0, 0)])
    assert geom.total_distance == 0.0 and geom.rtt_est == 0.0


def test_three_point_chain_sums_pairwise_oracle():
    p = [pt(0.1, 0.0, 700e3), pt(0.0, 0.9, GEO_H), pt(-0.4, 2.0, 20_000e3)]
    geom = path_geometry(p)
    expected = sum(
        oracles.distance(a.latitude, a.longitude, a.altitude, b.latitude, b.longitude, b.altitude)
        for a, b in zip(p, p[1:])
    )
    assert geom.total_distance == pytest.approx(float(expected), rel=1e-12)
    assert geom.rtt_est == pytest.approx(float(2 * expected / oracles.C_LIGHT), rel=1e-12)


def test_wide_hops_are_flagged_not_rejected():
    geom = path_geometry([pt(0, 0), pt(0, 2.5)])
    assert geom.wide_hops == (0,)


def test_errors():
    with pytest.raises(TooFewPoints):
        path_geometry([pt(0, 0)])
    with pytest.raises(DegeneratePath):
        interruption_threshold(0.0)
    with pytest.raises(ValueError):
        SubSatellitePoint(2.0, 0.0, GEO_H)
    with pytest.raises(ValueError):
        SubSatellitePoint(0.0, 0.0, 0.0)


def test_interruption_threshold():
    assert interruption_threshold(0.48) == pytest.approx(4.8)
    assert interruption_threshold(0.05) == pytest.approx(0.5)
    geom = path_geometry([pt(0, 0), pt(0, 1.0)])
    assert geom.interruption_threshold == pytest.approx(10 * geom.rtt_est)


def test_degrees_constructor_folds_longitude():
    p = SubSatellitePoint.from_degrees(10, 190, 35_786)
    assert p.longitude == pytest.approx(math.radians(-170))
    assert p.altitude == GEO_H


lat = st.floats(-math.pi / 2, math.pi / 2)
lon = st.floats(-math.pi, math.pi, exclude_min=True)
alt = st.floats(100e3, 50_000e3)
points = st.builds(SubSatellitePoint, lat, lon, alt)


@given(points, points)
def test_symmetry(a, b):
    assert geocentric_angle(a, b) == geocentric_angle(b, a)
    assert link_distance(a, b) == pytest.approx(link_distance(b, a), rel=1e-12, abs=1e-6)


@given(points, points)
def test_triangle_bounds(a, b):
    r = GeometryConstants().earth_radius
    d = link_distance(a, b)
    slack = 1e-6 * (2 * r + a.altitude + b.altitude)
    assert abs(a.altitude - b.altitude) - slack <= d <= (r + a.altitude) + (r + b.altitude) + slack
    assert 0.0 <= geocentric_angle(a, b) <= math.pi


@given(alt, st.floats(0, math.pi), st.floats(0, math.pi))
def test_distance_monotone_in_angle(h, t1, t2):
    lo, hi = sorted((t1, t2))
    base = SubSatellitePoint(0.0, 0.0, h)
    d_lo = link_distance(base, SubSatellitePoint(0.0, lo if lo <= math.pi else math.pi, h))
    d_hi = link_distance(base, SubSatellitePoint(0.0, hi, h))
    assert d_lo <= d_hi + 1e-6


@given(st.lists(points, min_size=2, max_size=6))
def test_path_total_is_exact_sum(pts):
    geom = path_geometry(pts)
    assert geom.total_distance == sum(link_distance(a, b) for a, b in zip(pts, pts[1:]))
    assert geom.rtt_est == 2 * geom.total_distance / GeometryConstants().light_speed
