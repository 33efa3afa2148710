import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prcorr import geo, simulator
from prcorr.geo import GeodeticPoint

# Reference distances from an independent geodesic solver (Karney's
# algorithm), frozen here so the tests do not depend on it.
KARNEY = [
    ((0.0, 0.0), (0.0, 1.0), 111319.49079327357),
    ((0.0, 0.0), (1e-5, 0.0), 1.1057427582162824),
    ((37.4, -122.1), (37.41, -122.08), 2089.812750869745),
    ((10.0, 20.0), (-30.0, 40.0), 4917385.8491153885),
    ((37.42, -122.08), (37.42 + 1e-5, -122.08), 1.1098553074455404),
]

lats = st.floats(-90, 90)
lons = st.floats(-180, 180).filter(lambda x: x > -180)
alts = st.floats(-1000, 1e5)


def up_vector(p):
    la, lo = math.radians(p.latitude), math.radians(p.longitude)
    return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])


def test_forward_axes():
    np.testing.assert_allclose(geo.geodetic_to_ecef(GeodeticPoint(0, 0, 0)), [6378137.0, 0, 0],
                               atol=1e-9)
    np.testing.assert_allclose(geo.geodetic_to_ecef(GeodeticPoint(90, 0, 0)),
                               [0, 0, 6356752.3142], atol=1e-4)
    assert abs(geo.geodetic_to_ecef(GeodeticPoint(90, 0, 0))[2] - geo.B) < 1e-6


@pytest.mark.parametrize("xyz,llh", [
    ((6378137.0, 0, 0), (0, 0, 0)),
    ((0, 6378137.0, 0), (0, 90, 0)),
    ((0, 0, 6356752.314245179), (90, 0, 0)),
    ((-6378137.0, 0, 0), (0, 180, 0)),
])
def test_inverse_known(xyz, llh):
    p = geo.ecef_to_geodetic(np.array(xyz, dtype=float))
    assert p.latitude == pytest.approx(llh[0], abs=1e-12)
    assert p.longitude == pytest.approx(llh[1], abs=1e-12)
    assert p.altitude == pytest.approx(llh[2], abs=1e-6)


def test_origin_rejected():
    with pytest.raises(ValueError, match="undefined latitude"):
        geo.ecef_to_geodetic(np.zeros(3))


def test_point_ranges():
    with pytest.raises(ValueError):
        GeodeticPoint(91, 0)
    with pytest.raises(ValueError):
        GeodeticPoint(0, -180)
    GeodeticPoint(0, 180)


@settings(max_examples=300, deadline=None)
@given(lats, lons, alts)
def test_round_trip(lat, lon, alt):
    p = GeodeticPoint(lat, lon, alt)
    q = geo.ecef_to_geodetic(geo.geodetic_to_ecef(p))
    assert q.latitude == pytest.approx(lat, abs=1e-9)
    assert q.altitude == pytest.approx(alt, abs=1e-6)
    if abs(lat) < 89.9999:
        dlon = (q.longitude - lon + 180) % 360 - 180
        assert abs(dlon) < 1e-9
    np.testing.assert_allclose(geo.geodetic_to_ecef(q), geo.geodetic_to_ecef(p), atol=1e-6, rtol=0)


def test_round_trip_bulk(rng):
    n = 10_000
    lat = rng.uniform(-90, 90, n)
    lon = rng.uniform(-179.999, 180, n)
    alt = rng.uniform(-500, 5e4, n)
    xyz = np.array([geo.geodetic_to_ecef(GeodeticPoint(*v)) for v in zip(lat, lon, alt)])
    llh = geo.ecef_to_geodetic_array(xyz)
    back = np.array([geo.geodetic_to_ecef(GeodeticPoint(*v)) for v in llh])
    assert np.max(np.linalg.norm(back - xyz, axis=1)) < 1e-6


def test_ned_examples():
    o = GeodeticPoint(0, 0, 0)
    np.testing.assert_allclose(geo.ecef_vector_to_ned([1, 0, 0], o), [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(geo.ecef_vector_to_ned([0, 0, 1], o), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(geo.ecef_vector_to_ned([0, 1, 0], o), [0, 1, 0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(lats, lons)
def test_ned_orthonormal(lat, lon):
    R = geo.ned_rotation(GeodeticPoint(lat, lon))
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_ned_preserves_norms_and_dots(rng):
    o = GeodeticPoint(37.4, -122.1, 30)
    v = rng.normal(size=(1000, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    w = rng.normal(size=(1000, 3))
    vn = np.array([geo.ecef_vector_to_ned(x, o) for x in v])
    wn = np.array([geo.ecef_vector_to_ned(x, o) for x in w])
    assert np.max(np.abs(np.linalg.norm(vn, axis=1) - 1)) < 1e-9
    assert np.max(np.abs(np.sum(vn * wn, axis=1) - np.sum(v * w, axis=1))) < 1e-9


def test_elevation_simple_cases():
    p = GeodeticPoint(37.4, -122.1, 0)
    user = geo.geodetic_to_ecef(p)
    above = geo.geodetic_to_ecef(GeodeticPoint(37.4, -122.1, 2e7))
    assert geo.elevation_azimuth(user, above)[0] == pytest.approx(90, abs=1e-6)
    R = geo.ned_rotation(p)
    east = user + R.T @ np.array([0.0, 1e6, 0.0])
    el, az = geo.elevation_azimuth(user, east)
    assert el == pytest.approx(0, abs=1e-6)
    assert az == pytest.approx(90, abs=1e-6)
    north = user + R.T @ np.array([1e6, 0.0, -1e5])
    el, az = geo.elevation_azimuth(user, north)
    assert az == pytest.approx(0, abs=1e-9) or az == pytest.approx(360, abs=1e-9)
    assert el == pytest.approx(math.degrees(math.atan2(1e5, 1e6)), abs=1e-9)
    with pytest.raises(ValueError):
        geo.elevation_azimuth(user, user)


def test_elevation_matches_dot_product_oracle():
    p = GeodeticPoint(37.422, -122.0841, 10.0)
    user = geo.geodetic_to_ecef(p)
    up = up_vector(p)
    n = 0
    for t in range(0, 86400, 3600):
        for sat in simulator.satellite_positions(float(t)):
            los = (sat - user) / np.linalg.norm(sat - user)
            oracle = math.degrees(math.asin(float(los @ up)))
            el, az = geo.elevation_azimuth(user, sat)
            assert abs(el - oracle) < 1e-9
            assert 0 <= az < 360
            n += 1
    assert n == 24 * 32


@pytest.mark.parametrize("a,b,ref", KARNEY)
def test_vincenty_against_reference(a, b, ref):
    s = geo.vincenty_distance(GeodeticPoint(*a), GeodeticPoint(*b))
    # Vincenty series truncation is sub-millimetre on continental lines
    assert s == pytest.approx(ref, abs=1e-4)


def test_vincenty_spec_values():
    o = GeodeticPoint(0, 0)
    assert geo.vincenty_distance(o, GeodeticPoint(0, 1)) == pytest.approx(111319.49, abs=0.01)
    assert geo.vincenty_distance(o, GeodeticPoint(1e-5, 0)) == pytest.approx(1.105, abs=1e-3)
    assert geo.vincenty_distance(o, o) == 0.0


def test_vincenty_antipodal_raises():
    with pytest.raises(geo.VincentyError, match="vincenty did not converge"):
        geo.vincenty_distance(GeodeticPoint(0, 0), GeodeticPoint(0.5, 179.7))


def test_vincenty_array_matches_scalar(rng):
    la1, lo1 = rng.uniform(-60, 60, 50), rng.uniform(-90, 90, 50)
    la2, lo2 = la1 + rng.normal(0, 0.01, 50), lo1 + rng.normal(0, 0.01, 50)
    s = geo.vincenty_distances(la1, lo1, la2, lo2)
    for i in range(50):
        assert s[i] == geo.vincenty_distance(GeodeticPoint(la1[i], lo1[i]),
                                             GeodeticPoint(la2[i], lo2[i]))


local = st.tuples(st.floats(-60, 60), st.floats(-60, 60))


@settings(max_examples=300, deadline=None)
@given(local, local, local)
def test_vincenty_metric(a, b, c):
    A, B, C = (GeodeticPoint(*x) for x in (a, b, c))
    ab = geo.vincenty_distance(A, B)
    assert ab == pytest.approx(geo.vincenty_distance(B, A), abs=1e-6)
    assert ab <= geo.vincenty_distance(A, C) + geo.vincenty_distance(C, B) + 1e-6


@pytest.mark.parametrize("angle,dms", [
    (37.5, (37, 30.0, 0.0)),
    (-37.5, (-37, 30.0, 0.0)),
    (0.0, (0, 0.0, 0.0)),
    (-122.0841, (-122, 5.0, 2.76)),
])
def test_dms_examples(angle, dms):
    d, m, s = geo.degrees_to_dms(angle)
    assert d == dms[0] and isinstance(d, int)
    assert m == pytest.approx(dms[1], abs=1e-9)
    assert s == pytest.approx(dms[2], abs=1e-7)


@given(st.floats(-180, 180))
def test_dms_reconstruction(angle):
    d, m, s = geo.degrees_to_dms(angle)
    assert 0 <= m < 60 and 0 <= s < 60
    assert d == int(angle)
    sign = -1.0 if angle < 0 else 1.0
    assert sign * (abs(d) + m / 60 + s / 3600) == pytest.approx(angle, abs=1e-9)
