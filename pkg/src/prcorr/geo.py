"""WGS-84 geodesy: ECEF/geodetic/NED transforms, look angles, Vincenty, DMS.

Ellipsoid constants are fixed to WGS-84: a = 6378137.0 m, f = 1/298.257223563.
Angles at the public surface are in degrees, lengths in meters.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

A = 6378137.0
F = 1.0 / 298.257223563
B = A * (1.0 - F)
E2 = F * (2.0 - F)


class VincentyError(ArithmeticError):
    """Raised when the Vincenty inverse iteration fails (near-antipodal points)."""


@dataclass(frozen=True)
class GeodeticPoint:
    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 < self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside (-180, 180]")


def geodetic_to_ecef(p):
    """Closed-form geodetic -> ECEF; returns an array ``[x, y, z]``."""
    lat = math.radians(p.latitude)
    lon = math.radians(p.longitude)
    s = math.sin(lat)
    n = A / math.sqrt(1.0 - E2 * s * s)
    return np.array([(n + p.altitude) * math.cos(lat) * math.cos(lon),
                     (n + p.altitude) * math.cos(lat) * math.sin(lon),
                     (n * (1.0 - E2) + p.altitude) * s])


def ecef_to_geodetic(xyz):
    """Iterative (Bowring) ECEF -> geodetic, converged to 1e-12 rad."""
    lat, lon, alt = kernels.ecef_to_geodetic(float(xyz[0]), float(xyz[1]), float(xyz[2]))
    return GeodeticPoint(lat, lon, alt)


def ecef_to_geodetic_array(xyz):
    """Vectorised conversion; returns an (N, 3) array of lat, lon, alt."""
    return kernels.ecef_to_geodetic_many(np.asarray(xyz, dtype=float).reshape(-1, 3))


def ned_rotation(origin):
    """3x3 matrix taking ECEF vectors to north-east-down at ``origin``."""
    lat = math.radians(origin.latitude)
    lon = math.radians(origin.longitude)
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([[-sl * co, -sl * so, cl],
                     [-so, co, 0.0],
                     [-cl * co, -cl * so, -sl]])


def ecef_vector_to_ned(v, origin):
    return ned_rotation(origin) @ np.asarray(v, dtype=float)


def elevation_azimuth(user, sat):
    """Elevation in [-90, 90] and azimuth clockwise from north in [0, 360), degrees."""
    los = np.asarray(sat, dtype=float) - np.asarray(user, dtype=float)
    if not np.any(los):
        raise ValueError("user and satellite positions coincide")
    n, e, d = ecef_vector_to_ned(los, ecef_to_geodetic(user))
    el = math.degrees(math.atan2(-d, math.hypot(n, e)))
    az = math.degrees(math.atan2(e, n)) % 360.0
    if az >= 360.0:
        az = 0.0
    return el, az


def vincenty_distance(a, b):
    """WGS-84 inverse geodesic distance (altitude ignored).

    Raises VincentyError if the lambda iteration does not settle to 1e-12
    within 200 iterations.
    """
    s, ok = kernels.vincenty_inverse(a.latitude, a.longitude, b.latitude, b.longitude,
                                     1e-12, 200)
    if not ok:
        raise VincentyError("vincenty did not converge")
    return s


def vincenty_distances(lat1, lon1, lat2, lon2):
    s, ok = kernels.vincenty_many(*(np.ascontiguousarray(v, dtype=float)
                                    for v in (lat1, lon1, lat2, lon2)), 1e-12, 200)
    if not np.all(ok):
        raise VincentyError("vincenty did not converge")
    return s


def degrees_to_dms(angle):
    """Split an angle into (degrees, minutes, seconds).

    The sign lives on the degrees only; minutes and seconds are non-negative,
    so -37.5 -> (-37, 30, 0).  For angles in (-1, 0) the integer degree is 0
    and the sign is lost; callers needing the sign there must keep it.
    """
    mag = abs(angle)
    deg = int(mag)
    rem = (mag - deg) * 60.0
    minutes = int(rem)
    seconds = (rem - minutes) * 60.0
    return (-deg if angle < 0 else deg), float(minutes), seconds
