"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` one for one and are used whenever the compiled
extension is unavailable (or ``PRCORR_PURE_PYTHON=1`` is set).
"""
import math

import numpy as np

A = 6378137.0
F = 1.0 / 298.257223563
B = A * (1.0 - F)
E2 = F * (2.0 - F)
EP2 = E2 / (1.0 - E2)

GN_OK = 0
GN_MAXITER = 1
GN_SINGULAR = 2
GN_COINCIDENT = 3


def vincenty_inverse(lat1, lon1, lat2, lon2, tol=1e-12, max_iter=200):
    """Return ``(distance_m, converged)`` on the WGS-84 ellipsoid."""
    if lat1 == lat2 and lon1 == lon2:
        return 0.0, True
    u1 = math.atan((1.0 - F) * math.tan(math.radians(lat1)))
    u2 = math.atan((1.0 - F) * math.tan(math.radians(lat2)))
    L = math.radians(lon2 - lon1)
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = L
    converged = False
    sin_sigma = cos_sigma = sigma = cos_sq_alpha = cos2sm = 0.0
    for _ in range(max_iter):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.sqrt((cos_u2 * sin_lam) ** 2
                              + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam) ** 2)
        if sin_sigma == 0.0:
            return 0.0, True
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos_sq_alpha = 1.0 - sin_alpha * sin_alpha
        if cos_sq_alpha != 0.0:
            cos2sm = cos_sigma - 2.0 * sin_u1 * sin_u2 / cos_sq_alpha
        else:
            cos2sm = 0.0  # equatorial line
        C = F / 16.0 * cos_sq_alpha * (4.0 + F * (4.0 - 3.0 * cos_sq_alpha))
        lam_prev = lam
        lam = L + (1.0 - C) * F * sin_alpha * (
            sigma + C * sin_sigma * (cos2sm + C * cos_sigma * (-1.0 + 2.0 * cos2sm * cos2sm)))
        if abs(lam - lam_prev) < tol:
            converged = True
            break
    if not converged:
        return float("nan"), False

    u_sq = cos_sq_alpha * (A * A - B * B) / (B * B)
    big_a = 1.0 + u_sq / 16384.0 * (4096.0 + u_sq * (-768.0 + u_sq * (320.0 - 175.0 * u_sq)))
    big_b = u_sq / 1024.0 * (256.0 + u_sq * (-128.0 + u_sq * (74.0 - 47.0 * u_sq)))
    delta_sigma = big_b * sin_sigma * (
        cos2sm + big_b / 4.0 * (
            cos_sigma * (-1.0 + 2.0 * cos2sm * cos2sm)
            - big_b / 6.0 * cos2sm * (-3.0 + 4.0 * sin_sigma * sin_sigma)
            * (-3.0 + 4.0 * cos2sm * cos2sm)))
    return B * big_a * (sigma - delta_sigma), True


def ecef_to_geodetic(x, y, z, tol=1e-12):
    """Bowring iteration; returns ``(lat_deg, lon_deg, alt_m)``."""
    p = math.hypot(x, y)
    if p == 0.0 and z == 0.0:
        raise ValueError("undefined latitude")
    lon = math.atan2(y, x)
    beta = math.atan2(z * A, p * B)
    lat = math.atan2(z + EP2 * B * math.sin(beta) ** 3, p - E2 * A * math.cos(beta) ** 3)
    for _ in range(20):
        beta = math.atan2((1.0 - F) * math.sin(lat), math.cos(lat))
        lat_new = math.atan2(z + EP2 * B * math.sin(beta) ** 3,
                             p - E2 * A * math.cos(beta) ** 3)
        done = abs(lat_new - lat) < tol
        lat = lat_new
        if done:
            break
    s = math.sin(lat)
    alt = p * math.cos(lat) + z * s - A * math.sqrt(1.0 - E2 * s * s)
    lon_deg = math.degrees(lon)
    if lon_deg <= -180.0:
        lon_deg += 360.0
    return math.degrees(lat), lon_deg, alt


def gauss_newton_wls(sat, pr, w, x0, tol=1e-4, max_iter=20):
    """Iterate the weighted normal equations for ``[x, y, z, clock]``.

    Returns ``(state, iterations, status)`` with status one of the ``GN_*``
    codes.  Singular normal matrices are reported, not resolved, so the caller
    can switch to an SVD route.
    """
    sat = np.asarray(sat, dtype=float)
    pr = np.asarray(pr, dtype=float)
    w2 = np.asarray(w, dtype=float) ** 2
    x = np.array(x0, dtype=float)
    for it in range(1, max_iter + 1):
        d = x[:3] - sat
        r = np.sqrt(np.einsum("ij,ij->i", d, d))
        if np.any(r == 0.0):
            return x, it - 1, GN_COINCIDENT
        G = np.empty((len(pr), 4))
        G[:, :3] = d / r[:, None]
        G[:, 3] = 1.0
        dr = pr - r - x[3]
        N = G.T @ (w2[:, None] * G)
        rhs = G.T @ (w2 * dr)
        try:
            L = np.linalg.cholesky(N)
        except np.linalg.LinAlgError:
            return x, it - 1, GN_SINGULAR
        dx = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        x = x + dx
        if math.sqrt(dx[0] ** 2 + dx[1] ** 2 + dx[2] ** 2) < tol:
            return x, it, GN_OK
    return x, max_iter, GN_MAXITER


def vincenty_many(lat1, lon1, lat2, lon2, tol=1e-12, max_iter=200):
    n = len(lat1)
    out = np.empty(n)
    ok = np.empty(n, dtype=bool)
    for i in range(n):
        out[i], ok[i] = vincenty_inverse(lat1[i], lon1[i], lat2[i], lon2[i], tol, max_iter)
    return out, ok


def ecef_to_geodetic_many(xyz, tol=1e-12):
    xyz = np.asarray(xyz, dtype=float)
    out = np.empty((len(xyz), 3))
    for i in range(len(xyz)):
        out[i] = ecef_to_geodetic(xyz[i, 0], xyz[i, 1], xyz[i, 2], tol)
    return out
