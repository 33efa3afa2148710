# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: Vincenty inverse, ECEF->geodetic, WLS Gauss-Newton.

Behaviour matches ``_kernels_py`` (same iteration rules and status codes).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, tan, atan, atan2, sqrt, fabs, hypot, NAN, M_PI

cnp.import_array()

cdef double A = 6378137.0
cdef double F = 1.0 / 298.257223563
cdef double B = A * (1.0 - F)
cdef double E2 = F * (2.0 - F)
cdef double EP2 = E2 / (1.0 - E2)
cdef double DEG = M_PI / 180.0

cdef enum:
    C_OK = 0
    C_MAXITER = 1
    C_SINGULAR = 2
    C_COINCIDENT = 3

GN_OK = C_OK
GN_MAXITER = C_MAXITER
GN_SINGULAR = C_SINGULAR
GN_COINCIDENT = C_COINCIDENT


cdef inline double _vincenty(double lat1, double lon1, double lat2, double lon2,
                             double tol, int max_iter, bint *ok) nogil:
    cdef double u1, u2, L, su1, cu1, su2, cu2, lam, lam_prev
    cdef double sl, cl, ss, cs, sigma, sa, csa, c2sm, C
    cdef double usq, bA, bB, ds
    cdef int i
    ok[0] = True
    if lat1 == lat2 and lon1 == lon2:
        return 0.0
    u1 = atan((1.0 - F) * tan(lat1 * DEG))
    u2 = atan((1.0 - F) * tan(lat2 * DEG))
    L = (lon2 - lon1) * DEG
    su1 = sin(u1); cu1 = cos(u1)
    su2 = sin(u2); cu2 = cos(u2)
    lam = L
    ss = 0.0; cs = 0.0; sigma = 0.0; csa = 0.0; c2sm = 0.0
    ok[0] = False
    for i in range(max_iter):
        sl = sin(lam); cl = cos(lam)
        ss = sqrt((cu2 * sl) * (cu2 * sl)
                  + (cu1 * su2 - su1 * cu2 * cl) * (cu1 * su2 - su1 * cu2 * cl))
        if ss == 0.0:
            ok[0] = True
            return 0.0
        cs = su1 * su2 + cu1 * cu2 * cl
        sigma = atan2(ss, cs)
        sa = cu1 * cu2 * sl / ss
        csa = 1.0 - sa * sa
        if csa != 0.0:
            c2sm = cs - 2.0 * su1 * su2 / csa
        else:
            c2sm = 0.0
        C = F / 16.0 * csa * (4.0 + F * (4.0 - 3.0 * csa))
        lam_prev = lam
        lam = L + (1.0 - C) * F * sa * (
            sigma + C * ss * (c2sm + C * cs * (-1.0 + 2.0 * c2sm * c2sm)))
        if fabs(lam - lam_prev) < tol:
            ok[0] = True
            break
    if not ok[0]:
        return NAN
    usq = csa * (A * A - B * B) / (B * B)
    bA = 1.0 + usq / 16384.0 * (4096.0 + usq * (-768.0 + usq * (320.0 - 175.0 * usq)))
    bB = usq / 1024.0 * (256.0 + usq * (-128.0 + usq * (74.0 - 47.0 * usq)))
    ds = bB * ss * (c2sm + bB / 4.0 * (
        cs * (-1.0 + 2.0 * c2sm * c2sm)
        - bB / 6.0 * c2sm * (-3.0 + 4.0 * ss * ss) * (-3.0 + 4.0 * c2sm * c2sm)))
    return B * bA * (sigma - ds)


def vincenty_inverse(double lat1, double lon1, double lat2, double lon2,
                     double tol=1e-12, int max_iter=200):
    cdef bint ok
    cdef double s = _vincenty(lat1, lon1, lat2, lon2, tol, max_iter, &ok)
    return s, bool(ok)


def vincenty_many(double[:] lat1, double[:] lon1, double[:] lat2, double[:] lon2,
                  double tol=1e-12, int max_iter=200):
    cdef Py_ssize_t n = lat1.shape[0], i
    out = np.empty(n)
    okv = np.empty(n, dtype=np.uint8)
    cdef double[:] o = out
    cdef unsigned char[:] k = okv
    cdef bint ok
    with nogil:
        for i in range(n):
            o[i] = _vincenty(lat1[i], lon1[i], lat2[i], lon2[i], tol, max_iter, &ok)
            k[i] = ok
    return out, okv.astype(bool)


cdef inline int _geodetic(double x, double y, double z, double tol, double *res) nogil:
    cdef double p = hypot(x, y), lon, beta, lat, lat_new, s, lon_deg
    cdef int i
    if p == 0.0 and z == 0.0:
        return -1
    lon = atan2(y, x)
    beta = atan2(z * A, p * B)
    lat = atan2(z + EP2 * B * sin(beta) ** 3, p - E2 * A * cos(beta) ** 3)
    for i in range(20):
        beta = atan2((1.0 - F) * sin(lat), cos(lat))
        lat_new = atan2(z + EP2 * B * sin(beta) ** 3, p - E2 * A * cos(beta) ** 3)
        if fabs(lat_new - lat) < tol:
            lat = lat_new
            break
        lat = lat_new
    s = sin(lat)
    res[2] = p * cos(lat) + z * s - A * sqrt(1.0 - E2 * s * s)
    res[0] = lat / DEG
    lon_deg = lon / DEG
    if lon_deg <= -180.0:
        lon_deg += 360.0
    res[1] = lon_deg
    return 0


def ecef_to_geodetic(double x, double y, double z, double tol=1e-12):
    cdef double res[3]
    if _geodetic(x, y, z, tol, res) != 0:
        raise ValueError("undefined latitude")
    return res[0], res[1], res[2]


def ecef_to_geodetic_many(xyz, double tol=1e-12):
    cdef double[:, :] v = np.ascontiguousarray(xyz, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i
    out = np.empty((n, 3))
    cdef double[:, :] o = out
    cdef double res[3]
    for i in range(n):
        if _geodetic(v[i, 0], v[i, 1], v[i, 2], tol, res) != 0:
            raise ValueError("undefined latitude")
        o[i, 0] = res[0]; o[i, 1] = res[1]; o[i, 2] = res[2]
    return out


cdef inline bint _cholesky_solve4(double N[4][4], double rhs[4], double out[4]) nogil:
    cdef double Lm[4][4]
    cdef double y[4]
    cdef double s
    cdef int i, j, k
    for i in range(4):
        for j in range(4):
            Lm[i][j] = 0.0
    for j in range(4):
        s = N[j][j]
        for k in range(j):
            s -= Lm[j][k] * Lm[j][k]
        if not s > 0.0:
            return False
        Lm[j][j] = sqrt(s)
        for i in range(j + 1, 4):
            s = N[i][j]
            for k in range(j):
                s -= Lm[i][k] * Lm[j][k]
            Lm[i][j] = s / Lm[j][j]
    for i in range(4):
        s = rhs[i]
        for k in range(i):
            s -= Lm[i][k] * y[k]
        y[i] = s / Lm[i][i]
    for i in range(3, -1, -1):
        s = y[i]
        for k in range(i + 1, 4):
            s -= Lm[k][i] * out[k]
        out[i] = s / Lm[i][i]
    return True


def gauss_newton_wls(sat, pr, w, x0, double tol=1e-4, int max_iter=20):
    cdef double[:, :] S = np.ascontiguousarray(sat, dtype=np.float64)
    cdef double[:] P = np.ascontiguousarray(pr, dtype=np.float64)
    cdef double[:] W = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = P.shape[0], n
    xs = np.array(x0, dtype=np.float64)
    cdef double[:] x = xs
    cdef double N[4][4]
    cdef double rhs[4]
    cdef double dx[4]
    cdef double g[4]
    cdef double r, dr, w2
    cdef int it, i, j, status = C_MAXITER
    cdef int done = max_iter
    with nogil:
        for it in range(1, max_iter + 1):
            for i in range(4):
                rhs[i] = 0.0
                for j in range(4):
                    N[i][j] = 0.0
            for n in range(m):
                g[0] = x[0] - S[n, 0]
                g[1] = x[1] - S[n, 1]
                g[2] = x[2] - S[n, 2]
                r = sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
                if r == 0.0:
                    status = C_COINCIDENT
                    break
                g[0] /= r; g[1] /= r; g[2] /= r; g[3] = 1.0
                dr = P[n] - r - x[3]
                w2 = W[n] * W[n]
                for i in range(4):
                    rhs[i] += w2 * g[i] * dr
                    for j in range(4):
                        N[i][j] += w2 * g[i] * g[j]
            if status == C_COINCIDENT:
                done = it - 1
                break
            if not _cholesky_solve4(N, rhs, dx):
                status = C_SINGULAR
                done = it - 1
                break
            for i in range(4):
                x[i] += dx[i]
            if sqrt(dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]) < tol:
                status = C_OK
                done = it
                break
    return xs, done, status
