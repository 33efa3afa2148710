"""Iterative weighted least squares positioning and its geometry byproducts."""
from dataclasses import dataclass

import numpy as np

from . import kernels

CONVERGENCE_M = 1e-4
MAX_ITER = 20
# cond(WG) above which the normal equations lose too many digits
NORMAL_EQ_COND = 1e6
SINGULAR_COND = 1e12


class SolverError(ValueError):
    pass


class UnderdeterminedError(SolverError):
    pass


class GeometryError(SolverError):
    pass


@dataclass
class NavSolution:
    pos: np.ndarray
    clock_bias_m: float = 0.0
    iterations: int = 0
    converged: bool = False

    @property
    def state(self):
        return np.append(self.pos, self.clock_bias_m)


@dataclass
class GeometrySolve:
    geometry: np.ndarray
    weights: np.ndarray
    h_row: np.ndarray
    svids: list
    residuals: np.ndarray


def geometry_matrix(approx, sats):
    """Rows ``[(x~ - x_n)/r~_n, ..., 1]``: receiver-minus-satellite unit vectors."""
    sats = np.asarray(sats, dtype=float).reshape(-1, 3)
    d = np.asarray(approx, dtype=float)[:3] - sats
    r = np.linalg.norm(d, axis=1)
    if np.any(r == 0.0):
        raise GeometryError("approximate position coincides with a satellite")
    G = np.ones((len(sats), 4))
    G[:, :3] = d / r[:, None]
    return G


def weighted_pinv(G, w):
    """``(W G)^+ W`` for diagonal weights ``w``.

    Uses the normal equations when WG is well conditioned, SVD otherwise.
    """
    WG = w[:, None] * G
    s = np.linalg.svd(WG, compute_uv=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if cond > SINGULAR_COND:
        raise GeometryError(f"singular geometry (cond(WG) = {cond:.3g})")
    if cond <= NORMAL_EQ_COND:
        N = WG.T @ WG
        L = np.linalg.cholesky(N)
        inv = np.linalg.solve(L.T, np.linalg.solve(L, WG.T))
    else:
        inv = np.linalg.pinv(WG)
    return inv * w[None, :]


def _gauss_newton_svd(sat, pr, w, x0):
    x = np.array(x0, dtype=float)
    for it in range(1, MAX_ITER + 1):
        G = geometry_matrix(x, sat)
        dr = pr - np.linalg.norm(x[:3] - sat, axis=1) - x[3]
        dx = weighted_pinv(G, w) @ dr
        x = x + dx
        if np.linalg.norm(dx[:3]) < CONVERGENCE_M:
            return x, it, True
    return x, MAX_ITER, False


def wls_solve(epoch, init=None):
    """Gauss-Newton WLS on one epoch; returns ``(NavSolution, GeometrySolve)``.

    ``init`` is a previous NavSolution (or None for the ECEF origin).  Weights
    are ``1 / pr_sigma_m``.  Non-convergence after 20 iterations is flagged on
    the solution rather than raised.
    """
    m = len(epoch.obs)
    if m < 4:
        raise UnderdeterminedError(f"epoch {epoch.time_ms}: {m} satellites, need at least 4")
    sat = epoch.sat_positions
    pr = epoch.pseudoranges
    w = 1.0 / epoch.sigmas
    x0 = np.zeros(4) if init is None else init.state

    x, iters, status = kernels.gauss_newton_wls(sat, pr, w, x0, CONVERGENCE_M, MAX_ITER)
    if status == kernels.GN_COINCIDENT:
        raise GeometryError(f"epoch {epoch.time_ms}: position coincides with a satellite")
    converged = status == kernels.GN_OK
    if status == kernels.GN_SINGULAR or _cond(geometry_matrix(x, sat), w) > NORMAL_EQ_COND:
        x, iters, converged = _gauss_newton_svd(sat, pr, w, x0)

    G = geometry_matrix(x, sat)
    P = weighted_pinv(G, w)
    residuals = pr - np.linalg.norm(x[:3] - sat, axis=1) - x[3]
    sol = NavSolution(x[:3].copy(), float(x[3]), int(iters), bool(converged))
    geom = GeometrySolve(G, np.diag(w), P[3].copy(), list(epoch.svids), residuals)
    return sol, geom


def _cond(G, w):
    s = np.linalg.svd(w[:, None] * G, compute_uv=False)
    return s[0] / s[-1] if s[-1] > 0 else np.inf


def wls_track(epochs):
    """Solve every epoch, warm-starting from the previous solution."""
    sols, geoms = [], []
    prev = None
    for ep in epochs:
        sol, geom = wls_solve(ep, prev)
        sols.append(sol)
        geoms.append(geom)
        prev = sol
    return sols, geoms


def wls_state_error_predict(geom, eps):
    """First-order state error ``X - X_hat = -(WG)^+ W eps`` for injected errors ``eps``."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape != (geom.geometry.shape[0],):
        raise ValueError(f"eps has shape {eps.shape}, expected ({geom.geometry.shape[0]},)")
    return -(weighted_pinv(geom.geometry, np.diag(geom.weights)) @ eps)
