"""EKF, RTS smoother and moving-horizon localization engines.

State layout for the filters: ``[x, y, z, vx, vy, vz, clock_m, drift_mps]``
with a constant-velocity, constant-drift process model.  The MHE works on
``[x, y, z, clock_m]`` per epoch and penalises changes of velocity (a
constant-velocity prior) across its window.
"""
import json
from dataclasses import asdict, dataclass

import numpy as np

from .solver import NavSolution, UnderdeterminedError, wls_solve, wls_track

POS = slice(0, 3)
VEL = slice(3, 6)
CLK = 6
DRIFT = 7


class NumericalError(ArithmeticError):
    pass


@dataclass
class EstimatorConfig:
    process_noise_vel: float = 1.0    # acceleration PSD, m^2/s^3
    process_noise_clk: float = 0.1    # clock-drift PSD, m^2/s^3
    mhe_window: int = 10
    init_pos_sigma_m: float = 10.0
    init_vel_sigma_mps: float = 10.0
    init_clk_sigma_m: float = 10.0
    init_drift_sigma_mps: float = 100.0
    mhe_prior_weight: float = 1.0

    @classmethod
    def from_dict(cls, d):
        bad = set(d) - set(cls.__dataclass_fields__)
        if bad:
            raise ValueError(f"unknown estimator config keys {sorted(bad)}")
        cfg = cls(**d)
        if cfg.mhe_window < 1:
            raise ValueError("mhe_window must be >= 1")
        if cfg.process_noise_vel < 0 or cfg.process_noise_clk < 0 or cfg.mhe_prior_weight < 0:
            raise ValueError("process noise and prior weight must be non-negative")
        return cfg

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self):
        return asdict(self)


@dataclass
class FilterState:
    time_ms: int
    state: np.ndarray
    covariance: np.ndarray
    pred_state: np.ndarray = None
    pred_cov: np.ndarray = None
    transition: np.ndarray = None


@dataclass
class SmoothedTrack:
    times_ms: np.ndarray
    pos: np.ndarray
    clock_bias_m: np.ndarray
    covariances: np.ndarray = None

    def __len__(self):
        return len(self.times_ms)


def transition(dt):
    F = np.eye(8)
    F[POS, VEL] = dt * np.eye(3)
    F[CLK, DRIFT] = dt
    return F


def process_noise(dt, cfg):
    Q = np.zeros((8, 8))
    blk = np.array([[dt ** 3 / 3.0, dt ** 2 / 2.0], [dt ** 2 / 2.0, dt]])
    for i in range(3):
        idx = np.ix_([i, 3 + i], [i, 3 + i])
        Q[idx] = cfg.process_noise_vel * blk
    Q[np.ix_([CLK, DRIFT], [CLK, DRIFT])] = cfg.process_noise_clk * blk
    return Q


def initial_state(epoch, cfg):
    sol, _ = wls_solve(epoch)
    x = np.zeros(8)
    x[POS] = sol.pos
    x[CLK] = sol.clock_bias_m
    P = np.diag([cfg.init_pos_sigma_m ** 2] * 3 + [cfg.init_vel_sigma_mps ** 2] * 3
                + [cfg.init_clk_sigma_m ** 2, cfg.init_drift_sigma_mps ** 2])
    return x, P


def measurement_update(x, P, epoch):
    """Pseudorange update with Joseph-form covariance."""
    sat = epoch.sat_positions
    d = x[POS] - sat
    r = np.linalg.norm(d, axis=1)
    H = np.zeros((len(r), 8))
    H[:, POS] = d / r[:, None]
    H[:, CLK] = 1.0
    R = np.diag(epoch.sigmas ** 2)
    innov = epoch.pseudoranges - (r + x[CLK])
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    x_new = x + K @ innov
    IKH = np.eye(8) - K @ H
    P_new = IKH @ P @ IKH.T + K @ R @ K.T
    return x_new, 0.5 * (P_new + P_new.T)


def _check_pd(P, k):
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise NumericalError(f"covariance lost positive definiteness at epoch {k}") from None


def ekf_forward(epochs, cfg=None):
    """Run the EKF over a trace; every FilterState keeps its prediction for smoothing."""
    cfg = cfg or EstimatorConfig()
    if not epochs:
        return []
    for k, ep in enumerate(epochs):
        if len(ep.obs) < 4:
            raise UnderdeterminedError(f"epoch {k} has {len(ep.obs)} satellites, need 4")
    x, P = initial_state(epochs[0], cfg)
    out = []
    for k, ep in enumerate(epochs):
        if k == 0:
            F = np.eye(8)
            xp, Pp = x, P
        else:
            dt = (ep.time_ms - epochs[k - 1].time_ms) / 1000.0
            F = transition(dt)
            xp = F @ x
            Pp = F @ P @ F.T + process_noise(dt, cfg)
            Pp = 0.5 * (Pp + Pp.T)
        x, P = measurement_update(xp, Pp, ep)
        _check_pd(P, k)
        out.append(FilterState(ep.time_ms, x, P, xp, Pp, F))
    return out


def rts_smooth(forward, cfg=None):
    """Backward Rauch-Tung-Striebel pass over stored forward states."""
    if not forward:
        raise ValueError("empty forward pass")
    n = len(forward)
    xs = np.empty((n, 8))
    Ps = np.empty((n, 8, 8))
    xs[-1] = forward[-1].state
    Ps[-1] = forward[-1].covariance
    for k in range(n - 2, -1, -1):
        nxt = forward[k + 1]
        if nxt.pred_state is None or nxt.pred_cov is None or nxt.transition is None:
            raise ValueError(f"forward state {k + 1} has no stored prediction")
        Pf = forward[k].covariance
        C = np.linalg.solve(nxt.pred_cov, nxt.transition @ Pf).T
        xs[k] = forward[k].state + C @ (xs[k + 1] - nxt.pred_state)
        Pk = Pf + C @ (Ps[k + 1] - nxt.pred_cov) @ C.T
        Ps[k] = 0.5 * (Pk + Pk.T)
    times = np.array([s.time_ms for s in forward], dtype=np.int64)
    return SmoothedTrack(times, xs[:, POS].copy(), xs[:, CLK].copy(), Ps)


def _mhe_window(epochs, j0, k, guess, cfg, tol=1e-4, max_iter=20):
    n = k - j0 + 1
    s = guess.copy()
    prior_rows = []
    if cfg.mhe_prior_weight > 0:
        sw = np.sqrt(cfg.mhe_prior_weight)
        for j in range(j0 + 2, k + 1):
            dt1 = (epochs[j].time_ms - epochs[j - 1].time_ms) / 1000.0
            dt0 = (epochs[j - 1].time_ms - epochs[j - 2].time_ms) / 1000.0
            tau = 0.5 * (dt0 + dt1)
            scale = np.array([cfg.process_noise_vel] * 3 + [cfg.process_noise_clk])
            c = sw / np.sqrt(np.maximum(scale, 1e-9) * tau)
            prior_rows.append((j - j0, dt0, dt1, c))
    m_rows = sum(len(epochs[j].obs) for j in range(j0, k + 1))
    nrows = m_rows + 4 * len(prior_rows)
    iters = 0
    converged = False
    for iters in range(1, max_iter + 1):
        J = np.zeros((nrows, 4 * n))
        res = np.zeros(nrows)
        row = 0
        for i, j in enumerate(range(j0, k + 1)):
            ep = epochs[j]
            sat = ep.sat_positions
            w = 1.0 / ep.sigmas
            d = s[i, :3] - sat
            r = np.linalg.norm(d, axis=1)
            m = len(r)
            res[row:row + m] = w * (ep.pseudoranges - r - s[i, 3])
            J[row:row + m, 4 * i:4 * i + 3] = -w[:, None] * d / r[:, None]
            J[row:row + m, 4 * i + 3] = -w
            row += m
        for i, dt0, dt1, c in prior_rows:
            # velocity change between the two intervals ending at window slot i
            a, b0, b1 = 1.0 / dt1, -(1.0 / dt1 + 1.0 / dt0), 1.0 / dt0
            res[row:row + 4] = c * (a * s[i] + b0 * s[i - 1] + b1 * s[i - 2])
            for slot, coef in ((i, a), (i - 1, b0), (i - 2, b1)):
                J[row:row + 4, 4 * slot:4 * slot + 4] = np.diag(c * coef)
            row += 4
        delta = np.linalg.lstsq(J, -res, rcond=None)[0].reshape(n, 4)
        s = s + delta
        if np.max(np.linalg.norm(delta[:, :3], axis=1)) < tol:
            converged = True
            break
    return s, iters, converged


def mhe_solve(epochs, window=None, cfg=None):
    """Sliding-window batch least squares; returns one NavSolution per epoch.

    Each window covers the last ``window`` epochs (truncated at the trace
    start) and the reported state is the newest one.  With ``window=1`` or a
    zero prior weight this reduces to per-epoch WLS.
    """
    cfg = cfg or EstimatorConfig()
    window = cfg.mhe_window if window is None else window
    if window < 1:
        raise ValueError("window must be >= 1")
    est = np.zeros((len(epochs), 4))
    out = []
    prev = None
    for k, ep in enumerate(epochs):
        sol, _ = wls_solve(ep, prev)
        est[k] = sol.state
        j0 = max(0, k - window + 1)
        s, iters, conv = _mhe_window(epochs, j0, k, est[j0:k + 1], cfg)
        est[j0:k + 1] = s
        prev = NavSolution(s[-1, :3].copy(), float(s[-1, 3]), iters, conv)
        out.append(prev)
    return out


@dataclass
class EngineTrack:
    times_ms: np.ndarray
    pos: np.ndarray
    clock_bias_m: np.ndarray


ENGINES = ("wls", "ekf", "mhe", "rts")


def run_engine(name, epochs, cfg=None):
    """Position a whole trace with one of ``ENGINES``."""
    cfg = cfg or EstimatorConfig()
    times = np.array([e.time_ms for e in epochs], dtype=np.int64)
    if name == "wls":
        sols, _ = wls_track(epochs)
        return EngineTrack(times, np.array([s.pos for s in sols]),
                           np.array([s.clock_bias_m for s in sols]))
    if name == "mhe":
        sols = mhe_solve(epochs, cfg=cfg)
        return EngineTrack(times, np.array([s.pos for s in sols]),
                           np.array([s.clock_bias_m for s in sols]))
    if name in ("ekf", "rts"):
        fwd = ekf_forward(epochs, cfg)
        if name == "ekf":
            return EngineTrack(times, np.array([f.state[POS] for f in fwd]),
                               np.array([f.state[CLK] for f in fwd]))
        sm = rts_smooth(fwd, cfg)
        return EngineTrack(times, sm.pos, sm.clock_bias_m)
    raise ValueError(f"unknown engine {name!r}; expected one of {', '.join(ENGINES)}")
