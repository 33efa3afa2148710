"""Synthetic GPS L1 scenarios with known truth, bias and noise.

Satellites fly circular orbits taken from a fixed 32-slot catalog (8 planes
of 4, Walker-style phasing); a scenario tracks the ``n_sats`` catalog members
highest in the sky at its first epoch.  Pseudoranges are built as

    rho = |sat - receiver| + clock + mu + v,   v ~ N(0, noise_sigma^2)

so every quantity downstream stages estimate is known exactly here.  The
orbits are a deliberate simplification (no ephemerides, no light time).
"""
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import geo, ingest
from .ingest import MeasurementSet, SatObservation

OMEGA_EARTH = 7.2921151467e-5
GM = 3.986004418e14
CATALOG_PLANES = 8
CATALOG_PER_PLANE = 4
MASK_DEG = 10.0
BIAS_CAP_M = 10.0


class ScenarioError(ValueError):
    pass


@dataclass
class BiasSpec:
    """Deterministic per-satellite bias model.

    kinds:
      none       mu = 0
      constant   mu = value
      linear     mu = offset + sum(coef[name] * feature[name]) over feature
                 names f1, f2a, f2b, f3, f5n, f5e, f5d, f6n, f6e, f6d
      elevation  mu = amplitude * exp(-E / scale_deg)
      urban      street-canyon NLOS term + low-elevation multipath + weak-signal
                 term + per-PRN hardware offset
    Every kind is clipped to +/- cap_m.
    """
    kind: str = "none"
    value: float = 0.0
    coef: dict = field(default_factory=dict)
    offset: float = 0.0
    amplitude: float = 8.0
    scale_deg: float = 15.0
    street_az_deg: float = None
    cap_m: float = BIAS_CAP_M

    KINDS = ("none", "constant", "linear", "elevation", "urban")

    def validate(self):
        if self.kind not in self.KINDS:
            raise ScenarioError(f"unknown bias kind {self.kind!r}")
        if not 0.0 < self.cap_m <= 15.0:
            raise ScenarioError("bias cap_m must be in (0, 15]")
        bad = set(self.coef) - set(LINEAR_TERMS)
        if bad:
            raise ScenarioError(f"unknown linear bias terms {sorted(bad)}")

    def evaluate(self, elev_rad, cn0, g_ned, heading_ned, svid):
        """Bias in meters for one observation."""
        if self.kind == "none":
            mu = 0.0
        elif self.kind == "constant":
            mu = self.value
        elif self.kind == "linear":
            terms = _linear_terms(elev_rad, cn0, g_ned, heading_ned, svid)
            mu = self.offset + sum(c * terms[k] for k, c in self.coef.items())
        elif self.kind == "elevation":
            mu = self.amplitude * math.exp(-math.degrees(elev_rad) / self.scale_deg)
        else:
            mu = _urban(elev_rad, cn0, g_ned, heading_ned, svid, self.street_az_deg)
        return float(np.clip(mu, -self.cap_m, self.cap_m))


LINEAR_TERMS = ("f1", "f2a", "f2b", "f3", "f5n", "f5e", "f5d", "f6n", "f6e", "f6d")


def _linear_terms(elev_rad, cn0, g_ned, heading_ned, svid):
    return {"f1": cn0 / 50.0, "f2a": math.sin(elev_rad), "f2b": math.cos(elev_rad),
            "f3": svid / 32.0, "f5n": g_ned[0], "f5e": g_ned[1], "f5d": g_ned[2],
            "f6n": heading_ned[0], "f6e": heading_ned[1], "f6d": heading_ned[2]}


def _urban(elev_rad, cn0, g_ned, heading_ned, svid, street_az_deg):
    if street_az_deg is None:
        street = np.array(heading_ned[:2], dtype=float)
    else:
        a = math.radians(street_az_deg)
        street = np.array([math.cos(a), math.sin(a)])
    street /= max(np.linalg.norm(street), 1e-12)
    los = -np.asarray(g_ned, dtype=float)
    # signed horizontal LOS component across the street; a facade stands on
    # the positive side and turns low signals from there into reflections
    across = los[1] * street[0] - los[0] * street[1]
    facade = 1.0 / (1.0 + math.exp(-6.0 * across))
    canyon = 14.0 * facade * math.exp(-math.degrees(elev_rad) / 30.0)
    multipath = 2.0 * (1.0 - math.sin(elev_rad)) ** 2
    weak = 0.15 * max(0.0, 42.0 - cn0)
    hardware = 0.6 * math.sin(1.7 * svid)
    return canyon + multipath + weak + hardware


@dataclass
class ScenarioConfig:
    n_sats: int = 8
    orbit_radius_m: float = 26_560_000.0
    inclination_deg: float = 55.0
    trajectory: str = "stationary"
    origin: tuple = (37.4220, -122.0841, 10.0)
    velocity_ned: tuple = (0.0, 10.0, 0.0)
    waypoints: list = field(default_factory=list)
    speed_mps: float = 10.0
    epoch_interval_s: float = 1.0
    duration_epochs: int = 300
    noise_sigma_m: float = 3.0
    clock_bias_m: float = 0.0
    clock_drift_mps: float = 0.0
    cn0_noise_db: float = 1.0
    bias: BiasSpec = field(default_factory=BiasSpec)
    start_time_s: float = 0.0
    mask_deg: float = MASK_DEG
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        bad = set(d) - known
        if bad:
            raise ScenarioError(f"unknown scenario keys {sorted(bad)}")
        if "bias" in d and not isinstance(d["bias"], BiasSpec):
            b = dict(d["bias"])
            bad = set(b) - set(BiasSpec.__dataclass_fields__)
            if bad:
                raise ScenarioError(f"unknown bias keys {sorted(bad)}")
            d["bias"] = BiasSpec(**b)
        for k in ("origin", "velocity_ned"):
            if k in d:
                d[k] = tuple(d[k])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self):
        d = asdict(self)
        d["origin"] = list(self.origin)
        d["velocity_ned"] = list(self.velocity_ned)
        return d

    def validate(self):
        if not 4 <= self.n_sats <= 32:
            raise ScenarioError("n_sats must be in [4, 32]")
        if self.trajectory not in ("stationary", "constant_velocity", "waypoints"):
            raise ScenarioError(f"unknown trajectory {self.trajectory!r}")
        if self.trajectory == "waypoints" and len(self.waypoints) < 2:
            raise ScenarioError("waypoint trajectory needs at least two waypoints")
        if self.duration_epochs < 1:
            raise ScenarioError("duration_epochs must be positive")
        if self.epoch_interval_s <= 0 or round(self.epoch_interval_s * 1000) < 1:
            raise ScenarioError("epoch_interval_s must be at least 1 ms")
        if self.noise_sigma_m < 0 or self.cn0_noise_db < 0:
            raise ScenarioError("noise levels must be non-negative")
        if self.orbit_radius_m <= geo.A:
            raise ScenarioError("orbit radius must exceed the Earth radius")
        self.bias.validate()


def catalog_elements():
    """(raan, phase) in radians for the 32 catalog slots; PRN = slot + 1."""
    out = []
    for p in range(CATALOG_PLANES):
        for s in range(CATALOG_PER_PLANE):
            raan = 2.0 * math.pi * p / CATALOG_PLANES
            phase = 2.0 * math.pi * (s / CATALOG_PER_PLANE + p / (CATALOG_PLANES * CATALOG_PER_PLANE))
            out.append((raan, phase))
    return out


def satellite_positions(t_s, radius_m=26_560_000.0, inclination_deg=55.0):
    """ECEF positions (32, 3) of the catalog at time ``t_s``."""
    n = math.sqrt(GM / radius_m ** 3)
    inc = math.radians(inclination_deg)
    theta = OMEGA_EARTH * t_s
    out = np.empty((32, 3))
    for k, (raan, phase) in enumerate(catalog_elements()):
        u = phase + n * t_s
        xo, yo = radius_m * math.cos(u), radius_m * math.sin(u)
        # perifocal -> inertial (argument of perigee folded into u)
        xi = xo * math.cos(raan) - yo * math.cos(inc) * math.sin(raan)
        yi = xo * math.sin(raan) + yo * math.cos(inc) * math.cos(raan)
        zi = yo * math.sin(inc)
        # inertial -> earth fixed
        out[k] = (xi * math.cos(theta) + yi * math.sin(theta),
                  -xi * math.sin(theta) + yi * math.cos(theta),
                  zi)
    return out


def visibility_filter(sat, receiver, mask_deg=MASK_DEG):
    """True when the satellite is above the elevation mask at the receiver."""
    el, _ = geo.elevation_azimuth(receiver, sat)
    return el > mask_deg


def receiver_track(cfg):
    """Truth ECEF positions (N, 3) and NED heading unit vectors (N, 3)."""
    n = cfg.duration_epochs
    t = np.arange(n) * cfg.epoch_interval_s
    origin = geo.GeodeticPoint(*cfg.origin)
    x0 = geo.geodetic_to_ecef(origin)
    R = geo.ned_rotation(origin)
    north = np.array([1.0, 0.0, 0.0])
    if cfg.trajectory == "stationary":
        return np.tile(x0, (n, 1)), np.tile(north, (n, 1))
    if cfg.trajectory == "constant_velocity":
        v_ned = np.asarray(cfg.velocity_ned, dtype=float)
        v_ecef = R.T @ v_ned
        pos = x0 + t[:, None] * v_ecef
        speed = np.linalg.norm(v_ned)
        if speed == 0:
            return pos, np.tile(north, (n, 1))
        heads = np.array([geo.ned_rotation(geo.ecef_to_geodetic(p)) @ (v_ecef / speed)
                          for p in pos])
        return pos, heads
    pts = np.array([geo.geodetic_to_ecef(geo.GeodeticPoint(*w)) for w in cfg.waypoints])
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.minimum(t * cfg.speed_mps, cum[-1])
    pos = np.empty((n, 3))
    heads = np.empty((n, 3))
    for i, si in enumerate(s):
        k = min(int(np.searchsorted(cum, si, side="right")) - 1, len(seg) - 1)
        frac = (si - cum[k]) / seg_len[k] if seg_len[k] > 0 else 0.0
        pos[i] = pts[k] + frac * seg[k]
        d = seg[k] / seg_len[k] if seg_len[k] > 0 else R.T @ north
        heads[i] = geo.ned_rotation(geo.ecef_to_geodetic(pos[i])) @ d
    return pos, heads


@dataclass
class SimulatedTrace:
    config: ScenarioConfig
    epochs: list
    times_ms: np.ndarray
    truth_ecef: np.ndarray
    truth_geodetic: list
    sidecar: list  # (time_ms, svid, mu_m, v_m, clk_m)

    def mu(self, k):
        """{svid: mu} for epoch index ``k``."""
        t = self.epochs[k].time_ms
        return {s: m for (tt, s, m, _, _) in self.sidecar if tt == t}

    def error_arrays(self):
        """Per epoch (mu, v) arrays aligned with the epoch's observation order."""
        by_t = {}
        for t, s, m, v, _ in self.sidecar:
            by_t.setdefault(t, {})[s] = (m, v)
        out = []
        for ep in self.epochs:
            d = by_t[ep.time_ms]
            out.append((np.array([d[s][0] for s in ep.svids]),
                        np.array([d[s][1] for s in ep.svids])))
        return out


def simulate_trace(cfg):
    """Generate a scenario; raises ScenarioError if any epoch sees fewer than 4 satellites."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    pos, heads = receiver_track(cfg)
    dt_ms = int(round(cfg.epoch_interval_s * 1000))
    times = np.arange(cfg.duration_epochs, dtype=np.int64) * dt_ms

    sats0 = satellite_positions(cfg.start_time_s, cfg.orbit_radius_m, cfg.inclination_deg)
    el0 = np.array([geo.elevation_azimuth(pos[0], s)[0] for s in sats0])
    tracked = sorted(np.argsort(-el0, kind="stable")[:cfg.n_sats].tolist())
    sigma_rep = cfg.noise_sigma_m if cfg.noise_sigma_m > 0 else 1.0

    epochs, geodetic, sidecar = [], [], []
    for k in range(cfg.duration_epochs):
        t_s = cfg.start_time_s + k * cfg.epoch_interval_s
        sats = satellite_positions(t_s, cfg.orbit_radius_m, cfg.inclination_deg)
        rx = pos[k]
        rx_geo = geo.ecef_to_geodetic(rx)
        R = geo.ned_rotation(rx_geo)
        clk = cfg.clock_bias_m + cfg.clock_drift_mps * k * cfg.epoch_interval_s
        obs = []
        for idx in tracked:
            sat = sats[idx]
            los = sat - rx
            r = float(np.linalg.norm(los))
            n_, e_, d_ = R @ (los / r)
            elev = math.atan2(-d_, math.hypot(n_, e_))
            if math.degrees(elev) <= cfg.mask_deg:
                continue
            svid = idx + 1
            cn0 = 48.0 - 20.0 * (1.0 - math.sin(elev)) + cfg.cn0_noise_db * rng.standard_normal()
            cn0 = float(np.clip(cn0, 20.0, 50.0))
            g_ned = -np.array([n_, e_, d_])
            mu = cfg.bias.evaluate(elev, cn0, g_ned, heads[k], svid)
            v = cfg.noise_sigma_m * rng.standard_normal()
            pr = r + clk + mu + v
            obs.append(SatObservation(svid, pr, cn0, tuple(float(c) for c in sat), sigma_rep))
            sidecar.append((int(times[k]), svid, mu, v, clk))
        if len(obs) < 4:
            raise ScenarioError(f"epoch {k}: only {len(obs)} satellites above the mask")
        epochs.append(MeasurementSet(int(times[k]), tuple(obs)))
        geodetic.append(rx_geo)
    return SimulatedTrace(cfg, epochs, times, pos, geodetic, sidecar)


def write_scenario(trace, outdir):
    """Write epochs.csv, truth.csv, truth_sidecar.csv and scenario.json into ``outdir``."""
    os.makedirs(outdir, exist_ok=True)
    paths = {name: os.path.join(outdir, name) for name in
             ("epochs.csv", "truth.csv", "truth_sidecar.csv", "scenario.json")}
    with open(paths["epochs.csv"], "w", newline="") as f:
        ingest.write_epochs_csv(f, trace.epochs)
    with open(paths["truth.csv"], "w", newline="") as f:
        ingest.write_ground_truth_csv(f, trace.times_ms, trace.truth_geodetic)
    with open(paths["truth_sidecar.csv"], "w", newline="") as f:
        ingest.write_rows(f, ingest.SIDECAR_HEADER, trace.sidecar)
    with open(paths["scenario.json"], "w") as f:
        json.dump(trace.config.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    return paths
