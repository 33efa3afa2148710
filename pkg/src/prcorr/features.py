"""Per-satellite input features and 32-slot masked samples.

Column order of a feature vector (fixed; part of the model contract and of
the feature sidecar format):

    f1            C/N0 / 50
    f2a, f2b      sin E, cos E (elevation from the WLS position)
    f3            svid / 32
    f4a..f4f      WLS latitude deg/90, min/60, sec/60, longitude deg/180, min/60, sec/60
    f5n, f5e, f5d receiver-minus-satellite unit vector in NED
    f6n, f6e, f6d heading unit vector (WLS position k -> k+1) in NED
"""
import math
from dataclasses import dataclass

import numpy as np

from . import geo, ingest

N_SLOTS = 32
N_FEATURES = 16
FEATURE_NAMES = ["f1", "f2a", "f2b", "f3", "f4a", "f4b", "f4c", "f4d", "f4e", "f4f",
                 "f5n", "f5e", "f5d", "f6n", "f6e", "f6d"]
FEATURE_HEADER = ["time_ms", "svid"] + FEATURE_NAMES
CN0_SCALE = 50.0
SVID_SCALE = 32.0
HEADING_MIN_MOVE_M = 0.2
NORTH = np.array([1.0, 0.0, 0.0])


class FeatureError(ValueError):
    pass


@dataclass
class EpochFeatures:
    time_ms: int
    svids: list
    values: np.ndarray  # (M, 16)


@dataclass
class FeatureSample:
    time_ms: int
    slots: np.ndarray    # (32, 16)
    mask: np.ndarray     # (32,) bool
    labels: np.ndarray   # (32,)
    h: np.ndarray        # (32,)

    @property
    def visible(self):
        return np.flatnonzero(self.mask)


def headings(positions):
    """Heading unit vectors in NED for a sequence of ECEF positions.

    Displacements under 0.2 m hold the previous heading; the first epoch
    starts from north and the last epoch repeats its predecessor.
    """
    positions = np.asarray(positions, dtype=float)
    out = np.empty((len(positions), 3))
    prev = NORTH
    for k in range(len(positions)):
        if k + 1 < len(positions):
            d = positions[k + 1] - positions[k]
            dist = np.linalg.norm(d)
            if dist >= HEADING_MIN_MOVE_M:
                prev = geo.ecef_vector_to_ned(d / dist, geo.ecef_to_geodetic(positions[k]))
        out[k] = prev
    return out


def position_features(pos_geodetic):
    lat = geo.degrees_to_dms(pos_geodetic.latitude)
    lon = geo.degrees_to_dms(pos_geodetic.longitude)
    return np.array([lat[0] / 90.0, lat[1] / 60.0, lat[2] / 60.0,
                     lon[0] / 180.0, lon[1] / 60.0, lon[2] / 60.0])


def extract_features(epoch, wls, heading_ned):
    """Feature matrix (M, 16) for one epoch.

    ``wls`` is the epoch's NavSolution (or ``(NavSolution, GeometrySolve)``);
    ``heading_ned`` comes from :func:`headings` over the WLS track.
    """
    if wls is None:
        raise FeatureError(f"epoch {epoch.time_ms}: no WLS solution")
    if isinstance(wls, tuple):
        wls = wls[0]
    pos = np.asarray(wls.pos, dtype=float)
    origin = geo.ecef_to_geodetic(pos)
    R = geo.ned_rotation(origin)
    common = np.concatenate([position_features(origin), heading_ned])
    rows = []
    for o in epoch.obs:
        if not 1 <= o.svid <= N_SLOTS:
            raise FeatureError(f"svid {o.svid} outside 1..{N_SLOTS}")
        d = pos - np.asarray(o.sat_pos, dtype=float)
        g_ned = R @ (d / np.linalg.norm(d))
        # the LOS to the satellite is -g; elevation from its down component
        elev = math.atan2(g_ned[2], math.hypot(g_ned[0], g_ned[1]))
        rows.append(np.concatenate([[o.cn0_dbhz / CN0_SCALE, math.sin(elev), math.cos(elev),
                                     o.svid / SVID_SCALE], common[:6], g_ned, common[6:]]))
    return EpochFeatures(epoch.time_ms, list(epoch.svids),
                         np.array(rows, dtype=float).reshape(-1, N_FEATURES))


def extract_trace(epochs, wls_solutions):
    """Features for a whole trace, headings resolved from the WLS track."""
    heads = headings([s.pos for s in wls_solutions])
    return [extract_features(ep, s, h) for ep, s, h in zip(epochs, wls_solutions, heads)]


def assemble_samples(features, labels=None, include_empty=False):
    """Scatter per-epoch features (and LabelRecords) into 32-slot samples.

    Slot ``i`` holds svid ``i + 1``.  Epochs without any visible satellite
    are skipped unless ``include_empty``.  When ``labels`` are given only
    epochs present in them are returned and their svid sets must match.
    """
    by_t = None
    if labels is not None:
        by_t = {}
        for r in labels:
            by_t.setdefault(r.time_ms, []).append(r)
    out = []
    for ef in features:
        if not ef.svids and not include_empty:
            continue
        slots = np.zeros((N_SLOTS, N_FEATURES))
        mask = np.zeros(N_SLOTS, dtype=bool)
        lab = np.zeros(N_SLOTS)
        h = np.zeros(N_SLOTS)
        idx = np.array(ef.svids, dtype=int) - 1
        slots[idx] = ef.values
        mask[idx] = True
        if by_t is not None:
            recs = by_t.get(ef.time_ms)
            if recs is None:
                continue
            if sorted(r.svid for r in recs) != sorted(ef.svids):
                raise FeatureError(f"epoch {ef.time_ms}: label svids {sorted(r.svid for r in recs)}"
                                   f" differ from feature svids {sorted(ef.svids)}")
            for r in recs:
                lab[r.svid - 1] = r.label_m
                h[r.svid - 1] = r.h_value
        out.append(FeatureSample(ef.time_ms, slots, mask, lab, h))
    return out


def write_features(stream, features):
    ingest.write_rows(stream, FEATURE_HEADER,
                      [(ef.time_ms, s, *row) for ef in features for s, row in zip(ef.svids, ef.values)])


def read_features(stream):
    rows = ingest.parse_rows(stream, FEATURE_HEADER)
    out = []
    for t, s, *vals in rows:
        if not 1 <= s <= N_SLOTS:
            raise FeatureError(f"svid {s} outside 1..{N_SLOTS}")
        if out and out[-1].time_ms == t:
            out[-1].svids.append(s)
            out[-1].values.append(vals)
        else:
            out.append(EpochFeatures(t, [s], [vals]))
    for ef in out:
        ef.values = np.array(ef.values, dtype=float)
    return out
