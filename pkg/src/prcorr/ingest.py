"""Canonical CSV formats: epochs, ground truth, tracks and sidecars.

All writers emit floats with 17 significant digits so a write/parse round
trip is bit-exact.
"""
import csv
import io
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .geo import GeodeticPoint

log = logging.getLogger(__name__)

EPOCH_HEADER = ["time_ms", "svid", "pr_m", "cn0_dbhz", "sat_x_m", "sat_y_m", "sat_z_m",
                "pr_sigma_m"]
TRUTH_HEADER = ["time_ms", "lat_deg", "lon_deg", "alt_m"]
TRACK_HEADER = ["time_ms", "lat_deg", "lon_deg", "alt_m", "clk_m"]
LABEL_HEADER = ["time_ms", "svid", "label_m"]
HROW_HEADER = ["time_ms", "svid", "h_value"]
SIDECAR_HEADER = ["time_ms", "svid", "mu_m", "v_m", "clk_m"]

MAX_SVID = 32


class IngestError(ValueError):
    """Base class for every input-format problem."""


class FormatError(IngestError):
    pass


class FieldParseError(IngestError):
    pass


class RangeError(IngestError):
    pass


class DuplicateObservationError(IngestError):
    pass


class OrderError(IngestError):
    pass


class AlignmentError(IngestError):
    pass


@dataclass(frozen=True)
class SatObservation:
    svid: int
    pr_m: float
    cn0_dbhz: float
    sat_pos: tuple
    pr_sigma_m: float


@dataclass(frozen=True)
class MeasurementSet:
    time_ms: int
    obs: tuple = field(default_factory=tuple)

    @property
    def svids(self):
        return [o.svid for o in self.obs]

    @property
    def pseudoranges(self):
        return np.array([o.pr_m for o in self.obs], dtype=float)

    @property
    def sat_positions(self):
        return np.array([o.sat_pos for o in self.obs], dtype=float).reshape(-1, 3)

    @property
    def sigmas(self):
        return np.array([o.pr_sigma_m for o in self.obs], dtype=float)

    @property
    def cn0(self):
        return np.array([o.cn0_dbhz for o in self.obs], dtype=float)

    def with_pseudoranges(self, pr):
        obs = tuple(replace(o, pr_m=float(p)) for o, p in zip(self.obs, pr))
        return MeasurementSet(self.time_ms, obs)


@dataclass(frozen=True)
class GroundTruthTrack:
    times_ms: np.ndarray
    lat_deg: np.ndarray
    lon_deg: np.ndarray
    alt_m: np.ndarray

    def __len__(self):
        return len(self.times_ms)

    def point(self, i):
        return GeodeticPoint(float(self.lat_deg[i]), float(self.lon_deg[i]),
                             float(self.alt_m[i]))


def fmt(x):
    return format(float(x), ".17g")


def _text(stream):
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _rows(stream, header):
    reader = csv.reader(_text(stream))
    try:
        got = next(reader)
    except StopIteration:
        raise FormatError("line 1: empty file, expected header " + ",".join(header)) from None
    if [h.strip() for h in got] != header:
        raise FormatError(f"line 1: bad header {got!r}, expected {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, row


def _num(value, lineno, col, kind=float):
    try:
        if kind is int:
            return int(value)
        out = float(value)
    except ValueError:
        raise FieldParseError(f"line {lineno}, column {col}: cannot parse {value!r}") from None
    if not np.isfinite(out):
        raise FieldParseError(f"line {lineno}, column {col}: non-finite value {value!r}")
    return out


def parse_epochs_csv(stream):
    """Parse an epochs CSV into a time-sorted list of MeasurementSet.

    Observation order inside an epoch is file order.
    """
    groups = {}
    for lineno, row in _rows(stream, EPOCH_HEADER):
        t = _num(row[0], lineno, 1, int)
        svid = _num(row[1], lineno, 2, int)
        vals = [_num(v, lineno, c) for c, v in enumerate(row[2:], start=3)]
        pr, cn0, sx, sy, sz, sigma = vals
        if not 1 <= svid <= MAX_SVID:
            raise RangeError(f"line {lineno}: svid {svid} outside 1..{MAX_SVID}")
        if sigma <= 0.0:
            raise RangeError(f"line {lineno}: pr_sigma_m must be positive, got {sigma}")
        if pr <= 1e6:
            raise RangeError(f"line {lineno}: pseudorange {pr} m is implausibly small")
        obs = groups.setdefault(t, [])
        if any(o.svid == svid for o in obs):
            raise DuplicateObservationError(
                f"line {lineno}: duplicate observation time_ms={t} svid={svid}")
        obs.append(SatObservation(svid, pr, cn0, (sx, sy, sz), sigma))
    return [MeasurementSet(t, tuple(groups[t])) for t in sorted(groups)]


def parse_ground_truth_csv(stream):
    times, lat, lon, alt = [], [], [], []
    for lineno, row in _rows(stream, TRUTH_HEADER):
        t = _num(row[0], lineno, 1, int)
        la, lo, al = (_num(v, lineno, c) for c, v in enumerate(row[1:], start=2))
        if not -90.0 <= la <= 90.0:
            raise RangeError(f"line {lineno}: latitude {la} outside [-90, 90]")
        if not -180.0 < lo <= 180.0:
            raise RangeError(f"line {lineno}: longitude {lo} outside (-180, 180]")
        if times and t <= times[-1]:
            raise OrderError(f"line {lineno}: time_ms {t} not after {times[-1]}")
        times.append(t)
        lat.append(la)
        lon.append(lo)
        alt.append(al)
    return GroundTruthTrack(np.array(times, dtype=np.int64), np.array(lat), np.array(lon),
                            np.array(alt))


def align_truth(epochs, truth, tolerance_ms=500):
    """Pair each epoch with truth interpolated to its timestamp.

    An epoch is kept when the nearest truth sample is within ``tolerance_ms``;
    the position is then linearly interpolated (in geodetic coordinates)
    between the bracketing samples, or taken from the nearest sample at the
    ends of the track.  Returns ``(pairs, dropped)``.
    """
    if not epochs or len(truth) == 0:
        raise AlignmentError("cannot align empty epochs or truth")
    t = truth.times_ms
    pairs = []
    dropped = 0
    for ep in epochs:
        k = int(np.searchsorted(t, ep.time_ms))
        near = min((abs(int(t[j]) - ep.time_ms) for j in (k - 1, k) if 0 <= j < len(t)))
        if near > tolerance_ms:
            dropped += 1
            continue
        if k < len(t) and t[k] == ep.time_ms:
            pairs.append((ep, truth.point(k)))
        elif 0 < k < len(t):
            w = (ep.time_ms - t[k - 1]) / (t[k] - t[k - 1])
            dlon = truth.lon_deg[k] - truth.lon_deg[k - 1]
            dlon = (dlon + 180.0) % 360.0 - 180.0
            lon = truth.lon_deg[k - 1] + w * dlon
            if lon > 180.0:
                lon -= 360.0
            elif lon <= -180.0:
                lon += 360.0
            pairs.append((ep, GeodeticPoint(
                float(truth.lat_deg[k - 1] + w * (truth.lat_deg[k] - truth.lat_deg[k - 1])),
                float(lon),
                float(truth.alt_m[k - 1] + w * (truth.alt_m[k] - truth.alt_m[k - 1])))))
        else:
            pairs.append((ep, truth.point(min(k, len(t) - 1))))
    if dropped:
        log.info("align_truth: dropped %d of %d epochs without truth", dropped, len(epochs))
    if not pairs:
        raise AlignmentError("no epoch has truth within %d ms" % tolerance_ms)
    return pairs, dropped


def _writer(stream, header):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    return w


def write_epochs_csv(stream, epochs):
    w = _writer(stream, EPOCH_HEADER)
    for ep in epochs:
        for o in ep.obs:
            w.writerow([ep.time_ms, o.svid, fmt(o.pr_m), fmt(o.cn0_dbhz),
                        *(fmt(c) for c in o.sat_pos), fmt(o.pr_sigma_m)])


def write_ground_truth_csv(stream, times_ms, points):
    w = _writer(stream, TRUTH_HEADER)
    for t, p in zip(times_ms, points):
        w.writerow([int(t), fmt(p.latitude), fmt(p.longitude), fmt(p.altitude)])


def write_track_csv(stream, times_ms, llh, clk):
    """Track rows ``time_ms,lat_deg,lon_deg,alt_m,clk_m`` from an (N, 3) lat/lon/alt array."""
    w = _writer(stream, TRACK_HEADER)
    for t, p, c in zip(times_ms, llh, clk):
        w.writerow([int(t), fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(c)])


def parse_track_csv(stream):
    times, rows = [], []
    for lineno, row in _rows(stream, TRACK_HEADER):
        t = _num(row[0], lineno, 1, int)
        if times and t <= times[-1]:
            raise OrderError(f"line {lineno}: time_ms {t} not after {times[-1]}")
        times.append(t)
        rows.append([_num(v, lineno, c) for c, v in enumerate(row[1:], start=2)])
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return np.array(times, dtype=np.int64), arr[:, :3], arr[:, 3]


def write_rows(stream, header, rows):
    """Generic sidecar writer; ints pass through, floats get 17 digits."""
    w = _writer(stream, header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, np.integer)) else fmt(v) for v in row])


def parse_rows(stream, header, int_cols=2):
    """Parse a sidecar whose first ``int_cols`` columns are integers."""
    out = []
    for lineno, row in _rows(stream, header):
        out.append(tuple(_num(v, lineno, c + 1, int if c < int_cols else float)
                         for c, v in enumerate(row)))
    return out
