"""Pseudorange-error estimates and smoothed bias labels.

A label is the range difference ``|x_smooth - sat| - |x_true - sat|``: the
bias component seen through the smoothed position, already net of the part
that the receiver clock estimate absorbs.  Each label carries the epoch's
clock row ``h`` (last row of ``(WG)^+ W``) so training needs no solver.
"""
import logging
from dataclasses import dataclass

import numpy as np

from . import ingest

log = logging.getLogger(__name__)

WARMUP_EPOCHS = 120
LABEL_SANITY_M = 1000.0


class LabelError(ValueError):
    pass


@dataclass
class LabelRecord:
    time_ms: int
    svid: int
    label_m: float
    h_row: np.ndarray
    visible_svids: list

    @property
    def h_value(self):
        return float(self.h_row[self.visible_svids.index(self.svid)])


def estimate_pr_errors(epoch, truth_pos, wls):
    """``rho - |truth - sat| - clock_hat`` per satellite, in observation order."""
    if truth_pos is None:
        raise LabelError(f"epoch {epoch.time_ms}: no truth position")
    r = np.linalg.norm(np.asarray(truth_pos, dtype=float) - epoch.sat_positions, axis=1)
    return epoch.pseudoranges - r - wls.clock_bias_m


def smoothed_label(sat_pos, smoothed_pos, truth_pos):
    sat = np.asarray(sat_pos, dtype=float)
    return float(np.linalg.norm(np.asarray(smoothed_pos, dtype=float) - sat)
                 - np.linalg.norm(np.asarray(truth_pos, dtype=float) - sat))


def theorem_residuals(epoch, smoothed_pos, truth_pos):
    """``|(r_bar - r) - g . (x_bar - x)|`` per satellite, g taken at truth.

    First-order Taylor remainder; bounded by roughly |x_bar - x|^2 / (2 r).
    """
    sat = epoch.sat_positions
    x = np.asarray(truth_pos, dtype=float)
    xb = np.asarray(smoothed_pos, dtype=float)
    d = x - sat
    r = np.linalg.norm(d, axis=1)
    g = d / r[:, None]
    labels = np.linalg.norm(xb - sat, axis=1) - r
    return np.abs(labels - g @ (xb - x))


def build_label_dataset(epochs, truth_ecef, smoothed, geoms, discard=WARMUP_EPOCHS,
                        check_theorem=False, target="smoothed", wls=None):
    """One LabelRecord per visible satellite for every epoch after ``discard``.

    ``truth_ecef`` and ``smoothed.pos`` are (N, 3) arrays aligned with
    ``epochs``; rows of ``truth_ecef`` that are NaN (no truth) are skipped.
    ``geoms`` holds each epoch's GeometrySolve.  ``target="raw"`` labels with
    the WLS-based estimate ``rho - r - clock_hat`` instead (needs ``wls``).
    """
    if target not in ("smoothed", "raw"):
        raise LabelError(f"unknown label target {target!r}")
    if target == "raw" and wls is None:
        raise LabelError("raw labels need the WLS solutions")
    n = len(epochs)
    if not (len(truth_ecef) == len(smoothed.pos) == len(geoms) == n):
        raise LabelError("epochs, truth, smoothed track and geometry differ in length")
    if n <= discard:
        raise LabelError(f"trace of {n} epochs leaves no data after discarding {discard}")
    out = []
    truth_ecef = np.asarray(truth_ecef, dtype=float)
    for k in range(discard, n):
        ep, geom = epochs[k], geoms[k]
        if not np.all(np.isfinite(truth_ecef[k])):
            continue
        if list(geom.svids) != ep.svids:
            raise LabelError(f"epoch {ep.time_ms}: geometry svids differ from observations")
        sat = ep.sat_positions
        if target == "raw":
            labels = estimate_pr_errors(ep, truth_ecef[k], wls[k])
        else:
            labels = (np.linalg.norm(smoothed.pos[k] - sat, axis=1)
                      - np.linalg.norm(truth_ecef[k] - sat, axis=1))
        if np.any(np.abs(labels) >= LABEL_SANITY_M):
            raise LabelError(f"epoch {ep.time_ms}: label magnitude exceeds {LABEL_SANITY_M} m")
        if check_theorem:
            res = theorem_residuals(ep, smoothed.pos[k], truth_ecef[k])
            log.debug("epoch %d: max first-order residual %.3g m", ep.time_ms, res.max())
        h = geom.h_row.copy()
        svids = list(ep.svids)
        for svid, lab in zip(svids, labels):
            out.append(LabelRecord(ep.time_ms, svid, float(lab), h, svids))
    if not out:
        raise LabelError("no labelled epoch: none has truth after the warm-up discard")
    return out


def write_labels(label_stream, h_stream, records):
    """Write the ``time_ms,svid,label_m`` and ``time_ms,svid,h_value`` sidecars."""
    ingest.write_rows(label_stream, ingest.LABEL_HEADER,
                      [(r.time_ms, r.svid, r.label_m) for r in records])
    ingest.write_rows(h_stream, ingest.HROW_HEADER,
                      [(r.time_ms, r.svid, r.h_value) for r in records])


def read_labels(label_stream, h_stream):
    """Rebuild LabelRecords from the two sidecars (h rows regrouped per epoch)."""
    labels = ingest.parse_rows(label_stream, ingest.LABEL_HEADER)
    hvals = ingest.parse_rows(h_stream, ingest.HROW_HEADER)
    if [(t, s) for t, s, _ in labels] != [(t, s) for t, s, _ in hvals]:
        raise LabelError("label and h-row sidecars list different (time_ms, svid) rows")
    by_t = {}
    for (t, s, lab), (_, _, h) in zip(labels, hvals):
        by_t.setdefault(t, []).append((s, lab, h))
    out = []
    for t, rows in by_t.items():
        svids = [s for s, _, _ in rows]
        h = np.array([hv for _, _, hv in rows])
        for s, lab, _ in rows:
            out.append(LabelRecord(t, s, lab, h, svids))
    return out
