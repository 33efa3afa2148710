"""Horizontal error metrics: Vincenty errors, percentile score and ECDF."""
import json
import math
from dataclasses import dataclass

import numpy as np

from . import geo


@dataclass
class EvalReport:
    errors: np.ndarray
    p50: float
    p95: float
    score: float

    def to_dict(self):
        return {"n_epochs": int(len(self.errors)), "p50_m": self.p50, "p95_m": self.p95,
                "score_m": self.score, "mean_m": float(np.mean(self.errors)),
                "max_m": float(np.max(self.errors))}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def horizontal_errors(est_llh, truth_llh):
    """Per-epoch Vincenty distance between estimated and true lat/lon (altitude ignored).

    Both arguments are (N, >=2) arrays of latitude, longitude in degrees.
    """
    est = np.asarray(est_llh, dtype=float)
    tru = np.asarray(truth_llh, dtype=float)
    if est.shape[0] != tru.shape[0]:
        raise ValueError(f"track has {est.shape[0]} epochs but truth has {tru.shape[0]}")
    return geo.vincenty_distances(est[:, 0], est[:, 1], tru[:, 0], tru[:, 1])


def horizontal_errors_ecef(est_ecef, truth_ecef):
    return horizontal_errors(geo.ecef_to_geodetic_array(est_ecef),
                             geo.ecef_to_geodetic_array(truth_ecef))


def percentile(values, q):
    """Linear interpolation between closest ranks, inclusive endpoints."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("percentile of an empty sample")
    pos = (x.size - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, x.size - 1)
    return float(x[lo] + (pos - lo) * (x[hi] - x[lo]))


def score(errors):
    """Mean of the 50th and 95th percentile of horizontal errors."""
    if len(errors) == 0:
        raise ValueError("cannot score an empty error list")
    return 0.5 * (percentile(errors, 50) + percentile(errors, 95))


def evaluate(errors):
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ValueError("cannot evaluate an empty error list")
    p50, p95 = percentile(errors, 50), percentile(errors, 95)
    return EvalReport(errors, p50, p95, 0.5 * (p50 + p95))


def ecdf(errors):
    """Sorted errors paired with cumulative fractions i/N."""
    x = np.sort(np.asarray(errors, dtype=float))
    if x.size == 0:
        raise ValueError("ecdf of an empty sample")
    return x, np.arange(1, x.size + 1) / x.size


def rms(errors):
    e = np.asarray(errors, dtype=float)
    return float(np.sqrt(np.mean(e * e)))
