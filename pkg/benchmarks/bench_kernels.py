"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best-of-N time for each backend and the
speed-up, then a whole-trace WLS run under each backend (the pure-Python one
in a subprocess with PRCORR_PURE_PYTHON=1, as a user would select it).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from prcorr import _kernels_py, kernels


def cases(rng):
    n = 20_000
    lat1 = rng.uniform(-70, 70, n)
    lon1 = rng.uniform(-179, 179, n)
    lat2 = lat1 + rng.normal(0, 1e-3, n)
    lon2 = lon1 + rng.normal(0, 1e-3, n)
    xyz = rng.normal(size=(n, 3))
    xyz *= (6.4e6 / np.linalg.norm(xyz, axis=1))[:, None]
    from prcorr import simulator
    tr = simulator.simulate_trace(simulator.ScenarioConfig(duration_epochs=300, seed=1))
    wls_args = [(ep.sat_positions, ep.pseudoranges, 1.0 / ep.sigmas, np.zeros(4), 1e-4, 20)
                for ep in tr.epochs]
    return {
        "vincenty_many (20k pairs)": lambda m: m.vincenty_many(lat1, lon1, lat2, lon2, 1e-12, 200),
        "ecef_to_geodetic_many (20k)": lambda m: m.ecef_to_geodetic_many(xyz, 1e-12),
        "gauss_newton_wls (300 epochs, cold)": lambda m: [m.gauss_newton_wls(*a) for a in wls_args],
    }


TRACE_SNIPPET = """
import time
from prcorr import kernels, simulator, solver
tr = simulator.simulate_trace(simulator.ScenarioConfig(duration_epochs=600, seed=2))
t = time.perf_counter(); solver.wls_track(tr.epochs); dt = time.perf_counter() - t
print(kernels.BACKEND, dt)
"""


def trace_run(pure):
    env = dict(os.environ)
    env.pop("PRCORR_PURE_PYTHON", None)
    if pure:
        env["PRCORR_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", TRACE_SNIPPET], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    return out[0], float(out[1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.compiled_available():
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    from prcorr import _kernels as compiled
    rng = np.random.default_rng(0)
    print(f"{'kernel':38s} {'cython s':>10s} {'python s':>10s} {'speed-up':>9s}")
    for name, fn in cases(rng).items():
        tc = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat))
        tp = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=max(1, args.repeat // 2)))
        print(f"{name:38s} {tc:10.4f} {tp:10.4f} {tp / tc:8.1f}x")
    for pure in (False, True):
        backend, dt = trace_run(pure)
        print(f"wls_track 600 epochs, backend={backend:7s} {dt:8.3f} s")


if __name__ == "__main__":
    main()
