import functools
import json

import numpy as np
import pytest

from prcorr import simulator


def scenario(**kw):
    bias = kw.pop("bias", None)
    cfg = simulator.ScenarioConfig(**kw)
    if bias is not None:
        cfg.bias = simulator.BiasSpec(**bias)
    cfg.validate()
    return cfg


@functools.lru_cache(maxsize=None)
def _sim(key):
    return simulator.simulate_trace(scenario(**json.loads(key)))


def trace(**kw):
    """Simulated trace, cached per distinct config for the session (treat as read-only)."""
    return _sim(json.dumps(kw, sort_keys=True))


@pytest.fixture(scope="session")
def clean_trace():
    return trace(noise_sigma_m=0.0, duration_epochs=200, trajectory="constant_velocity",
                 clock_bias_m=1500.0, clock_drift_mps=0.3, seed=7)


@pytest.fixture(scope="session")
def noisy_trace():
    return trace(noise_sigma_m=3.0, duration_epochs=300, seed=11, bias={"kind": "elevation"})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register here and get a summary block at the end of the run
ACCEPTANCE = {}


def record(number, title, ok, detail):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
