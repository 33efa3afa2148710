"""Dataset builders shared by the unit and acceptance tests."""
import numpy as np

from prcorr import features, solver
from prcorr.features import FeatureSample
from prcorr.labeling import LabelRecord

from conftest import trace


def random_sample(rng, m, t=0):
    """Random 32-slot sample with m visible satellites and an h row summing to 1."""
    mask = np.zeros(32, bool)
    mask[rng.choice(32, m, replace=False)] = True
    slots = np.zeros((32, 16))
    slots[mask] = rng.uniform(-1, 1, (m, 16))
    hv = rng.normal(size=m)
    h = np.zeros(32)
    h[mask] = hv - hv.mean() + 1.0 / m
    lab = np.zeros(32)
    lab[mask] = rng.normal(0, 3, m)
    return FeatureSample(t, slots, mask, lab, h)


def oracle_samples(n_epochs=128, seed=2, coef=None):
    """Samples whose labels are exactly mu - h.mu for a linear feature bias."""
    coef = coef or {"f1": 4.0, "f2a": 2.0}
    tr = trace(noise_sigma_m=0.0, duration_epochs=n_epochs, seed=seed,
               trajectory="constant_velocity", bias={"kind": "linear", "coef": coef})
    wls, geoms = solver.wls_track(tr.epochs)
    feats = features.extract_trace(tr.epochs, wls)
    recs = []
    for ep, g, (mu, _) in zip(tr.epochs, geoms, tr.error_arrays()):
        lab = mu - g.h_row @ mu
        recs += [LabelRecord(ep.time_ms, s, float(v), g.h_row, ep.svids)
                 for s, v in zip(ep.svids, lab)]
    return features.assemble_samples(feats, recs)


def centred_rms(model, samples):
    """RMS of (mu_hat - h.mu_hat) - label over all visible slots."""
    from prcorr import prnet
    err = []
    for s in samples:
        idx = s.visible
        p = prnet.forward(model, s)[idx]
        err.append(p - s.h[idx] @ p - s.labels[idx])
    e = np.concatenate(err)
    return float(np.sqrt(np.mean(e * e)))


def fd_check(model, samples, rng, n_informative=50, step=1e-5, use_clock_residual=True):
    """Central-difference check on random weights and biases across all layers.

    Draws until ``n_informative`` entries have a gradient above the 1e-8
    roundoff floor.  Returns rows ``(layer, kind, analytic, numeric, rel,
    informative)``; entries at the floor (dead ReLUs, or the output bias
    under the clock-coupled loss, whose exact gradient is 0) are reported
    with their absolute difference in place of ``rel``.
    """
    from prcorr import prnet
    _, gW, gb = prnet.gradients(model, samples, use_clock_residual)
    out = []
    informative = 0
    n_layers = len(model.weights)
    trial = 0
    while informative < n_informative:
        li = int(rng.integers(0, n_layers))
        kind = "b" if rng.random() < 0.25 else "W"
        trial += 1
        P = model.weights[li] if kind == "W" else model.biases[li]
        G = gW[li] if kind == "W" else gb[li]
        idx = tuple(int(rng.integers(0, n)) for n in P.shape)
        old = P[idx]
        P[idx] = old + step
        lp = prnet.batch_loss(model, samples, use_clock_residual)
        P[idx] = old - step
        lm = prnet.batch_loss(model, samples, use_clock_residual)
        P[idx] = old
        num = (lp - lm) / (2 * step)
        a = float(G[idx])
        denom = max(abs(a), abs(num))
        inf = denom > 1e-8
        informative += inf
        out.append((li, kind, a, num, abs(a - num) / denom if inf else abs(a - num), inf))
        if trial > 20 * n_informative:
            break
    return out
