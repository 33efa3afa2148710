"""Satellite-wise MLP that predicts pseudorange bias, with its training loop.

One MLP (16 -> H -> ... -> H -> 1, ReLU hidden layers, linear output) is
shared by every satellite of an epoch.  Samples use a 32-slot layout; only
the slots flagged in the visibility mask are ever evaluated, so whatever
sits in the other slots cannot reach an output, the loss or a gradient.

The per-epoch loss couples all visible satellites through the clock row h:

    L = sum_n (mu_n - h . mu - label_n)^2

so adding a common constant to every prediction of an epoch leaves it
unchanged (h sums to one).
"""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .features import N_FEATURES, N_SLOTS

SCHEMA = "prcorr.model/1"
FEATURE_GROUPS = {"F1": [0], "F2": [1, 2], "F3": [3], "F4": [4, 5, 6, 7, 8, 9],
                  "F5": [10, 11, 12], "F6": [13, 14, 15]}
ALL_GROUPS = ("F1", "F2", "F3", "F4", "F5", "F6")


class ModelFormatError(ValueError):
    pass


@dataclass
class PrnetModel:
    weights: list
    biases: list
    feature_groups: tuple = ALL_GROUPS

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def hidden_width(self):
        return self.weights[0].shape[1]

    @property
    def hidden_layers(self):
        return len(self.weights) - 1

    def n_parameters(self):
        return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

    def copy(self):
        return PrnetModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                          tuple(self.feature_groups))

    def input_mask(self):
        keep = np.zeros(N_FEATURES)
        for g in self.feature_groups:
            keep[FEATURE_GROUPS[g]] = 1.0
        return keep


def init_model(hidden_width=40, hidden_layers=20, input_dim=N_FEATURES, seed=0,
               feature_groups=ALL_GROUPS):
    """He-uniform weights (bound sqrt(6 / fan_in)), zero biases."""
    if hidden_layers < 1 or hidden_width < 1:
        raise ValueError("need at least one hidden layer of positive width")
    rng = np.random.default_rng(seed)
    dims = [input_dim] + [hidden_width] * hidden_layers + [1]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    bad = set(feature_groups) - set(ALL_GROUPS)
    if bad:
        raise ValueError(f"unknown feature groups {sorted(bad)}")
    return PrnetModel(weights, biases, tuple(g for g in ALL_GROUPS if g in feature_groups))


def parameter_count(hidden_width=40, hidden_layers=20, input_dim=N_FEATURES):
    """Weights plus biases of the dense stack."""
    dims = [input_dim] + [hidden_width] * hidden_layers + [1]
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def _forward_rows(model, X):
    """Outputs for rows X (n, 16) plus the cache needed for backprop."""
    X = X * model.input_mask()
    acts = [X]
    a = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = np.maximum(a @ W + b, 0.0)
        acts.append(a)
    out = (a @ model.weights[-1] + model.biases[-1])[:, 0]
    return out, acts


def _backward_rows(model, acts, dout):
    """Gradients of sum(dout * out) with respect to every weight and bias."""
    gW = [None] * len(model.weights)
    gb = [None] * len(model.biases)
    delta = dout[:, None]
    for i in range(len(model.weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0.0)
    return gW, gb


def forward(model, sample):
    """Predicted bias for the 32 slots; non-visible slots are exactly 0."""
    if sample.slots.shape != (N_SLOTS, model.input_dim):
        raise ValueError(f"sample slots {sample.slots.shape} do not fit input_dim {model.input_dim}")
    out = np.zeros(N_SLOTS)
    idx = sample.visible
    if idx.size:
        out[idx] = _forward_rows(model, sample.slots[idx])[0]
    return out


def predict_rows(model, X):
    return _forward_rows(model, np.asarray(X, dtype=float).reshape(-1, model.input_dim))[0]


def sample_loss(pred, sample, use_clock_residual=True):
    """Loss of one epoch from its 32-slot predictions."""
    idx = sample.visible
    if idx.size == 0:
        return 0.0
    if sample.h is None:
        raise ValueError("sample has no h row")
    mu = pred[idx]
    shared = float(sample.h[idx] @ mu) if use_clock_residual else 0.0
    r = mu - shared - sample.labels[idx]
    return float(r @ r)


@dataclass
class _Packed:
    X: np.ndarray
    seg: np.ndarray
    h: np.ndarray
    y: np.ndarray
    n_samples: int


def pack(samples):
    """Concatenate the visible rows of several samples."""
    X, seg, h, y = [], [], [], []
    for i, s in enumerate(samples):
        idx = s.visible
        X.append(s.slots[idx])
        seg.append(np.full(idx.size, i))
        h.append(s.h[idx])
        y.append(s.labels[idx])
    return _Packed(np.concatenate(X) if X else np.zeros((0, N_FEATURES)),
                   np.concatenate(seg).astype(np.intp) if seg else np.zeros(0, np.intp),
                   np.concatenate(h) if h else np.zeros(0),
                   np.concatenate(y) if y else np.zeros(0), len(samples))


def _residuals(out, p, use_clock_residual):
    if use_clock_residual:
        shared = np.bincount(p.seg, weights=p.h * out, minlength=p.n_samples)
        return out - shared[p.seg] - p.y
    return out - p.y


def batch_loss(model, samples, use_clock_residual=True):
    p = samples if isinstance(samples, _Packed) else pack(samples)
    out, _ = _forward_rows(model, p.X)
    r = _residuals(out, p, use_clock_residual)
    return float(np.sum(r * r) / p.n_samples)


def gradients(model, samples, use_clock_residual=True):
    """Exact gradient of the batch loss (mean over epochs).

    Returns ``(loss, grad_weights, grad_biases)``.  The clock coupling gives
    dL/dmu_n = 2 (r_n - h_n * sum_m r_m) within an epoch.
    """
    p = samples if isinstance(samples, _Packed) else pack(samples)
    out, acts = _forward_rows(model, p.X)
    r = _residuals(out, p, use_clock_residual)
    loss = float(np.sum(r * r) / p.n_samples)
    if use_clock_residual:
        rsum = np.bincount(p.seg, weights=r, minlength=p.n_samples)
        dout = 2.0 * (r - p.h * rsum[p.seg]) / p.n_samples
    else:
        dout = 2.0 * r / p.n_samples
    gW, gb = _backward_rows(model, acts, dout)
    return loss, gW, gb


@dataclass
class TrainConfig:
    lr_start: float = 1e-2
    lr_end: float = 1e-7
    max_iters: int = 5000
    batch_size: int = 128
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_width: int = 40
    hidden_layers: int = 20
    feature_groups: list = field(default_factory=lambda: list(ALL_GROUPS))
    use_clock_residual: bool = True

    @classmethod
    def from_dict(cls, d):
        bad = set(d) - set(cls.__dataclass_fields__)
        if bad:
            raise ValueError(f"unknown training config keys {sorted(bad)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if not 0 < self.lr_end < self.lr_start:
            raise ValueError("need 0 < lr_end < lr_start")
        for k in ("max_iters", "batch_size", "hidden_width", "hidden_layers"):
            if int(getattr(self, k)) < 1:
                raise ValueError(f"{k} must be a positive integer")

    def to_dict(self):
        return asdict(self)


def learning_rate(it, cfg):
    """Exponential decay from lr_start (iteration 0) to lr_end (last iteration)."""
    if cfg.max_iters == 1:
        return cfg.lr_start
    frac = it / (cfg.max_iters - 1)
    if it == cfg.max_iters - 1:
        return cfg.lr_end
    return cfg.lr_start * (cfg.lr_end / cfg.lr_start) ** frac


class Adam:
    def __init__(self, model, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(p) for p in model.weights + model.biases]
        self.v = [np.zeros_like(p) for p in model.weights + model.biases]

    def step(self, model, grads, lr):
        c = self.cfg
        self.t += 1
        params = model.weights + model.biases
        b1t = 1.0 - c.beta1 ** self.t
        b2t = 1.0 - c.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= lr * (m / b1t) / (np.sqrt(v / b2t) + c.eps)


def train(samples, cfg=None, model=None):
    """Mini-batch Adam; returns ``(model, curve)`` with curve rows (iter, loss, lr).

    Deterministic for a fixed ``cfg.seed``: the same seed initialises the
    weights and drives batch sampling.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    samples = [s for s in samples if s.mask.any()]
    if not samples:
        raise ValueError("empty training dataset")
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = init_model(cfg.hidden_width, cfg.hidden_layers, seed=cfg.seed,
                           feature_groups=cfg.feature_groups)
    opt = Adam(model, cfg)
    whole = pack(samples) if len(samples) <= cfg.batch_size else None
    curve = []
    for it in range(cfg.max_iters):
        if whole is not None:
            batch = whole
        else:
            idx = np.sort(rng.choice(len(samples), size=cfg.batch_size, replace=False))
            batch = pack([samples[i] for i in idx])
        loss, gW, gb = gradients(model, batch, cfg.use_clock_residual)
        lr = learning_rate(it, cfg)
        opt.step(model, gW + gb, lr)
        curve.append((it, loss, lr))
    return model, curve


def correct_pseudoranges(epoch, model, features):
    """Subtract predicted bias from each pseudorange; other fields unchanged."""
    if features.time_ms != epoch.time_ms or list(features.svids) != epoch.svids:
        raise ValueError(f"features for epoch {features.time_ms} do not match epoch {epoch.time_ms}")
    if not epoch.obs:
        return epoch
    mu = predict_rows(model, features.values)
    return epoch.with_pseudoranges(epoch.pseudoranges - mu)


def _num(x):
    return format(float(x), ".17g")


def _matrix(a):
    return "[" + ", ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in a) + "]"


def save_model(model, path):
    """JSON with schema tag, dims and row-major weights at 17 significant digits."""
    head = {"schema": SCHEMA, "input_dim": model.input_dim, "hidden_width": model.hidden_width,
            "hidden_layers": model.hidden_layers, "activation": "relu", "output": "linear",
            "feature_groups": list(model.feature_groups)}
    parts = [json.dumps(head, sort_keys=True)[:-1], ', "layers": [']
    layers = []
    for W, b in zip(model.weights, model.biases):
        layers.append('{"weight": ' + _matrix(W) + ', "bias": [' + ", ".join(_num(v) for v in b) + "]}")
    parts.append(",\n".join(layers))
    parts.append("]}\n")
    with open(path, "w") as f:
        f.write("".join(parts))


def load_model(path):
    try:
        with open(path) as f:
            d = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(d, dict) or d.get("schema") != SCHEMA:
        raise ModelFormatError(f"{path}: schema {d.get('schema') if isinstance(d, dict) else None!r}, "
                               f"expected {SCHEMA!r}")
    if d.get("input_dim") != N_FEATURES:
        raise ModelFormatError(f"{path}: input_dim {d.get('input_dim')} but features have {N_FEATURES}")
    H, L = d.get("hidden_width"), d.get("hidden_layers")
    layers = d.get("layers", [])
    dims = [N_FEATURES] + [H] * L + [1] if isinstance(H, int) and isinstance(L, int) else []
    if len(layers) != len(dims) - 1 or not layers:
        raise ModelFormatError(f"{path}: {len(layers)} layers inconsistent with hidden_layers={L}")
    weights, biases = [], []
    for i, (layer, fi, fo) in enumerate(zip(layers, dims[:-1], dims[1:])):
        W = np.array(layer["weight"], dtype=float)
        b = np.array(layer["bias"], dtype=float)
        if W.shape != (fi, fo) or b.shape != (fo,):
            raise ModelFormatError(f"{path}: layer {i} has shape {W.shape}/{b.shape}, expected ({fi}, {fo})")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ModelFormatError(f"{path}: layer {i} has non-finite values")
        weights.append(W)
        biases.append(b)
    groups = tuple(d.get("feature_groups", ALL_GROUPS))
    if set(groups) - set(ALL_GROUPS):
        raise ModelFormatError(f"{path}: unknown feature groups {groups}")
    return PrnetModel(weights, biases, groups)
