"""Steering policy network and trainer.

Architecture is fixed: 6 inputs (4 corner irradiances, dx, dy to goal), two
hidden layers of 64 rectified units, and a tanh output scaled to +-90 degrees.
Inputs are standardized per feature with statistics from the training split;
the statistics ship with the weights.

Model file layout (little-endian):
    magic   4s   b"FCP1"
    u32     layer count L
    per layer: u32 rows, u32 cols, rows*cols f64 weights (row-major),
               cols f64 biases
    6*f64   feature means
    6*f64   feature stds
    6*f64   feature lower clip bounds (training minima)
    6*f64   feature upper clip bounds (training maxima)

Training uses adaptive-moment gradient descent (lr 1e-3, batch 64, 200
epochs) on mean squared error against steering/90, with an 80/20 split by
whole demonstrations. Fully deterministic for a given seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

HIDDEN = 64
N_FEATURES = 6
LEARNING_RATE = 1e-3
BATCH_SIZE = 64
EPOCHS = 200
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
WEIGHT_DECAY = 1e-3  # L2 on weights (not biases)

MAGIC = b"FCP1"


class TrainingError(RuntimeError):
    pass


@dataclass
class PolicyNet:
    weights: list  # [(W1, b1), (W2, b2), (W3, b3)]
    mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    std: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    # training-range guard: inputs outside the demonstrated range are clipped
    # before standardization, so closed-loop excursions cannot drive the net
    # into arbitrary extrapolation
    low: np.ndarray = field(default_factory=lambda: np.full(N_FEATURES, -np.inf))
    high: np.ndarray = field(default_factory=lambda: np.full(N_FEATURES, np.inf))

    @classmethod
    def init(cls, seed=0) -> "PolicyNet":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 101])))
        dims = [(N_FEATURES, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, 1)]
        weights = []
        for n_in, n_out in dims:
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
            weights.append((w, np.zeros(n_out)))
        return cls(weights=weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Normalized tanh output in (-1, 1); x is (n, 6) raw features."""
        x = np.clip(np.atleast_2d(x), self.low, self.high)
        h = (x - self.mean) / self.std
        (w1, b1), (w2, b2), (w3, b3) = self.weights
        h1 = np.maximum(h @ w1 + b1, 0.0)
        h2 = np.maximum(h1 @ w2 + b2, 0.0)
        y = np.tanh(h2 @ w3 + b3)
        # keep the documented open interval even where tanh saturates in float
        return np.clip(y, -1.0 + 1e-12, 1.0 - 1e-12)


def infer(net: PolicyNet, q, dx, dy) -> float:
    """Steering angle in degrees for one observation; pure and bounded."""
    x = np.array([*q, dx, dy], dtype=float)
    return float(90.0 * net.forward(x)[0, 0])


def save_policy(net: PolicyNet, path):
    out = [MAGIC, struct.pack("<I", len(net.weights))]
    for w, b in net.weights:
        out.append(struct.pack("<II", w.shape[0], w.shape[1]))
        out.append(w.astype("<f8").tobytes())
        out.append(b.astype("<f8").tobytes())
    out.append(net.mean.astype("<f8").tobytes())
    out.append(net.std.astype("<f8").tobytes())
    out.append(np.asarray(net.low, dtype="<f8").tobytes())
    out.append(np.asarray(net.high, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


def load_policy(path) -> PolicyNet:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != MAGIC:
        raise ValueError("not a policy file")
    (n_layers,) = struct.unpack_from("<I", buf, 4)
    off = 8
    weights = []
    for _ in range(n_layers):
        rows, cols = struct.unpack_from("<II", buf, off)
        off += 8
        w = np.frombuffer(buf, dtype="<f8", count=rows * cols, offset=off).reshape(rows, cols)
        off += rows * cols * 8
        b = np.frombuffer(buf, dtype="<f8", count=cols, offset=off)
        off += cols * 8
        weights.append((w.copy(), b.copy()))
    mean = np.frombuffer(buf, dtype="<f8", count=N_FEATURES, offset=off).copy()
    off += N_FEATURES * 8
    std = np.frombuffer(buf, dtype="<f8", count=N_FEATURES, offset=off).copy()
    off += N_FEATURES * 8
    low = np.frombuffer(buf, dtype="<f8", count=N_FEATURES, offset=off).copy()
    off += N_FEATURES * 8
    high = np.frombuffer(buf, dtype="<f8", count=N_FEATURES, offset=off).copy()
    return PolicyNet(weights=weights, mean=mean, std=std, low=low, high=high)


def _forward_cached(net, x):
    (w1, b1), (w2, b2), (w3, b3) = net.weights
    h1 = np.maximum(x @ w1 + b1, 0.0)
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    y = np.tanh(h2 @ w3 + b3)
    return h1, h2, y


def _gradients(net, x, h1, h2, y, target):
    (w1, b1), (w2, b2), (w3, b3) = net.weights
    n = len(x)
    dz3 = (2.0 / n) * (y - target) * (1.0 - y * y)
    gw3 = h2.T @ dz3
    gb3 = dz3.sum(axis=0)
    dh2 = dz3 @ w3.T
    dz2 = dh2 * (h2 > 0)
    gw2 = h1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ w2.T
    dz1 = dh1 * (h1 > 0)
    gw1 = x.T @ dz1
    gb1 = dz1.sum(axis=0)
    return [(gw1, gb1), (gw2, gb2), (gw3, gb3)]


def train(demos, val_fraction=0.2, seed=0, epochs=EPOCHS, batch_size=BATCH_SIZE,
          lr=LEARNING_RATE):
    """Fit the policy on a list of Demos; returns (net, metrics).

    The validation split is by whole demonstrations so no trajectory leaks
    between splits. Metrics include per-epoch loss curves, the final
    validation MSE, and R^2 against the predict-the-mean baseline.
    """
    sides = {d.side for d in demos}
    for side in ("left", "right"):
        if sum(1 for d in demos if d.side == side) < 2:
            raise TrainingError(f"need at least 2 demos per fire side, lacking {side!r}")
    del sides
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 202])))
    order = rng.permutation(len(demos))
    n_val = max(1, int(round(val_fraction * len(demos))))
    val_idx = set(order[:n_val].tolist())
    train_demos = [d for i, d in enumerate(demos) if i not in val_idx]
    val_demos = [d for i, d in enumerate(demos) if i in val_idx]

    x_train = np.concatenate([d.feature_matrix() for d in train_demos])
    y_train = np.concatenate([d.labels() for d in train_demos])[:, None] / 90.0
    x_val = np.concatenate([d.feature_matrix() for d in val_demos])
    y_val = np.concatenate([d.labels() for d in val_demos])[:, None] / 90.0

    net = PolicyNet.init(seed=seed)
    net.mean = x_train.mean(axis=0)
    net.std = np.maximum(x_train.std(axis=0), 1e-6)
    net.low = x_train.min(axis=0)
    net.high = x_train.max(axis=0)
    xn_train = (x_train - net.mean) / net.std
    xn_val = (x_val - net.mean) / net.std

    m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.weights]
    v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.weights]
    t = 0
    curves = {"train": [], "val": []}
    n = len(xn_train)
    for epoch in range(epochs):
        # cosine decay keeps late epochs from wandering at the Adam step floor
        lr_t = lr * (0.01 + 0.99 * 0.5 * (1.0 + np.cos(np.pi * epoch / max(epochs - 1, 1))))
        perm = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = perm[lo:lo + batch_size]
            xb, yb = xn_train[idx], y_train[idx]
            h1, h2, yhat = _forward_cached(net, xb)
            grads = _gradients(net, xb, h1, h2, yhat, yb)
            grads = [(gw + WEIGHT_DECAY * w, gb)
                     for (gw, gb), (w, _) in zip(grads, net.weights)]
            t += 1
            new_weights = []
            for li, ((w, b), (gw, gb)) in enumerate(zip(net.weights, grads)):
                mw, mb = m[li]
                vw, vb = v[li]
                mw = ADAM_BETA1 * mw + (1 - ADAM_BETA1) * gw
                mb = ADAM_BETA1 * mb + (1 - ADAM_BETA1) * gb
                vw = ADAM_BETA2 * vw + (1 - ADAM_BETA2) * gw * gw
                vb = ADAM_BETA2 * vb + (1 - ADAM_BETA2) * gb * gb
                m[li] = (mw, mb)
                v[li] = (vw, vb)
                c1 = 1 - ADAM_BETA1**t
                c2 = 1 - ADAM_BETA2**t
                w = w - lr_t * (mw / c1) / (np.sqrt(vw / c2) + ADAM_EPS)
                b = b - lr_t * (mb / c1) / (np.sqrt(vb / c2) + ADAM_EPS)
                new_weights.append((w, b))
            net.weights = new_weights
        tr = float(np.mean((_forward_cached(net, xn_train)[2] - y_train) ** 2))
        va = float(np.mean((_forward_cached(net, xn_val)[2] - y_val) ** 2))
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise TrainingError("training diverged (non-finite loss)")
        curves["train"].append(tr)
        curves["val"].append(va)

    val_mse = curves["val"][-1]
    baseline = float(np.mean((y_val - y_train.mean()) ** 2))
    metrics = {
        "train_curve": curves["train"],
        "val_curve": curves["val"],
        "val_mse": val_mse,
        "baseline_mse": baseline,
        "r2": 1.0 - val_mse / baseline if baseline > 0 else 0.0,
        "n_train": int(n),
        "n_val": int(len(xn_val)),
    }
    return net, metrics
