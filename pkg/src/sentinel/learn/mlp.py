"""One-hidden-layer perceptron: sigmoid hidden units, logistic output, cross-entropy.

The output layer starts at zero, which makes training on negated labels
follow exactly the mirrored trajectory (output weights flip sign, hidden
layer identical).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

BATCH = 32


def init(d: int, hidden: int, gen: np.random.Generator) -> dict:
    return {
        "W1": gen.normal(0.0, 1.0 / np.sqrt(d), size=(hidden, d)),
        "b1": np.zeros(hidden),
        "w2": np.zeros(hidden),
        "b2": np.zeros(1),
    }


def forward(params: dict, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = expit(X @ params["W1"].T + params["b1"])
    return h, h @ params["w2"] + params["b2"][0]


def loss(params: dict, X: np.ndarray, t: np.ndarray) -> float:
    """Mean cross-entropy; ``t`` holds 0/1 targets."""
    _, z = forward(params, X)
    return float(np.mean(np.logaddexp(0.0, z) - t * z))


def loss_and_grad(params: dict, X: np.ndarray, t: np.ndarray) -> tuple[float, dict]:
    h, z = forward(params, X)
    n = len(X)
    dz = (expit(z) - t) / n
    dh = np.outer(dz, params["w2"]) * h * (1.0 - h)
    grads = {
        "W1": dh.T @ X,
        "b1": dh.sum(axis=0),
        "w2": h.T @ dz,
        "b2": np.array([dz.sum()]),
    }
    return float(np.mean(np.logaddexp(0.0, z) - t * z)), grads


def fit(X: np.ndarray, y: np.ndarray, hidden: int, lr: float, epochs: int,
        gen: np.random.Generator) -> dict:
    n, d = X.shape
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    t = (y == 1).astype(float)
    params = init(d, hidden, gen)
    W1, b1, w2, b2 = params["W1"], params["b1"], params["w2"], params["b2"]
    for _ in range(epochs):
        order = gen.permutation(n)
        Zp, tp = Z[order], t[order]
        for start in range(0, n, BATCH):
            zb, tb = Zp[start:start + BATCH], tp[start:start + BATCH]
            # same update as loss_and_grad, inlined; lr applies to the summed gradient
            h = expit(zb @ W1.T + b1)
            dz = expit(h @ w2 + b2[0]) - tb
            dh = np.outer(dz, w2) * h * (1.0 - h)
            w2 -= lr * (h.T @ dz)
            b2 -= lr * dz.sum()
            W1 -= lr * (dh.T @ zb)
            b1 -= lr * dh.sum(axis=0)
    # fold the input standardization into the first layer
    W1 = params["W1"] / scale
    return {"W1": W1, "b1": params["b1"] - W1 @ mean, "w2": params["w2"], "b2": params["b2"]}


def scores(params: dict, X: np.ndarray) -> np.ndarray:
    """Output logit (log-odds of legitimate)."""
    return forward(params, X)[1]
