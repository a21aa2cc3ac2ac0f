"""Linear soft-margin SVM trained by mini-batch stochastic subgradient descent.

Minimizes ``0.5 * ||w||^2 + C * sum_i max(0, 1 - y_i (w . z_i + b))`` on
standardized inputs ``z``. The bias is carried as an extra constant input, so
it is regularized along with ``w``; with ``C * N`` in the hundreds the effect
on the bias is negligible. Step sizes follow the Pegasos schedule and the
returned model is the running average of all iterates.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

BATCH = 16


def standardize_stats(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def objective(w_aug: np.ndarray, Z_aug: np.ndarray, y: np.ndarray, c: float) -> float:
    margins = y * (Z_aug @ w_aug)
    return float(0.5 * w_aug @ w_aug + c * np.maximum(0.0, 1.0 - margins).sum())


def fit(X: np.ndarray, y: np.ndarray, c: float, epochs: int, gen: np.random.Generator,
        trace: Optional[list] = None) -> dict:
    n, d = X.shape
    mean, scale = standardize_stats(X)
    Z = np.hstack([(X - mean) / scale, np.ones((n, 1))])
    yf = y.astype(float)
    lam = 1.0 / (c * n)
    w = np.zeros(d + 1)
    w_avg = np.zeros(d + 1)
    t = 0
    for _ in range(epochs):
        order = gen.permutation(n)
        Zp, yp = Z[order], yf[order]
        for start in range(0, n, BATCH):
            zb, yb = Zp[start:start + BATCH], yp[start:start + BATCH]
            t += 1
            eta = 1.0 / (lam * t)
            slack = (yb * (zb @ w) < 1.0) * yb
            w *= 1.0 - eta * lam
            w += (eta / len(yb)) * (slack @ zb)
            w_avg += (w - w_avg) / t
        if trace is not None:
            trace.append(objective(w_avg, Z, yf, c))
    coef = w_avg[:d] / scale
    return {"w": coef, "b": float(w_avg[d] - coef @ mean)}


def scores(params: dict, X: np.ndarray) -> np.ndarray:
    return X @ params["w"] + params["b"]
