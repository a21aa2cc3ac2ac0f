"""Gaussian naive Bayes with independent per-feature likelihoods."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

SIGMA_FLOOR = 1e-6
CLASSES = (-1, 1)


def fit(X: np.ndarray, y: np.ndarray) -> dict:
    prior, mu, sigma = [], [], []
    for c in CLASSES:
        Xc = X[y == c]
        prior.append(len(Xc) / len(X))
        mu.append(Xc.mean(axis=0))
        sigma.append(np.maximum(Xc.std(axis=0), SIGMA_FLOOR))
    return {"prior": np.array(prior), "mu": np.array(mu), "sigma": np.array(sigma)}


def joint_log_likelihood(params: dict, X: np.ndarray) -> np.ndarray:
    """(N, 2) array of log p(x, c) for c = -1, +1."""
    mu, sigma = params["mu"], params["sigma"]
    out = np.empty((len(X), 2))
    for j in range(2):
        z = (X - mu[j]) / sigma[j]
        out[:, j] = (np.log(params["prior"][j])
                     - 0.5 * np.sum(z * z, axis=1)
                     - np.sum(np.log(sigma[j]))
                     - 0.5 * X.shape[1] * np.log(2 * np.pi))
    return out


def posterior(params: dict, X: np.ndarray) -> np.ndarray:
    jll = joint_log_likelihood(params, X)
    return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))


def scores(params: dict, X: np.ndarray) -> np.ndarray:
    """Posterior log-odds of the legitimate class."""
    jll = joint_log_likelihood(params, X)
    return jll[:, 1] - jll[:, 0]
