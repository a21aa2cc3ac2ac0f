"""Confusion matrices, derived rates and Gaussian overlap."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .core import LEGIT, MALICIOUS, GaussianSpec


@dataclass(frozen=True)
class ConfusionMatrix:
    """Positive class is legitimate (+1)."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    def as_array(self) -> np.ndarray:
        """Rows are actual class, columns predicted class, ordered (+1, -1)."""
        return np.array([[self.tp, self.fn], [self.fp, self.tn]])

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def _values(labels) -> np.ndarray:
    return np.asarray([getattr(v, "value", v) for v in labels], dtype=int)


def confusion(predicted, truth) -> ConfusionMatrix:
    p, t = _values(predicted), _values(truth)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    pos_t, pos_p = t == LEGIT, p == LEGIT
    return ConfusionMatrix(
        tp=int(np.sum(pos_t & pos_p)),
        fp=int(np.sum(~pos_t & pos_p)),
        tn=int(np.sum(~pos_t & ~pos_p)),
        fn=int(np.sum(pos_t & ~pos_p)),
    )


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def rates(cm: ConfusionMatrix) -> dict[str, Optional[float]]:
    """accuracy, tpr (recall), fpr and precision; None where a denominator is zero."""
    return {
        "accuracy": _ratio(cm.tp + cm.tn, cm.total),
        "tpr": _ratio(cm.tp, cm.tp + cm.fn),
        "recall": _ratio(cm.tp, cm.tp + cm.fn),
        "fpr": _ratio(cm.fp, cm.fp + cm.tn),
        "precision": _ratio(cm.tp, cm.tp + cm.fp),
    }


def _pdf_crossings(a: GaussianSpec, b: GaussianSpec) -> np.ndarray:
    # log pdf_a(x) = log pdf_b(x) is a quadratic A x^2 + B x + C = 0
    A = 1 / (2 * b.sigma**2) - 1 / (2 * a.sigma**2)
    B = a.mu / a.sigma**2 - b.mu / b.sigma**2
    C = (b.mu**2 / (2 * b.sigma**2) - a.mu**2 / (2 * a.sigma**2)
         + math.log(b.sigma / a.sigma))
    if abs(A) < 1e-15:
        if B == 0:
            return np.array([])
        return np.array([-C / B])
    disc = B * B - 4 * A * C
    if disc < 0:
        return np.array([])
    r = math.sqrt(disc)
    return np.sort([(-B - r) / (2 * A), (-B + r) / (2 * A)])


def gaussian_overlap(a: GaussianSpec, b: GaussianSpec) -> float:
    """Overlapping coefficient: integral of min(pdf_a, pdf_b) over the real line."""
    if a.sigma <= 0 or b.sigma <= 0:
        raise ValueError("overlap needs both sigmas > 0")
    if a.mu == b.mu and a.sigma == b.sigma:
        return 1.0
    if a.sigma == b.sigma:
        return float(2 * norm.cdf(-abs(a.mu - b.mu) / (2 * a.sigma)))
    edges = np.concatenate([[-np.inf], _pdf_crossings(a, b), [np.inf]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = (lo + hi) / 2 if np.isfinite(lo) and np.isfinite(hi) else (
            hi - 1.0 if np.isfinite(hi) else lo + 1.0 if np.isfinite(lo) else a.mu)
        # log densities: far from both means the plain pdfs underflow to a tie
        lower = a if norm.logpdf(probe, a.mu, a.sigma) <= norm.logpdf(probe, b.mu, b.sigma) else b
        total += norm.cdf(hi, lower.mu, lower.sigma) - norm.cdf(lo, lower.mu, lower.sigma)
    return float(min(max(total, 0.0), 1.0))


def relative_mean_difference(legit: GaussianSpec, adv: GaussianSpec) -> float:
    """|mu_adv - mu_legit| / |mu_legit|, the '% mean difference' reading."""
    return abs(adv.mu - legit.mu) / abs(legit.mu)
