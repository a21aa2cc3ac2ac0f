import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from sentinel.core import GaussianSpec, Label
from sentinel.metrics import (
    ConfusionMatrix,
    confusion,
    gaussian_overlap,
    rates,
    relative_mean_difference,
)


def numeric_overlap(a, b):
    f = lambda x: min(norm.pdf(x, a.mu, a.sigma), norm.pdf(x, b.mu, b.sigma))
    lo = min(a.mu - 12 * a.sigma, b.mu - 12 * b.sigma)
    hi = max(a.mu + 12 * a.sigma, b.mu + 12 * b.sigma)
    pts = sorted({a.mu, b.mu, (a.mu + b.mu) / 2})
    return quad(f, lo, hi, points=pts, limit=500, epsabs=1e-12, epsrel=1e-12)[0]


def test_confusion_cells():
    truth = [1] * 20 + [-1] * 13
    pred = [1] * 17 + [-1] * 3 + [-1] * 13
    cm = confusion(pred, truth)
    assert (cm.tp, cm.fn, cm.fp, cm.tn) == (17, 3, 0, 13)
    assert cm.total == 33


def test_confusion_identity_and_constant():
    truth = [1] * 10 + [-1] * 10
    cm = confusion(truth, truth)
    assert cm.fn == 0 and cm.fp == 0
    cm = confusion([1] * 20, truth)
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (10, 10, 0, 0)


def test_confusion_accepts_label_objects():
    cm = confusion([Label(1), Label(-1)], [Label(1), Label(1)])
    assert (cm.tp, cm.fn) == (1, 1)


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        confusion([1, 1], [1])


def test_rates_figure_style_matrix():
    r = rates(ConfusionMatrix(tp=17, fp=0, tn=13, fn=3))
    assert r["accuracy"] == pytest.approx(30 / 33)
    assert r["tpr"] == pytest.approx(0.85)
    assert r["fpr"] == 0.0
    assert r["precision"] == 1.0


def test_rates_absent_values():
    r = rates(ConfusionMatrix(tn=10))
    assert r["accuracy"] == 1.0
    assert r["tpr"] is None and r["precision"] is None
    assert r["fpr"] == 0.0


def test_rates_symmetric():
    assert set(rates(ConfusionMatrix(5, 5, 5, 5)).values()) == {0.5}


def test_matrix_arithmetic_and_validation():
    cm = ConfusionMatrix(1, 2, 3, 4) + ConfusionMatrix(1, 1, 1, 1)
    assert cm.to_dict() == {"tp": 2, "fp": 3, "tn": 4, "fn": 5}
    assert cm.as_array().tolist() == [[2, 5], [3, 4]]
    with pytest.raises(ValueError):
        ConfusionMatrix(-1, 0, 0, 0)


def test_overlap_examples():
    a = GaussianSpec(16, 2)
    assert gaussian_overlap(a, a) == 1.0
    assert gaussian_overlap(a, GaussianSpec(1016, 2)) < 1e-12
    assert gaussian_overlap(a, GaussianSpec(22, 2)) == pytest.approx(2 * norm.cdf(-1.5), abs=1e-12)
    assert gaussian_overlap(a, GaussianSpec(22, 2)) == pytest.approx(0.1336, abs=1e-4)


@pytest.mark.parametrize("delta", [0.0, 0.3, 1.0, 2.5, 6.0])
def test_overlap_numeric_vs_closed_form(delta):
    a, b = GaussianSpec(16, 2), GaussianSpec(16 + delta, 2)
    assert abs(numeric_overlap(a, b) - gaussian_overlap(a, b)) <= 1e-6


@pytest.mark.parametrize("a, b", [
    (GaussianSpec(21, 1.3), GaussianSpec(22, 2)),
    (GaussianSpec(16, 2), GaussianSpec(16, 1)),
    (GaussianSpec(0, 1), GaussianSpec(3, 0.2)),
    (GaussianSpec(-5, 4), GaussianSpec(2, 1)),
])
def test_overlap_unequal_sigma_vs_quadrature(a, b):
    assert abs(numeric_overlap(a, b) - gaussian_overlap(a, b)) <= 1e-6


def test_overlap_symmetry_and_invariance():
    a, b = GaussianSpec(21, 1.3), GaussianSpec(22, 2)
    assert gaussian_overlap(a, b) == pytest.approx(gaussian_overlap(b, a), abs=1e-12)
    shifted = gaussian_overlap(GaussianSpec(121, 1.3), GaussianSpec(122, 2))
    scaled = gaussian_overlap(GaussianSpec(42, 2.6), GaussianSpec(44, 4))
    assert shifted == pytest.approx(gaussian_overlap(a, b), abs=1e-9)
    assert scaled == pytest.approx(gaussian_overlap(a, b), abs=1e-9)


def test_overlap_zero_sigma_rejected():
    with pytest.raises(ValueError):
        gaussian_overlap(GaussianSpec(0, 0), GaussianSpec(0, 1))


def test_relative_mean_difference():
    assert relative_mean_difference(GaussianSpec(16, 2), GaussianSpec(19.2, 2)) == pytest.approx(0.2)
