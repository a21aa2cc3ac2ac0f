"""Four classifiers behind one train/predict contract.

Scores are oriented so that 0 is the decision boundary and ties go to
legitimate (+1).
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import LEGIT, MALICIOUS, Label, Provenance, RngHandle
from ..ingest import kfold_indices
from ..metrics import ConfusionMatrix, confusion
from . import forest, mlp, nb, svm

FORMAT_VERSION = 1


class Variant(str, enum.Enum):
    NB = "NB"
    RF = "RF"
    SVM = "SVM"
    MLP = "MLP"


ALL_VARIANTS = (Variant.NB, Variant.RF, Variant.SVM, Variant.MLP)


@dataclass(frozen=True)
class HyperParams:
    rf_trees: int = 50
    rf_max_depth: int = 8
    rf_feature_subsample: Optional[int] = None  # None -> ceil(sqrt(d))
    rf_bootstrap: bool = True
    svm_c: float = 1.0
    svm_epochs: int = 200
    mlp_hidden: int = 16
    mlp_lr: float = 0.01
    mlp_epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        for name in ("rf_trees", "rf_max_depth", "svm_epochs", "mlp_hidden", "mlp_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.svm_c <= 0 or self.mlp_lr <= 0:
            raise ValueError("svm_c and mlp_lr must be positive")
        if self.rf_feature_subsample is not None and self.rf_feature_subsample < 1:
            raise ValueError("rf_feature_subsample must be positive")


@dataclass(frozen=True)
class TrainedClassifier:
    variant: Variant
    feature_dim: int
    params: dict = field(repr=False)

    def scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.feature_dim:
            raise ValueError(f"expected {self.feature_dim} features, got {X.shape[1]}")
        return _SCORERS[self.variant](self.params, X)

    def predict_labels(self, X) -> np.ndarray:
        return np.where(self.scores(X) >= 0, LEGIT, MALICIOUS)


_SCORERS = {
    Variant.NB: nb.scores,
    Variant.RF: forest.scores,
    Variant.SVM: svm.scores,
    Variant.MLP: mlp.scores,
}


def _check_training_data(X: np.ndarray, y: np.ndarray):
    if len(X) == 0:
        raise ValueError("cannot train on empty data")
    if len(X) != len(y):
        raise ValueError("features and labels differ in length")
    present = set(np.unique(y).tolist())
    if not present <= {LEGIT, MALICIOUS}:
        raise ValueError(f"labels must be +1/-1, got {sorted(present)}")
    if len(present) < 2:
        raise ValueError("training data contains a single class")


def train(variant, X, y, hp: HyperParams = HyperParams(), rng: Optional[RngHandle] = None,
          svm_trace: Optional[list] = None) -> TrainedClassifier:
    """Fit one classifier on feature rows ``X`` and +1/-1 labels ``y``.

    ``rng`` defaults to a handle seeded from ``hp.seed``.
    """
    variant = Variant(variant)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray([getattr(v, "value", v) for v in y], dtype=int)
    _check_training_data(X, y)
    gen = (rng or RngHandle(hp.seed, 0)).gen
    if variant is Variant.NB:
        params = nb.fit(X, y)
    elif variant is Variant.RF:
        params = forest.fit(X, y, hp.rf_trees, hp.rf_max_depth, hp.rf_feature_subsample,
                            hp.rf_bootstrap, gen)
    elif variant is Variant.SVM:
        params = svm.fit(X, y, hp.svm_c, hp.svm_epochs, gen, trace=svm_trace)
    else:
        params = mlp.fit(X, y, hp.mlp_hidden, hp.mlp_lr, hp.mlp_epochs, gen)
    return TrainedClassifier(variant, X.shape[1], params)


def predict(clf: TrainedClassifier, x) -> tuple[Label, float]:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != clf.feature_dim:
        raise ValueError(f"expected a {clf.feature_dim}-dimensional feature vector")
    score = float(clf.scores(x[None, :])[0])
    return Label(LEGIT if score >= 0 else MALICIOUS, Provenance.PREDICTED), score


def crossval(variant, X, y, hp: HyperParams = HyperParams(), k: int = 10,
             rng: Optional[RngHandle] = None, train_labels=None) -> ConfusionMatrix:
    """Stratified k-fold: train on k-1 folds, score the held-out fold against ``y``.

    ``train_labels`` (default ``y``) are the labels the classifier learns from,
    e.g. cluster-derived ones; evaluation is always against ``y``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=int)
    fit_y = y if train_labels is None else np.asarray(train_labels, dtype=int)
    rng = rng or RngHandle(hp.seed, 0)
    total = ConfusionMatrix()
    for fold, (tr, ev) in enumerate(kfold_indices(len(X), k, rng, strata=y)):
        clf = train(variant, X[tr], fit_y[tr], hp, rng.child("fold", fold))
        total = total + confusion(clf.predict_labels(X[ev]), y[ev])
    return total


# --- serialization ----------------------------------------------------------


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def to_json(clf: TrainedClassifier) -> str:
    return json.dumps({
        "version": FORMAT_VERSION,
        "variant": clf.variant.value,
        "feature_dim": clf.feature_dim,
        "params": _encode(clf.params),
    })


def from_json(text: str) -> TrainedClassifier:
    doc = json.loads(text)
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported classifier format version {doc.get('version')!r}")
    return TrainedClassifier(Variant(doc["variant"]), int(doc["feature_dim"]),
                             _decode(doc["params"]))
