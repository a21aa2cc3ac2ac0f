"""DBSCAN over feature vectors and conversion of clusters into bootstrap labels."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import LEGIT, MALICIOUS

NOISE = -1


class UnlabelableBatch(ValueError):
    """DBSCAN found no cluster at all, so no report can be called legitimate."""


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int = 4

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class ClusterModel:
    assignment: np.ndarray  # cluster id per point, NOISE for noise
    core: np.ndarray  # boolean core-point mask
    params: DbscanParams
    label_map: dict = field(default_factory=dict)
    legit_cluster: Optional[int] = None
    legit_centroid: Optional[np.ndarray] = None

    @property
    def n_clusters(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    @property
    def noise(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == NOISE)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment[self.assignment >= 0], minlength=self.n_clusters)


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def dbscan(points, params: DbscanParams) -> ClusterModel:
    """Density clustering: a point is core when at least ``min_pts`` points
    (itself included) lie within ``eps``. Border points join the first cluster
    that reaches them, scanning seeds in index order.
    """
    X = _as_points(points)
    if len(X) == 0:
        raise ValueError("dbscan needs at least one point")
    neighbors = cKDTree(X).query_ball_point(X, r=params.eps)
    core = np.fromiter((len(nb) >= params.min_pts for nb in neighbors), bool, len(X))

    assignment = np.full(len(X), NOISE, dtype=int)
    cluster = 0
    for seed in np.flatnonzero(core):
        if assignment[seed] != NOISE:
            continue
        assignment[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if assignment[q] == NOISE:
                    assignment[q] = cluster
                    if core[q]:
                        queue.append(q)
        cluster += 1
    return ClusterModel(assignment, core, params)


def k_distances(points, k: int) -> np.ndarray:
    """Sorted distance of each point to its k-th nearest other point."""
    X = _as_points(points)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(X) <= k:
        raise ValueError(f"need more than k={k} points, got {len(X)}")
    dist, _ = cKDTree(X).query(X, k=k + 1)
    return np.sort(dist[:, k])


def estimate_eps(points, k: int = 4, method: str = "chord") -> float:
    """Knee of the sorted k-distance curve.

    ``method="chord"`` takes the point farthest below the chord joining the
    curve's end points (both axes scaled to [0, 1]), i.e. the bend of maximum
    curvature. ``method="second-difference"`` takes the largest raw second
    difference, which on quantized distances tends to lock onto the first
    step near zero. Either falls back to the 90th percentile of the curve when
    the curve has no convex bend (a regular grid, identical points).
    """
    d = k_distances(points, k)
    eps = None
    span = d[-1] - d[0]
    if method == "chord":
        if span > 1e-12 * max(d[-1], 1.0):
            x = np.linspace(0.0, 1.0, len(d))
            gap = x - (d - d[0]) / span
            i = int(np.argmax(gap))
            if gap[i] > 1e-9:
                eps = float(d[i])
    elif method == "second-difference":
        if len(d) >= 3:
            d2 = d[2:] - 2 * d[1:-1] + d[:-2]
            i = int(np.argmax(d2))
            if d2[i] > 1e-12 * max(d[-1], 1.0):
                eps = float(d[i + 1])
    else:
        raise ValueError(f"unknown knee method {method!r}")
    if eps is None or eps <= 0:
        eps = float(np.percentile(d, 90))
    return max(eps, 1e-9)


def eps_for(points, min_pts: int, rule: str | float = "chord") -> float:
    """eps from a knee rule name, or from a k-distance quantile when ``rule`` is a float."""
    if isinstance(rule, str):
        return estimate_eps(points, k=min_pts, method=rule)
    if not 0 < rule <= 1:
        raise ValueError("eps quantile must lie in (0, 1]")
    return max(float(np.quantile(k_distances(points, min_pts), rule)), 1e-9)


def assign_labels(
    model: ClusterModel,
    points,
    prior: Optional[float] = None,
    raw_means: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, ClusterModel]:
    """Map exactly one cluster to legitimate (+1); everything else is -1.

    Without a prior the largest cluster wins. With a prior the cluster whose
    mean raw value is closest to it wins. ``raw_means`` defaults to the last
    feature column.

    Returns the per-point labels and the model with its label map filled in.
    """
    X = _as_points(points)
    n_clusters = model.n_clusters
    if n_clusters == 0:
        raise UnlabelableBatch("every point is noise; no legitimate cluster")
    means = X[:, -1] if raw_means is None else np.asarray(raw_means, dtype=float)
    if prior is None:
        legit = int(np.argmax(model.sizes()))
    else:
        centre = np.array([means[model.assignment == c].mean() for c in range(n_clusters)])
        legit = int(np.argmin(np.abs(centre - prior)))
    labels = np.where(model.assignment == legit, LEGIT, MALICIOUS)
    label_map = {c: (LEGIT if c == legit else MALICIOUS) for c in range(n_clusters)}
    label_map[NOISE] = MALICIOUS
    labelled = replace(model, label_map=label_map, legit_cluster=legit,
                       legit_centroid=X[model.assignment == legit].mean(axis=0))
    return labels, labelled


def cluster_labels(points, min_pts: int = 4, eps: Optional[float] = None,
                   prior: Optional[float] = None, raw_means=None, eps_rule: str | float = "chord"):
    """dbscan + assign_labels; eps comes from ``eps_rule`` unless given."""
    if eps is None:
        eps = eps_for(points, min_pts, eps_rule)
    model = dbscan(points, DbscanParams(eps, min_pts))
    return assign_labels(model, points, prior=prior, raw_means=raw_means)


def clustering_precision(derived, truth) -> float:
    derived = np.asarray([getattr(v, "value", v) for v in derived])
    truth = np.asarray([getattr(v, "value", v) for v in truth])
    if derived.shape != truth.shape:
        raise ValueError(f"length mismatch: {derived.shape[0]} vs {truth.shape[0]}")
    if derived.size == 0:
        raise ValueError("no labels to compare")
    return float(np.mean(derived == truth))
