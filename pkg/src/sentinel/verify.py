"""Streaming verification: bootstrap by clustering, classify each incoming
report, and re-cluster when accepted reports drift away from the perception
the classifiers were trained under.
"""

from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .cluster import ClusterModel, DbscanParams, UnlabelableBatch, assign_labels, dbscan, eps_for
from .core import LEGIT, MALICIOUS, Label, Provenance, Report, RngHandle
from .ingest import FeatureSpace
from .learn import HyperParams, TrainedClassifier, Variant, train

log = logging.getLogger(__name__)


class SingleClassLabels(ValueError):
    """Clustering labelled every report the same way, so nothing can be trained."""


@dataclass
class PipelineConfig:
    feature_space: FeatureSpace
    sigma_legit: float
    variants: tuple = (Variant.SVM,)
    active_variant: Variant = Variant.SVM
    hp: HyperParams = HyperParams()
    min_pts: int = 4
    eps_rule: str | float = "chord"
    theta: float = 1.5
    window_size: int = 50
    buffer_factor: int = 4
    alpha: float = 0.05

    def __post_init__(self):
        self.variants = tuple(Variant(v) for v in self.variants)
        self.active_variant = Variant(self.active_variant)
        if self.active_variant not in self.variants:
            raise ValueError("active variant must be one of the trained variants")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.window_size < 1 or self.buffer_factor < 1:
            raise ValueError("window_size and buffer_factor must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


@dataclass
class DriftMonitorState:
    perception: float
    trained_perception: float
    theta: float
    window_size: int
    sigma_legit: float
    alpha: float
    window: deque = field(default_factory=deque)
    ticks_since_train: int = 0

    def __post_init__(self):
        self.window = deque(self.window, maxlen=self.window_size)

    def accept(self, raw_mean: float) -> None:
        self.window.append(raw_mean)
        self.perception = (1 - self.alpha) * self.perception + self.alpha * raw_mean


@dataclass
class PipelineState:
    config: PipelineConfig
    cluster_model: ClusterModel
    classifiers: dict
    monitor: DriftMonitorState
    buffer: deque
    retrains: int = 0
    failed_reclusters: int = 0

    @property
    def active(self) -> TrainedClassifier:
        return self.classifiers[self.config.active_variant]


def bootstrap(reports: Sequence[Report], config: PipelineConfig, rng: RngHandle,
              prior: Optional[float] = None) -> PipelineState:
    """Cluster a batch, label it, train every configured variant on the labels."""
    if len(reports) < 2 * config.min_pts:
        raise ValueError(
            f"bootstrap needs at least {2 * config.min_pts} reports, got {len(reports)}"
        )
    values = np.array([r.values for r in reports], dtype=float)
    X = config.feature_space.transform(values)
    raw = values.mean(axis=1)
    eps = eps_for(X, config.min_pts, config.eps_rule)
    model = dbscan(X, DbscanParams(eps, config.min_pts))
    labels, model = assign_labels(model, X, prior=prior, raw_means=raw)
    if np.all(labels == LEGIT) or np.all(labels == MALICIOUS):
        raise SingleClassLabels("bootstrap labels contain a single class")
    classifiers = {
        v: train(v, X, labels, config.hp, rng.child("train", v.value))
        for v in config.variants
    }
    perception = float(raw[labels == LEGIT].mean())
    monitor = DriftMonitorState(perception, perception, config.theta, config.window_size,
                                config.sigma_legit, config.alpha)
    buffer = deque(reports, maxlen=config.window_size * config.buffer_factor)
    return PipelineState(config, model, classifiers, monitor, buffer)


def ingest_reports(state: PipelineState, reports: Sequence[Report]) -> list[tuple[Label, float]]:
    """Classify reports in order; accepted ones feed the window and perception.

    The classifier is fixed within a call, so scoring is vectorized; state
    updates still happen report by report.
    """
    if not reports:
        return []
    values = np.array([r.values for r in reports], dtype=float)
    X = state.config.feature_space.transform(values)
    scores = state.active.scores(X)
    out = []
    for report, raw, score in zip(reports, values.mean(axis=1), scores):
        legit = score >= 0
        if legit:
            state.monitor.accept(float(raw))
        state.monitor.ticks_since_train += 1
        state.buffer.append(report)
        out.append((Label(LEGIT if legit else MALICIOUS, Provenance.PREDICTED), float(score)))
    return out


def ingest_report(state: PipelineState, report: Report) -> tuple[Label, PipelineState]:
    (label, _), = ingest_reports(state, [report])
    return label, state


def drift_statistic(state: PipelineState | DriftMonitorState) -> float:
    """|mean(window) - perception at last training| in units of the legitimate sigma."""
    mon = state.monitor if isinstance(state, PipelineState) else state
    if not mon.window:
        raise ValueError("drift statistic undefined on an empty window")
    return abs(float(np.mean(mon.window)) - mon.trained_perception) / mon.sigma_legit


def check_and_recluster(state: PipelineState, rng: RngHandle,
                        recent_reports: Optional[Sequence[Report]] = None,
                        ) -> tuple[bool, PipelineState]:
    """Re-bootstrap on the retraining buffer when the drift statistic exceeds theta.

    Checks only run once the window is full. The current perception is passed
    as the prior so the re-clustered legitimate cluster is the one nearest to
    what the system currently believes.
    """
    mon = state.monitor
    if len(mon.window) < mon.window_size or math.isinf(mon.theta):
        return False, state
    if drift_statistic(state) <= mon.theta:
        return False, state
    batch = list(state.buffer if recent_reports is None else recent_reports)
    fresh = bootstrap(batch, state.config, rng, prior=mon.perception)
    fresh.retrains = state.retrains + 1
    return True, fresh


@dataclass
class StreamEvent:
    tick: int
    reporter_id: str
    predicted_label: int
    score: float
    perception: float
    drift_stat: Optional[float]
    retrain: bool
    truth: Optional[int] = None

    def to_json(self) -> str:
        rec = {
            "tick": self.tick,
            "reporter_id": self.reporter_id,
            "predicted_label": self.predicted_label,
            "score": self.score,
            "perception": self.perception,
            "drift_stat": self.drift_stat,
            "retrain": self.retrain,
        }
        if self.truth is not None:
            rec["truth"] = self.truth
        return json.dumps(rec)


def run_stream(state: PipelineState, stream: Iterable[tuple[Report, Optional[Label]]],
               rng: RngHandle) -> tuple[PipelineState, list[StreamEvent]]:
    """Feed a stream tick by tick, checking for drift at the end of each tick.

    A re-clustering that cannot produce two classes leaves the state as it is.
    """
    events: list[StreamEvent] = []
    by_tick: dict[int, list] = {}
    for report, label in stream:
        by_tick.setdefault(report.tick, []).append((report, label))
    for tick in sorted(by_tick):
        batch = by_tick[tick]
        results = ingest_reports(state, [r for r, _ in batch])
        stat = drift_statistic(state) if state.monitor.window else None
        for (report, truth), (label, score) in zip(batch, results):
            events.append(StreamEvent(tick, report.reporter_id, label.value, score,
                                      state.monitor.perception, stat, False,
                                      None if truth is None else truth.value))
        try:
            triggered, state = check_and_recluster(state, rng.child("recluster", tick))
        except (UnlabelableBatch, SingleClassLabels) as exc:
            # the buffer did not split into two classes; keep the current
            # classifier and try again after the next tick
            log.info("tick %d: re-clustering skipped (%s)", tick, exc)
            state.failed_reclusters += 1
            triggered = False
        if triggered and events:
            events[-1].retrain = True
    return state, events


def write_event_log(events: Sequence[StreamEvent], path) -> None:
    from .ingest import atomic_write_text

    atomic_write_text(path, "".join(e.to_json() + "\n" for e in events))
