"""Sweep drivers for the clustering, classification, label-quality and drift studies.

Every driver returns a flat list of :class:`ResultRecord`; ``write_results``
turns that into a plottable CSV plus a JSON summary of mean/std per grid
point. Repetition ``r`` uses seed ``config.seed + r``; within a repetition the
population stream is shared across grid points (common random numbers), which
keeps sweep curves smooth without changing any single point's distribution.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cluster import cluster_labels, clustering_precision
from .core import GaussianSpec, RngHandle, default_task, stream_id
from .ingest import FeatureSpace, atomic_write_text, kfold_indices
from .learn import ALL_VARIANTS, HyperParams, Variant, train
from .metrics import ConfusionMatrix, confusion, gaussian_overlap, rates, relative_mean_difference
from .synth import AdversaryProfile, PopulationConfig, Strategy, generate_stream
from .verify import PipelineConfig, bootstrap, run_stream

EXPERIMENTS = ("fig2a", "fig2b", "fig3", "fig4a", "fig4b", "drift-demo")

TRAFFIC = GaussianSpec(16.0, 2.0)
TEMPERATURE = GaussianSpec(21.0, 1.3)

# Lighter training schedule for sweeps: thousands of fits on one CPU. Accuracy
# on the sweep scenarios matches the library defaults to within seed noise.
SWEEP_HP = HyperParams(rf_trees=20, svm_epochs=50, mlp_lr=0.05, mlp_epochs=60)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    repetitions: int = 10
    legit: GaussianSpec = TRAFFIC
    n_values: int = 10
    n_users: int = 250
    ticks: int = 4
    fractions: tuple = (0.4,)
    adv_mus: tuple = (22.0,)
    adv_sigmas: tuple = (2.0,)
    levels: tuple = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    variants: tuple = ALL_VARIANTS
    hp: HyperParams = SWEEP_HP
    eps_rule: str | float = "chord"
    min_pts: int = 4
    folds: int = 10
    # drift demo
    thetas: tuple = (0.5, 1.0, 1.5, 2.0)
    window: int = 50
    alpha: float = 0.05
    buffer_factor: int = 4
    active_variant: Variant = Variant.SVM
    stream_users: int = 50
    stream_ticks: int = 300
    bootstrap_ticks: int = 10
    drift_rate: float = 0.02
    drift_ticks: int = 200
    attack_fraction: float = 0.4
    attack_delta: Optional[float] = None  # None -> 0.01 sigma per tick
    attack_target: Optional[float] = None  # None -> mu + 3 sigma
    hazard_theta: float = 0.01
    jobs: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; valid ids: {', '.join(EXPERIMENTS)}"
            )
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for name in ("fractions", "adv_mus", "adv_sigmas", "levels", "variants", "thetas"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"grid {name} must be non-empty")
        object.__setattr__(self, "variants", tuple(Variant(v) for v in self.variants))
        object.__setattr__(self, "active_variant", Variant(self.active_variant))
        if any(not 0 <= lv <= 1 for lv in self.levels):
            raise ValueError("label-quality levels must lie in [0, 1]")
        if any(1 - lv > 0.5 for lv in self.levels):
            raise ValueError("label corruption (1 - level) must not exceed 0.5")
        if any(not t > 0 for t in self.thetas):
            raise ValueError("thetas must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    @property
    def delta(self) -> float:
        return 0.01 * self.legit.sigma if self.attack_delta is None else self.attack_delta

    @property
    def target(self) -> float:
        if self.attack_target is None:
            return self.legit.mu + 3 * self.legit.sigma
        return self.attack_target

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["variants"] = [v.value for v in self.variants]
        out["active_variant"] = self.active_variant.value
        return out


_DEFAULTS = {
    "fig2a": dict(fractions=(0.35, 0.40, 0.45),
                  adv_mus=(16.0, 17.0, 18.0, 19.0, 20.0, 21.0, 22.0, 24.0)),
    "fig2b": dict(adv_mus=(14.0, 15.0, 16.0, 17.0, 18.0, 20.0, 22.0),
                  adv_sigmas=(1.0, 2.0, 3.0)),
    "fig3": dict(legit=TEMPERATURE, n_values=30, eps_rule=0.5),
    "fig4a": dict(adv_mus=(17.0, 18.0, 20.0, 22.0, 24.0)),
    "fig4b": dict(legit=TEMPERATURE, n_values=30, eps_rule=0.5),
    "drift-demo": dict(repetitions=3),
}


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    """The calibrated configuration for ``experiment``; keyword overrides win."""
    if experiment not in _DEFAULTS:
        raise ValueError(
            f"unknown experiment {experiment!r}; valid ids: {', '.join(EXPERIMENTS)}"
        )
    fig3_adv = dict(adv_mus=(22.0,), adv_sigmas=(2.0,)) if experiment in ("fig3", "fig4b") else {}
    return ExperimentConfig(experiment=experiment, **{**fig3_adv, **_DEFAULTS[experiment], **overrides})


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    grid: tuple  # ordered (name, value) pairs
    repetition: int
    seed: int
    metric: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"metric {self.metric} is not finite: {self.value}")

    def grid_dict(self) -> dict:
        return dict(self.grid)


# --- shared pieces ----------------------------------------------------------


def _population(config: ExperimentConfig, fraction: float, adv: GaussianSpec, seed: int):
    task = default_task(config.legit, n=config.n_values)
    profile = AdversaryProfile(fraction, Strategy.CASE_1, adv) if fraction > 0 else AdversaryProfile()
    pc = PopulationConfig(config.n_users, config.ticks, task, profile)
    stream = generate_stream(pc, RngHandle(seed, stream_id(config.experiment, "population")))
    values = np.array([r.values for r, _ in stream], dtype=float)
    truth = np.array([lab.value for _, lab in stream], dtype=int)
    return values, truth


def _map_jobs(fn: Callable, jobs: Sequence, n_jobs: int) -> list:
    """Run ``fn`` over ``jobs``; output order always follows job order."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def _grid_jobs(config: ExperimentConfig, points: Sequence[tuple]) -> list:
    return [(config, point, rep) for point in points for rep in range(config.repetitions)]


def _flatten(parts: list[list[ResultRecord]]) -> list[ResultRecord]:
    return [rec for part in parts for rec in part]


# --- clustering sweeps ------------------------------------------------------


def _fig2_job(job) -> list[ResultRecord]:
    config, (fraction, mu, sigma), rep = job
    seed = config.seed + rep
    adv = GaussianSpec(mu, sigma)
    values, truth = _population(config, fraction, adv, seed)
    X = FeatureSpace.for_spec(config.legit).transform(values)
    labels, _ = cluster_labels(X, min_pts=config.min_pts, eps_rule=config.eps_rule)
    grid = (("fraction", fraction), ("adv_mu", mu), ("adv_sigma", sigma))
    metrics = {
        "precision": clustering_precision(labels, truth),
        "overlap": gaussian_overlap(config.legit, adv),
        "mean_diff": relative_mean_difference(config.legit, adv),
    }
    return [ResultRecord(config.experiment, grid, rep, seed, m, float(v))
            for m, v in metrics.items()]


def run_fig2(config: ExperimentConfig) -> list[ResultRecord]:
    """Clustering precision over (fraction, adversarial mu, adversarial sigma)."""
    points = [(f, m, s) for f in config.fractions for m in config.adv_mus for s in config.adv_sigmas]
    return _flatten(_map_jobs(_fig2_job, _grid_jobs(config, points), config.jobs))


# --- cluster-then-classify --------------------------------------------------


def _cm_records(config, grid, rep, seed, variant: Variant, cm: ConfusionMatrix):
    out = []
    g = grid + (("variant", variant.value),)
    for name, value in cm.to_dict().items():
        out.append(ResultRecord(config.experiment, g, rep, seed, name, float(value)))
    for name, value in rates(cm).items():
        if value is not None and name != "recall":
            out.append(ResultRecord(config.experiment, g, rep, seed, name, float(value)))
    return out


def _cluster_cv_job(job) -> list[ResultRecord]:
    config, (mu,), rep = job
    seed = config.seed + rep
    fraction = config.fractions[0]
    adv = GaussianSpec(mu, config.adv_sigmas[0])
    values, truth = _population(config, fraction, adv, seed)
    X = FeatureSpace.for_spec(config.legit).transform(values)
    rng = RngHandle(seed, stream_id(config.experiment, "cv"))
    totals = {v: ConfusionMatrix() for v in config.variants}
    precision = []
    for fold, (tr, ev) in enumerate(kfold_indices(len(X), config.folds, rng, strata=truth)):
        # only the training fold is clustered; the evaluation fold never informs labels
        derived, _ = cluster_labels(X[tr], min_pts=config.min_pts, eps_rule=config.eps_rule)
        precision.append(clustering_precision(derived, truth[tr]))
        for v in config.variants:
            clf = train(v, X[tr], derived, config.hp, rng.child("fold", fold, v.value))
            totals[v] = totals[v] + confusion(clf.predict_labels(X[ev]), truth[ev])
    grid = (("adv_mu", mu),)
    out = [ResultRecord(config.experiment, grid + (("variant", "DBSCAN"),), rep, seed,
                        "clustering_precision", float(np.mean(precision)))]
    for v in config.variants:
        out += _cm_records(config, grid, rep, seed, v, totals[v])
    return out


def run_fig3(config: ExperimentConfig) -> list[ResultRecord]:
    """Tenfold CV where each training fold is clustered for labels, then each
    variant is trained on those labels and scored on the held-out fold.

    Evaluation is always against ground truth. Emits the aggregate confusion
    counts and rates per (repetition, variant), plus the mean clustering
    precision over the training folds.
    """
    points = [(m,) for m in config.adv_mus]
    return _flatten(_map_jobs(_cluster_cv_job, _grid_jobs(config, points), config.jobs))


def fig3_matrices(records: Sequence[ResultRecord]) -> dict[str, ConfusionMatrix]:
    """Sum per-repetition confusion counts into one matrix per variant."""
    acc: dict[str, dict] = {}
    for r in records:
        if r.metric in ("tp", "fp", "tn", "fn"):
            v = r.grid_dict()["variant"]
            acc.setdefault(v, {"tp": 0, "fp": 0, "tn": 0, "fn": 0})[r.metric] += int(r.value)
    return {v: ConfusionMatrix(**c) for v, c in acc.items()}


def run_fig4a(config: ExperimentConfig) -> list[ResultRecord]:
    """Accuracy per (variant, adversarial mu) when classifiers learn from cluster labels."""
    return run_fig3(config)


def _fig4b_job(job) -> list[ResultRecord]:
    config, (level,), rep = job
    seed = config.seed + rep
    adv = GaussianSpec(config.adv_mus[0], config.adv_sigmas[0])
    values, truth = _population(config, config.fractions[0], adv, seed)
    X = FeatureSpace.for_spec(config.legit).transform(values)
    out = []
    for v in config.variants:
        rng = RngHandle(seed, stream_id(config.experiment, "cv", v.value))
        flip_rng = RngHandle(seed, stream_id(config.experiment, "flip", level))
        total = ConfusionMatrix()
        for fold, (tr, ev) in enumerate(kfold_indices(len(X), config.folds, rng, strata=truth)):
            noisy = corrupt_labels(truth[tr], level, flip_rng.child(v.value, fold))
            clf = train(v, X[tr], noisy, config.hp, rng.child("fold", fold))
            total = total + confusion(clf.predict_labels(X[ev]), truth[ev])
        out += _cm_records(config, (("level", level),), rep, seed, v, total)
    return out


def corrupt_labels(labels: np.ndarray, level: float, rng: RngHandle) -> np.ndarray:
    """Flip ``round((1 - level) * N)`` labels chosen uniformly at random.

    ``level`` plays the role of the clustering accuracy that produced them.
    """
    labels = np.asarray(labels, dtype=int)
    n_flip = int(round((1.0 - level) * len(labels)))
    out = labels.copy()
    idx = rng.gen.choice(len(labels), size=n_flip, replace=False)
    out[idx] = -out[idx]
    return out


def run_fig4b(config: ExperimentConfig) -> list[ResultRecord]:
    """Classifier accuracy as a function of training-label accuracy."""
    points = [(lv,) for lv in config.levels]
    return _flatten(_map_jobs(_fig4b_job, _grid_jobs(config, points), config.jobs))


# --- drift demo ---------------------------------------------------------------


@dataclass
class DriftRun:
    scenario: str
    theta: float
    seed: int
    events: list = field(repr=False)
    trigger_ticks: list
    terminal_perception: float
    true_mean: float
    initial_accuracy: float
    terminal_accuracy: float


def _window_accuracy(events, ticks: range) -> float:
    sel = [e for e in events if e.tick in ticks]
    return float(np.mean([e.predicted_label == e.truth for e in sel]))


def simulate_drift(config: ExperimentConfig, scenario: str, theta: float, seed: int,
                   edge_ticks: int = 20) -> DriftRun:
    """Bootstrap on an adversary-free batch, then stream either genuine drift or an attack.

    ``scenario`` is ``"genuine"`` (legitimate mean moves ``drift_rate`` per
    tick for ``drift_ticks`` ticks) or ``"attack"`` (a fraction of users
    follows the drifting schedule towards ``target``).
    """
    legit = config.legit
    task = default_task(legit, n=config.n_values)
    pcfg = PipelineConfig(FeatureSpace.for_spec(legit), legit.sigma,
                          variants=(config.active_variant,), active_variant=config.active_variant,
                          hp=config.hp, min_pts=config.min_pts, eps_rule=config.eps_rule,
                          theta=theta, window_size=config.window,
                          buffer_factor=config.buffer_factor, alpha=config.alpha)
    boot = generate_stream(
        PopulationConfig(config.stream_users, config.bootstrap_ticks, task),
        RngHandle(seed, stream_id("drift-demo", "bootstrap")),
    )
    state = bootstrap([r for r, _ in boot], pcfg, RngHandle(seed, stream_id("drift-demo", "fit")))
    start = config.bootstrap_ticks
    if scenario == "genuine":
        pop = PopulationConfig(config.stream_users, config.stream_ticks, task,
                               concept_drift_rate=config.drift_rate,
                               concept_drift_ticks=config.drift_ticks, start_tick=start)
    elif scenario == "attack":
        profile = AdversaryProfile(config.attack_fraction, Strategy.DRIFTING,
                                   delta=config.delta, target=config.target)
        pop = PopulationConfig(config.stream_users, config.stream_ticks, task, profile,
                               start_tick=start)
    else:
        raise ValueError(f"unknown drift scenario {scenario!r}")
    stream = generate_stream(pop, RngHandle(seed, stream_id("drift-demo", scenario)))
    state, events = run_stream(state, stream, RngHandle(seed, stream_id("drift-demo", "recluster")))
    last = start + config.stream_ticks
    true_mean = legit.mu + config.drift_rate * config.drift_ticks if scenario == "genuine" else legit.mu
    return DriftRun(
        scenario, theta, seed, events,
        [e.tick for e in events if e.retrain],
        state.monitor.perception,
        true_mean,
        _window_accuracy(events, range(start, start + edge_ticks)),
        _window_accuracy(events, range(last - edge_ticks, last)),
    )


def _drift_records(config: ExperimentConfig, run: DriftRun, rep: int) -> list[ResultRecord]:
    grid = (("scenario", run.scenario), ("theta", run.theta))
    metrics = {
        "triggers": len(run.trigger_ticks),
        "terminal_perception": run.terminal_perception,
        "true_mean": run.true_mean,
        "perception_error": abs(run.terminal_perception - run.true_mean),
        "initial_accuracy": run.initial_accuracy,
        "terminal_accuracy": run.terminal_accuracy,
    }
    if run.trigger_ticks:
        metrics["first_trigger"] = run.trigger_ticks[0]
    return [ResultRecord(config.experiment, grid, rep, run.seed, m, float(v))
            for m, v in metrics.items()]


def drift_scenarios(config: ExperimentConfig) -> list[tuple[str, float]]:
    """Genuine drift over the theta sweep (plus no retraining), attack with
    retraining disabled, and attack with near-continuous retraining."""
    genuine = [("genuine", float(t)) for t in config.thetas] + [("genuine", math.inf)]
    return genuine + [("attack", math.inf), ("attack", float(config.hazard_theta))]


def _drift_job(job):
    config, (scenario, theta), rep = job
    run = simulate_drift(config, scenario, theta, config.seed + rep)
    return _drift_records(config, run, rep), run


def run_drift_demo(config: ExperimentConfig) -> tuple[list[ResultRecord], list[DriftRun]]:
    out = _map_jobs(_drift_job, _grid_jobs(config, drift_scenarios(config)), config.jobs)
    return _flatten([recs for recs, _ in out]), [run for _, run in out]


def run_experiment(config: ExperimentConfig) -> list[ResultRecord]:
    """Dispatch on ``config.experiment``; the drift demo's event logs are dropped here."""
    exp = config.experiment
    if exp in ("fig2a", "fig2b"):
        return run_fig2(config)
    if exp == "fig3":
        return run_fig3(config)
    if exp == "fig4a":
        return run_fig4a(config)
    if exp == "fig4b":
        return run_fig4b(config)
    return run_drift_demo(config)[0]


# --- output -----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def grid_columns(records: Sequence[ResultRecord]) -> list[str]:
    cols: list[str] = []
    for r in records:
        for name, _ in r.grid:
            if name not in cols:
                cols.append(name)
    return cols


def format_results_csv(records: Sequence[ResultRecord]) -> str:
    cols = grid_columns(records)
    lines = [",".join(["experiment", *cols, "repetition", "seed", "metric", "value"])]
    for r in records:
        g = r.grid_dict()
        cells = [r.experiment, *(_fmt(g.get(c, "")) for c in cols),
                 str(r.repetition), str(r.seed), r.metric, _fmt(r.value)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def summarize(records: Sequence[ResultRecord]) -> list[dict]:
    """Mean and population std of each metric per grid point, in first-seen order."""
    groups: dict[tuple, list[float]] = {}
    for r in records:
        groups.setdefault((r.grid, r.metric), []).append(r.value)
    out = []
    for (grid, metric), vals in groups.items():
        arr = np.array(vals)
        entry = {name: (value if not isinstance(value, float) or math.isfinite(value) else str(value))
                 for name, value in grid}
        entry.update(metric=metric, mean=float(arr.mean()), std=float(arr.std()), n=len(vals))
        out.append(entry)
    return out


def mean_of(records: Sequence[ResultRecord], metric: str, **grid) -> float:
    """Mean of ``metric`` over repetitions at the grid point matching ``grid``."""
    vals = [r.value for r in records
            if r.metric == metric and all(r.grid_dict().get(k) == v for k, v in grid.items())]
    if not vals:
        raise KeyError(f"no {metric} records at {grid}")
    return float(np.mean(vals))


def write_results(records: Sequence[ResultRecord], out_dir, experiment: str) -> tuple[str, str]:
    """Write ``<experiment>.csv`` and ``<experiment>_summary.json`` atomically."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{experiment}.csv")
    json_path = os.path.join(out_dir, f"{experiment}_summary.json")
    atomic_write_text(csv_path, format_results_csv(records))
    atomic_write_text(json_path, json.dumps(summarize(records), indent=2) + "\n")
    return csv_path, json_path
