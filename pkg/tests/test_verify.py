import json
import math
from collections import deque

import numpy as np
import pytest

from sentinel.core import GaussianSpec, Location, Report, RngHandle, default_task
from sentinel.experiments import default_config, simulate_drift
from sentinel.ingest import FeatureSpace
from sentinel.learn import HyperParams, Variant
from sentinel.synth import AdversaryProfile, PopulationConfig, Strategy, generate_stream
from sentinel.verify import (
    DriftMonitorState,
    PipelineConfig,
    bootstrap,
    check_and_recluster,
    drift_statistic,
    ingest_report,
    ingest_reports,
    run_stream,
    write_event_log,
)

LEGIT = GaussianSpec(16.0, 2.0)
HP = HyperParams(svm_epochs=50)


def config(**kw):
    base = dict(feature_space=FeatureSpace.for_spec(LEGIT), sigma_legit=LEGIT.sigma, hp=HP)
    base.update(kw)
    return PipelineConfig(**base)


def batch(n_users, ticks, fraction=0.0, adv=GaussianSpec(22.0, 2.0), seed=0, **pop):
    profile = AdversaryProfile(fraction, Strategy.CASE_1, adv)
    cfg = PopulationConfig(n_users, ticks, default_task(LEGIT, n=10), profile, **pop)
    return generate_stream(cfg, RngHandle(seed, 1))


def report(value, tick=0, n=10):
    return Report((float(value),) * n, tick, Location("u0"), "r")


def test_bootstrap_adversary_free_perception():
    stream = batch(50, 10)
    state = bootstrap([r for r, _ in stream], config(), RngHandle(0, 0))
    assert abs(state.monitor.perception - 16.0) <= 0.3
    assert state.monitor.ticks_since_train == 0
    assert state.monitor.perception == state.monitor.trained_perception


def test_bootstrap_with_adversaries_excludes_malicious_cluster():
    stream = batch(125, 4, fraction=0.4)
    state = bootstrap([r for r, _ in stream], config(), RngHandle(0, 0))
    assert abs(state.monitor.perception - 16.0) <= 0.5
    # classify the centres of the two populations
    assert ingest_report(state, report(16.0))[0].value == 1
    assert ingest_report(state, report(22.0))[0].value == -1


def test_bootstrap_too_few_reports():
    with pytest.raises(ValueError):
        bootstrap([report(16.0)] * 3, config(), RngHandle(0, 0))


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        config(theta=0.0)
    with pytest.raises(ValueError):
        config(variants=(Variant.NB,), active_variant=Variant.SVM)
    with pytest.raises(ValueError):
        config(alpha=1.5)


def test_ewma_arithmetic():
    mon = DriftMonitorState(16.0, 16.0, 1.0, 5, 2.0, 0.1)
    mon.accept(18.0)
    assert mon.perception == pytest.approx(16.2)
    assert list(mon.window) == [18.0]


def test_statistic_examples():
    mon = DriftMonitorState(16.0, 16.0, 1.0, 3, 2.0, 0.05)
    with pytest.raises(ValueError):
        drift_statistic(mon)
    mon.window.extend([16.0, 16.0])
    assert drift_statistic(mon) == 0.0
    mon.window.extend([18.0, 18.0, 18.0])
    assert len(mon.window) == 3
    assert drift_statistic(mon) == pytest.approx(1.0)


def test_ingest_updates_counter_and_buffer():
    stream = batch(50, 10)
    state = bootstrap([r for r, _ in stream], config(window_size=10), RngHandle(0, 0))
    before = len(state.monitor.window)
    out = ingest_reports(state, [report(16.0, 11), report(40.0, 11)])
    assert [lab.value for lab, _ in out] == [1, -1]
    assert len(state.monitor.window) == before + 1
    assert state.monitor.ticks_since_train == 2
    assert state.buffer[-1].values[0] == 40.0


def test_ingest_dimension_mismatch():
    state = bootstrap([r for r, _ in batch(50, 10)], config(), RngHandle(0, 0))
    bad = Report((16.0,) * 10, 0, Location("u0"), "r")
    fs = FeatureSpace.for_spec(LEGIT, bins=5)
    state.config.feature_space = fs
    with pytest.raises(ValueError):
        ingest_report(state, bad)


def test_below_threshold_no_recluster():
    state = bootstrap([r for r, _ in batch(50, 10)], config(theta=1.0, window_size=5),
                      RngHandle(0, 0))
    for _ in range(5):
        state.monitor.window.append(16.0 + 0.4 * 2.0)
    triggered, same = check_and_recluster(state, RngHandle(0, 1))
    assert not triggered and same is state


def test_window_not_full_no_check():
    state = bootstrap([r for r, _ in batch(50, 10)], config(theta=0.1, window_size=50),
                      RngHandle(0, 0))
    state.monitor.window.extend([30.0] * 10)
    assert check_and_recluster(state, RngHandle(0, 1)) == (False, state)


def test_recluster_uses_buffer_and_prior():
    state = bootstrap([r for r, _ in batch(50, 10)], config(theta=0.5, window_size=5),
                      RngHandle(0, 0))
    shifted = [r for r, _ in batch(50, 4, fraction=0.3, seed=3)]
    triggered = False
    state.monitor.window.extend([20.0] * 5)
    state.buffer.extend(shifted)
    triggered, fresh = check_and_recluster(state, RngHandle(0, 1))
    assert triggered and fresh.retrains == 1
    assert abs(fresh.monitor.perception - 16.0) <= 0.5


def test_false_alarm_control():
    """Stationary adversary-free stream: trigger rate below 1 per 1000 ticks."""
    triggers, ticks = 0, 0
    for seed in range(10):
        boot = batch(50, 10, seed=100 + seed)
        state = bootstrap([r for r, _ in boot], config(theta=1.5, window_size=50),
                          RngHandle(seed, 0))
        stream = batch(50, 100, seed=200 + seed, start_tick=10)
        state, events = run_stream(state, stream, RngHandle(seed, 2))
        triggers += sum(e.retrain for e in events)
        ticks += 100
    assert triggers / ticks < 1e-3


def test_stream_events_and_log(tmp_path):
    state = bootstrap([r for r, _ in batch(50, 10)], config(window_size=20), RngHandle(0, 0))
    state, events = run_stream(state, batch(20, 3, start_tick=10), RngHandle(0, 2))
    assert len(events) == 60
    assert {e.tick for e in events} == {10, 11, 12}
    path = tmp_path / "events.ndjson"
    write_event_log(events, path)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert set(rows[0]) >= {"tick", "reporter_id", "predicted_label", "score",
                            "perception", "drift_stat", "retrain"}
    assert rows[0]["truth"] == 1


@pytest.fixture(scope="module")
def drift_cfg():
    return default_config("drift-demo")


def test_genuine_drift_triggers_and_tracks(drift_cfg):
    run = simulate_drift(drift_cfg, "genuine", 1.0, drift_cfg.seed)
    assert run.trigger_ticks
    assert abs(run.terminal_perception - 20.0) <= 0.5


def test_first_trigger_non_decreasing_in_theta(drift_cfg):
    firsts = []
    for theta in (0.5, 1.0, 1.5, 2.0):
        run = simulate_drift(drift_cfg, "genuine", theta, drift_cfg.seed)
        firsts.append(run.trigger_ticks[0] if run.trigger_ticks else math.inf)
    assert firsts == sorted(firsts)


def test_attack_without_retraining_never_triggers(drift_cfg):
    run = simulate_drift(drift_cfg, "attack", math.inf, drift_cfg.seed)
    assert run.trigger_ticks == []


def test_frequent_retraining_biases_perception(drift_cfg):
    """Retraining almost every tick under a drifting attack should drag the
    perception toward the attack target by more than one legitimate sigma."""
    run = simulate_drift(drift_cfg, "attack", drift_cfg.hazard_theta, drift_cfg.seed)
    assert run.terminal_perception - drift_cfg.legit.mu > drift_cfg.legit.sigma
