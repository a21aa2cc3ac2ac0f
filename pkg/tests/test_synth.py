import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from sentinel.core import GaussianSpec, default_task, new_rng
from sentinel.synth import (
    AdversaryProfile,
    PopulationConfig,
    Strategy,
    adversarial_sample,
    case_spec,
    generate_stream,
)


@pytest.mark.parametrize("tick, expected", [(0, 16.0), (4, 18.0), (1000, 22.0)])
def test_adversarial_sample_schedule(tick, expected):
    assert adversarial_sample(16, tick, 0.5, 22, 0) == expected


def test_adversarial_sample_errors():
    with pytest.raises(ValueError):
        adversarial_sample(16, 0, 0.0, 22)
    with pytest.raises(ValueError):
        adversarial_sample(16, -1, 0.5, 22)


def test_adversarial_sample_monotone_and_clamped():
    ticks = np.arange(0, 200)
    vals = [adversarial_sample(16, int(t), 0.1, 22) for t in ticks]
    assert np.all(np.diff(vals) >= 0)
    assert max(vals) == 22.0


@pytest.mark.parametrize("case, legit, severity, expected", [
    (1, GaussianSpec(16, 2), 0.25, GaussianSpec(20, 2)),
    (3, GaussianSpec(16, 2), 1.0, GaussianSpec(16, 1)),
    (2, GaussianSpec(21, 1.3), 1.0, GaussianSpec(21, 2.6)),
])
def test_case_spec(case, legit, severity, expected):
    got = case_spec(case, legit, severity)
    assert got.mu == pytest.approx(expected.mu)
    assert got.sigma == pytest.approx(expected.sigma)


def test_case_spec_rejects_bad_input():
    with pytest.raises(ValueError):
        case_spec(1, GaussianSpec(16, 2), 0)
    with pytest.raises(ValueError):
        case_spec(4, GaussianSpec(16, 2), 0.5)


def test_profile_validation():
    with pytest.raises(ValueError):
        AdversaryProfile(0.5, Strategy.CASE_1, GaussianSpec(22, 2))
    with pytest.raises(ValueError):
        AdversaryProfile(0.2, Strategy.DRIFTING, delta=0)
    with pytest.raises(ValueError):
        AdversaryProfile(0.2, Strategy.CASE_1)
    with pytest.raises(ValueError):
        AdversaryProfile(0.2, Strategy.DRIFTING, delta=0.1, noise_sigma=-1)


def test_population_accounting(traffic):
    cfg = PopulationConfig(250, 3, default_task(traffic, n=10),
                           AdversaryProfile(0.4, Strategy.CASE_1, GaussianSpec(22, 2)))
    stream = generate_stream(cfg, new_rng(0, 0))
    assert len(stream) == 750
    for tick in range(3):
        labels = [lab.value for r, lab in stream if r.tick == tick]
        assert labels.count(-1) == 100 and labels.count(1) == 150
    # identities are fixed for the whole run
    bad = {r.reporter_id for r, lab in stream if lab.value == -1}
    assert len(bad) == 100


def test_adversary_free_stream(traffic):
    stream = generate_stream(PopulationConfig(10, 3, default_task(traffic, n=2)), new_rng(1, 0))
    assert len(stream) == 30
    assert all(lab.value == 1 for _, lab in stream)


def test_vacuous_attack_rejected(traffic):
    cfg = PopulationConfig(2, 1, default_task(traffic, n=2),
                           AdversaryProfile(0.4, Strategy.CASE_1, GaussianSpec(22, 2)))
    with pytest.raises(ValueError):
        generate_stream(cfg, new_rng(0, 0))


def test_drifting_schedule_deterministic_with_zero_sigma():
    legit = GaussianSpec(16, 0)
    cfg = PopulationConfig(10, 20, default_task(legit, n=3),
                           AdversaryProfile(0.3, Strategy.DRIFTING, delta=0.5, target=22,
                                            noise_sigma=0))
    for report, lab in generate_stream(cfg, new_rng(0, 0)):
        expected = min(16 + 0.5 * report.tick, 22) if lab.value == -1 else 16.0
        assert all(v == expected for v in report.values)


def test_drift_onset_matches_legit_draws(traffic):
    """At tick 0 without jitter the malicious values are plain legitimate draws."""
    prof = AdversaryProfile(0.4, Strategy.DRIFTING, delta=0.1, target=22, noise_sigma=0)
    cfg = PopulationConfig(50, 1, default_task(traffic, n=10), prof)
    drifting = generate_stream(cfg, new_rng(3, 0))
    plain = generate_stream(PopulationConfig(50, 1, default_task(traffic, n=10),
                                             AdversaryProfile(0.4, Strategy.CASE_1, traffic)),
                            new_rng(3, 0))
    # same generator consumption for the legitimate matrix, so legit rows coincide
    for (a, la), (b, _) in zip(drifting, plain):
        if la.value == 1:
            assert a.values == b.values
    mal = np.array([r.values for r, lab in drifting if lab.value == -1])
    assert abs(mal.mean() - 16) < 0.3


def test_colluding_static_adversaries_share_distribution(traffic):
    cfg = PopulationConfig(10, 1000, default_task(traffic, n=1),
                           AdversaryProfile(0.4, Strategy.CASE_1, GaussianSpec(22, 2)))
    stream = generate_stream(cfg, new_rng(4, 0))
    mal_ids = sorted({r.reporter_id for r, lab in stream if lab.value == -1})
    a = [r.values[0] for r, _ in stream if r.reporter_id == mal_ids[0]]
    b = [r.values[0] for r, _ in stream if r.reporter_id == mal_ids[1]]
    assert ks_2samp(a, b).pvalue > 0.01


def test_genuine_drift_counts_from_start_tick(traffic):
    cfg = PopulationConfig(2, 1, default_task(traffic), concept_drift_rate=0.1,
                           concept_drift_ticks=10, start_tick=5)
    assert cfg.legit_mean_at(5) == 16.0
    assert cfg.legit_mean_at(10) == pytest.approx(16.5)
    assert cfg.legit_mean_at(100) == pytest.approx(17.0)


def test_locations_inside_unit(traffic_task):
    stream = generate_stream(PopulationConfig(20, 2, traffic_task), new_rng(0, 0))
    unit = traffic_task.unit("u0")
    assert all(unit.contains(r.location.x, r.location.y) for r, _ in stream)


def test_generate_is_pure_given_rng(traffic_task):
    cfg = PopulationConfig(20, 2, traffic_task,
                           AdversaryProfile(0.25, Strategy.DRIFTING, delta=0.1, target=math.inf))
    assert generate_stream(cfg, new_rng(8, 1)) == generate_stream(cfg, new_rng(8, 1))
