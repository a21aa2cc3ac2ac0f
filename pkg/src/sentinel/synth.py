"""Legitimate and adversarial report streams.

Adversaries collude: every malicious user follows the same distribution or
the same drift schedule. The drifting schedule moves a fresh legitimate draw
towards ``target`` by ``delta`` per tick, plus a small per-user Gaussian
jitter, and never overshoots the target.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    LEGIT,
    MALICIOUS,
    GaussianSpec,
    Label,
    Location,
    Provenance,
    Report,
    RngHandle,
    SensingTask,
)


class Strategy(str, enum.Enum):
    CASE_1 = "static-case-1"
    CASE_2 = "static-case-2"
    CASE_3 = "static-case-3"
    DRIFTING = "drifting"

    @property
    def static(self) -> bool:
        return self is not Strategy.DRIFTING


@dataclass(frozen=True)
class AdversaryProfile:
    fraction: float = 0.0
    strategy: Strategy = Strategy.CASE_1
    adv_spec: Optional[GaussianSpec] = None
    delta: float = 0.0
    target: float = math.inf
    noise_sigma: Optional[float] = None  # None -> 5% of the legitimate sigma

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not 0.0 <= self.fraction < 0.5:
            raise ValueError(f"adversary fraction must lie in [0, 0.5), got {self.fraction}")
        if self.strategy is Strategy.DRIFTING:
            if self.delta <= 0:
                raise ValueError("drifting strategy needs delta > 0")
        elif self.fraction > 0 and self.adv_spec is None:
            raise ValueError("static strategies need adv_spec")
        if self.noise_sigma is not None and self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def jitter_sigma(self, legit: GaussianSpec) -> float:
        if self.noise_sigma is None:
            return 0.05 * legit.sigma
        return self.noise_sigma


@dataclass(frozen=True)
class PopulationConfig:
    """Who reports what, and for how long.

    ``concept_drift_rate`` shifts the legitimate mean by that many units per
    tick (genuine drift of the phenomenon) for ``concept_drift_ticks`` ticks
    counted from ``start_tick``, after which the mean stays put.
    """

    n_users: int
    ticks: int
    task: SensingTask
    adversary: AdversaryProfile = AdversaryProfile()
    concept_drift_rate: float = 0.0
    concept_drift_ticks: Optional[int] = None
    start_tick: int = 0

    def __post_init__(self):
        if self.n_users < 2:
            raise ValueError("need at least two users")
        if self.ticks < 1:
            raise ValueError("need at least one tick")

    @property
    def n_malicious(self) -> int:
        return int(math.floor(self.adversary.fraction * self.n_users))

    def legit_mean_at(self, tick: int) -> float:
        span = max(tick - self.start_tick, 0)
        if self.concept_drift_ticks is not None:
            span = min(span, self.concept_drift_ticks)
        return self.task.legit_spec.mu + self.concept_drift_rate * span


def adversarial_sample(x_true, tick: int, delta: float, target: float, eta=0.0):
    """Drifted malicious value ``min(x_true + tick*delta + eta, target)``.

    Works elementwise on arrays.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if tick < 0:
        raise ValueError("tick must be non-negative")
    out = np.minimum(np.asarray(x_true, dtype=float) + tick * delta + eta, target)
    return float(out) if out.ndim == 0 else out


def case_spec(case: int, legit: GaussianSpec, severity: float) -> GaussianSpec:
    """Adversarial distribution for static Cases I-III.

    Case I shifts the mean by ``severity * mu``; Case II inflates sigma by
    ``1 + severity``; Case III keeps the mean and shrinks sigma by the same
    factor.
    """
    if severity <= 0:
        raise ValueError("severity must be positive")
    if case == 1:
        return GaussianSpec(legit.mu + severity * legit.mu, legit.sigma)
    if case == 2:
        return GaussianSpec(legit.mu, legit.sigma * (1 + severity))
    if case == 3:
        return GaussianSpec(legit.mu, legit.sigma / (1 + severity))
    raise ValueError(f"unknown case {case!r}; expected 1, 2 or 3")


def generate_stream(config: PopulationConfig, rng: RngHandle) -> list[tuple[Report, Label]]:
    """Every user emits one report per tick, in user order within a tick."""
    adv = config.adversary
    task = config.task
    n_mal = config.n_malicious
    if adv.fraction > 0 and n_mal < 1:
        raise ValueError(
            f"fraction {adv.fraction} of {config.n_users} users yields no adversary"
        )

    gen = rng.gen
    malicious = np.zeros(config.n_users, dtype=bool)
    malicious[gen.permutation(config.n_users)[:n_mal]] = True
    units = [task.units[i % len(task.units)] for i in range(config.n_users)]
    legit = task.legit_spec
    jitter = adv.jitter_sigma(legit)
    ids = [f"user-{i:04d}" for i in range(config.n_users)]
    truth_pos = Label(LEGIT, Provenance.GROUND_TRUTH)
    truth_neg = Label(MALICIOUS, Provenance.GROUND_TRUTH)

    out: list[tuple[Report, Label]] = []
    for step in range(config.ticks):
        tick = config.start_tick + step
        mu = config.legit_mean_at(tick)
        base = mu + legit.sigma * gen.standard_normal((config.n_users, task.n))
        if n_mal:
            if adv.strategy is Strategy.DRIFTING:
                eta = jitter * gen.standard_normal((n_mal, 1))
                base[malicious] = adversarial_sample(
                    base[malicious], step, adv.delta, adv.target, eta
                )
            else:
                spec = adv.adv_spec
                base[malicious] = spec.mu + spec.sigma * gen.standard_normal((n_mal, task.n))
        xy = gen.random((config.n_users, 2))
        for u in range(config.n_users):
            xmin, ymin, xmax, ymax = units[u].bounds
            loc = Location(
                units[u].id,
                float(xmin + xy[u, 0] * (xmax - xmin)),
                float(ymin + xy[u, 1] * (ymax - ymin)),
            )
            report = Report(tuple(base[u].tolist()), tick, loc, ids[u])
            out.append((report, truth_neg if malicious[u] else truth_pos))
    return out
