"""Domain types shared across the package and seeded randomness."""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LEGIT = 1
MALICIOUS = -1


class Provenance(str, enum.Enum):
    GROUND_TRUTH = "ground-truth"
    CLUSTER = "cluster-derived"
    PREDICTED = "classifier-predicted"


@dataclass(frozen=True)
class Label:
    value: int
    provenance: Provenance = Provenance.GROUND_TRUTH

    def __post_init__(self):
        if self.value not in (LEGIT, MALICIOUS):
            raise ValueError(f"label value must be +1 or -1, got {self.value!r}")

    @property
    def legitimate(self) -> bool:
        return self.value == LEGIT


@dataclass(frozen=True)
class GaussianSpec:
    mu: float
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.mu) or not np.isfinite(self.sigma):
            raise ValueError("GaussianSpec parameters must be finite")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SpatialUnit:
    id: str
    bounds: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"degenerate bounds for unit {self.id!r}: {self.bounds}")

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax


@dataclass(frozen=True)
class Location:
    unit_id: str
    x: float = 0.0
    y: float = 0.0


@dataclass(frozen=True)
class Report:
    """A single user submission.

    ``signature`` and ``cert`` are carried verbatim and never verified.
    """

    values: tuple[float, ...]
    tick: int
    location: Location
    reporter_id: str
    signature: bytes = b""
    cert: bytes = b""

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("report must carry at least one measurement")
        if self.tick < 0:
            raise ValueError(f"tick must be non-negative, got {self.tick}")

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class SensingTask:
    phenomenon: str
    n: int
    units: tuple[SpatialUnit, ...]
    legit_spec: GaussianSpec
    interval: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a task needs at least one measurement per report")
        if not self.units:
            raise ValueError("a task needs at least one spatial unit")
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate spatial unit ids: {ids}")

    def unit(self, unit_id: str) -> SpatialUnit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise KeyError(f"unknown spatial unit {unit_id!r}")

    def validate_report(self, report: Report) -> None:
        if len(report.values) != self.n:
            raise ValueError(
                f"report carries {len(report.values)} values, task expects {self.n}"
            )
        self.unit(report.location.unit_id)


def default_task(
    legit: GaussianSpec, n: int = 10, phenomenon: str = "velocity"
) -> SensingTask:
    """Single-unit task covering a 1 km square."""
    return SensingTask(
        phenomenon=phenomenon,
        n=n,
        units=(SpatialUnit("u0", (0.0, 0.0, 1000.0, 1000.0)),),
        legit_spec=legit,
    )


@dataclass
class RngHandle:
    """Deterministic generator identified by ``(seed, stream)``.

    Single owner; do not share one handle between threads.
    """

    seed: int
    stream: int
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        ss = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF, spawn_key=(self.stream,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, *names: str | int) -> "RngHandle":
        """Independent handle for a named sub-component, derived from this one."""
        return new_rng(self.seed, stream_id(self.stream, *names))


def stream_id(*parts: str | int) -> int:
    """Stable 32-bit stream id from a tuple of names and integers."""
    key = "/".join(str(p) for p in parts).encode()
    return zlib.crc32(key)


def new_rng(seed: int, stream: int = 0) -> RngHandle:
    return RngHandle(int(seed), int(stream))


def gaussian_draw(rng: RngHandle, spec: GaussianSpec, size: int | Sequence[int] | None = None):
    """One draw (or an array of draws) from N(mu, sigma^2); sigma == 0 returns mu exactly."""
    if spec.sigma == 0:
        if size is None:
            return float(spec.mu)
        return np.full(size, float(spec.mu))
    out = rng.gen.normal(spec.mu, spec.sigma, size=size)
    return float(out) if size is None else out
