"""Datasets, CSV persistence, report featurization and train/evaluation splits."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

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

BASE_COLUMNS = ["reporter_id", "tick", "unit_id", "x", "y"]


class CsvFormatError(ValueError):
    """Raised for malformed dataset files; ``rows`` lists offending data rows (1-based)."""

    def __init__(self, message: str, rows: Sequence[int] = ()):
        super().__init__(message)
        self.rows = list(rows)


@dataclass
class Dataset:
    task: SensingTask
    records: list[tuple[Report, Optional[Label]]]
    source: str = "synthetic"

    def __len__(self) -> int:
        return len(self.records)

    @property
    def reports(self) -> list[Report]:
        return [r for r, _ in self.records]

    @property
    def labelled(self) -> bool:
        return bool(self.records) and all(lab is not None for _, lab in self.records)

    def values(self) -> np.ndarray:
        """(N, n) matrix of measurements."""
        return np.array([r.values for r, _ in self.records], dtype=float)

    def labels(self) -> Optional[np.ndarray]:
        if not self.labelled:
            return None
        return np.array([lab.value for _, lab in self.records], dtype=int)

    def subset(self, idx: Iterable[int]) -> "Dataset":
        return Dataset(self.task, [self.records[i] for i in idx], self.source)


def header_for(n: int, labelled: bool) -> list[str]:
    cols = BASE_COLUMNS + [f"v{j}" for j in range(1, n + 1)]
    return cols + ["label"] if labelled else cols


def load_csv(path: str | os.PathLike, task: SensingTask) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        labelled = bool(header) and header[-1] == "label"
        expected = header_for(task.n, labelled)
        if header != expected:
            raise CsvFormatError(f"{path}: header mismatch; expected {','.join(expected)}")

        records: list[tuple[Report, Optional[Label]]] = []
        problems: list[tuple[int, str]] = []
        for row_no, row in enumerate(reader, start=1):
            try:
                records.append(_parse_row(row, expected, task, labelled))
            except (ValueError, KeyError) as exc:
                problems.append((row_no, str(exc).strip("'\"")))
    if problems:
        detail = "; ".join(f"row {r} (line {r + 1}): {msg}" for r, msg in problems[:20])
        raise CsvFormatError(f"{path}: {len(problems)} malformed row(s): {detail}",
                             [r for r, _ in problems])
    return Dataset(task, records, source="file")


def _parse_row(row, columns, task: SensingTask, labelled: bool):
    if len(row) != len(columns):
        raise ValueError(f"expected {len(columns)} cells, found {len(row)}")
    cells = dict(zip(columns, row))
    try:
        tick = int(cells["tick"])
    except ValueError:
        raise ValueError(f"tick is not an integer: {cells['tick']!r}") from None
    numeric = {}
    for col in ["x", "y"] + [f"v{j}" for j in range(1, task.n + 1)]:
        try:
            numeric[col] = float(cells[col])
        except ValueError:
            raise ValueError(f"column {col} is not numeric: {cells[col]!r}") from None
        if not math.isfinite(numeric[col]):
            raise ValueError(f"column {col} is not finite: {cells[col]!r}")
    unit_id = cells["unit_id"]
    try:
        task.unit(unit_id)
    except KeyError:
        raise ValueError(f"unknown unit id {unit_id!r}") from None
    values = tuple(numeric[f"v{j}"] for j in range(1, task.n + 1))
    report = Report(values, tick, Location(unit_id, numeric["x"], numeric["y"]),
                    cells["reporter_id"])
    label = None
    if labelled:
        if cells["label"] not in ("1", "-1", "+1"):
            raise ValueError(f"label must be 1 or -1, got {cells['label']!r}")
        label = Label(int(cells["label"]), Provenance.GROUND_TRUTH)
    return report, label


def format_csv(records: Sequence[tuple[Report, Optional[Label]]], n: int) -> str:
    labelled = bool(records) and all(lab is not None for _, lab in records)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header_for(n, labelled))
    for report, label in records:
        row = [report.reporter_id, str(report.tick), report.location.unit_id,
               repr(float(report.location.x)), repr(float(report.location.y))]
        row += [repr(float(v)) for v in report.values]
        if labelled:
            row.append(str(label.value))
        writer.writerow(row)
    return buf.getvalue()


def write_csv(dataset: Dataset, path: str | os.PathLike) -> None:
    """Atomic write: the target is replaced only once the full file exists."""
    atomic_write_text(path, format_csv(dataset.records, dataset.task.n))


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# --- features -------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector:
    pmf: np.ndarray
    raw_mean: float
    raw_std: float

    def as_array(self, mean_scale: float = 1.0) -> np.ndarray:
        return np.append(self.pmf, self.raw_mean / mean_scale)


def _bin_index(values: np.ndarray, bins: int, lo: float, hi: float) -> np.ndarray:
    idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def featurize(report: Report | Sequence[float], bins: int, range: tuple[float, float]) -> FeatureVector:
    """Empirical pmf of a report's values over equal-width bins.

    Bins are half-open ``[e_j, e_{j+1})`` except the last, which is closed;
    values outside ``range`` land in the edge bins.
    """
    values = np.asarray(report.values if isinstance(report, Report) else report, dtype=float)
    lo, hi = range
    if values.size == 0:
        raise ValueError("cannot featurize an empty report")
    if bins < 2:
        raise ValueError("need at least two bins")
    if not lo < hi:
        raise ValueError("bin range must satisfy lo < hi")
    counts = np.bincount(_bin_index(values, bins, lo, hi), minlength=bins)
    return FeatureVector(counts / values.size, float(values.mean()), float(values.std()))


@dataclass(frozen=True)
class FeatureSpace:
    """Fixed featurization: pmf over ``bins`` bins on [lo, hi] plus the scaled mean.

    The mean is divided by ``mean_scale`` (the legitimate sigma by default), so
    that its report-to-report variation is of the same order as the pmf's.
    """

    bins: int
    lo: float
    hi: float
    mean_scale: float

    @classmethod
    def for_spec(cls, legit: GaussianSpec, bins: int = 10, width: float = 5.0) -> "FeatureSpace":
        if legit.sigma <= 0:
            raise ValueError("feature range needs a legitimate sigma > 0")
        return cls(bins, legit.mu - width * legit.sigma, legit.mu + width * legit.sigma,
                   legit.sigma)

    @property
    def dim(self) -> int:
        return self.bins + 1

    def vector(self, fv: FeatureVector) -> np.ndarray:
        return fv.as_array(self.mean_scale)

    def featurize(self, report: Report) -> FeatureVector:
        return featurize(report, self.bins, (self.lo, self.hi))

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Vectorized featurization of an (N, n) value matrix into (N, bins + 1)."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        n_rows, n = values.shape
        idx = _bin_index(values, self.bins, self.lo, self.hi)
        flat = (idx + self.bins * np.arange(n_rows)[:, None]).ravel()
        pmf = np.bincount(flat, minlength=n_rows * self.bins).reshape(n_rows, self.bins) / n
        return np.hstack([pmf, values.mean(axis=1, keepdims=True) / self.mean_scale])

    def raw_means(self, X: np.ndarray) -> np.ndarray:
        return X[:, -1] * self.mean_scale


# --- splits ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "kfold"
    k: int = 10
    train_fraction: float = 0.7

    def __post_init__(self):
        if self.mode not in ("kfold", "holdout"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.mode == "kfold" and self.k < 2:
            raise ValueError("kfold needs k >= 2")
        if self.mode == "holdout" and not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def _stratified_order(n: int, strata: Optional[np.ndarray], gen: np.random.Generator):
    if strata is None:
        return [gen.permutation(n)]
    return [gen.permutation(np.flatnonzero(strata == s)) for s in np.unique(strata)]


def kfold_indices(n: int, k: int, rng: RngHandle, strata: Optional[np.ndarray] = None):
    """Return ``k`` (train_idx, eval_idx) pairs; folds are stratified when ``strata`` is given."""
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if k > n:
        raise ValueError(f"k={k} exceeds dataset size {n}")
    order = np.concatenate(_stratified_order(n, strata, rng.gen))
    fold_of = np.empty(n, dtype=int)
    fold_of[order] = np.arange(n) % k
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(k)]


def holdout_indices(n: int, train_fraction: float, rng: RngHandle,
                    strata: Optional[np.ndarray] = None):
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    groups = _stratified_order(n, strata, rng.gen)
    total = int(round(train_fraction * n))
    exact = np.array([train_fraction * len(g) for g in groups])
    take = np.floor(exact).astype(int)
    # largest-remainder so the per-class counts add up to the overall target
    for i in np.argsort(-(exact - take), kind="stable")[: total - take.sum()]:
        take[i] += 1
    train = np.concatenate([g[:t] for g, t in zip(groups, take)])
    test = np.concatenate([g[t:] for g, t in zip(groups, take)])
    return [(np.sort(train), np.sort(test))]


def split(dataset: Dataset, spec: SplitSpec, rng: RngHandle) -> list[tuple[Dataset, Dataset]]:
    strata = dataset.labels()
    n = len(dataset)
    if spec.mode == "kfold":
        pairs = kfold_indices(n, spec.k, rng, strata)
    else:
        pairs = holdout_indices(n, spec.train_fraction, rng, strata)
    return [(dataset.subset(tr), dataset.subset(ev)) for tr, ev in pairs]
