"""Censored survival data: container, CSV ingestion and covariate scaling."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SurvivalDataset:
    """Observed triplets ``(y_i, c_i, x_i)``.

    ``events[i] == 1`` marks an observed event, ``0`` a censored subject.
    Arrays are copied and validated on construction.
    """

    times: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        events = np.asarray(self.events, dtype=float).reshape(-1)
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("covariates must be a 2-d matrix")
        n = times.shape[0]
        if events.shape[0] != n or X.shape[0] != n:
            raise DataError(
                f"length mismatch: {n} times, {events.shape[0]} events, "
                f"{X.shape[0]} covariate rows"
            )
        if n < 2:
            raise DataError("n < 2: at least two subjects are required")
        if not np.all(np.isfinite(times)):
            raise DataError("non-finite survival time")
        if np.any(times < 0):
            raise DataError("negative survival time")
        if not np.all((events == 0) | (events == 1)):
            raise DataError("non-binary event indicator")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite covariate value")
        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "events", events.astype(np.int8))
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.times.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def with_covariates(self, X, feature_names=None) -> "SurvivalDataset":
        return SurvivalDataset(
            self.times, self.events, X,
            self.feature_names if feature_names is None else feature_names,
        )

    def with_outcomes(self, times, events) -> "SurvivalDataset":
        return SurvivalDataset(times, events, self.covariates, self.feature_names)


@dataclass(frozen=True)
class Standardization:
    """Column means and (population) standard deviations."""

    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float).reshape(-1)
        scales = np.asarray(self.scales, dtype=float).reshape(-1)
        if means.shape != scales.shape:
            raise DataError("means and scales differ in length")
        if not np.all(scales > 0):
            raise DataError("standardization scales must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    def invert(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scales + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "scales": self.scales.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(d["means"], d["scales"])

    @classmethod
    def identity(cls, p: int) -> "Standardization":
        return cls(np.zeros(p), np.ones(p))


def standardize(d: SurvivalDataset) -> tuple[SurvivalDataset, Standardization]:
    """Center each covariate and scale it to unit variance (denominator n).

    Raises
    ------
    DataError
        If a column is constant.
    """
    X = d.covariates
    means = X.mean(axis=0)
    centered = X - means
    scales = np.sqrt(np.mean(centered**2, axis=0))
    for j in range(d.p):
        if np.ptp(X[:, j]) == 0 or not scales[j] > 0:
            raise DataError(f"constant column {d.feature_names[j]}")
    return d.with_covariates(centered / scales), Standardization(means, scales)


def apply_standardization(x, s: Standardization) -> np.ndarray:
    """Map raw covariates (a vector, or rows of a matrix) to the training scale."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != s.means.shape[0]:
        raise DataError(f"expected {s.means.shape[0]} covariates, got {x.shape[-1]}")
    return (x - s.means) / s.scales


def _rows(reader):
    """Yield ``(line_number, row)``, skipping ``#`` comment lines."""
    for row in reader:
        if row and row[0].lstrip().startswith("#"):
            continue
        yield reader.line_num, row


def load_csv(path, time_col: str = "time", event_col: str = "event") -> SurvivalDataset:
    """Read a header-first, comma-separated file.

    Every column other than ``time_col`` and ``event_col`` is a numeric
    covariate, kept in header order. Lines starting with ``#`` are comments.
    Errors carry the file name and line.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = _rows(csv.reader(fh))
        try:
            header = [h.strip() for h in next(reader)[1]]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for col in (time_col, event_col):
            if col not in header:
                raise DataError(f"{path}: missing column {col!r}")
        ti, ei = header.index(time_col), header.index(event_col)
        cov_idx = [k for k in range(len(header)) if k not in (ti, ei)]
        rows = []
        for line_no, row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise DataError(f"{path}:{line_no}: non-numeric cell") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{line_no}: missing or non-finite value")
            if values[ei] not in (0.0, 1.0):
                raise DataError(f"{path}:{line_no}: non-binary event indicator")
            if values[ti] < 0:
                raise DataError(f"{path}:{line_no}: negative time")
            rows.append(values)
    if len(rows) < 2:
        raise DataError(f"{path}: n < 2 (found {len(rows)} data rows)")
    arr = np.array(rows, dtype=float)
    return SurvivalDataset(
        arr[:, ti], arr[:, ei], arr[:, cov_idx].reshape(len(rows), len(cov_idx)),
        tuple(header[k] for k in cov_idx),
    )


def write_csv(d: SurvivalDataset, path, time_col: str = "time", event_col: str = "event",
              comment: str | None = None):
    """Inverse of :func:`load_csv`; floats are written with ``repr`` precision.

    ``comment`` (single line) is written first as a ``#`` line.
    """
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow([time_col, event_col, *d.feature_names])
        for i in range(d.n):
            w.writerow([repr(float(d.times[i])), int(d.events[i]),
                        *(repr(float(v)) for v in d.covariates[i])])


def covariate_matrix_from_csv(path, feature_names: Sequence[str],
                              ignore: Sequence[str] = ("time", "event")) -> np.ndarray:
    """Load covariate columns by exact name.

    Columns named in ``ignore`` are skipped; any other column not in
    ``feature_names`` is an error, as is a missing one.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = _rows(csv.reader(fh))
        try:
            header = [h.strip() for h in next(reader)[1]]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [name for name in feature_names if name not in header]
        if missing:
            raise DataError(f"{path}: missing feature column {missing[0]!r}")
        unknown = [h for h in header if h not in feature_names and h not in ignore]
        if unknown:
            raise DataError(f"{path}: unknown column {unknown[0]!r}")
        cols = [header.index(name) for name in feature_names]
        rows = []
        for line_no, row in reader:
            if not row:
                continue
            try:
                rows.append([float(row[k]) for k in cols])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{line_no}: non-numeric or missing cell") from None
    return np.array(rows, dtype=float).reshape(len(rows), len(cols))
