"""Labeled (score, uncertainty, label) samples and CSV round-tripping."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

HEADER = ("score", "uncertainty", "label")


class DatasetError(ValueError):
    """Raised for malformed or invalid sample data."""


class Sample(NamedTuple):
    score: float
    uncertainty: float
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable column store of samples, kept in insertion order.

    Columns are read-only numpy arrays so that one dataset can be shared
    freely between solvers.
    """

    scores: np.ndarray
    uncertainties: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.array(self.scores, dtype=np.float64)
        unc = np.array(self.uncertainties, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if not (scores.ndim == unc.ndim == labels.ndim == 1):
            raise DatasetError("dataset columns must be one-dimensional")
        if not (len(scores) == len(unc) == len(labels)):
            raise DatasetError("dataset columns must have equal length")
        if len(scores) and (np.isnan(scores).any() or scores.min() < 0.0 or scores.max() > 1.0):
            raise DatasetError("scores must lie in [0, 1]")
        if not np.isfinite(unc).all():
            raise DatasetError("uncertainties must be finite")
        if len(labels) and not np.isin(labels, (0, 1)).all():
            raise DatasetError("labels must be 0 or 1")
        for name, arr in (("scores", scores), ("uncertainties", unc), ("labels", labels)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_samples(cls, samples) -> "Dataset":
        samples = list(samples)
        if not samples:
            return cls(np.empty(0), np.empty(0), np.empty(0, dtype=np.int64))
        s, u, y = zip(*samples)
        return cls(np.asarray(s), np.asarray(u), np.asarray(y))

    @property
    def n_total(self) -> int:
        return len(self.labels)

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def samples(self) -> list[Sample]:
        return list(self)

    def __len__(self) -> int:
        return self.n_total

    def __iter__(self) -> Iterator[Sample]:
        for s, u, y in zip(self.scores.tolist(), self.uncertainties.tolist(), self.labels.tolist()):
            yield Sample(s, u, y)

    def __getitem__(self, idx: int) -> Sample:
        return Sample(float(self.scores[idx]), float(self.uncertainties[idx]), int(self.labels[idx]))

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(self.scores[index], self.uncertainties[index], self.labels[index])


def _parse_row(row: list[str], lineno: int) -> tuple[float, float, int]:
    if len(row) != 3:
        raise DatasetError(f"line {lineno}: expected 3 fields, got {len(row)}")
    try:
        score = float(row[0])
        unc = float(row[1])
    except ValueError as exc:
        raise DatasetError(f"line {lineno}: {exc}") from None
    label_text = row[2].strip()
    if label_text not in ("0", "1"):
        raise DatasetError(f"line {lineno}: label must be 0 or 1, got {label_text!r}")
    if not 0.0 <= score <= 1.0:
        raise DatasetError(f"line {lineno}: score {score!r} outside [0, 1]")
    if not math.isfinite(unc):
        raise DatasetError(f"line {lineno}: uncertainty must be finite")
    return score, unc, int(label_text)


def load_csv(path) -> Dataset:
    """Read a ``score,uncertainty,label`` CSV file.

    Errors name the offending line (1-based, header is line 1).
    """
    scores, uncs, labels = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise DatasetError(f"{path}: header must be {','.join(HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            s, u, y = _parse_row(row, lineno)
            scores.append(s)
            uncs.append(u)
            labels.append(y)
    if not labels:
        raise DatasetError("empty dataset")
    return Dataset(np.array(scores), np.array(uncs), np.array(labels, dtype=np.int64))


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(header, rows) -> str:
    """Render rows as LF-terminated CSV; floats use repr for exact round-trips."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def save_csv(d: Dataset, path) -> None:
    rows = zip(d.scores.tolist(), d.uncertainties.tolist(), d.labels.tolist())
    atomic_write_text(path, format_csv(HEADER, rows))


def split(d: Dataset, fractions: tuple[float, float], seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle and partition ``d`` into (hold-out, test) datasets.

    ``fractions`` must be positive and sum to one. The hold-out size is
    ``round(hold * N)``.
    """
    hold, test = fractions
    if hold <= 0 or test <= 0 or not math.isclose(hold + test, 1.0, abs_tol=1e-9):
        raise DatasetError(f"split fractions must be positive and sum to 1, got {fractions}")
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(d.n_total)
    n_hold = int(round(hold * d.n_total))
    return d.subset(order[:n_hold]), d.subset(order[n_hold:])
