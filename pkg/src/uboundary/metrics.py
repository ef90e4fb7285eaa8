"""Hold-out-to-test evaluation and per-bin calibration error.

Score-bin indices ``j`` in this module are 1-based, matching the
threshold convention (bin ``j`` is positive iff ``j > b(i)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .binning import Partitioner
from .boundary import BoundarySolution
from .dataset import Dataset
from .isotonic import IsotonicStep


class MetricsError(ValueError):
    pass


class ConfusionSummary(NamedTuple):
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    empty: bool = False


def predict(solution: BoundarySolution, d: Dataset) -> np.ndarray:
    """Boolean positive-region membership for every sample of ``d``."""
    if solution.partitioner is None:
        raise MetricsError("boundary has no partitioner; cannot assign unseen samples")
    rows, cols = solution.partitioner.bin_indices(d.scores, d.uncertainties)
    b = np.asarray(solution.thresholds, dtype=np.int64)
    return cols >= b[rows]


def test_eval(solution: BoundarySolution, test: Dataset) -> ConfusionSummary:
    """Confusion counts of a fitted boundary on unseen samples.

    An empty positive region reports precision 1.0 with ``empty=True``.
    """
    positive = predict(solution, test)
    labels = test.labels.astype(bool)
    tp = int((positive & labels).sum())
    fp = int((positive & ~labels).sum())
    fn = int((~positive & labels).sum())
    recall = tp / (tp + fn) if tp + fn else 0.0
    if tp + fp == 0:
        return ConfusionSummary(1.0, recall, 0, 0, fn, True)
    return ConfusionSummary(tp / (tp + fp), recall, tp, fp, fn)


# --------------------------------------------------------------------------
# Calibrators
# --------------------------------------------------------------------------


def ist_baseline(scores, labels) -> IsotonicStep:
    """One isotonic fit of label on score, ignoring uncertainty."""
    return IsotonicStep.fit(scores, labels)


@dataclass(frozen=True)
class MistCalibrator:
    """Separate isotonic fits per uncertainty level of a partitioner."""

    partitioner: Partitioner
    levels: tuple[IsotonicStep, ...]

    @classmethod
    def fit(cls, partitioner: Partitioner, d: Dataset) -> "MistCalibrator":
        rows, _ = partitioner.bin_indices(d.scores, d.uncertainties)
        levels = tuple(
            IsotonicStep.fit(d.scores[rows == i], d.labels[rows == i]) for i in range(partitioner.K)
        )
        return cls(partitioner, levels)

    def predict(self, scores, uncertainties) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        rows, _ = self.partitioner.bin_indices(scores, uncertainties)
        out = np.empty(len(scores))
        for i, level in enumerate(self.levels):
            mask = rows == i
            out[mask] = level.predict(scores[mask])
        return out


# --------------------------------------------------------------------------
# Calibration error
# --------------------------------------------------------------------------


def bin_calibration_errors(rows, cols, calibrated, labels, K: int, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-bin ``|mean(score - label)|`` (NaN where empty) and bin counts."""
    flat = np.asarray(rows) * L + np.asarray(cols)
    resid = np.asarray(calibrated, dtype=np.float64) - np.asarray(labels, dtype=np.float64)
    counts = np.bincount(flat, minlength=K * L).reshape(K, L)
    sums = np.bincount(flat, weights=resid, minlength=K * L).reshape(K, L)
    with np.errstate(invalid="ignore", divide="ignore"):
        ce = np.abs(sums / counts)
    ce[counts == 0] = np.nan
    return ce, counts


def ece_at_j(ce: np.ndarray, j: int) -> float:
    """Mean calibration error over the uncertainty levels of score bin ``j``.

    Empty bins are skipped and the mean taken over populated levels only.
    """
    column = ce[:, j - 1]
    column = column[~np.isnan(column)]
    if len(column) == 0:
        raise MetricsError(f"every bin in score column {j} is empty")
    return float(column.mean())


def cumulative_ece(ce: np.ndarray, j: int) -> float:
    """Mean calibration error over all populated bins with score index > ``j``.

    Returns NaN when no such bin is populated.
    """
    block = ce[:, j:]
    block = block[~np.isnan(block)]
    return float(block.mean()) if len(block) else math.nan


class CalibrationRow(NamedTuple):
    j: int
    ece: float
    cumulative_ece: float
    count: int


@dataclass(frozen=True)
class CalibrationReport:
    """ECE@j per score bin; ``cumulative_ece`` of row ``j`` averages bins ``>= j``."""

    method: str
    rows: tuple[CalibrationRow, ...]

    @classmethod
    def from_errors(cls, method: str, ce: np.ndarray, counts: np.ndarray) -> "CalibrationReport":
        L = ce.shape[1]
        rows = []
        for j in range(1, L + 1):
            try:
                e = ece_at_j(ce, j)
            except MetricsError:
                e = math.nan
            rows.append(CalibrationRow(j, e, cumulative_ece(ce, j - 1), int(counts[:, j - 1].sum())))
        return cls(method, tuple(rows))


def calibration_reports(partitioner: Partitioner, hold: Dataset, test: Dataset):
    """Fit MIST and IST calibrators on ``hold`` and score them on ``test``.

    Both reports bin the test samples with ``partitioner``.
    """
    mist = MistCalibrator.fit(partitioner, hold)
    ist = ist_baseline(hold.scores, hold.labels)
    rows, cols = partitioner.bin_indices(test.scores, test.uncertainties)
    K, L = partitioner.K, partitioner.L
    reports = {}
    for method, calibrated in (
        ("mist", mist.predict(test.scores, test.uncertainties)),
        ("ist", ist.predict(test.scores)),
    ):
        ce, counts = bin_calibration_errors(rows, cols, calibrated, test.labels, K, L)
        reports[method] = CalibrationReport.from_errors(method, ce, counts)
    return reports["mist"], reports["ist"]


def calibration_table(mist: CalibrationReport, ist: CalibrationReport) -> list[tuple]:
    """Rows ``(j, ece_mist, ece_ist, cum_ece_mist, cum_ece_ist, count)``."""
    return [
        (m.j, m.ece, i.ece, m.cumulative_ece, i.cumulative_ece, m.count)
        for m, i in zip(mist.rows, ist.rows)
    ]
