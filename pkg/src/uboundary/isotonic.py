"""Weighted L2 isotonic regression by pool-adjacent-violators."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def pava(values, weights=None) -> np.ndarray:
    """Non-decreasing least-squares fit of ``values`` under positive ``weights``.

    Single left-to-right pass with a block stack; each output value is the
    weighted mean of the pooled block containing it.

    >>> pava([0.6, 0.4, 0.8]).tolist()
    [0.5, 0.5, 0.8]
    """
    y = np.asarray(values, dtype=np.float64)
    if y.ndim != 1 or len(y) == 0:
        raise ValueError("values must be a non-empty 1-D sequence")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != y.shape:
        raise ValueError("values and weights must have the same length")
    if not (w > 0).all():
        raise ValueError("weights must be strictly positive")

    # block stack: weighted sum, total weight, mean, length
    sums: list[float] = []
    wts: list[float] = []
    means: list[float] = []
    lens: list[int] = []
    for yt, wt in zip(y.tolist(), w.tolist()):
        s, tw, m, ln = yt * wt, wt, yt, 1
        while means and means[-1] > m:
            s += sums.pop()
            tw += wts.pop()
            ln += lens.pop()
            means.pop()
            m = s / tw
        sums.append(s)
        wts.append(tw)
        means.append(m)
        lens.append(ln)
    return np.repeat(np.array(means), lens)


def calibrate_level(bin_positives, bin_totals) -> np.ndarray:
    """Isotonic positivity rates for one uncertainty level of a grid.

    Fits ``p/n`` with weights ``n`` over populated bins. Empty bins take
    the fitted value of the nearest populated bin below them (0 when
    there is none). An all-empty level yields zeros and a warning.
    """
    p = np.asarray(bin_positives, dtype=np.float64)
    n = np.asarray(bin_totals, dtype=np.float64)
    if p.shape != n.shape or p.ndim != 1:
        raise ValueError("bin_positives and bin_totals must be equal-length 1-D")
    out = np.zeros(len(n))
    filled = n > 0
    if not filled.any():
        warnings.warn("uncertainty level has no samples; calibrated to zeros", RuntimeWarning, stacklevel=2)
        return out
    out[filled] = pava(p[filled] / n[filled], n[filled])
    last = 0.0
    for j in range(len(n)):
        if filled[j]:
            last = out[j]
        else:
            out[j] = last
    return out


@dataclass(frozen=True)
class IsotonicStep:
    """Step-function calibrator fitted on raw (score, label) samples.

    Prediction for an unseen score takes the fitted value of the largest
    training score not above it, clamping below the first knot.
    """

    knots: np.ndarray
    fitted: np.ndarray

    @classmethod
    def fit(cls, scores, labels) -> "IsotonicStep":
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if len(scores) == 0:
            return cls(np.array([0.0]), np.array([0.0]))
        knots, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
        rates = np.bincount(inverse, weights=labels, minlength=len(knots)) / counts
        return cls(knots, pava(rates, counts))

    def predict(self, scores) -> np.ndarray:
        idx = np.searchsorted(self.knots, np.asarray(scores, dtype=np.float64), side="right") - 1
        return self.fitted[np.clip(idx, 0, len(self.knots) - 1)]
