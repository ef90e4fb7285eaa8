"""Order-preserving K x L partitions of the (uncertainty, score) plane.

Rows (``i``) index uncertainty levels, columns (``j``) index score bins.
Intervals are half-open ``[edge_t, edge_{t+1})`` with the outermost bins
open-ended, so out-of-range values clamp to the first or last bin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

EQUI_WEIGHT = "equi-weight"
EQUI_SPAN = "equi-span"
SCHEMES = (EQUI_WEIGHT, EQUI_SPAN)
PARTITIONER_VERSION = 1


class BinningError(ValueError):
    pass


@dataclass(frozen=True)
class BinningSpec:
    scheme: str
    K: int
    L: int

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise BinningError(f"unknown binning scheme {self.scheme!r}")
        if self.K < 1 or self.L < 1:
            raise BinningError("K and L must be positive")

    def fit(self, d: Dataset) -> tuple["Partitioner", "BinGrid"]:
        if self.scheme == EQUI_WEIGHT:
            return fit_equi_weight(d, self.K, self.L)
        return fit_equi_span(d, self.K, self.L)


@dataclass(frozen=True)
class Partitioner:
    """Bin edges for both axes.

    ``score_edges`` holds one edge list per uncertainty level for the
    equi-weight scheme, or a single shared list for equi-span.
    """

    scheme: str
    K: int
    L: int
    uncertainty_edges: tuple[float, ...]
    score_edges: tuple[tuple[float, ...], ...]
    degenerate: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.uncertainty_edges) != self.K - 1:
            raise BinningError("need K-1 uncertainty edges")
        if len(self.score_edges) not in (1, self.K):
            raise BinningError("score_edges must hold 1 shared list or K per-level lists")
        for edges in self.score_edges:
            if len(edges) != self.L - 1:
                raise BinningError("need L-1 score edges per list")
        for edges in (self.uncertainty_edges, *self.score_edges):
            if any(b < a for a, b in zip(edges, edges[1:])):
                raise BinningError("edges must be ascending")

    @property
    def shared_score_edges(self) -> bool:
        return len(self.score_edges) == 1

    def bin_indices(self, scores, uncertainties) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized assignment; returns 0-based (level, score-bin) arrays."""
        scores = np.asarray(scores, dtype=np.float64)
        unc = np.asarray(uncertainties, dtype=np.float64)
        rows = np.searchsorted(np.asarray(self.uncertainty_edges), unc, side="right")
        if self.shared_score_edges:
            cols = np.searchsorted(np.asarray(self.score_edges[0]), scores, side="right")
        else:
            cols = np.empty(len(scores), dtype=np.intp)
            for i, edges in enumerate(self.score_edges):
                mask = rows == i
                cols[mask] = np.searchsorted(np.asarray(edges), scores[mask], side="right")
        return rows.astype(np.int64), cols.astype(np.int64)

    def assign(self, s: float, u: float) -> tuple[int, int]:
        """Map one (score, uncertainty) pair to its 1-based bin ``(i, j)``."""
        rows, cols = self.bin_indices([s], [u])
        return int(rows[0]) + 1, int(cols[0]) + 1

    def aggregate(self, d: Dataset) -> "BinGrid":
        rows, cols = self.bin_indices(d.scores, d.uncertainties)
        return BinGrid.from_assignments(rows, cols, d.labels, self.K, self.L, partitioner=self)

    def to_dict(self) -> dict:
        return {
            "version": PARTITIONER_VERSION,
            "scheme": self.scheme,
            "K": self.K,
            "L": self.L,
            "uncertainty_edges": list(self.uncertainty_edges),
            "score_edges": [list(e) for e in self.score_edges],
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Partitioner":
        version = doc.get("version", PARTITIONER_VERSION)
        if version != PARTITIONER_VERSION:
            raise BinningError(f"unsupported partitioner version {version}")
        return cls(
            scheme=doc["scheme"],
            K=int(doc["K"]),
            L=int(doc["L"]),
            uncertainty_edges=tuple(float(x) for x in doc["uncertainty_edges"]),
            score_edges=tuple(tuple(float(x) for x in e) for e in doc["score_edges"]),
            degenerate=tuple(doc.get("degenerate", ())),
        )


@dataclass(frozen=True, eq=False)
class BinGrid:
    """Per-bin positive counts ``p`` and totals ``n`` (both K x L)."""

    p: np.ndarray
    n: np.ndarray
    partitioner: Partitioner | None = None

    def __post_init__(self):
        p = np.array(self.p, dtype=np.int64)
        n = np.array(self.n, dtype=np.int64)
        if p.ndim != 2 or p.shape != n.shape:
            raise BinningError("p and n must be matching 2-D arrays")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise BinningError("grid must have at least one bin")
        if (p < 0).any() or (p > n).any():
            raise BinningError("need 0 <= p(i,j) <= n(i,j)")
        p.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_assignments(cls, rows, cols, labels, K, L, partitioner=None) -> "BinGrid":
        flat = np.asarray(rows) * L + np.asarray(cols)
        n = np.bincount(flat, minlength=K * L).reshape(K, L)
        p = np.bincount(flat, weights=np.asarray(labels), minlength=K * L)
        return cls(np.rint(p).astype(np.int64).reshape(K, L), n, partitioner)

    @property
    def K(self) -> int:
        return self.p.shape[0]

    @property
    def L(self) -> int:
        return self.p.shape[1]

    @property
    def n_total(self) -> int:
        return int(self.n.sum())

    @property
    def n_positive(self) -> int:
        return int(self.p.sum())

    def weight_spread(self) -> int:
        """``max n(i,j) - min n(i,j)``; zero for an exactly equi-weight grid."""
        return int(self.n.max() - self.n.min())

    def collapse(self) -> "BinGrid":
        """Sum over uncertainty levels into a 1 x L grid (shared score edges only)."""
        part = None
        if self.partitioner is not None:
            if not self.partitioner.shared_score_edges:
                raise BinningError("cannot collapse a grid whose score edges differ per level")
            part = Partitioner(
                scheme=self.partitioner.scheme,
                K=1,
                L=self.L,
                uncertainty_edges=(),
                score_edges=self.partitioner.score_edges,
            )
        return BinGrid(self.p.sum(axis=0, keepdims=True), self.n.sum(axis=0, keepdims=True), part)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "L": self.L,
            "p": self.p.tolist(),
            "n": self.n.tolist(),
            "partitioner": None if self.partitioner is None else self.partitioner.to_dict(),
        }


def _chunk_sizes(total: int, parts: int) -> np.ndarray:
    """Rank-cut sizes; the first ``total % parts`` chunks get one extra."""
    base, extra = divmod(total, parts)
    return np.array([base + (1 if t < extra else 0) for t in range(parts)], dtype=np.int64)


def _between(lo: float, hi: float) -> float:
    """An edge separating ``lo`` (below) from ``hi`` (at or above)."""
    if hi <= lo:
        return hi
    mid = lo + (hi - lo) / 2.0
    return hi if mid <= lo else mid


def _quantile_cut(values: np.ndarray, parts: int) -> tuple[np.ndarray, list[float]]:
    """Stable rank-based cut of ``values`` into ``parts`` near-equal groups.

    Returns per-element group labels (in input order) and the value edges.
    Ties are broken by input position, which callers keep in original
    sample order.
    """
    order = np.argsort(values, kind="stable")
    sizes = _chunk_sizes(len(values), parts)
    labels = np.empty(len(values), dtype=np.int64)
    labels[order] = np.repeat(np.arange(parts), sizes)
    cuts = np.cumsum(sizes)[:-1]
    sorted_vals = values[order]
    edges = [_between(float(sorted_vals[c - 1]), float(sorted_vals[c])) for c in cuts]
    return labels, edges


def fit_equi_weight(d: Dataset, K: int, L: int) -> tuple[Partitioner, BinGrid]:
    """Nested quantile binning: K uncertainty quantiles, then L score quantiles per level.

    The fitted grid counts come from the rank cut itself, so bins are
    equal-sized up to the remainder rule even with heavily tied values.
    """
    BinningSpec(EQUI_WEIGHT, K, L)
    N = d.n_total
    if N == 0:
        raise BinningError("cannot bin an empty dataset")
    if K * L > N:
        raise BinningError(f"K*L = {K * L} exceeds the number of samples {N}")

    rows, u_edges = _quantile_cut(d.uncertainties, K)
    cols = np.empty(N, dtype=np.int64)
    score_edges = []
    for i in range(K):
        members = np.flatnonzero(rows == i)  # ascending original index
        level_cols, edges = _quantile_cut(d.scores[members], L)
        cols[members] = level_cols
        score_edges.append(tuple(edges))

    part = Partitioner(EQUI_WEIGHT, K, L, tuple(u_edges), tuple(score_edges))
    grid = BinGrid.from_assignments(rows, cols, d.labels, K, L, partitioner=part)
    return part, grid


def _span_edges(values: np.ndarray, parts: int, axis: str) -> tuple[list[float], bool]:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        if parts > 1:
            warnings.warn(f"constant {axis}: collapsing to a single bin", RuntimeWarning, stacklevel=3)
        return [], parts > 1
    width = (hi - lo) / parts
    return [lo + t * width for t in range(1, parts)], False


def fit_equi_span(d: Dataset, K: int, L: int) -> tuple[Partitioner, BinGrid]:
    """Equal-width intervals over the observed uncertainty and score ranges.

    A constant axis collapses to one bin and is recorded in
    ``Partitioner.degenerate``.
    """
    BinningSpec(EQUI_SPAN, K, L)
    if d.n_total == 0:
        raise BinningError("cannot bin an empty dataset")
    u_edges, u_flat = _span_edges(d.uncertainties, K, "uncertainty")
    s_edges, s_flat = _span_edges(d.scores, L, "score")
    degenerate = tuple(name for name, flag in (("uncertainty", u_flat), ("score", s_flat)) if flag)
    part = Partitioner(
        EQUI_SPAN,
        len(u_edges) + 1,
        len(s_edges) + 1,
        tuple(u_edges),
        (tuple(s_edges),),
        degenerate,
    )
    return part, part.aggregate(d)


def fit(d: Dataset, scheme: str, K: int, L: int) -> tuple[Partitioner, BinGrid]:
    return BinningSpec(scheme, K, L).fit(d)
