"""Recall-maximizing decision boundaries over a score x uncertainty bin grid.

A boundary is a vector of K thresholds ``b(i)`` in ``[0, L]``. Level ``i``
labels score bin ``j`` (1-based) positive iff ``j > b(i)``; equivalently
the 0-based columns ``b(i) .. L-1``. ``b(i) = L`` selects nothing and
``b(i) = 0`` selects the whole level.

Every solver maximizes true positives on the fitting grid subject to
``tp / selected_n >= sigma``:

* ST       single score threshold shared by all levels
* GMT      best threshold per level, chosen independently
* MIST     per-level isotonic recalibration, then one global cut
* EW-DPMT  exact DP over a bin budget (equal-size bins)
* VW-DPMT  exact DP over a sample budget (any bin sizes), sparse states
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .binning import BinGrid, Partitioner, fit_equi_weight
from .dataset import Dataset
from .isotonic import calibrate_level

ALGORITHMS = ("st", "gmt", "mist", "ew-dpmt", "vw-dpmt")
BRUTE_FORCE_LIMIT = 10**7


class BoundaryError(ValueError):
    pass


class Evaluation(NamedTuple):
    tp: int
    selected_n: int
    precision: float
    recall: float
    empty: bool


@dataclass(frozen=True)
class BoundarySolution:
    algorithm: str
    sigma: float
    thresholds: tuple[int, ...]
    tp: int
    selected_n: int
    precision_fit: float
    recall_fit: float
    feasible: bool
    empty: bool = False
    partitioner: Partitioner | None = field(default=None, compare=False)

    @property
    def K(self) -> int:
        return len(self.thresholds)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "sigma": self.sigma,
            "thresholds": list(self.thresholds),
            "tp": self.tp,
            "selected_n": self.selected_n,
            "precision_fit": self.precision_fit,
            "recall_fit": self.recall_fit,
            "feasible": self.feasible,
            "empty": self.empty,
            "partitioner": None if self.partitioner is None else self.partitioner.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BoundarySolution":
        part = doc.get("partitioner")
        return cls(
            algorithm=doc["algorithm"],
            sigma=float(doc["sigma"]),
            thresholds=tuple(int(b) for b in doc["thresholds"]),
            tp=int(doc["tp"]),
            selected_n=int(doc["selected_n"]),
            precision_fit=float(doc["precision_fit"]),
            recall_fit=float(doc["recall_fit"]),
            feasible=bool(doc.get("feasible", True)),
            empty=bool(doc.get("empty", False)),
            partitioner=None if part is None else Partitioner.from_dict(part),
        )


class PRPoint(NamedTuple):
    sigma: float
    cut: int  # samples in the positive region
    tp: int
    precision: float
    recall: float
    feasible: bool
    thresholds: tuple[int, ...]


def meets(tp: int, selected_n: int, sigma: float) -> bool:
    """Precision test shared by every solver and the brute-force oracle."""
    return selected_n > 0 and tp / selected_n >= sigma


def suffix_sums(counts: np.ndarray) -> np.ndarray:
    """``out[i, j]`` = sum of the top ``j`` score bins of level ``i`` (j = 0..L)."""
    counts = np.asarray(counts, dtype=np.int64)
    out = np.zeros((counts.shape[0], counts.shape[1] + 1), dtype=np.int64)
    out[:, 1:] = np.cumsum(counts[:, ::-1], axis=1)
    return out


def evaluate(grid: BinGrid, thresholds) -> Evaluation:
    """Fitting-grid confusion summary of a boundary.

    An empty positive region reports precision 1.0 with ``empty=True``.
    """
    b = np.asarray(thresholds, dtype=np.int64)
    if b.shape != (grid.K,) or (b < 0).any() or (b > grid.L).any():
        raise BoundaryError(f"thresholds must be {grid.K} integers in [0, {grid.L}]")
    selected = np.arange(grid.L)[None, :] >= b[:, None]
    tp = int(grid.p[selected].sum())
    sel_n = int(grid.n[selected].sum())
    positives = grid.n_positive
    recall = tp / positives if positives else 0.0
    if sel_n == 0:
        return Evaluation(tp, 0, 1.0, recall, True)
    return Evaluation(tp, sel_n, tp / sel_n, recall, False)


def _solution(grid: BinGrid, algorithm: str, sigma: float, thresholds, feasible=None, partitioner=None):
    thresholds = tuple(int(t) for t in thresholds)
    ev = evaluate(grid, thresholds)
    if feasible is None:
        feasible = meets(ev.tp, ev.selected_n, sigma)
    return BoundarySolution(
        algorithm=algorithm,
        sigma=float(sigma),
        thresholds=thresholds,
        tp=ev.tp,
        selected_n=ev.selected_n,
        precision_fit=ev.precision,
        recall_fit=ev.recall,
        feasible=bool(feasible),
        empty=ev.empty,
        partitioner=grid.partitioner if partitioner is None else partitioner,
    )


def _infeasible(grid: BinGrid, algorithm: str, sigma: float, partitioner=None) -> BoundarySolution:
    return _solution(grid, algorithm, sigma, [grid.L] * grid.K, feasible=False, partitioner=partitioner)


def _check_sigma(sigma: float) -> None:
    if not 0.0 <= sigma <= 1.0:
        raise BoundaryError(f"sigma must lie in [0, 1], got {sigma}")


# --------------------------------------------------------------------------
# Greedy solvers
# --------------------------------------------------------------------------


def _gmt_thresholds(grid: BinGrid, sigma: float) -> list[int]:
    pi = suffix_sums(grid.p)
    nu = suffix_sums(grid.n)
    out = []
    for i in range(grid.K):
        best_j, best_tp = 0, -1
        for j in range(1, grid.L + 1):
            if pi[i, j] > best_tp and meets(int(pi[i, j]), int(nu[i, j]), sigma):
                best_j, best_tp = j, int(pi[i, j])
        out.append(grid.L - best_j)
    return out


def solve_gmt(grid: BinGrid, sigma: float) -> BoundarySolution:
    """Per-level greedy thresholds; each level keeps its best feasible suffix.

    Ties between suffixes with equal positives go to the shorter suffix.
    """
    _check_sigma(sigma)
    return _solution(grid, "gmt", sigma, _gmt_thresholds(grid, sigma))


def solve_st(grid: BinGrid, sigma: float, dataset: Dataset | None = None, n_bins: int | None = None):
    """Single score threshold shared by all uncertainty levels.

    When the grid's score edges are shared (equi-span, or a bare grid
    without a partitioner) the levels are summed and the threshold is
    returned on the original grid as ``[t] * K``. Per-level score edges
    (equi-weight) have no common threshold, so the samples are re-binned
    on score alone into ``n_bins`` (default L) quantiles and the solution
    carries that 1 x L' partitioner instead.
    """
    _check_sigma(sigma)
    part = grid.partitioner
    if part is None or part.shared_score_edges:
        t = _gmt_thresholds(grid.collapse(), sigma)[0]
        return _solution(grid, "st", sigma, [t] * grid.K)
    if dataset is None:
        raise BoundaryError("ST on per-level score edges needs the dataset to re-bin scores")
    flat = Dataset(dataset.scores, np.zeros(dataset.n_total), dataset.labels)
    _, st_grid = fit_equi_weight(flat, 1, n_bins or grid.L)
    return _solution(st_grid, "st", sigma, _gmt_thresholds(st_grid, sigma))


def mist_calibration(grid: BinGrid) -> np.ndarray:
    """K x L matrix of per-level isotonic positivity rates."""
    return np.vstack([calibrate_level(grid.p[i], grid.n[i]) for i in range(grid.K)])


def mist_order(s_iso: np.ndarray) -> list[tuple[int, int]]:
    """Bins by calibrated rate, descending.

    Ties go to the lower uncertainty level first, then the higher score bin.
    """
    K, L = s_iso.shape
    cells = [(i, j) for i in range(K) for j in range(L)]
    return sorted(cells, key=lambda c: (-s_iso[c], c[0], -c[1]))


def solve_mist(grid: BinGrid, sigma: float) -> BoundarySolution:
    """Global cut on per-level isotonic rates.

    Bins are taken in calibrated order while the calibrated precision
    ``sum(s_iso * n) / sum(n)`` stays at or above sigma; the first bin
    that breaks it stops the scan. Calibrated rates are non-decreasing
    within a level, so each level's selection is a score suffix.
    """
    _check_sigma(sigma)
    s_iso = mist_calibration(grid)
    selected = np.zeros(grid.p.shape, dtype=bool)
    cum_pi = 0.0
    cum_nu = 0
    for i, j in mist_order(s_iso):
        n_ij = int(grid.n[i, j])
        next_pi = cum_pi + s_iso[i, j] * n_ij
        next_nu = cum_nu + n_ij
        if next_nu > 0 and next_pi / next_nu < sigma:
            break
        cum_pi, cum_nu = next_pi, next_nu
        selected[i, j] = True
    thresholds = []
    for i in range(grid.K):
        cols = np.flatnonzero(selected[i])
        thresholds.append(int(cols.min()) if len(cols) else grid.L)
    return _solution(grid, "mist", sigma, thresholds)


# --------------------------------------------------------------------------
# Exact dynamic programs
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BinBudgetTable:
    """EW-DPMT table: best positives ``R[m]`` using exactly ``m`` bins.

    ``choice[i][m]`` is the number of top bins taken from level ``i`` in
    the optimum for budget ``m`` over levels ``0..i``.
    """

    grid: BinGrid
    R: np.ndarray
    choice: list[np.ndarray]
    exact: bool

    def thresholds(self, m: int) -> list[int]:
        L = self.grid.L
        out = [L] * self.grid.K
        for i in range(self.grid.K - 1, -1, -1):
            j = int(self.choice[i][m])
            out[i] = L - j
            m -= j
        return out

    def selected_n(self, m: int) -> int:
        if self.exact:
            return m * int(self.grid.n[0, 0])
        return evaluate(self.grid, self.thresholds(m)).selected_n

    def best_budget(self, sigma: float) -> int | None:
        """Largest feasible budget among those with the most positives.

        ``R`` is non-decreasing in ``m``, so this is the largest ``m``
        that meets the precision bound. ``m = 0`` never qualifies.
        """
        best = None
        for m in range(1, len(self.R)):
            if meets(int(self.R[m]), self.selected_n(m), sigma):
                if best is None or self.R[m] >= self.R[best]:
                    best = m
        return best

    def pr_curve(self) -> list[tuple[int, int, int]]:
        """``(m, positives, selected samples)`` for every budget."""
        return [(m, int(self.R[m]), self.selected_n(m)) for m in range(len(self.R))]


def ew_dpmt_table(grid: BinGrid, tolerance: int = 1) -> BinBudgetTable:
    """Fill the bin-budget DP for an (almost) equi-weight grid.

    ``R(i, m) = max_j pi(i, j) + R(i-1, m-j)``; ties keep the smallest j.
    A grid whose bin sizes differ by at most ``tolerance`` is accepted
    with ``exact=False`` and precision is then checked on actual counts.
    """
    spread = grid.weight_spread()
    if spread > tolerance:
        raise BoundaryError(
            f"EW-DPMT needs equal-size bins (size spread {spread}); use vw-dpmt for variable-weight grids"
        )
    K, L = grid.K, grid.L
    pi = suffix_sums(grid.p)
    R = pi[0].copy()
    choice = [np.arange(L + 1, dtype=np.int64)]
    for i in range(1, K):
        width = (i + 1) * L + 1
        new_R = np.full(width, -1, dtype=np.int64)
        new_choice = np.zeros(width, dtype=np.int64)
        for j in range(L + 1):
            cand = R + pi[i, j]
            window = new_R[j : j + len(R)]
            better = cand > window
            window[better] = cand[better]
            new_choice[j : j + len(R)][better] = j
        R, choice = new_R, choice + [new_choice]
    return BinBudgetTable(grid, R, choice, exact=spread == 0)


def solve_ew_dpmt(grid: BinGrid, sigma: float, table: BinBudgetTable | None = None):
    """Optimal boundary for equal-size bins.

    Returns ``(solution, table)``; ``table.pr_curve()`` is the full
    budget/positives curve and can be reused across sigma values.
    """
    _check_sigma(sigma)
    table = table or ew_dpmt_table(grid)
    m = table.best_budget(sigma)
    if m is None:
        return _infeasible(grid, "ew-dpmt", sigma), table
    return _solution(grid, "ew-dpmt", sigma, table.thresholds(m)), table


@dataclass(frozen=True, eq=False)
class SampleBudgetTable:
    """VW-DPMT sparse states: for each level, reachable sample budgets.

    ``budgets[i]`` is sorted; ``best[i][k]`` is the max positives for
    exactly ``budgets[i][k]`` samples over levels ``0..i``, and
    ``choice[i][k]`` the number of top bins taken at level ``i``.
    """

    grid: BinGrid
    budgets: list[np.ndarray]
    best: list[np.ndarray]
    choice: list[np.ndarray]

    def thresholds(self, k: int) -> list[int]:
        L = self.grid.L
        nu = suffix_sums(self.grid.n)
        out = [L] * self.grid.K
        m = int(self.budgets[-1][k])
        for i in range(self.grid.K - 1, -1, -1):
            k = int(np.searchsorted(self.budgets[i], m))
            j = int(self.choice[i][k])
            out[i] = L - j
            m -= int(nu[i, j])
        return out

    def best_state(self, sigma: float) -> int | None:
        ms, rs = self.budgets[-1], self.best[-1]
        ok = (ms > 0) & (rs / np.maximum(ms, 1) >= sigma)
        if not ok.any():
            return None
        top = rs[ok].max()
        return int(np.flatnonzero(ok & (rs == top))[-1])


def vw_dpmt_table(grid: BinGrid) -> SampleBudgetTable:
    """Fill the sample-budget DP, tracking only reachable budgets.

    ``R(i, m) = max_j pi(i, j) + R(i-1, m - nu(i, j))``. Each level is
    relaxed into a scratch buffer indexed by budget; only budgets that
    some boundary can reach are kept as states. Ties keep the smallest j.
    """
    K, L = grid.K, grid.L
    pi = suffix_sums(grid.p)
    nu = suffix_sums(grid.n)

    # level 0: one state per suffix length (dedupe empty bins, keep smallest j)
    ms, first = np.unique(nu[0], return_index=True)
    budgets = [ms]
    best = [pi[0][first]]
    choice = [first.astype(np.int64)]
    for i in range(1, K):
        prev_m, prev_r = budgets[-1], best[-1]
        size = int(prev_m[-1] + nu[i, L]) + 1
        buf = np.full(size, -1, dtype=np.int64)
        pick = np.zeros(size, dtype=np.int64)
        for j in range(L + 1):
            idx = prev_m + nu[i, j]
            cand = prev_r + pi[i, j]
            better = cand > buf[idx]
            buf[idx[better]] = cand[better]
            pick[idx[better]] = j
        reach = np.flatnonzero(buf >= 0)
        budgets.append(reach)
        best.append(buf[reach])
        choice.append(pick[reach])
    return SampleBudgetTable(grid, budgets, best, choice)


def solve_vw_dpmt(grid: BinGrid, sigma: float, table: SampleBudgetTable | None = None) -> BoundarySolution:
    """Optimal boundary for arbitrary bin sizes (pseudo-polynomial in N)."""
    _check_sigma(sigma)
    table = table or vw_dpmt_table(grid)
    k = table.best_state(sigma)
    if k is None:
        return _infeasible(grid, "vw-dpmt", sigma)
    return _solution(grid, "vw-dpmt", sigma, table.thresholds(k))


# --------------------------------------------------------------------------
# Post-processing, sweeps, oracle
# --------------------------------------------------------------------------


def chp_thresholds(grid: BinGrid, sigma: float) -> list[int]:
    """Smallest threshold per level whose whole score suffix has bin positivity >= sigma.

    An empty bin ends the contiguous run.
    """
    out = []
    for i in range(grid.K):
        b = grid.L
        while b > 0 and grid.n[i, b - 1] > 0 and grid.p[i, b - 1] / grid.n[i, b - 1] >= sigma:
            b -= 1
        out.append(b)
    return out


def prune_chp(grid: BinGrid, sigma: float, thresholds) -> list[int]:
    """Extend a feasible boundary by each level's contiguous high-precision suffix.

    The added bins each have positivity >= sigma, so precision stays above
    the bound and recall cannot drop.
    """
    return [min(int(b), c) for b, c in zip(thresholds, chp_thresholds(grid, sigma))]


def solve(grid: BinGrid, algorithm: str, sigma: float, dataset: Dataset | None = None) -> BoundarySolution:
    if algorithm == "st":
        return solve_st(grid, sigma, dataset)
    if algorithm == "gmt":
        return solve_gmt(grid, sigma)
    if algorithm == "mist":
        return solve_mist(grid, sigma)
    if algorithm == "ew-dpmt":
        return solve_ew_dpmt(grid, sigma)[0]
    if algorithm == "vw-dpmt":
        return solve_vw_dpmt(grid, sigma)
    raise BoundaryError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")


def pr_sweep(grid: BinGrid, algorithm: str, sigmas, dataset: Dataset | None = None) -> list[PRPoint]:
    """One solution per sigma (duplicates kept). DP tables are built once."""
    table = None
    if algorithm == "ew-dpmt":
        table = ew_dpmt_table(grid)
    elif algorithm == "vw-dpmt":
        table = vw_dpmt_table(grid)
    points = []
    for sigma in sigmas:
        if not 0.0 < sigma <= 1.0:
            raise BoundaryError(f"sweep sigma must lie in (0, 1], got {sigma}")
        if algorithm == "ew-dpmt":
            sol = solve_ew_dpmt(grid, sigma, table)[0]
        elif algorithm == "vw-dpmt":
            sol = solve_vw_dpmt(grid, sigma, table)
        else:
            sol = solve(grid, algorithm, sigma, dataset)
        points.append(
            PRPoint(sigma, sol.selected_n, sol.tp, sol.precision_fit, sol.recall_fit, sol.feasible, sol.thresholds)
        )
    return points


def brute_force_optimum(grid: BinGrid, sigma: float) -> BoundarySolution:
    """Exhaustive search over all ``(L+1)^K`` boundaries (test oracle).

    Ties: fewer selected samples, then lexicographically smallest thresholds.
    """
    _check_sigma(sigma)
    K, L = grid.K, grid.L
    if (L + 1) ** K > BRUTE_FORCE_LIMIT:
        raise BoundaryError(f"(L+1)^K = {(L + 1) ** K} boundaries exceed the brute-force limit")
    pi = suffix_sums(grid.p).tolist()
    nu = suffix_sums(grid.n).tolist()
    best_key, best_b = None, None
    for b in itertools.product(range(L + 1), repeat=K):
        tp = sum(pi[i][L - b[i]] for i in range(K))
        sel = sum(nu[i][L - b[i]] for i in range(K))
        if not meets(tp, sel, sigma):
            continue
        key = (-tp, sel, b)
        if best_key is None or key < best_key:
            best_key, best_b = key, b
    if best_b is None:
        return _infeasible(grid, "brute-force", sigma)
    return _solution(grid, "brute-force", sigma, best_b)


def with_pruning(sol: BoundarySolution, grid: BinGrid) -> BoundarySolution:
    """Return ``sol`` with its thresholds extended by :func:`prune_chp`."""
    if not sol.feasible:
        return sol
    return _solution(grid, sol.algorithm, sol.sigma, prune_chp(grid, sol.sigma, sol.thresholds))
