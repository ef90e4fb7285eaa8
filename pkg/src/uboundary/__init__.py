"""Recall-maximizing decision boundaries on score x uncertainty bin grids."""

from .binning import BinGrid, BinningSpec, Partitioner, fit_equi_span, fit_equi_weight
from .boundary import (
    ALGORITHMS,
    BoundaryError,
    BoundarySolution,
    brute_force_optimum,
    evaluate,
    pr_sweep,
    prune_chp,
    solve,
)
from .dataset import Dataset, DatasetError, load_csv, save_csv, split
from .isotonic import IsotonicStep, calibrate_level, pava

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "BinGrid",
    "BinningSpec",
    "BoundaryError",
    "BoundarySolution",
    "Dataset",
    "DatasetError",
    "IsotonicStep",
    "Partitioner",
    "brute_force_optimum",
    "calibrate_level",
    "evaluate",
    "fit_equi_span",
    "fit_equi_weight",
    "load_csv",
    "pava",
    "pr_sweep",
    "prune_chp",
    "save_csv",
    "solve",
    "split",
]
