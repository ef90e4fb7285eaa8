"""Synthetic regions with a global Beta prior and undersampled training negatives.

Each region draws a true positivity rate, then independent train and
test label counts. The train draw undersamples negatives by ``tau``. Model
scores and uncertainties are those of a Beta posterior whose evidence
pseudo-counts equal the observed train class counts.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .dataset import Dataset, format_csv
from .theory import beta_entropy_array

BLOCK_SIZE = 1 << 16

TRUTH_COLUMNS = (
    "region",
    "s_true",
    "n_train",
    "k_train",
    "s_train",
    "n_test",
    "k_test",
    "s_test",
    "gamma",
    "score",
    "uncertainty",
)


@dataclass(frozen=True)
class GeneratorConfig:
    """Generator parameters.

    ``min_train_per_region`` switches the train size per region from the
    constant ``samples_per_region_train`` to a log-uniform integer in
    ``[min_train_per_region, samples_per_region_train]``; varying evidence
    is what makes gamma (and uncertainty) differ between regions.
    """

    n_regions: int
    samples_per_region_train: int
    samples_per_region_test: int
    beta1_T: float
    beta0_T: float
    beta1_P: float
    beta0_P: float
    tau: float = 1.0
    seed: int = 0
    min_train_per_region: int | None = None

    def __post_init__(self):
        if self.n_regions < 1:
            raise ValueError("n_regions must be positive")
        if self.samples_per_region_train < 1 or self.samples_per_region_test < 0:
            raise ValueError("need at least one train sample per region and non-negative test size")
        if not (self.beta1_T > 0 and self.beta0_T > 0):
            raise ValueError("global Beta prior parameters must be positive")
        if not (self.beta1_P > 0 and self.beta0_P > 0):
            raise ValueError("model prior pseudo-counts must be positive for a finite entropy")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        lo = self.min_train_per_region
        if lo is not None and not 1 <= lo <= self.samples_per_region_train:
            raise ValueError("min_train_per_region must lie in [1, samples_per_region_train]")

    @property
    def omega(self) -> float:
        return self.beta1_P / (self.beta1_P + self.beta0_P)

    @property
    def xi(self) -> float:
        return self.beta1_T / (self.beta1_T + self.beta0_T)

    @property
    def nu(self) -> float:
        return (self.beta1_T + self.beta0_T) / (self.beta1_P + self.beta0_P)

    def to_dict(self) -> dict:
        return asdict(self)


class Generated(NamedTuple):
    train: Dataset | None
    test: Dataset | None
    truth: dict[str, np.ndarray]


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _draw_block(cfg: GeneratorConfig, rng: np.random.Generator, size: int) -> dict[str, np.ndarray]:
    s_true = rng.beta(cfg.beta1_T, cfg.beta0_T, size)
    hi = cfg.samples_per_region_train
    if cfg.min_train_per_region is None or cfg.min_train_per_region == hi:
        n_train = np.full(size, hi, dtype=np.int64)
    else:
        log_n = rng.uniform(math.log(cfg.min_train_per_region), math.log(hi + 1), size)
        n_train = np.minimum(np.floor(np.exp(log_n)).astype(np.int64), hi)
    tau = cfg.tau
    p_train = tau * s_true / ((tau - 1.0) * s_true + 1.0)
    k_train = rng.binomial(n_train, p_train)
    n_test = np.full(size, cfg.samples_per_region_test, dtype=np.int64)
    k_test = rng.binomial(n_test, s_true)
    return {"s_true": s_true, "n_train": n_train, "k_train": k_train, "n_test": n_test, "k_test": k_test}


def generate(cfg: GeneratorConfig, emit_samples: bool = True) -> Generated:
    """Simulate ``cfg.n_regions`` regions.

    Randomness comes from one counter-based Philox stream per block of
    ``BLOCK_SIZE`` regions, keyed by ``(seed, block index)``, so output is
    identical however blocks are scheduled. With ``emit_samples=False``
    only the per-region truth table is built.
    """
    parts = []
    for block, start in enumerate(range(0, cfg.n_regions, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, cfg.n_regions - start)
        parts.append(_draw_block(cfg, _block_rng(cfg.seed, block), size))
    truth = {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}

    n_train, k_train = truth["n_train"], truth["k_train"]
    n_test, k_test = truth["n_test"], truth["k_test"]
    prior = cfg.beta1_P + cfg.beta0_P
    alpha1 = cfg.beta1_P + k_train
    alpha0 = cfg.beta0_P + (n_train - k_train)
    truth["region"] = np.arange(cfg.n_regions, dtype=np.int64)
    truth["s_train"] = k_train / n_train
    with np.errstate(invalid="ignore", divide="ignore"):
        truth["s_test"] = np.where(n_test > 0, k_test / np.maximum(n_test, 1), np.nan)
    truth["gamma"] = prior / n_train
    truth["score"] = alpha1 / (alpha1 + alpha0)
    truth["uncertainty"] = beta_entropy_array(alpha1, alpha0)
    truth = {key: truth[key] for key in TRUTH_COLUMNS}

    if not emit_samples:
        return Generated(None, None, truth)
    return Generated(
        _expand(truth["score"], truth["uncertainty"], n_train, k_train),
        _expand(truth["score"], truth["uncertainty"], n_test, k_test),
        truth,
    )


def _expand(score, unc, counts, positives) -> Dataset:
    """One sample per draw; within a region the positives come first."""
    scores = np.repeat(score, counts)
    uncs = np.repeat(unc, counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    rank = np.arange(int(counts.sum())) - starts
    labels = (rank < np.repeat(positives, counts)).astype(np.int64)
    return Dataset(scores, uncs, labels)


def truth_csv(truth: dict[str, np.ndarray]) -> str:
    cols = [truth[c].tolist() for c in TRUTH_COLUMNS]
    return format_csv(TRUTH_COLUMNS, zip(*cols))


class Stratum(NamedTuple):
    key: float
    gamma_bin: int
    count: int
    mean: float | None
    stderr: float | None


def conditional_positivity(truth, by: str = "train", gamma_edges=None, score_edges=None) -> list[Stratum]:
    """Mean test positivity per (conditioning value, gamma bin) stratum.

    ``by="train"`` groups on the exact train positivity; ``by="score"``
    groups on exact scores, or on score bins when ``score_edges`` is given
    (then ``key`` is the bin index and empty bins are reported with
    count 0 and mean ``None``). ``gamma_edges`` splits regions into
    ``len(gamma_edges) + 1`` gamma bins; regions with infinite gamma are
    dropped in that case.
    """
    if by not in ("train", "score"):
        raise ValueError("by must be 'train' or 'score'")
    s_test = np.asarray(truth["s_test"], dtype=np.float64)
    keep = ~np.isnan(s_test)
    gamma = np.asarray(truth["gamma"], dtype=np.float64)
    if gamma_edges is not None:
        keep &= np.isfinite(gamma)
        gbin = np.searchsorted(np.asarray(gamma_edges, dtype=np.float64), gamma, side="right")
        n_gamma = len(gamma_edges) + 1
    else:
        gbin = np.zeros(len(gamma), dtype=np.int64)
        n_gamma = 1

    values = np.asarray(truth["s_train" if by == "train" else "score"], dtype=np.float64)
    if by == "score" and score_edges is not None:
        keys = np.searchsorted(np.asarray(score_edges, dtype=np.float64), values, side="right").astype(np.float64)
        key_space = np.arange(len(score_edges) + 1, dtype=np.float64)
    else:
        keys = values
        key_space = None

    keys, gbin, s_test = keys[keep], gbin[keep], s_test[keep]
    uniq, inverse = np.unique(keys, return_inverse=True)
    slot = inverse * n_gamma + gbin
    size = len(uniq) * n_gamma
    count = np.bincount(slot, minlength=size)
    total = np.bincount(slot, weights=s_test, minlength=size)
    sq = np.bincount(slot, weights=s_test * s_test, minlength=size)

    found = {}
    for k_idx, key in enumerate(uniq.tolist()):
        for g in range(n_gamma):
            c = int(count[k_idx * n_gamma + g])
            if c == 0:
                continue
            mean = total[k_idx * n_gamma + g] / c
            se = None
            if c > 1:
                var = max(sq[k_idx * n_gamma + g] - c * mean * mean, 0.0) / (c - 1)
                se = math.sqrt(var / c)
            found[(key, g)] = Stratum(key, g, c, float(mean), se)

    space = uniq.tolist() if key_space is None else key_space.tolist()
    rows = []
    for key in space:
        for g in range(n_gamma):
            if (key, g) in found:
                rows.append(found[(key, g)])
            elif key_space is not None:
                rows.append(Stratum(key, g, 0, None, None))
    return rows
