"""Score estimation bias for a Beta-posterior (evidential) binary classifier.

Symbols, all ratios of Beta pseudo-counts:

omega   model-prior positive fraction  b1P / (b1P + b0P)
xi      global-prior positive fraction b1T / (b1T + b0T)
nu      global prior mass : model prior mass
gamma   model prior mass : evidence
lambda  global prior mass : evidence   (= nu * gamma)
tau     negative-class undersampling factor used for training
n       evidence, the pseudo-count total b1(x) + b0(x)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma, expit

DEFAULT_NODES = 4096
TAIL_DROP = 60.0  # log-density span covered on either side of the mode


class OutsideValidRange(ValueError):
    pass


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (error estimate {error_estimate:.3g})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class TheoryParams:
    omega: float
    xi: float
    nu: float
    tau: float
    gamma: float
    n_evidence: float

    def __post_init__(self):
        for name in ("omega", "xi"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("nu", "tau", "n_evidence"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be non-negative and finite, got {self.gamma}")

    @property
    def lam(self) -> float:
        return self.nu * self.gamma


@dataclass(frozen=True)
class BetaParams:
    alpha1: float
    alpha0: float

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha0 > 0):
            raise ValueError("Beta parameters must be positive")


def model_score(beta1_P: float, beta0_P: float, beta1_x: float, beta0_x: float) -> float:
    """Posterior mean of the positive-class probability."""
    if min(beta1_P, beta0_P, beta1_x, beta0_x) < 0:
        raise ValueError("pseudo-counts must be non-negative")
    total = beta1_P + beta0_P + beta1_x + beta0_x
    if total <= 0:
        raise ZeroDivisionError("model score undefined with zero total pseudo-count")
    return (beta1_P + beta1_x) / total


def valid_score_range(omega: float, gamma: float) -> tuple[float, float]:
    """Model scores reachable for prior fraction ``omega`` at prior:evidence ``gamma``."""
    return omega * gamma / (1.0 + gamma), (1.0 + omega * gamma) / (1.0 + gamma)


def train_from_model(s_model: float, omega: float, gamma: float) -> float:
    """Train positivity implied by a model score: ``s - (omega - s) * gamma``."""
    s_train = s_model - (omega - s_model) * gamma
    # round-off at the range ends
    if -1e-12 < s_train < 0.0:
        s_train = 0.0
    elif 1.0 < s_train < 1.0 + 1e-12:
        s_train = 1.0
    if not 0.0 <= s_train <= 1.0:
        lo, hi = valid_score_range(omega, gamma)
        raise OutsideValidRange(
            f"score {s_model} outside valid range [{lo:.6g}, {hi:.6g}] for omega={omega}, gamma={gamma}"
        )
    return s_train


def bias_closed_form_tau1(s_model: float, params: TheoryParams) -> float:
    """Model score minus expected test positivity when there is no undersampling.

    ``params.tau`` is ignored. The formula is evaluated as is; it does not
    check that the score is reachable.
    """
    p = params
    return (s_model * (p.nu - 1.0) + p.omega - p.xi * p.nu) * p.gamma / (1.0 + p.nu * p.gamma)


def expected_positivity_tau1(s_train: float, lam: float, xi: float) -> float:
    return (s_train + xi * lam) / (1.0 + lam)


def _log_integrand(t: np.ndarray, a: float, b: float, n: float, tau: float) -> np.ndarray:
    # r = logistic(t); r^a (1-r)^b (1 + (tau-1) r)^-n, Jacobian r(1-r) folded in
    log_r = -np.logaddexp(0.0, -t)
    log_1mr = -np.logaddexp(0.0, t)
    out = a * log_r + b * log_1mr
    if tau != 1.0:
        out = out - n * np.log1p((tau - 1.0) * np.exp(log_r))
    return out


def _mode(a: float, b: float, n: float, tau: float) -> float:
    """Maximizer of the log integrand in logit space (it is unimodal there)."""
    lo, hi = -800.0, 800.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = float(expit(mid))
        # derivative of the log integrand w.r.t. t
        slope = a * (1.0 - r) - b * r - n * (tau - 1.0) * r * (1.0 - r) / (1.0 + (tau - 1.0) * r)
        if slope > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def _reach(f, t0: float, peak: float, direction: float) -> float:
    """Distance from ``t0`` along ``direction`` until log f drops by TAIL_DROP."""
    step = 1e-3
    while step < 1e5:
        if peak - f(np.array([t0 + direction * step]))[0] > TAIL_DROP:
            break
        step *= 2.0
    lo, hi = step / 2.0, step
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if peak - f(np.array([t0 + direction * mid]))[0] > TAIL_DROP:
            hi = mid
        else:
            lo = mid
    return hi


def _trapezoid_moments(f, lo: float, hi: float, nodes: int) -> tuple[float, float, float, float]:
    t = np.linspace(lo, hi, nodes)
    log_f = f(t)
    shift = log_f.max()
    w = np.exp(log_f - shift)
    r = expit(t)
    full = (w.sum(), (w * r).sum())
    half = (w[::2].sum(), (w[::2] * r[::2]).sum())
    return full[0], full[1], half[0], half[1]


def expected_positivity_general_tau(
    s_train: float,
    params: TheoryParams,
    nodes: int = DEFAULT_NODES,
    rtol: float = 1e-10,
    max_nodes: int = 2**20,
) -> float:
    """Mean of ``Q(r) ~ Beta(r; n(xi*lam + s), n((1-xi)*lam + 1 - s)) / (1 + (tau-1) r)^n``.

    The expectation is the ratio of two integrals, so the normalizing
    constant never appears. Integration runs in logit space, where both
    Beta endpoint singularities become exponentially decaying tails, over
    the window where the log integrand is within ``TAIL_DROP`` of its
    peak. The trapezoid rule is repeated with doubled node counts until
    the full-grid and half-grid estimates agree to ``rtol``.
    """
    if not 0.0 <= s_train <= 1.0:
        raise ValueError(f"train positivity must lie in [0, 1], got {s_train}")
    p = params
    lam = p.lam
    n = p.n_evidence
    a = n * (p.xi * lam + s_train)
    b = n * ((1.0 - p.xi) * lam + 1.0 - s_train)
    if a <= 0 or b <= 0:
        # zero prior mass and a degenerate train rate pin the posterior at an endpoint
        return float(s_train)

    def f(t):
        return _log_integrand(t, a, b, n, p.tau)

    t0 = _mode(a, b, n, p.tau)
    peak = f(np.array([t0]))[0]
    lo = t0 - _reach(f, t0, peak, -1.0)
    hi = t0 + _reach(f, t0, peak, +1.0)

    err = math.inf
    while nodes <= max_nodes:
        z, zr, z_half, zr_half = _trapezoid_moments(f, lo, hi, nodes)
        mean = zr / z
        err = abs(mean - zr_half / z_half)
        if err <= rtol * max(mean, 1e-300):
            return float(mean)
        nodes = 2 * nodes - 1
    raise QuadratureError("positivity quadrature did not converge", err)


def beta_entropy(b: BetaParams) -> float:
    """Differential entropy of ``Beta(alpha1, alpha0)`` in nats."""
    a1, a0 = b.alpha1, b.alpha0
    total = a1 + a0
    return float(
        betaln(a0, a1)
        + (total - 2.0) * digamma(total)
        - (a1 - 1.0) * digamma(a1)
        - (a0 - 1.0) * digamma(a0)
    )


def beta_entropy_array(alpha1, alpha0) -> np.ndarray:
    """Vectorized :func:`beta_entropy`."""
    a1 = np.asarray(alpha1, dtype=np.float64)
    a0 = np.asarray(alpha0, dtype=np.float64)
    total = a1 + a0
    return betaln(a0, a1) + (total - 2.0) * digamma(total) - (a1 - 1.0) * digamma(a1) - (a0 - 1.0) * digamma(a0)


def expected_positivity_from_score(s_model: float, params: TheoryParams) -> float:
    s_train = train_from_model(s_model, params.omega, params.gamma)
    return expected_positivity_general_tau(s_train, params)


def bias_curve(params: TheoryParams, s_grid) -> list[tuple[float, float, float, float]]:
    """Rows ``(s, gamma, tau, expected test positivity)`` over a score grid."""
    return [
        (float(s), params.gamma, params.tau, expected_positivity_from_score(float(s), params))
        for s in s_grid
    ]


def score_grid(omega: float, gamma: float, points: int) -> np.ndarray:
    """Evenly spaced scores spanning the valid range, endpoints included."""
    lo, hi = valid_score_range(omega, gamma)
    return np.linspace(lo, hi, points)
