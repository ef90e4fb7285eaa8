import math

import numpy as np
import pytest

from uboundary import simulate, theory


def config(**kw):
    base = dict(
        n_regions=2000,
        samples_per_region_train=20,
        samples_per_region_test=5,
        beta1_T=1.0,
        beta0_T=3.0,
        beta1_P=1.0,
        beta0_P=1.0,
        tau=2.0,
        seed=3,
    )
    base.update(kw)
    return simulate.GeneratorConfig(**base)


def test_same_seed_same_output():
    a, b = simulate.generate(config()), simulate.generate(config())
    for key in simulate.TRUTH_COLUMNS:
        assert np.array_equal(a.truth[key], b.truth[key], equal_nan=True)
    assert a.train.samples == b.train.samples
    c = simulate.generate(config(seed=4))
    assert not np.array_equal(a.truth["s_true"], c.truth["s_true"])


def test_blocks_are_independent_of_total():
    # a full block's stream does not depend on how many regions follow it
    B = simulate.BLOCK_SIZE
    one = simulate.generate(config(n_regions=B), emit_samples=False).truth
    more = simulate.generate(config(n_regions=B + 50), emit_samples=False).truth
    assert np.array_equal(one["k_train"], more["k_train"][:B])
    assert np.array_equal(one["s_true"], more["s_true"][:B])


def test_samples_match_truth():
    g = simulate.generate(config(min_train_per_region=2))
    t = g.truth
    assert g.train.n_total == t["n_train"].sum() and g.train.n_positive == t["k_train"].sum()
    assert g.test.n_total == t["n_test"].sum() and g.test.n_positive == t["k_test"].sum()
    assert set(np.unique(g.train.scores)) <= set(t["score"])
    assert t["n_train"].min() >= 2 and t["n_train"].max() <= 20
    assert len(np.unique(t["gamma"])) > 1


def test_score_and_uncertainty_formulas():
    t = simulate.generate(config(), emit_samples=False).truth
    i = 17
    a1 = 1.0 + t["k_train"][i]
    a0 = 1.0 + t["n_train"][i] - t["k_train"][i]
    assert t["score"][i] == pytest.approx(theory.model_score(1.0, 1.0, t["k_train"][i], a0 - 1.0))
    assert t["uncertainty"][i] == pytest.approx(theory.beta_entropy(theory.BetaParams(a1, a0)))
    assert t["gamma"][i] == pytest.approx(2.0 / t["n_train"][i])


def test_large_train_score_tracks_truth():
    n = 20_000
    t = simulate.generate(
        config(n_regions=500, samples_per_region_train=n, tau=1.0, beta1_P=0.01, beta0_P=0.01), emit_samples=False
    ).truth
    s = t["s_true"]
    tol = 3 * np.sqrt(s * (1 - s) / n) + 1e-5
    assert (np.abs(t["score"] - s) <= tol).mean() >= 0.99


def test_no_bias_when_priors_match():
    # tau = 1 and the model prior equals the global prior: score is the conditional mean
    g = simulate.generate(
        config(
            n_regions=100_000,
            samples_per_region_train=10,
            samples_per_region_test=10,
            beta1_T=2.0,
            beta0_T=3.0,
            beta1_P=2.0,
            beta0_P=3.0,
            tau=1.0,
            min_train_per_region=1,
        )
    )
    assert g.test.n_total == 1_000_000
    edges = np.linspace(0, 1, 11)[1:-1]
    rows = simulate.conditional_positivity(g.truth, by="score", score_edges=edges)
    bucket = np.searchsorted(edges, g.truth["score"], side="right")
    for row in rows:
        if row.count < 1000:
            continue
        mean_score = g.truth["score"][bucket == row.key].mean()
        assert abs(row.mean - mean_score) <= 0.02


def test_tau1_strata_match_theory():
    n = 30
    cfg = config(
        n_regions=300_000,
        samples_per_region_train=n,
        samples_per_region_test=20,
        beta1_T=3.0,
        beta0_T=9.0,
        beta1_P=6.0,
        beta0_P=6.0,
        tau=1.0,
    )
    t = simulate.generate(cfg, emit_samples=False).truth
    p = theory.TheoryParams(cfg.omega, cfg.xi, cfg.nu, 1.0, 12.0 / n, float(n))
    rows = [r for r in simulate.conditional_positivity(t, by="train") if r.count >= 2000]
    assert len(rows) >= 5
    misses = sum(abs(r.mean - theory.expected_positivity_tau1(r.key, p.lam, p.xi)) > 3 * r.stderr for r in rows)
    assert misses <= max(1, len(rows) // 10)


def test_test_positivity_tracks_true_positivity():
    t = simulate.generate(config(n_regions=200_000, samples_per_region_test=10), emit_samples=False).truth
    test_rows = {r.key: r for r in simulate.conditional_positivity(t, by="train") if r.count >= 2000}
    s_true = dict(t)
    s_true["s_test"] = t["s_true"]
    true_rows = {r.key: r for r in simulate.conditional_positivity(s_true, by="train")}
    for key, row in test_rows.items():
        se = math.hypot(row.stderr, true_rows[key].stderr)
        assert abs(row.mean - true_rows[key].mean) <= 3 * se + 1e-12


def test_conditional_positivity_edge_cases():
    t = simulate.generate(config(n_regions=1), emit_samples=False).truth
    (row,) = simulate.conditional_positivity(t)
    assert row.count == 1 and row.mean == pytest.approx(t["s_test"][0]) and row.stderr is None
    rows = simulate.conditional_positivity(t, by="score", score_edges=[0.001, 0.002])
    assert sum(r.count for r in rows) == 1
    assert any(r.count == 0 and r.mean is None for r in rows)
    with pytest.raises(ValueError):
        simulate.conditional_positivity(t, by="label")


def test_truth_csv_header():
    t = simulate.generate(config(n_regions=3), emit_samples=False).truth
    text = simulate.truth_csv(t)
    assert text.splitlines()[0] == ",".join(simulate.TRUTH_COLUMNS)
    assert len(text.splitlines()) == 4


@pytest.mark.parametrize(
    "kw",
    [
        dict(n_regions=0),
        dict(beta1_T=0.0),
        dict(beta0_P=0.0),
        dict(tau=0.0),
        dict(min_train_per_region=50),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        config(**kw)


def test_undersampling_accounting():
    tau, n = 4.0, 50
    t = simulate.generate(config(n_regions=20_000, samples_per_region_train=n, tau=tau), emit_samples=False).truth
    s = t["s_true"]
    q = tau * s / ((tau - 1) * s + 1)
    z = (t["k_train"] - n * q) / np.sqrt(np.maximum(n * q * (1 - q), 1e-12))
    assert abs(z.mean()) <= 3 / math.sqrt(len(z))
    assert (np.abs(z) <= 4).mean() >= 0.999


def test_gamma_bookkeeping_exact():
    cfg = config(beta1_P=0.7, beta0_P=2.1, min_train_per_region=1)
    t = simulate.generate(cfg, emit_samples=False).truth
    assert np.array_equal(t["gamma"], (0.7 + 2.1) / t["n_train"])
