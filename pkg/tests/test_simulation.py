import math

import numpy as np
import pytest

from robsel.simulation import (
    MISSING_COLUMNS,
    Correlation,
    ErrorDist,
    SimulationScenario,
    apply_measurement_error,
    apply_missingness,
    child_rng,
    completeness_probability,
    generate_clean,
    model_error,
    run_monte_carlo,
    true_coefficients,
)

BIG = 10_000


def test_true_coefficients():
    w = true_coefficients(300)
    assert w[[1, 3, 5]].tolist() == [1.0, 2.0, 4.0]
    assert np.count_nonzero(w) == 3


def test_ind_moments():
    sc = SimulationScenario(n=BIG, d=8, correlation="ind")
    X, _, _, _ = generate_clean(sc, np.random.default_rng(0))
    var = X.var(axis=0, ddof=1)
    assert np.all(np.abs(var - 1.0) <= 3 * math.sqrt(2.0 / BIG))
    r = np.corrcoef(X[:, 0], X[:, 1])[0, 1]
    assert abs(r) <= 3 / math.sqrt(BIG)


def test_corr_lag_one_correlation():
    sc = SimulationScenario(n=BIG, d=8, correlation="corr")
    X, _, _, _ = generate_clean(sc, np.random.default_rng(1))
    se = (1 - 0.25) / math.sqrt(BIG)
    for j in range(7):
        assert abs(np.corrcoef(X[:, j], X[:, j + 1])[0, 1] - 0.5) <= 3 * se
    assert abs(X[:, 0].var(ddof=1) - 1.0) <= 3 * math.sqrt(2.0 / BIG)


def test_noiseless_response_is_exact():
    sc = SimulationScenario(n=50, d=10, noise_scale=0.0)
    X, Y, w, eps = generate_clean(sc, np.random.default_rng(2))
    assert np.all(eps == 0)
    assert np.array_equal(Y - X @ w, np.zeros(50))


def test_measurement_error_moments():
    X = np.zeros((100, 100))
    G = apply_measurement_error(X, 0.3, np.random.default_rng(3)).ravel()
    N = G.size
    assert abs(G.var(ddof=1) - 0.3) <= 3 * 0.3 * math.sqrt(2.0 / N)
    assert abs(G.mean()) <= 3 * math.sqrt(0.3 / N)


def test_measurement_error_zero_variance_is_identity():
    X = np.random.default_rng(0).normal(size=(5, 7))
    assert np.array_equal(apply_measurement_error(X, 0.0, np.random.default_rng(1)), X)


def test_missing_rate_matches_mean_logistic():
    rng = np.random.default_rng(4)
    T = rng.normal(size=(BIG, 7))
    Y = rng.normal(size=BIG)
    p = completeness_probability(T, Y)
    data = apply_missingness(T, Y, rng)
    rate = data.complete.mean()
    pbar = p.mean()
    assert abs(rate - pbar) <= 3 * math.sqrt(pbar * (1 - pbar) / BIG)
    assert data.missing_block == MISSING_COLUMNS
    assert np.isnan(data.design[data.complete == 0][:, list(MISSING_COLUMNS)]).all()
    assert not np.isnan(data.design[:, [1, 3, 5, 6]]).any()


def test_logistic_saturation_and_midpoint():
    T = np.zeros((4, 7))
    Y = np.zeros(4)
    data = apply_missingness(T, Y, np.random.default_rng(0), offset=math.inf)
    assert data.complete.tolist() == [1, 1, 1, 1]
    assert np.all(completeness_probability(T, Y, coefs=(0, 2, -2, 4)) == 0.5)


def test_chisq_errors_uncentred():
    sc = SimulationScenario(n=BIG, d=7, error_dist="chisq2")
    _, _, _, eps = generate_clean(sc, np.random.default_rng(5))
    assert abs(eps.mean() - 2.0) <= 3 * 2.0 / math.sqrt(BIG)
    assert eps.min() >= 0


def test_t3_errors_symmetric():
    sc = SimulationScenario(n=BIG, d=7, error_dist=ErrorDist.T3)
    _, _, _, eps = generate_clean(sc, np.random.default_rng(6))
    assert abs(np.median(eps)) < 0.05


def test_model_error():
    assert model_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert model_error([1.0, 2.0], [0.0, 0.0]) == 5.0
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=300), rng.normal(size=300)
    assert model_error(a, b) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, b)), rel=1e-12)
    with pytest.raises(ValueError):
        model_error([1.0], [1.0, 2.0])


def test_child_seeds_independent_of_order():
    a = child_rng(9, 3).random(4)
    child_rng(9, 0).random(100)
    assert np.array_equal(a, child_rng(9, 3).random(4))
    assert not np.array_equal(a, child_rng(9, 4).random(4))


def test_scenario_validation():
    with pytest.raises(ValueError):
        SimulationScenario(d=6)
    with pytest.raises(ValueError):
        SimulationScenario(replications=0)
    with pytest.raises(ValueError):
        SimulationScenario(correlation="banded")
    assert SimulationScenario(correlation="ind").correlation is Correlation.IND


def test_monte_carlo_deterministic():
    sc = SimulationScenario(n=40, d=15, replications=2, seed=11, h=1.0)
    a, b = run_monte_carlo(sc), run_monte_carlo(sc)
    assert a.row() == b.row()
    assert a.per_replication == b.per_replication


def test_noiseless_recovery():
    sc = SimulationScenario(n=100, d=30, replications=2, seed=3, condition="none", noise_scale=0.0,
                            me_variance=0.0, missingness=False, h=1.0)
    rep = run_monte_carlo(sc)
    assert rep.failures == 0
    assert rep.mean_error < 1e-3


def test_report_row_columns():
    sc = SimulationScenario(n=30, d=10, replications=2, seed=1, h=1.0)
    row = run_monte_carlo(sc).row()
    assert list(row) == ["error_dist", "correlation", "penalty", "h", "condition", "mean_error", "se",
                         "mean_size", "mean_tp", "failures", "seed"]
    assert row["mean_error"] >= 0
