import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robsel.loss import Dataset
from robsel.propensity import (
    KernelSpec,
    PropensityWeights,
    bandwidth_rule,
    conditioning_variables,
    estimate_propensity,
    gaussian_product_kernel,
    kernel_average,
)


def _data(n=40, d=4, seed=0, miss_frac=0.4):
    rng = np.random.default_rng(seed)
    T = rng.normal(size=(n, d))
    T[rng.random(n) < miss_frac, 0] = np.nan
    y = rng.normal(size=n)
    return Dataset.from_arrays(y, T)


def test_bandwidth_rule_value():
    assert abs(bandwidth_rule(1.0, 100, 1) - 100 ** (-1.0 / 3.0)) <= 1e-12


@pytest.mark.parametrize("args", [(0.0, 10, 1), (1.0, 0, 1), (1.0, 10, -1)])
def test_bandwidth_rule_rejects(args):
    with pytest.raises(ValueError):
        bandwidth_rule(*args)


def test_gaussian_product_kernel_normalising_constant():
    assert gaussian_product_kernel([0.0]) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert gaussian_product_kernel([1.0, 2.0]) == pytest.approx(math.exp(-2.5) / (2 * math.pi))


def test_all_complete_gives_unit_probability():
    data = _data(miss_frac=0.0)
    w = estimate_propensity(data)
    assert np.all(w.probs == 1.0)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 50.0))
def test_convex_combination_bounds(seed, l):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=(25, 3))
    F = rng.random(25)
    out = kernel_average(s, F, l)
    assert np.all(out >= F.min() - 1e-12)
    assert np.all(out <= F.max() + 1e-12)


def test_huge_bandwidth_gives_sample_mean():
    rng = np.random.default_rng(3)
    s = rng.normal(size=(30, 2))
    F = (rng.random(30) < 0.6).astype(float)
    assert np.max(np.abs(kernel_average(s, F, 1e6) - F.mean())) <= 1e-6


def test_matches_direct_kernel_sum():
    # independent oracle: explicit double loop over the normalised kernel
    rng = np.random.default_rng(11)
    s = rng.normal(size=(12, 2))
    F = (rng.random(12) < 0.5).astype(float)
    l = 0.7
    expected = []
    for i in range(12):
        k = np.array([gaussian_product_kernel((s[i] - s[j]) / l) for j in range(12)])
        expected.append(k @ F / k.sum())
    assert np.allclose(kernel_average(s, F, l), expected, rtol=1e-12, atol=0)


def test_far_rows_do_not_underflow():
    s = np.array([[0.0], [1e3], [1e3 + 0.1]])
    out = kernel_average(s, np.array([1.0, 0.0, 1.0]), 0.01)
    assert np.all(np.isfinite(out))
    assert out[0] == 1.0


def test_clip_floor_applied_and_counted():
    data = _data(n=60, miss_frac=0.7, seed=5)
    w = estimate_propensity(data, l=0.05, clip_floor=0.2)
    assert w.probs.min() >= 0.2
    raw = kernel_average(conditioning_variables(data), data.complete, 0.05)
    assert w.n_clipped == int((raw < 0.2).sum())


def test_default_bandwidth_uses_observed_dimension():
    data = _data(n=50, d=4)
    w = estimate_propensity(data)
    m = len(data.observed_block)
    assert w.bandwidth == pytest.approx(bandwidth_rule(1.0, 50, m))


def test_no_complete_rows_rejected():
    T = np.array([[np.nan, 1.0], [np.nan, 2.0]])
    with pytest.raises(ValueError, match="no complete"):
        estimate_propensity(Dataset.from_arrays([1.0, 2.0], T))


def test_kernel_dimension_mismatch():
    data = _data(d=3)
    with pytest.raises(ValueError):
        estimate_propensity(data, spec=KernelSpec(dimension=7))


def test_conditioning_variables_standardized():
    data = _data(n=30, d=3)
    s = conditioning_variables(data)
    assert s.shape == (30, 1 + len(data.observed_block))
    assert np.allclose(s.mean(axis=0), 0.0)
    assert np.allclose(s.std(axis=0, ddof=1), 1.0)


def test_weights_validation():
    with pytest.raises(ValueError):
        PropensityWeights(np.array([0.01, 1.0]), bandwidth=1.0, clip_floor=0.05)
    with pytest.raises(ValueError):
        PropensityWeights(np.array([0.5]), bandwidth=0.0, clip_floor=0.05)
