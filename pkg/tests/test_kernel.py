import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vacq.kernel import KernelParams, TruncationError, ab_sequences, conv_cdf, convolution_law, kernel_sum, loss_sum
from vacq.model import DistributionSpec, QueueConfig

D = DistributionSpec


def cfg(T, K, service, vacation):
    return QueueConfig(T, K, service, vacation)


def test_conv_cdf_examples():
    assert conv_cdf(cfg(1, 1, D.exponential(2), D.exponential(1)), math.log(2)) == pytest.approx(0.25, abs=1e-15)
    assert conv_cdf(cfg(1, 1, D.deterministic(2), D.exponential(1)), 1.5) == 0.0
    assert conv_cdf(cfg(1, 1, D.deterministic(0.5), D.exponential(1)), 2.5) == pytest.approx(1 - math.exp(-2), abs=1e-15)


def test_conv_cdf_exp_exp_small_and_large_arguments():
    c = cfg(1, 1, D.exponential(2), D.exponential(1))
    y = np.array([1e-8, 1e-3, 0.3, 5.0, 40.0])
    # with mu = 2 lambda the law factorises as (1 - e^{-y})^2, free of cancellation
    exact = np.expm1(-y) ** 2
    np.testing.assert_allclose(conv_cdf(c, y), exact, rtol=1e-9, atol=1e-17)
    law = convolution_law(c)
    np.testing.assert_allclose(law.survival(y[3:]), 2 * np.exp(-y[3:]) - np.exp(-2 * y[3:]), rtol=1e-13)


def test_tabulated_convolution_matches_monte_carlo():
    tab = D.tabulated([(0, 0), (0.5, 0.4), (1, 1.0)])
    c = cfg(1, 1, tab, D.exponential(1.5))
    rng = np.random.default_rng(0)
    u = rng.random(10**6)
    s = np.interp(u, tab.levels, tab.quantiles) + rng.exponential(1 / 1.5, u.size)
    for y in (0.2, 0.7, 1.3, 2.5, 4.0):
        p = np.mean(s <= y)
        assert abs(conv_cdf(c, y) - p) < 4 * math.sqrt(p * (1 - p) / u.size) + 1e-4


def test_ab_sequences_examples():
    assert ab_sequences(1, 0, 0, 2, 3) == (3, 0)
    assert ab_sequences(1, 0.5, 2, 2, 3) == (6.5, 6.5)
    assert ab_sequences(0, 0, 1, 1, 3) == (2, 4)


def _direct_kernel(G, x, w, T, K, terms):
    total = G(x - w + T)
    for n in range(1, terms):
        a, b = ab_sequences(x, w, n, T, K)
        if a > b:
            total += G(a) - G(b, left=True)
    return total


def test_kernel_matches_direct_summation_exp_exp():
    c = cfg(1, 1.2, D.exponential(2), D.exponential(1))
    p = KernelParams.from_config(c)
    law = convolution_law(c)
    direct = _direct_kernel(law, 0.5, 0.0, 1.0, 1.2, 10**4)
    assert kernel_sum(0.5, 0.0, p) == pytest.approx(direct, abs=1e-10)


def test_kernel_is_zero_when_every_window_misses_the_atom():
    c = cfg(1, 2, D.deterministic(3.5), D.deterministic(0.0))
    assert kernel_sum(0.0, 0.0, KernelParams.from_config(c)) == 0.0


def test_loss_sum_examples():
    c = cfg(2, 3, D.deterministic(0.5), D.exponential(1))
    p = KernelParams.from_config(c)
    alpha = math.exp(-2) / (1 - math.exp(-2))
    assert loss_sum(0.0, p) == pytest.approx(alpha * math.exp(-2.5), abs=1e-15)
    direct = sum(math.exp(-(3 - 0.5 + 2 * n)) for n in range(1, 200))
    assert loss_sum(0.0, p) == pytest.approx(direct, abs=1e-15)
    assert loss_sum(0.0, p) == pytest.approx(0.012848, abs=1e-6)

    bounded = KernelParams.from_config(cfg(2, 3, D.deterministic(0.5), D.deterministic(1.0)))
    assert loss_sum(np.linspace(0, 2.99, 7), bounded).max() == 0.0

    c0 = KernelParams.from_config(cfg(2, 3, D.deterministic(0.0), D.exponential(1)))
    near = loss_sum(3 - 1e-9, c0)
    direct = sum(math.exp(-(1e-9 + 2 * n)) for n in range(1, 200))
    assert near == pytest.approx(direct, abs=1e-14)
    assert near == pytest.approx(alpha, abs=1e-8)


CONFIGS = [
    cfg(1, 2, D.exponential(2), D.exponential(1)),
    cfg(2, 3, D.deterministic(0.5), D.exponential(1)),
    cfg(1.5, 2, D.exponential(1), D.deterministic(0.3)),
    cfg(1, 1.5, D.tabulated([(0, 0.1), (0.5, 0.6), (1, 1.4)]), D.exponential(2)),
    cfg(1, 1.5, D.tabulated([(0, 0.1), (0.5, 0.6), (1, 1.4)]), D.tabulated([(0, 0), (1, 2.5)])),
]


@pytest.mark.parametrize("c", CONFIGS, ids=["exp-exp", "det-exp", "exp-det", "tab-exp", "tab-tab"])
def test_truncated_and_analytic_sums_agree(c):
    analytic = KernelParams.from_config(c)
    truncated = KernelParams.from_config(c, analytic=False)
    x = np.linspace(0, c.K, 100)[:, None]
    w = np.linspace(0, c.K, 100, endpoint=False)[None, :]
    diff = np.abs(kernel_sum(x, w, analytic) - kernel_sum(x, w, truncated))
    assert diff.max() <= 1e-10
    diff = np.abs(loss_sum(w, analytic) - loss_sum(w, truncated))
    assert diff.max() <= 1e-10


def test_truncation_reports_failure():
    c = cfg(1e-9, 1, D.exponential(1e-3), D.exponential(2e-3))
    p = KernelParams.from_config(c, analytic=False)
    with pytest.raises(TruncationError):
        loss_sum(0.0, p)


@pytest.mark.parametrize("c", CONFIGS[:2], ids=["exp-exp", "det-exp"])
def test_structural_identity_is_bitwise(c):
    rng = np.random.default_rng(1)
    x = rng.uniform(0, c.K - c.T, 10**4)
    w = rng.uniform(0, c.K, 10**4)
    p = KernelParams.from_config(c)
    np.testing.assert_array_equal(kernel_sum(x, w, p), conv_cdf(c, x - w + c.T))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(CONFIGS), st.floats(0, 1), st.lists(st.floats(0, 1), min_size=2, max_size=30))
def test_kernel_is_a_monotone_probability(c, wf, xf):
    p = KernelParams.from_config(c)
    x = np.sort(np.array(xf)) * c.K
    vals = kernel_sum(x, np.full_like(x, wf * c.K * 0.999), p)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) >= -1e-12)
