import math

import numpy as np
import pytest

from vacq.kernel import conv_cdf
from vacq.model import BALKING, DistributionSpec, QueueConfig
from vacq.montecarlo import estimate_stationary
from vacq.solver import (
    ConvergenceError,
    UnstableConfigError,
    iterate_transient,
    solve_balking_stationary,
    solve_reneging_stationary,
)

D = DistributionSpec
DET_EXP = QueueConfig(2, 3, D.deterministic(0.5), D.exponential(1))
EXP_EXP = QueueConfig(1, 2, D.exponential(2), D.exponential(1))


def _alpha(r, T):
    return math.exp(-r * T) / -math.expm1(-r * T)


def _int_exp(a, K):
    return K if a == 0 else math.expm1(a * K) / a


def open_window_det_exp(lam, sigma, T, K):
    """Stationary law when K <= T - sigma, where every loss window is open.

    Differentiating the stationary equation in x gives
    f(x) = L e^{-lam x} (W0 + int_0^K e^{lam w} f(w) dw), L = lam alpha e^{lam sigma},
    so the density is a single exponential c e^{-lam x}.
    """
    a = _alpha(lam, T)
    L = lam * a * math.exp(lam * sigma)
    c = L / (1 - L * K)  # per unit W0
    bk = a * math.exp(-lam * (K - sigma)) * (1 + c * K)
    W0 = 1 / (1 + c * -math.expm1(-lam * K) / lam + bk)
    return W0, bk * W0, lambda x: W0 * c * np.exp(-lam * x)


def open_window_exp_exp(lam, mu, T, K):
    """Same for exponential service when K <= T: two exponentials with rates lam and mu."""
    al, am = _alpha(lam, T), _alpha(mu, T)
    k1, k2 = lam * mu * al / (mu - lam), lam * mu * am / (mu - lam)
    mat = np.array([[1 - k1 * K, -k1 * _int_exp(lam - mu, K)],
                    [k2 * _int_exp(mu - lam, K), 1 + k2 * K]])
    c1, c2 = np.linalg.solve(mat, [k1, -k2])
    j1 = c1 * K + c2 * _int_exp(lam - mu, K)
    j2 = c1 * _int_exp(mu - lam, K) + c2 * K
    bk = (mu / (mu - lam) * al * math.exp(-lam * K) * (1 + j1)
          + lam / (lam - mu) * am * math.exp(-mu * K) * (1 + j2))
    mass = c1 * -math.expm1(-lam * K) / lam + c2 * -math.expm1(-mu * K) / mu
    W0 = 1 / (1 + mass + bk)
    return W0, bk * W0, lambda x: W0 * (c1 * np.exp(-lam * x) + c2 * np.exp(-mu * x))


@pytest.mark.parametrize("config, oracle", [
    (QueueConfig(2, 1.2, D.deterministic(0.5), D.exponential(1)), lambda: open_window_det_exp(1, 0.5, 2, 1.2)),
    (QueueConfig(1, 0.8, D.exponential(2), D.exponential(1)), lambda: open_window_exp_exp(1, 2, 1, 0.8)),
], ids=["det-exp", "exp-exp"])
def test_matches_exact_solution_when_every_window_is_open(config, oracle):
    W0, BK, f = oracle()
    r = solve_reneging_stationary(config, grid_size=2048)
    assert r.W.atom0 == pytest.approx(W0, abs=1e-6)
    assert r.BK == pytest.approx(BK, abs=1e-6)
    assert np.max(np.abs(r.W.density - f(r.W.grid))) < 1e-4


@pytest.mark.parametrize("config", [DET_EXP, EXP_EXP], ids=["det-exp", "exp-exp"])
def test_reneging_solution_is_normalised_and_self_consistent(config):
    r = solve_reneging_stationary(config, grid_size=1024, tol=1e-10)
    r.W.check(1e-8)
    assert abs(r.BK - r.BK_check) <= 10 * 1e-10
    tail = np.array(r.residuals[5:])
    assert np.all(np.diff(tail) <= 1e-14)


@pytest.mark.parametrize("config", [DET_EXP, EXP_EXP], ids=["det-exp", "exp-exp"])
def test_balking_solution_matches_reneging_below_deadline(config):
    ren = solve_reneging_stationary(config, grid_size=512)
    bal = solve_balking_stationary(config.with_discipline(BALKING), grid_size=512)
    bal.W.check(1e-8)
    h = config.K / 512
    assert bal.W.atom0 == pytest.approx(ren.W.atom0, abs=h**2)
    # the two discretisations differ at O(h) next to jumps of the density
    np.testing.assert_allclose(bal.W.density[:512], ren.W.density, atol=h / 100)
    assert abs(bal.BK - bal.BK_check) < 1e-8


def test_balking_blocking_matches_simulation():
    c = EXP_EXP.with_discipline(BALKING)
    r = solve_balking_stationary(c, grid_size=1024)
    s = estimate_stationary(c, 10**6, replications=8, seed=5)
    assert abs(s.BK_hat.value - r.BK) < 3 * s.BK_hat.se


def test_tabulated_service_matches_simulation():
    c = QueueConfig(1.0, 1.5, D.tabulated([(0, 0.1), (0.5, 0.4), (1, 1.2)]), D.exponential(2))
    r = solve_reneging_stationary(c, grid_size=512)
    s = estimate_stationary(c, 10**6, replications=8, seed=8)
    assert abs(s.W0_hat.value - r.W.atom0) < 3 * s.W0_hat.se
    assert abs(s.BK_hat.value - r.BK) < 3 * s.BK_hat.se
    x = s.distribution.nodes[:-1]
    assert np.max(np.abs(s.distribution.node_cdf()[:-1] - r.W.cdf(x))) < 0.005


def test_unstable_configs_rejected():
    with pytest.raises(UnstableConfigError):
        solve_reneging_stationary(QueueConfig(2, 3, D.deterministic(3), D.exponential(1)))
    # a deterministic cycle has P(service + vacation < T) = 0 and is refused as well
    with pytest.raises(UnstableConfigError):
        solve_balking_stationary(QueueConfig(2, 5, D.deterministic(4), D.deterministic(0), BALKING))


def test_non_convergence_reported():
    with pytest.raises(ConvergenceError) as info:
        solve_reneging_stationary(EXP_EXP, grid_size=64, tol=1e-16, max_iter=5)
    assert info.value.iterations == 5 and info.value.residual > 0


def test_grid_size_checked():
    with pytest.raises(ValueError):
        solve_reneging_stationary(EXP_EXP, grid_size=4)


def test_tiny_deadline():
    r = solve_reneging_stationary(QueueConfig(2, 1e-6, D.deterministic(0.5), D.exponential(1)), grid_size=64)
    assert r.W.atom0 + r.BK == pytest.approx(1, abs=1e-5)
    r.W.check(1e-8)


def test_grid_refinement_is_second_order():
    xs = np.linspace(0, EXP_EXP.K, 257)
    cdfs = [solve_reneging_stationary(EXP_EXP, grid_size=n).W.cdf(xs) for n in (256, 512, 1024)]
    ratio = np.max(np.abs(cdfs[0] - cdfs[1])) / np.max(np.abs(cdfs[1] - cdfs[2]))
    assert 3 <= ratio <= 5


def test_first_transient_step():
    W1 = iterate_transient(EXP_EXP, 1, grid_size=256)[1]
    x = W1.nodes[:-1]
    np.testing.assert_allclose(W1.node_cdf()[:-1], conv_cdf(EXP_EXP, x + EXP_EXP.T), atol=1e-14)


def test_first_balking_transient_step_has_exponential_tail():
    c = DET_EXP.with_discipline(BALKING)
    W1 = iterate_transient(c, 1, grid_size=512)[1]
    x = W1.nodes[::64]
    np.testing.assert_allclose(1 - W1.node_cdf()[::64], np.exp(-(x + 2 - 0.5)), atol=1e-12)


@pytest.mark.parametrize("config", [EXP_EXP, EXP_EXP.with_discipline(BALKING)], ids=["reneging", "balking"])
def test_transient_iterates_reach_stationary_law(config):
    seq = iterate_transient(config, 60, grid_size=256)
    for W in seq:
        W.check(1e-8)
        assert np.all(np.diff(W.node_cdf()) >= 0)
    solve = solve_balking_stationary if config.discipline == BALKING else solve_reneging_stationary
    stat = solve(config, grid_size=256, x_max=seq[-1].x_max) if config.discipline == BALKING \
        else solve(config, grid_size=256)
    xs = np.linspace(0, config.K, 200)
    assert np.max(np.abs(seq[-1].cdf(xs) - stat.W.cdf(xs))) < 1e-3


def test_transient_history_guard():
    with pytest.raises(ValueError):
        iterate_transient(EXP_EXP, 10_001)
    with pytest.raises(ValueError):
        iterate_transient(EXP_EXP, 0)
