"""Replicated path simulation: stationary estimates and transient tail probabilities."""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import BALKING, MixedDistribution, QueueConfig, check_stability, sample
from .recursion import draw, simulate, streams

DEFAULT_GRID = 512


@dataclass
class Estimate:
    value: float
    se: float


@dataclass
class SimulationSummary:
    n_customers: int
    n_replications: int
    burn_in: int
    W0_hat: Estimate
    BK_hat: Estimate
    mean_wait: Estimate
    distribution: MixedDistribution
    seed: int
    stable: bool = True

    def to_dict(self) -> dict:
        return {
            "n_customers": self.n_customers,
            "n_replications": self.n_replications,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "stable": self.stable,
            "W0": self.W0_hat.value,
            "W0_se": self.W0_hat.se,
            "BK": self.BK_hat.value,
            "BK_se": self.BK_hat.se,
            "mean_wait": self.mean_wait.value,
            "mean_wait_se": self.mean_wait.se,
        }


def default_burn_in(n_customers: int) -> int:
    return min(max(n_customers // 10, 1000), n_customers - 1)


def _replicate(config, n, burn_in, seed, r, edges, keep):
    sig, vac = draw(config, n, seed, r)
    path = simulate(config, sig, vac, n)
    w = path.w[burn_in:]
    m = w.size
    zero = np.count_nonzero(w == 0.0)
    over = np.count_nonzero(w >= config.K)
    inside = w[(w > 0.0) & (w < edges[-1])]
    counts, _ = np.histogram(inside, bins=edges)
    return m, zero, over, float(w.sum()), counts, (w if keep else None)


def _se(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _batch_se(w: np.ndarray, stat, batches: int = 10) -> float:
    parts = np.array_split(w, batches)
    return _se(np.array([stat(p) for p in parts]))


def estimate_stationary(config: QueueConfig, n_customers: int, burn_in: int | None = None,
                        replications: int = 8, seed: int = 0, grid_size: int = DEFAULT_GRID,
                        threads: int | None = None) -> SimulationSummary:
    """Pool post-burn-in waits over independent replications.

    Standard errors come from the spread of per-replication estimates (batch
    means within the path when there is a single replication).
    """
    if burn_in is None:
        burn_in = default_burn_in(n_customers)
    if not (0 <= burn_in < n_customers):
        raise ValueError("need 0 <= burn_in < n_customers")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    stab = check_stability(config)
    if not stab.stable:
        warnings.warn("unstable configuration: P(service + vacation < T) = 0", RuntimeWarning)

    K = config.K
    h = K / grid_size
    balking = config.discipline == BALKING
    if balking:
        x_max = _balking_support(config, n_customers, burn_in, seed, h)
    else:
        x_max = K
    nbins = int(round(x_max / h))
    edges = np.linspace(0.0, x_max, nbins + 1)

    threads = threads or os.cpu_count() or 1
    run = lambda r: _replicate(config, n_customers, burn_in, seed, r, edges, replications == 1)
    if threads > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(replications)))
    else:
        results = [run(r) for r in range(replications)]

    m = np.array([r[0] for r in results], dtype=float)
    zeros = np.array([r[1] for r in results], dtype=float)
    overs = np.array([r[2] for r in results], dtype=float)
    sums = np.array([r[3] for r in results])
    w0, bk, mw = zeros / m, overs / m, sums / m
    counts = np.sum([r[4] for r in results], axis=0)
    total = m.sum()
    atom0 = float(zeros.sum() / total)
    if balking:
        boundary = float((total - zeros.sum() - counts.sum()) / total)
    else:
        boundary = float(overs.sum() / total)
    dist = MixedDistribution(atom0, counts / (total * h), x_max, boundary, config.discipline)

    if replications > 1:
        se_w0, se_bk, se_mw = _se(w0), _se(bk), _se(mw)
    else:
        w = results[0][5]
        se_w0 = _batch_se(w, lambda p: np.mean(p == 0.0))
        se_bk = _batch_se(w, lambda p: np.mean(p >= K))
        se_mw = _batch_se(w, np.mean)
    return SimulationSummary(
        n_customers, replications, burn_in,
        Estimate(atom0, se_w0),
        Estimate(float(overs.sum() / total), se_bk),
        Estimate(float(sums.sum() / total), se_mw),
        dist, seed, stab.stable,
    )


def _balking_support(config, n, burn_in, seed, h) -> float:
    # a pilot run on replication 0 fixes the histogram support
    sig, vac = draw(config, n, seed, 0)
    w = simulate(config, sig, vac, n).w[burn_in:]
    exceed = w[w >= config.K] - config.K
    q = float(np.quantile(exceed, 1 - 1e-6)) if exceed.size else 0.0
    return config.K + max(math.ceil(q / h), 1) * h


@dataclass
class TailEstimate:
    p_hat: float
    se: float


def simulate_index(config: QueueConfig, n: int, replications: int, seed: int) -> np.ndarray:
    """Waits ``w_n`` of customer ``n`` across independent replications (vectorised).

    Replication ``r`` reads row ``r`` of a block drawn from the seed's two
    streams, so rows never share draws.
    """
    s_rng, v_rng = streams(seed, 0)
    R = replications
    sig = np.asarray(sample(config.service, s_rng.random((R, max(n, 1)))))
    vac = np.asarray(sample(config.vacation, v_rng.random((R, max(n, 1)))))
    rows = np.arange(R)
    T, K = config.T, config.K
    w = np.zeros(R)
    used = np.zeros(R, dtype=np.int64)
    if config.discipline == BALKING:
        for _ in range(n):
            enter = w < K
            s = sig[rows, np.minimum(used, n - 1)] + vac[rows, np.minimum(used, n - 1)]
            w = np.maximum(np.where(enter, w + s - T, w - T), 0.0)
            used += enter
        return w
    anchor = np.zeros(R)
    k = np.zeros(R)
    s_a, v_a = sig[:, 0].copy(), vac[:, 0].copy()
    used[:] = 1
    for _ in range(n):
        u = np.maximum(anchor + s_a + v_a - (k + 1) * T, 0.0)
        lost = u >= K
        w = np.where(lost, K, u)
        k = np.where(lost, k + 1, 0)
        anchor = np.where(lost, anchor, u)
        idx = np.minimum(used, n - 1)
        s_a = np.where(lost, s_a, sig[rows, idx])
        v_a = np.where(lost, v_a, vac[rows, idx])
        used += ~lost
    return w


def estimate_transient_tail(config: QueueConfig, n: int, x: float, replications: int,
                            seed: int = 0) -> TailEstimate:
    """Fraction of replications with ``w_n > x``."""
    if n < 1 or x < 0:
        raise ValueError("need n >= 1 and x >= 0")
    w = simulate_index(config, n, replications, seed)
    p = float(np.mean(w > x))
    return TailEstimate(p, math.sqrt(p * (1 - p) / replications))
