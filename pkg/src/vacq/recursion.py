"""Customer-by-customer waiting-time (reneging) and workload (balking) recursions.

Two simulators are provided.  The default one draws a fresh (service,
vacation) pair each time a customer is served or admitted, in order of
consumption.  The indexed one follows the literal model: the service time is
tied to the customer index and the vacation to the count of served customers.
Both are equal in law.

Randomness: a replication owns two Philox streams (service and vacation)
spawned from ``SeedSequence(seed, spawn_key=(replication,))``; customers that
are lost or balk consume nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import BALKING, QueueConfig, sample


class RecursionError(ValueError):
    """Caller violated a recursion precondition."""


@dataclass
class PathState:
    n: int
    w: float
    served_count: int
    losses_since_last_service: int = 0


@dataclass
class Path:
    w: np.ndarray
    rejected: np.ndarray  # lost (reneging) or balked (balking)


def next_reneging(w_last_served: float, k: int, sigma: float, v: float, T: float, K: float):
    """Wait of the arrival ``k + 1`` periods after the last served customer.

    Returns ``(w_next, lost)``; a lost customer is stored at ``K`` and the
    anchor stays put for the following arrival.
    """
    if w_last_served >= K:
        raise RecursionError(f"anchor wait {w_last_served} must be < K={K}")
    if k < 0:
        raise RecursionError("k must be nonnegative")
    uncapped = max(w_last_served + sigma + v - (k + 1) * T, 0.0)
    if uncapped >= K:
        return K, True
    return uncapped, False


def step_balking(w: float, sigma: float, v: float, T: float, K: float) -> float:
    if w < K:
        return max(w + sigma + v - T, 0.0)
    return max(w - T, 0.0)


def streams(seed: int, replication: int = 0):
    """Service and vacation generators for one replication."""
    ss = np.random.SeedSequence(seed, spawn_key=(replication,))
    s_seq, v_seq = ss.spawn(2)
    return np.random.Generator(np.random.Philox(s_seq)), np.random.Generator(np.random.Philox(v_seq))


def draw(config: QueueConfig, n: int, seed: int, replication: int = 0):
    s_rng, v_rng = streams(seed, replication)
    sig = np.asarray(sample(config.service, s_rng.random(n)), dtype=float).reshape(n)
    vac = np.asarray(sample(config.vacation, v_rng.random(n)), dtype=float).reshape(n)
    return sig, vac


@njit(cache=True, nogil=True)
def _reneging_path(sig, vac, T, K, n, indexed):
    w = np.empty(n)
    lost = np.zeros(n, dtype=np.bool_)
    w[0] = 0.0
    anchor = 0.0
    s = sig[0]
    v = vac[0]
    used = 1
    k = 0
    for i in range(1, n):
        u = anchor + s + v - (k + 1) * T
        if u < 0.0:
            u = 0.0
        if u >= K:
            w[i] = K
            lost[i] = True
            k += 1
        else:
            w[i] = u
            anchor = u
            k = 0
            if indexed:
                s = sig[i]
            else:
                s = sig[used]
            v = vac[used]
            used += 1
    return w, lost


@njit(cache=True, nogil=True)
def _balking_path(sig, vac, T, K, n, indexed):
    w = np.empty(n)
    balked = np.zeros(n, dtype=np.bool_)
    w[0] = 0.0
    used = 0
    for i in range(n - 1):
        x = w[i]
        if x < K:
            if indexed:
                s = sig[i]
            else:
                s = sig[used]
            u = x + s + vac[used] - T
            used += 1
        else:
            balked[i] = True
            u = x - T
        w[i + 1] = u if u > 0.0 else 0.0
    balked[n - 1] = w[n - 1] >= K
    return w, balked


def simulate(config: QueueConfig, sig: np.ndarray, vac: np.ndarray, n: int, indexed: bool = False) -> Path:
    kernel = _balking_path if config.discipline == BALKING else _reneging_path
    w, flags = kernel(sig, vac, float(config.T), float(config.K), n, indexed)
    return Path(w, flags)


def run_path(config: QueueConfig, n_customers: int, seed: int, replication: int = 0,
             indexed: bool = False) -> Path:
    """Simulate ``n_customers`` arrivals starting from an empty system."""
    if n_customers <= 0:
        raise RecursionError("n_customers must be >= 1")
    sig, vac = draw(config, n_customers, seed, replication)
    return simulate(config, sig, vac, n_customers, indexed)


def iter_path(config: QueueConfig, sig, vac, n: int):
    """Pure-Python reference stepping; yields a :class:`PathState` per customer."""
    T, K = config.T, config.K
    state = PathState(0, 0.0, 0)
    yield PathState(0, 0.0, 0)
    if config.discipline == BALKING:
        w = 0.0
        for i in range(n - 1):
            if w < K:
                w = step_balking(w, sig[state.served_count], vac[state.served_count], T, K)
                state.served_count += 1
            else:
                w = step_balking(w, 0.0, 0.0, T, K)
            yield PathState(i + 1, w, state.served_count)
        return
    anchor, k = 0.0, 0
    s, v = sig[0], vac[0]
    state.served_count = 1
    for i in range(1, n):
        w, lost = next_reneging(anchor, k, s, v, T, K)
        if lost:
            k += 1
        else:
            anchor, k = w, 0
            s, v = sig[state.served_count], vac[state.served_count]
            state.served_count += 1
        yield PathState(i, w, state.served_count, k)
