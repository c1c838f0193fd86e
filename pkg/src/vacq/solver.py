"""Discretised fixed-point solution of the stationary and transient integral equations.

The absolutely continuous part of a distribution lives on cells of width
``h``; atoms at 0 (and the boundary mass) are carried exactly.  A sweep
evaluates the right-hand side CDF at the cell edges with the measure of each
cell lumped at its midpoint, then differences it back into cell masses, so
every sweep conserves probability exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .kernel import ConvolutionLaw, KernelParams, convolution_law, kernel_sum, loss_sum
from .model import BALKING, RENEGING, MixedDistribution, QueueConfig, check_stability

MAX_RENEGING_HISTORY = 10_000
_ROW_CHUNK = 256


class UnstableConfigError(ValueError):
    """The stability condition ``P(service + vacation < T) > 0`` fails."""


class ConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"no convergence after {iterations} sweeps (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass
class StationaryResult:
    W: MixedDistribution
    BK: float
    iterations: int
    residual: float
    BK_check: float  # same quantity by a second formula on the converged W
    residuals: list


def _require_stable(config: QueueConfig) -> None:
    if not check_stability(config).stable:
        raise UnstableConfigError("P(service + vacation < T) = 0; no stationary regime")


def _sup_cdf_distance(a0, m, b0, n) -> float:
    return float(max(abs(a0 - b0), np.max(np.abs(np.cumsum(m - n) + (a0 - b0)))))


def reneging_kernel_matrix(params: KernelParams, grid_size: int):
    """Kernel at the cell edges ``x_i`` (rows) against ``w = 0`` and cell midpoints."""
    K = params.config.K
    h = K / grid_size
    nodes = np.arange(grid_size) * h
    mids = (np.arange(grid_size) + 0.5) * h
    mat = np.empty((grid_size, grid_size))
    for lo in range(0, grid_size, _ROW_CHUNK):
        rows = nodes[lo:lo + _ROW_CHUNK, None]
        mat[lo:lo + _ROW_CHUNK] = kernel_sum(rows, mids[None, :], params)
    atom_col = kernel_sum(nodes, np.zeros(grid_size), params)
    return atom_col, mat


def solve_reneging_stationary(config: QueueConfig, grid_size: int = 1024, tol: float = 1e-10,
                              max_iter: int = 10_000) -> StationaryResult:
    """Stationary waiting-time law for the reneging model.

    The sweep maps the served part of ``W`` on ``[0, K)`` to itself (mass
    preserving); the atom at ``K`` is set each sweep from the expected number of
    losses per served customer under the previous iterate.
    """
    _require_stable(config)
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    params = KernelParams.from_config(config)
    K = config.K
    h = K / grid_size
    mids = (np.arange(grid_size) + 0.5) * h
    atom_col, mat = reneging_kernel_matrix(params, grid_size)
    loss0 = float(loss_sum(0.0, params))
    loss = np.asarray(loss_sum(mids, params))

    a0, m, bk = 1.0, np.zeros(grid_size), 0.0
    residuals = []
    for it in range(1, max_iter + 1):
        served = a0 + m.sum()
        edge = a0 * atom_col + mat @ m
        new_m = np.diff(np.append(edge, served))
        np.maximum(new_m, 0.0, out=new_m)
        new_a0 = float(edge[0])
        # losses per served customer under the previous iterate fix the K atom
        per_served = (a0 * loss0 + loss @ m) / served
        new_bk = per_served / (1.0 + per_served)
        scale = (1.0 - new_bk) / (new_a0 + new_m.sum())
        new_a0 *= scale
        new_m *= scale
        res = max(_sup_cdf_distance(new_a0, new_m, a0, m), abs(new_bk - bk))
        residuals.append(res)
        a0, m, bk = new_a0, new_m, new_bk
        if res < tol:
            break
    else:
        raise ConvergenceError(residuals[-1], max_iter)

    W = MixedDistribution(a0, m / h, K, 1.0 - a0 - m.sum(), RENEGING)
    bk_check = float(a0 * loss0 + loss @ m)
    return StationaryResult(W, W.boundary_mass, it, residuals[-1], bk_check, residuals)


class _BalkingMap:
    """One-step workload update on a fixed grid over ``[0, x_max]``.

    Mass beyond ``x_max`` is held as an atom at ``x_max``.
    """

    def __init__(self, law: ConvolutionLaw, config: QueueConfig, h: float, n_cells: int):
        self.T, self.K, self.h = config.T, config.K, h
        self.n_k = int(round(config.K / h))
        self.n = n_cells
        self.x_max = n_cells * h
        self.nodes = np.arange(n_cells + 1) * h
        d = np.arange(-(self.n_k - 1), n_cells + 1)
        self.g = np.asarray(law((d - 0.5) * h + self.T))
        self.g_atom = np.asarray(law(self.nodes + self.T))
        self.shift_nodes = self.nodes + self.T
        self.open_ = self.shift_nodes > self.K

    def cdf_at(self, a0, m, y):
        edges = np.concatenate(([a0], a0 + np.cumsum(m)))
        return np.where(y >= self.x_max, 1.0, np.interp(y, self.nodes, edges))

    def __call__(self, a0, m):
        below = m[:self.n_k]
        conv = fftconvolve(below, self.g)[self.n_k - 1:self.n_k + self.n]
        w_k = a0 + below.sum()
        shifted = np.where(self.open_, np.maximum(self.cdf_at(a0, m, self.shift_nodes) - w_k, 0.0), 0.0)
        edge = a0 * self.g_atom + conv + shifted
        new_m = np.maximum(np.diff(edge), 0.0)
        new_a0 = float(edge[0])
        total = new_a0 + new_m.sum()
        tail = max(1.0 - total, 0.0)
        return new_a0, new_m, tail


def solve_balking_stationary(config: QueueConfig, grid_size: int = 1024, tol: float = 1e-10,
                             max_iter: int = 10_000, x_max: float | None = None) -> StationaryResult:
    """Stationary workload law for the balking model on an adaptively widened support."""
    _require_stable(config)
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    law = convolution_law(config)
    K, T = config.K, config.T
    h = K / grid_size
    if x_max is None:
        span = 10.0 * law.mean()
        if math.isfinite(law.support_max):
            span = min(span, max(law.support_max - T, 0.0) + h)
        x_max = K + span
    n_cells = grid_size + max(int(math.ceil((x_max - K) / h)), 1)

    a0, m, tail = 1.0, np.zeros(n_cells), 0.0
    residuals = []
    it = 0
    while True:
        step = _BalkingMap(law, config, h, n_cells)
        converged = False
        while it < max_iter:
            it += 1
            new_a0, new_m, new_tail = step(a0, m)
            # the tail atom sits at x_max; renormalise roundoff into it
            res = max(_sup_cdf_distance(new_a0, new_m, a0, m), abs(new_tail - tail))
            residuals.append(res)
            a0, m, tail = new_a0, new_m, new_tail
            if res < tol:
                converged = True
                break
        if not converged:
            raise ConvergenceError(residuals[-1], it)
        if tail < tol:
            break
        extra = n_cells - grid_size
        m = np.concatenate((m, np.zeros(extra)))
        m[n_cells] += tail
        tail = 0.0
        n_cells += extra

    W = MixedDistribution(a0, m / h, n_cells * h, max(1.0 - a0 - m.sum(), 0.0), BALKING)
    bk_direct = 1.0 - a0 - m[:grid_size].sum()
    return StationaryResult(W, bk_direct, it, residuals[-1], balking_blocking(config, W), residuals)


def balking_blocking(config: QueueConfig, W: MixedDistribution) -> float:
    """Blocking probability: entering arrivals pushed to ``>= K`` plus workload ``>= K + T``."""
    law = convolution_law(config)
    K, T = config.K, config.T
    n_k = int(round(K / W.h))
    mass = W.density[:n_k] * W.h
    jump = W.atom0 * float(law.survival(K + T, left=True)) + mass @ np.asarray(law.survival(K - W.grid[:n_k] + T, left=True))
    stay = 1.0 - float(W.cdf(K + T)) if K + T < W.x_max else W.boundary_mass
    return float(jump + stay)


def _window_matrices(law: ConvolutionLaw, config: QueueConfig, grid_size: int, eps: float):
    """Per-gap transition matrices: rows are edges ``0..K`` (last row the limit at ``K``)."""
    K, T = config.K, config.T
    h = K / grid_size
    x = (np.arange(grid_size + 1) * h)[:, None]
    w = np.concatenate(([0.0], (np.arange(grid_size) + 0.5) * h))[None, :]
    last = np.zeros((grid_size + 1, 1), dtype=bool)
    last[-1] = True
    mats = [np.where(last, law(K - w + T, left=True), law(x - w + T))]
    k = 1
    while float(law.survival(k * T, left=True)) >= eps and k <= MAX_RENEGING_HISTORY:
        lower = np.asarray(law(K - w + k * T, left=True))
        upper = np.where(last, law(K - w + (k + 1) * T, left=True), law(x - w + (k + 1) * T))
        mats.append(np.where(x + T > K, np.maximum(upper - lower, 0.0), 0.0))
        k += 1
    return mats


def iterate_transient(config: QueueConfig, n_steps: int, grid_size: int = 256,
                      x_max: float | None = None, eps: float = 1e-12) -> list[MixedDistribution]:
    """Distributions of ``w_0 .. w_n`` (reneging) or the workload (balking), from an empty system."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    law = convolution_law(config)
    K, T = config.K, config.T
    h = K / grid_size
    out = [MixedDistribution(1.0, np.zeros(grid_size), K, 0.0, config.discipline)]

    if config.discipline == BALKING:
        if x_max is None:
            x_max = K + 10.0 * law.mean()
        n_cells = grid_size + max(int(math.ceil((x_max - K) / h)), 1)
        step = _BalkingMap(law, config, h, n_cells)
        a0, m = 1.0, np.zeros(n_cells)
        out[0] = MixedDistribution(1.0, m.copy(), n_cells * h, 0.0, BALKING)
        for _ in range(n_steps):
            a0, m, tail = step(a0, m)
            out.append(MixedDistribution(a0, m / h, n_cells * h, tail, BALKING))
        return out

    if n_steps > MAX_RENEGING_HISTORY:
        raise ValueError(f"reneging history limited to {MAX_RENEGING_HISTORY} steps")
    mats = _window_matrices(law, config, grid_size, eps)
    history = [np.concatenate(([1.0], np.zeros(grid_size)))]  # [atom0, cell masses] on [0, K)
    for n in range(n_steps):
        edge = np.zeros(grid_size + 1)
        for k, mat in enumerate(mats[:n + 1]):
            edge += mat @ history[n - k]
        cells = np.maximum(np.diff(edge), 0.0)
        history.append(np.concatenate(([edge[0]], cells)))
        out.append(MixedDistribution(float(edge[0]), cells / h, K, max(1.0 - edge[-1], 0.0), RENEGING))
    return out
