"""The law G of service + vacation and the series kernels built on it.

Every evaluation here is real-domain.  Laws with exponential tails carry an
exact tail model ``1 - G(y) = sum_i c_i exp(-r_i y)`` for ``y >= y_star``
which lets the infinite window sums be closed with geometric series; laws with
bounded support are summed until the windows leave the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .model import (
    DETERMINISTIC,
    EXPONENTIAL,
    TABULATED,
    DistributionSpec,
    QueueConfig,
    SpecError,
    cdf,
)

DEFAULT_TRUNCATION_EPS = 1e-12
MAX_TERMS = 100_000
_QUAD_NODES = 2048


class TruncationError(RuntimeError):
    """A truncated series could not reach the requested tail bound."""


@dataclass(frozen=True)
class TailModel:
    y_star: float
    coefs: tuple[float, ...]
    rates: tuple[float, ...]

    def survival(self, y):
        y = np.asarray(y, dtype=float)
        return sum(c * np.exp(-r * y) for c, r in zip(self.coefs, self.rates))


class ConvolutionLaw:
    """Distribution function of ``service + vacation`` for one configuration."""

    def __init__(self, service: DistributionSpec, vacation: DistributionSpec, min_step: float):
        self.service = service
        self.vacation = vacation
        self.tail: Optional[TailModel] = None
        self.support_max = service.support_max() + vacation.support_max()
        self._grid = None
        kinds = (service.kind, vacation.kind)

        if kinds == (EXPONENTIAL, EXPONENTIAL):
            mu, lam = service.rate, vacation.rate
            if mu == lam:
                raise SpecError("exponential service and vacation need distinct rates")
            self.tail = TailModel(0.0, (mu / (mu - lam), lam / (lam - mu)), (lam, mu))
            self._eval = self._exp_exp
        elif DETERMINISTIC in kinds:
            if service.kind == DETERMINISTIC:
                shift, other = service.value, vacation
            else:
                shift, other = vacation.value, service
            self._shift, self._other = shift, other
            self._eval = self._shifted
            if other.kind == EXPONENTIAL:
                self.tail = TailModel(shift, (math.exp(other.rate * shift),), (other.rate,))
        else:
            # at least one tabulated law; integrate over its quantile function
            tab, other = (service, vacation) if service.kind == TABULATED else (vacation, service)
            self._tab, self._other = tab, other
            qmax = float(tab.quantiles[-1])
            hi = qmax + (other.support_max() if other.kind == TABULATED else 0.0)
            n = max(int(math.ceil(hi / min_step)), 1) + 1
            ygrid = np.linspace(0.0, hi, n) if hi > 0 else np.zeros(1)
            self._grid = (ygrid, self._quantile_average(ygrid))
            if other.kind == EXPONENTIAL:
                self.tail = TailModel(qmax, (self._exp_moment(tab, other.rate),), (other.rate,))
            self._eval = self._gridded

    # -- evaluators ------------------------------------------------------
    def _exp_exp(self, y, left):
        mu, lam = self.service.rate, self.vacation.rate
        yp = np.maximum(y, 0.0)
        small = (-mu * np.expm1(-lam * yp) + lam * np.expm1(-mu * yp)) / (mu - lam)
        big = 1.0 - self.tail.survival(yp)
        return np.where(y > 0, np.where(small < 0.5, small, big), 0.0)

    def _shifted(self, y, left):
        return cdf(self._other, y - self._shift, left=left)

    def _quantile_average(self, y):
        tab, other = self._tab, self._other
        u = (np.arange(_QUAD_NODES) + 0.5) / _QUAD_NODES
        q = np.interp(u, tab.levels, tab.quantiles)
        out = np.empty_like(y)
        step = max(1, 2_000_000 // _QUAD_NODES)
        for lo in range(0, y.size, step):
            blk = y[lo:lo + step, None] - q[None, :]
            out[lo:lo + step] = cdf(other, blk).mean(axis=1)
        return out

    @staticmethod
    def _exp_moment(tab, rate):
        # E[exp(rate * Q(U))] for piecewise-linear Q, exact per segment
        p, q = tab.levels, tab.quantiles
        dp, dq = np.diff(p), np.diff(q)
        a = rate * dq
        seg = np.where(np.abs(a) > 1e-12, np.expm1(a) / np.where(a == 0, 1, a), 1.0)
        return float(np.sum(dp * np.exp(rate * q[:-1]) * seg))

    def _gridded(self, y, left):
        ygrid, gvals = self._grid
        out = np.interp(y, ygrid, gvals, left=0.0, right=1.0)
        out = np.where(y < 0, 0.0, out)
        if self.tail is not None:
            beyond = y >= self.tail.y_star
            out = np.where(beyond, 1.0 - self.tail.survival(np.where(beyond, y, self.tail.y_star)), out)
        return out

    # -- public ------------------------------------------------------------
    def __call__(self, y, left: bool = False):
        y = np.asarray(y, dtype=float)
        out = np.clip(self._eval(y, left), 0.0, 1.0)
        return out if out.ndim else float(out)

    def survival(self, y, left: bool = False):
        """``1 - G(y)``, computed without cancellation in the exponential tail."""
        y = np.asarray(y, dtype=float)
        out = 1.0 - np.asarray(self(y, left))
        if self.tail is not None:
            beyond = y > self.tail.y_star
            out = np.where(beyond, self.tail.survival(np.where(beyond, y, self.tail.y_star)), out)
        return out

    def mean(self) -> float:
        return self.service.mean() + self.vacation.mean()

    def tail_series(self, y, T: float, left: bool = False, analytic: bool = True,
                    eps: float = DEFAULT_TRUNCATION_EPS):
        """``sum_{n>=1} [1 - G(y + nT)]`` elementwise (``G(.-)`` with ``left``)."""
        y = np.asarray(y, dtype=float)
        total = np.zeros_like(y)
        if y.size == 0:
            return total
        if analytic and self.tail is not None:
            ys = self.tail.y_star
            # terms with y + nT > y_star follow the tail model exactly
            n0 = np.maximum(1, np.floor((ys - y) / T) + 1).astype(np.int64)
            for n in range(1, int(n0.max())):
                sel = n < n0
                total += np.where(sel, self.survival(y + n * T, left), 0.0)
            start = y + n0 * T
            for c, r in zip(self.tail.coefs, self.tail.rates):
                total += c * np.exp(-r * start) / -math.expm1(-r * T)
            return total
        ymin = float(y.min())
        for n in range(1, MAX_TERMS + 1):
            total += self.survival(y + n * T, left)
            if ymin + n * T >= self.support_max or float(self.survival(ymin + n * T)) < eps:
                return total
        raise TruncationError(f"tail series did not reach {eps:g} within {MAX_TERMS} terms")


@lru_cache(maxsize=64)
def _law(service: DistributionSpec, vacation: DistributionSpec, min_step: float) -> ConvolutionLaw:
    return ConvolutionLaw(service, vacation, min_step)


def convolution_law(config: QueueConfig) -> ConvolutionLaw:
    return _law(config.service, config.vacation, 1e-3 * min(config.T, config.K))


def conv_cdf(config: QueueConfig, x, left: bool = False):
    """``G(x) = P(service + vacation <= x)`` (``< x`` with ``left``); zero for ``x < 0``."""
    return convolution_law(config)(x, left)


def _alpha(rate: float, T: float) -> float:
    return math.exp(-rate * T) / -math.expm1(-rate * T)


@dataclass(frozen=True)
class KernelParams:
    config: QueueConfig
    alpha_lambda: Optional[float] = None
    alpha_mu: Optional[float] = None
    truncation_eps: float = DEFAULT_TRUNCATION_EPS
    analytic: bool = True
    law: ConvolutionLaw = field(default=None, compare=False, repr=False)

    @classmethod
    def from_config(cls, config: QueueConfig, truncation_eps: float = DEFAULT_TRUNCATION_EPS,
                    analytic: bool = True) -> "KernelParams":
        a_lam = _alpha(config.vacation.rate, config.T) if config.vacation.kind == EXPONENTIAL else None
        a_mu = _alpha(config.service.rate, config.T) if config.service.kind == EXPONENTIAL else None
        return cls(config, a_lam, a_mu, truncation_eps, analytic, convolution_law(config))


def ab_sequences(x: float, w: float, n: int, T: float, K: float) -> tuple[float, float]:
    """Upper and lower window ends for the ``n``-th served successor."""
    a = x - w + (n + 1) * T
    b = 0.0 if n == 0 else K - w + n * T
    return a, b


def kernel_sum(x, w, params: KernelParams):
    """Probability that the next served customer waits at most ``x`` given anchor wait ``w``.

    Sums ``P(b_n <= S <= a_n)`` over the disjoint windows; the ``n >= 1``
    windows are empty unless ``x + T > K``.
    """
    T, K = params.config.T, params.config.K
    law = params.law
    x, w = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(w, dtype=float))
    z = x - w + T
    first = np.asarray(law(z))
    open_ = x + T > K
    if not np.any(open_):
        return first if first.ndim else float(first)
    ww, zz = w[open_], z[open_]
    extra = (law.tail_series(K - ww, T, left=True, analytic=params.analytic, eps=params.truncation_eps)
             - law.tail_series(zz, T, analytic=params.analytic, eps=params.truncation_eps))
    out = first.copy()
    out[open_] = np.clip(first[open_] + np.maximum(extra, 0.0), 0.0, 1.0)
    return out if out.ndim else float(out)


def loss_sum(w, params: KernelParams):
    """Expected number of customers lost after a served customer who waited ``w``."""
    T, K = params.config.T, params.config.K
    w = np.asarray(w, dtype=float)
    out = params.law.tail_series(K - w, T, left=True, analytic=params.analytic, eps=params.truncation_eps)
    return out if out.ndim else float(out)
