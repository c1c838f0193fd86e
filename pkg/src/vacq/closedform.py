"""Explicit stationary densities for exponential vacations.

Two families: deterministic service (``DDet``) and exponential service
(``DM``).  In both, the density on ``(0, K)`` is a sum of exponentials scaled
by ``W(0)``; ``W(0)`` and the rejection probability ``BK`` are obtained
together from normalisation plus the exact loss series, which makes ``BK``
proportional to ``W(0)``.

The densities follow the published derivation, which differentiates the
stationary equation as if it were of Volterra type (integral over ``(0, x)``).
The kernel depends on ``x`` for every anchor ``w`` in ``(0, K)``, so the
equation is really of Fredholm type and these formulas do not reproduce the
stationary law; ``compare`` in :mod:`vacq.validate` measures by how much.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import _alpha


class ClosedFormError(ValueError):
    pass


def _int_exp(c, K):
    """``int_0^K exp(c x) dx`` for real or complex ``c``."""
    if abs(c) * K < 1e-12:
        return K * (1 + c * K / 2)
    return np.expm1(c * K) / c


@dataclass(frozen=True)
class ClosedFormDDet:
    lam: float
    sigma: float
    T: float
    K: float
    alpha_lambda: float
    amplitude: float
    rate: float
    W0: float
    BK: float
    BK_uncorrected: float

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return self.W0 * self.amplitude * np.exp(self.rate * x)

    def continuous_mass(self) -> float:
        return self.W0 * self.amplitude * float(_int_exp(self.rate, self.K))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 0.0, self.K)
        part = self.W0 * self.amplitude * np.where(
            abs(self.rate) * self.K < 1e-12, xc, np.expm1(self.rate * xc) / self.rate)
        return np.where(x < 0, 0.0, np.where(x >= self.K, 1.0, self.W0 + part))

    def normalization_defect(self) -> float:
        return abs(self.W0 + self.continuous_mass() + self.BK - 1.0)

    def to_dict(self) -> dict:
        return {
            "case": "d-exp",
            "lambda": self.lam, "sigma": self.sigma, "T": self.T, "K": self.K,
            "alpha_lambda": self.alpha_lambda,
            "amplitude": self.amplitude, "rate": self.rate,
            "W0": self.W0, "BK": self.BK,
            "BK_uncorrected": self.BK_uncorrected,
            "BK_uncorrected_deviation": self.BK_uncorrected - self.BK,
        }


def ddet_exp_solution(lam: float, sigma: float, T: float, K: float) -> ClosedFormDDet:
    """Constants of the exponential density for deterministic service ``sigma``."""
    if min(lam, sigma, T, K) <= 0:
        raise ClosedFormError("lambda, sigma, T and K must be positive")
    if T <= sigma:
        raise ClosedFormError("unstable: need T > sigma")
    a = _alpha(lam, T)
    lead = a * math.exp(lam * sigma)
    amplitude = lam * lead
    rate = lam * (lead - 1.0)
    integral = amplitude * float(_int_exp(rate, K))
    # BK / W0 from summing the loss series against the density in closed form
    ratio = lead * math.exp(-lam * K * (1.0 - lead))
    W0 = 1.0 / (1.0 + integral + ratio)
    BK = ratio * W0
    # same system with the loss exponent missing its factor K
    ratio_u = a * math.exp(-lam * (K - sigma - lead))
    W0_u = 1.0 / (1.0 + integral + ratio_u)
    return ClosedFormDDet(lam, sigma, T, K, a, amplitude, rate, W0, BK, ratio_u * W0_u)


def volterra_resolvent_density(lam: float, sigma: float, T: float, K: float, x=None):
    """Density from the resolvent of the convolution-type Volterra equation.

    ``f = h + L * int_0^x exp((L - lam)(x - w)) h(w) dw`` with
    ``h(x) = W0 * L * exp(-lam x)`` and ``L = lam * alpha * exp(lam sigma)``;
    the integral is done in closed form.  Returns a callable when ``x`` is None.
    """
    sol = ddet_exp_solution(lam, sigma, T, K)
    L = sol.amplitude
    c = sol.W0 * L

    def f(x):
        x = np.asarray(x, dtype=float)
        h = c * np.exp(-lam * x)
        # L * int_0^x exp((L-lam)(x-w)) exp(-lam w) dw = exp((L-lam)x) * (1 - exp(-L x))
        resolved = c * np.exp((L - lam) * x) * -np.expm1(-L * x)
        return h + resolved

    return f if x is None else f(x)


@dataclass(frozen=True)
class ClosedFormDM:
    lam: float
    mu: float
    T: float
    K: float
    alpha_lambda: float
    alpha_mu: float
    A: float
    B: float
    gamma1: complex
    gamma2: complex
    C1: complex
    C2: complex
    W0: float
    BK: float
    BK_uncorrected: float

    @property
    def complex_roots(self) -> bool:
        return abs(self.gamma1.imag) > 0

    def shape(self, x):
        """``C1 exp(g1 x) + C2 exp(g2 x)`` in real arithmetic."""
        x = np.asarray(x, dtype=float)
        if self.complex_roots:
            a, b = self.gamma1.real, self.gamma1.imag
            return 2 * np.exp(a * x) * (self.C1.real * np.cos(b * x) - self.C1.imag * np.sin(b * x))
        return self.C1.real * np.exp(self.gamma1.real * x) + self.C2.real * np.exp(self.gamma2.real * x)

    def density(self, x):
        return self.W0 * self.shape(x)

    def _shape_integral(self, shift: float = 0.0, upto=None) -> float:
        K = self.K if upto is None else upto
        val = self.C1 * _int_exp(self.gamma1 + shift, K) + self.C2 * _int_exp(self.gamma2 + shift, K)
        return float(np.real(val))

    def continuous_mass(self) -> float:
        return self.W0 * self._shape_integral()

    def cdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xc = np.clip(x, 0.0, self.K)
        part = np.array([self._shape_integral(upto=v) for v in xc])
        out = np.where(x < 0, 0.0, np.where(x >= self.K, 1.0, self.W0 * (1.0 + part)))
        return out if out.size > 1 else float(out[0])

    def normalization_defect(self) -> float:
        return abs(self.W0 + self.continuous_mass() + self.BK - 1.0)

    def denominator(self, theta):
        """Quadratic whose zeros are the Laplace-transform poles."""
        lam, mu, al, am = self.lam, self.mu, self.alpha_lambda, self.alpha_mu
        return (theta ** 2 * (mu - lam)
                + theta * ((mu ** 2 - lam ** 2) + lam * mu * (am - al))
                + lam * mu * (mu * (1 - al) - lam * (1 - am)))

    def to_dict(self) -> dict:
        def cx(z):
            return {"re": float(np.real(z)), "im": float(np.imag(z))}
        return {
            "case": "m-exp",
            "lambda": self.lam, "mu": self.mu, "T": self.T, "K": self.K,
            "alpha_lambda": self.alpha_lambda, "alpha_mu": self.alpha_mu,
            "A": self.A, "B": self.B,
            "gamma": [cx(self.gamma1), cx(self.gamma2)],
            "C": [cx(self.C1), cx(self.C2)],
            "vieta_sum_residual": abs(self.gamma1 + self.gamma2 + self.A),
            "vieta_product_residual": abs(self.gamma1 * self.gamma2 - self.B),
            "W0": self.W0, "BK": self.BK,
            "BK_uncorrected": self.BK_uncorrected,
            "BK_uncorrected_deviation": self.BK_uncorrected - self.BK,
        }


def dm_exp_solution(lam: float, mu: float, T: float, K: float) -> ClosedFormDM:
    """Constants of the two-exponential density for exponential service rate ``mu``."""
    if min(lam, mu, T, K) <= 0:
        raise ClosedFormError("lambda, mu, T and K must be positive")
    if lam == mu:
        raise ClosedFormError("lambda and mu must differ")
    al, am = _alpha(lam, T), _alpha(mu, T)
    A = lam + mu - lam * mu / (mu - lam) * al - lam * mu / (lam - mu) * am
    B = lam * mu - lam ** 2 * mu / (lam - mu) * am - lam * mu ** 2 / (mu - lam) * al
    disc = complex(A * A - 4 * B)
    root = np.sqrt(disc)
    # stable quadratic formula
    q = -0.5 * (A + (root if A >= 0 else -root))
    g1, g2 = q, B / q
    if abs(g1 - g2) < 1e-8:
        raise ClosedFormError("repeated characteristic root")
    if disc.real >= 0:
        g1, g2 = complex(max(g1.real, g2.real)), complex(min(g1.real, g2.real))
    num_slope = lam * mu * (al - am)
    num_const = lam * mu * (mu * al - lam * am)
    # partial fractions of the monic form: divide the numerator by the (mu - lam) leading coefficient
    C1 = (g1 * num_slope + num_const) / (mu - lam) / (g1 - g2)
    C2 = (g2 * num_slope + num_const) / (mu - lam) / (g2 - g1)

    ints = C1 * _int_exp(g1, K) + C2 * _int_exp(g2, K)
    base = float(np.real(ints))
    cl, cm = mu / (mu - lam), lam / (lam - mu)

    def loss_ratio(decay_on_integral: bool) -> float:
        tot = 0.0
        for coef, r, alpha in ((cl, lam, al), (cm, mu, am)):
            inner = np.real(C1 * _int_exp(g1 + r, K) + C2 * _int_exp(g2 + r, K))
            damp = math.exp(-r * K) if decay_on_integral else 1.0
            tot += coef * alpha * (math.exp(-r * K) + damp * inner)
        return tot

    ratio = loss_ratio(True)
    W0 = 1.0 / (1.0 + base + ratio)
    ratio_u = loss_ratio(False)
    W0_u = 1.0 / (1.0 + base + ratio_u)
    return ClosedFormDM(lam, mu, T, K, al, am, A, B, complex(g1), complex(g2), complex(C1), complex(C2),
                        float(W0), float(ratio * W0), float(ratio_u * W0_u))


@dataclass(frozen=True)
class TransientTail:
    value: float
    validated: bool
    note: str


def balking_transient_tail(lam: float, sigma: float, T: float, K: float, n: int, x: float) -> TransientTail:
    """Binomial-sum formula for ``P(workload of arrival n+1 > x)``, clamped to [0, 1].

    Only ``n == 0`` is established (single exponential tail); larger ``n`` is
    reported as-is for empirical comparison.
    """
    if n < 0 or x < 0:
        raise ValueError("need n >= 0 and x >= 0")
    total = 0.0
    for j in range(n + 1):
        total += math.comb(n, j) * (K * lam) ** (n - j) * math.exp(
            -lam * (x + (n + 1) * T - (n + 1 - j) * sigma))
    value = min(max(total, 0.0), 1.0)
    if n == 0:
        return TransientTail(value, True, "validated")
    return TransientTail(value, False, "unvalidated formula; compare with simulation")
