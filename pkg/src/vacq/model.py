"""Model parameterization, elementary laws and the mixed-distribution container.

A service or vacation law is a :class:`DistributionSpec`; a full queue is a
:class:`QueueConfig`.  Stationary and transient answers from every pillar
(simulation, integral-equation solver, closed forms) are carried as a
:class:`MixedDistribution`: an atom at 0, a cell-centred density on
``(0, x_max)`` and a boundary mass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DETERMINISTIC = "deterministic"
EXPONENTIAL = "exponential"
TABULATED = "tabulated"

RENEGING = "reneging"
BALKING = "balking"

PROB_ATOL = 1e-10
NORMALIZATION_TOL = 1e-8


class SpecError(ValueError):
    """Invalid distribution or queue parameterization."""


@dataclass(frozen=True)
class DistributionSpec:
    """A nonnegative law given as a constant, an exponential rate or a quantile table.

    Tabulated laws are read as an inverse CDF through the ``(p, q)`` pairs with
    linear interpolation between them.
    """

    kind: str
    value: float = 0.0
    rate: float = 1.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == DETERMINISTIC:
            if not (math.isfinite(self.value) and self.value >= 0):
                raise SpecError(f"deterministic value must be >= 0, got {self.value}")
        elif self.kind == EXPONENTIAL:
            if not (math.isfinite(self.rate) and self.rate > 0):
                raise SpecError(f"exponential rate must be > 0, got {self.rate}")
        elif self.kind == TABULATED:
            if len(self.table) < 2:
                raise SpecError("tabulated law needs at least two (p, q) rows")
            p = np.array([row[0] for row in self.table], dtype=float)
            q = np.array([row[1] for row in self.table], dtype=float)
            if p[0] != 0.0 or p[-1] != 1.0 or np.any(np.diff(p) <= 0):
                raise SpecError("probability levels must increase strictly from 0 to 1")
            if np.any(q < 0) or np.any(np.diff(q) < 0) or not np.all(np.isfinite(q)):
                raise SpecError("quantiles must be finite, nonnegative and nondecreasing")
        else:
            raise SpecError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def deterministic(cls, value: float) -> "DistributionSpec":
        return cls(DETERMINISTIC, value=float(value))

    @classmethod
    def exponential(cls, rate: float) -> "DistributionSpec":
        return cls(EXPONENTIAL, rate=float(rate))

    @classmethod
    def tabulated(cls, rows: Sequence[tuple[float, float]]) -> "DistributionSpec":
        return cls(TABULATED, table=tuple((float(p), float(q)) for p, q in rows))

    @classmethod
    def from_csv(cls, path) -> "DistributionSpec":
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["p", "q"]:
                raise SpecError(f"{path}: expected header 'p,q'")
            rows = [(float(r["p"]), float(r["q"])) for r in reader]
        return cls.tabulated(rows)

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        """Parse ``det:<value>``, ``exp:<rate>`` or ``tab:<path.csv>``."""
        prefix, sep, arg = text.partition(":")
        if not sep or not arg:
            raise SpecError(f"cannot parse distribution {text!r}")
        try:
            if prefix == "det":
                return cls.deterministic(float(arg))
            if prefix == "exp":
                return cls.exponential(float(arg))
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"bad number in {text!r}") from exc
        if prefix == "tab":
            try:
                return cls.from_csv(arg)
            except OSError as exc:
                raise SpecError(f"cannot read table {arg!r}: {exc}") from exc
        raise SpecError(f"unknown distribution prefix {prefix!r}")

    def describe(self) -> str:
        if self.kind == DETERMINISTIC:
            return f"det:{self.value:g}"
        if self.kind == EXPONENTIAL:
            return f"exp:{self.rate:g}"
        return f"tab:{len(self.table)} rows"

    @property
    def levels(self) -> np.ndarray:
        return np.array([row[0] for row in self.table])

    @property
    def quantiles(self) -> np.ndarray:
        return np.array([row[1] for row in self.table])

    def mean(self) -> float:
        if self.kind == DETERMINISTIC:
            return self.value
        if self.kind == EXPONENTIAL:
            return 1.0 / self.rate
        p, q = self.levels, self.quantiles
        return float(np.sum(np.diff(p) * (q[1:] + q[:-1]) / 2))

    def support_max(self) -> float:
        """Upper end of the support (``inf`` for the exponential)."""
        if self.kind == DETERMINISTIC:
            return self.value
        if self.kind == EXPONENTIAL:
            return math.inf
        return float(self.quantiles[-1])


def sample(spec: DistributionSpec, u):
    """Inverse-CDF transform of uniforms ``u`` in [0, 1)."""
    u = np.asarray(u, dtype=float)
    if spec.kind == DETERMINISTIC:
        out = np.full_like(u, spec.value)
    elif spec.kind == EXPONENTIAL:
        out = -np.log1p(-u) / spec.rate
    else:
        out = np.interp(u, spec.levels, spec.quantiles)
    return out if out.ndim else float(out)


def cdf(spec: DistributionSpec, x, left: bool = False):
    """Right-continuous CDF ``P(X <= x)``; with ``left=True`` the limit ``P(X < x)``."""
    x = np.asarray(x, dtype=float)
    if spec.kind == DETERMINISTIC:
        out = (x > spec.value if left else x >= spec.value).astype(float)
    elif spec.kind == EXPONENTIAL:
        out = np.where(x > 0, -np.expm1(-spec.rate * np.maximum(x, 0.0)), 0.0)
    else:
        out = _tabulated_cdf(spec.levels, spec.quantiles, x, left)
    return out if out.ndim else float(out)


def _tabulated_cdf(p: np.ndarray, q: np.ndarray, x: np.ndarray, left: bool) -> np.ndarray:
    # idx = number of quantile knots <= x (or < x for the left limit)
    idx = np.searchsorted(q, x, side="left" if left else "right")
    hi = np.clip(idx, 1, len(q) - 1)
    lo = hi - 1
    dq = q[hi] - q[lo]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(dq > 0, (x - q[lo]) / dq, 1.0)
    val = p[lo] + (p[hi] - p[lo]) * np.clip(frac, 0.0, 1.0)
    val = np.where(idx == 0, 0.0, val)
    return np.where(idx >= len(q), 1.0, val)


@dataclass(frozen=True)
class QueueConfig:
    """Periodic arrivals every ``T``, deadline ``K``, service/vacation laws and discipline."""

    T: float
    K: float
    service: DistributionSpec
    vacation: DistributionSpec
    discipline: str = RENEGING

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise SpecError(f"T must be > 0, got {self.T}")
        if not (math.isfinite(self.K) and self.K > 0):
            raise SpecError(f"K must be > 0, got {self.K}")
        if self.discipline not in (RENEGING, BALKING):
            raise SpecError(f"discipline must be reneging or balking, got {self.discipline!r}")

    def with_discipline(self, discipline: str) -> "QueueConfig":
        return QueueConfig(self.T, self.K, self.service, self.vacation, discipline)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "K": self.K,
            "service": self.service.describe(),
            "vacation": self.vacation.describe(),
            "discipline": self.discipline,
        }


@dataclass(frozen=True)
class Stability:
    probability: float
    stable: bool


def check_stability(config: QueueConfig) -> Stability:
    """``P(service + vacation < T)`` and whether it is positive."""
    from .kernel import conv_cdf

    prob = float(conv_cdf(config, config.T, left=True))
    return Stability(prob, prob > PROB_ATOL)


@dataclass
class MixedDistribution:
    """Atom at 0, piecewise-constant density on ``(0, x_max)`` and a boundary mass.

    ``density[j]`` is the mean density of cell ``(j h, (j+1) h)`` and is reported
    at the cell midpoint.  For ``kind == "reneging"`` the boundary mass is the
    atom at ``x_max == K``; for ``"balking"`` it is the mass beyond ``x_max``.
    """

    atom0: float
    density: np.ndarray
    x_max: float
    boundary_mass: float
    kind: str = RENEGING
    h: float = field(init=False)

    def __post_init__(self):
        self.density = np.ascontiguousarray(self.density, dtype=float)
        if self.density.ndim != 1 or self.density.size == 0:
            raise ValueError("density must be a nonempty 1-D array")
        self.h = self.x_max / self.density.size

    @property
    def grid(self) -> np.ndarray:
        return (np.arange(self.density.size) + 0.5) * self.h

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.density.size + 1) * self.h

    def continuous_mass(self) -> float:
        return float(self.h * self.density.sum())

    def total_mass(self) -> float:
        return self.atom0 + self.continuous_mass() + self.boundary_mass

    def node_cdf(self) -> np.ndarray:
        """CDF at the cell edges ``0, h, ..., x_max`` (left limit at ``x_max``)."""
        out = np.empty(self.density.size + 1)
        out[0] = self.atom0
        np.cumsum(self.density * self.h, out=out[1:])
        out[1:] += self.atom0
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.interp(x, self.nodes, self.node_cdf())
        top = 1.0 if self.kind == RENEGING else 1.0 - self.boundary_mass
        out = np.where(x < 0, 0.0, np.where(x >= self.x_max, top, inside))
        return out if out.ndim else float(out)

    def mean(self) -> float:
        m = float(np.sum(self.grid * self.density) * self.h)
        return m + self.boundary_mass * self.x_max

    def check(self, tol: float = NORMALIZATION_TOL) -> None:
        if self.atom0 < -PROB_ATOL or self.boundary_mass < -PROB_ATOL:
            raise ValueError("negative atom")
        if np.any(self.density < -PROB_ATOL):
            raise ValueError("negative density")
        err = abs(self.total_mass() - 1.0)
        if err > tol:
            raise ValueError(f"mass defect {err:.3e} exceeds {tol:.1e}")

    def rows(self) -> list[tuple[float, float, float, float]]:
        """``(x, cdf, density, atom)`` rows: x=0, every cell midpoint, x=x_max."""
        edges = self.node_cdf()
        mid_cdf = (edges[:-1] + edges[1:]) / 2
        out = [(0.0, self.atom0, 0.0, self.atom0)]
        out.extend(zip(self.grid.tolist(), mid_cdf.tolist(), self.density.tolist(), [0.0] * self.density.size))
        top = 1.0 if self.kind == RENEGING else edges[-1]
        out.append((self.x_max, top, 0.0, self.boundary_mass))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["x", "cdf", "density", "atom"])
            for row in self.rows():
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, kind: str = RENEGING) -> "MixedDistribution":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(float(data[0, 3]), data[1:-1, 2].copy(), float(data[-1, 0]), float(data[-1, 3]), kind)
