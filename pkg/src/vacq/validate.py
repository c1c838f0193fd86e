"""Cross-checks between simulation, the integral-equation solver and the closed forms.

Each comparison produces named checks with a value, a tolerance and a verdict,
so the CLI can print them and exit nonzero when any fails.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .closedform import balking_transient_tail, ddet_exp_solution, dm_exp_solution
from .model import BALKING, DETERMINISTIC, EXPONENTIAL, QueueConfig
from .montecarlo import estimate_stationary, estimate_transient_tail
from .solver import solve_balking_stationary, solve_reneging_stationary

REPORT_VERSION = "1.0"
MC_CDF_TOL = 0.005
BK_SE_TOL = 3.0
DENSITY_TOL = 1e-4


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    unit: str
    passed: bool


def closed_form_for(config: QueueConfig):
    """The matching closed form for a reneging config, or None."""
    if config.discipline == BALKING or config.vacation.kind != EXPONENTIAL:
        return None
    lam = config.vacation.rate
    if config.service.kind == DETERMINISTIC and config.service.value > 0 and config.T > config.service.value:
        return ddet_exp_solution(lam, config.service.value, config.T, config.K)
    if config.service.kind == EXPONENTIAL and config.service.rate != lam:
        return dm_exp_solution(lam, config.service.rate, config.T, config.K)
    return None


def _sup_cdf(mc, cdf_fn, upto) -> float:
    # empirical CDF is exact at histogram edges; compare there
    nodes = mc.nodes
    keep = nodes < upto
    return float(np.max(np.abs(mc.node_cdf()[keep] - np.asarray(cdf_fn(nodes[keep])))))


def _se_units(delta: float, se: float) -> float:
    # a zero standard error (degenerate estimate) is floored to keep the ratio finite
    return abs(delta) / max(se, 1e-12)


def compare_pillars(config: QueueConfig, customers: int = 1_000_000, replications: int = 8,
                    seed: int = 0, grid_size: int = 4096, tol: float = 1e-10,
                    burn_in: int | None = None, threads: int | None = None) -> dict:
    """Run every applicable pillar and score the pairwise agreements."""
    balking = config.discipline == BALKING
    solve = solve_balking_stationary if balking else solve_reneging_stationary
    sol = solve(config, grid_size=grid_size, tol=tol)
    mc = estimate_stationary(config, customers, burn_in=burn_in, replications=replications,
                             seed=seed, threads=threads)
    cf = closed_form_for(config)
    K = config.K
    bk_se = mc.BK_hat.se

    checks = [
        Check("sim_vs_solver_cdf_sup", _sup_cdf(mc.distribution, sol.W.cdf, K), MC_CDF_TOL, "probability",
              False),
        Check("sim_vs_solver_BK", _se_units(mc.BK_hat.value - sol.BK, bk_se), BK_SE_TOL, "se", False),
        Check("solver_BK_self_consistency", abs(sol.BK - sol.BK_check), 10 * tol, "probability", False),
    ]
    pillars = {"simulation": {"W0": mc.W0_hat.value, "W0_se": mc.W0_hat.se,
                              "BK": mc.BK_hat.value, "BK_se": bk_se},
               "solver": {"W0": sol.W.atom0, "BK": sol.BK, "BK_check": sol.BK_check,
                          "iterations": sol.iterations, "residual": sol.residual}}
    if cf is not None:
        grid = sol.W.grid[sol.W.grid < K]
        dens_gap = float(np.max(np.abs(sol.W.density[:grid.size] - cf.density(grid))))
        checks += [
            Check("sim_vs_closedform_cdf_sup", _sup_cdf(mc.distribution, cf.cdf, K), MC_CDF_TOL,
                  "probability", False),
            Check("sim_vs_closedform_BK", _se_units(mc.BK_hat.value - cf.BK, bk_se), BK_SE_TOL, "se", False),
            Check("solver_vs_closedform_density_sup", dens_gap, DENSITY_TOL, "density", False),
        ]
        pillars["closedform"] = cf.to_dict()
    for c in checks:
        c.value = float(c.value)
        c.passed = bool(c.value < c.tolerance) if c.unit != "se" else bool(c.value <= c.tolerance)
    return {
        "config": config.to_dict(),
        "seed": seed,
        "customers": customers,
        "replications": replications,
        "grid": grid_size,
        "tol": tol,
        "closedform": "n/a" if cf is None else pillars["closedform"]["case"],
        "pillars": pillars,
        "checks": [asdict(c) for c in checks],
        "passed": all(c.passed for c in checks),
    }


def balking_transient_report(lam: float, sigma: float, T: float, K: float,
                             ns=(0, 1, 2, 3), xs=(0.0, 0.5, 1.0, 2.0),
                             replications: int = 100_000, seed: int = 0) -> dict:
    """Formula against simulation for ``P(workload of arrival n+1 > x)`` from an empty start.

    Only ``n = 0`` is scored; larger ``n`` record the signed deviation.
    """
    from .model import DistributionSpec

    config = QueueConfig(T, K, DistributionSpec.deterministic(sigma), DistributionSpec.exponential(lam), BALKING)
    rows = []
    for n in ns:
        for x in xs:
            tail = balking_transient_tail(lam, sigma, T, K, n, x)
            est = estimate_transient_tail(config, n + 1, x, replications, seed)
            dev = tail.value - est.p_hat
            rows.append({
                "n": n, "x": x,
                "formula": tail.value, "simulated": est.p_hat, "se": est.se,
                "deviation": dev, "deviation_se": _se_units(dev, est.se),
                "validated": tail.validated,
                "agrees": _se_units(dev, est.se) <= BK_SE_TOL,
            })
    base = [r for r in rows if r["n"] == 0]
    return {
        "version": REPORT_VERSION,
        "parameters": {"lambda": lam, "sigma": sigma, "T": T, "K": K},
        "replications": replications,
        "seed": seed,
        "rows": rows,
        "n0_agrees": all(r["agrees"] for r in base),
    }


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
