"""Periodic-arrival single-vacation queue with a waiting deadline.

Customers arrive every ``T``; after each service the server takes one
vacation.  A customer whose wait would reach ``K`` is lost (reneging) or,
when the workload is already at least ``K``, never joins (balking).
"""

from .closedform import (
    ClosedFormDDet,
    ClosedFormDM,
    ClosedFormError,
    balking_transient_tail,
    ddet_exp_solution,
    dm_exp_solution,
    volterra_resolvent_density,
)
from .kernel import KernelParams, conv_cdf, kernel_sum, loss_sum
from .model import (
    BALKING,
    RENEGING,
    DistributionSpec,
    MixedDistribution,
    QueueConfig,
    SpecError,
    check_stability,
)
from .montecarlo import estimate_stationary, estimate_transient_tail
from .recursion import next_reneging, run_path, step_balking
from .solver import (
    ConvergenceError,
    UnstableConfigError,
    iterate_transient,
    solve_balking_stationary,
    solve_reneging_stationary,
)

__version__ = "0.1.0"

__all__ = [
    "BALKING", "RENEGING",
    "ClosedFormDDet", "ClosedFormDM", "ClosedFormError",
    "ConvergenceError", "DistributionSpec", "KernelParams", "MixedDistribution",
    "QueueConfig", "SpecError", "UnstableConfigError",
    "balking_transient_tail", "check_stability", "conv_cdf", "ddet_exp_solution",
    "dm_exp_solution", "estimate_stationary", "estimate_transient_tail",
    "iterate_transient", "kernel_sum", "loss_sum", "next_reneging", "run_path",
    "solve_balking_stationary", "solve_reneging_stationary", "step_balking",
    "volterra_resolvent_density",
]
