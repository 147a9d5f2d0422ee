"""Continuous-time control problems, simulation and value estimation."""

from .analytic import (
    analytic_V,
    analytic_W,
    lower_bound_audit,
    monotonicity_experiment,
    nonuniformity_probe,
    one_switch_gamma_lambda,
    one_switch_gamma_t,
    random_schedule,
)
from .estimate import (
    Estimate,
    SearchConfig,
    discount_horizon,
    estimate_Vlambda,
    estimate_Vt,
    payoff_lambda,
    payoff_t,
)
from .problems import ControlProblem, ControlSchedule, counterexample, get_problem, smooth_variant
from .simulate import schedule_arrays, simulate, simulate_batch

__all__ = [
    "ControlProblem",
    "ControlSchedule",
    "Estimate",
    "SearchConfig",
    "analytic_V",
    "analytic_W",
    "counterexample",
    "discount_horizon",
    "estimate_Vlambda",
    "estimate_Vt",
    "get_problem",
    "lower_bound_audit",
    "monotonicity_experiment",
    "nonuniformity_probe",
    "one_switch_gamma_lambda",
    "one_switch_gamma_t",
    "payoff_lambda",
    "payoff_t",
    "random_schedule",
    "schedule_arrays",
    "simulate",
    "simulate_batch",
    "smooth_variant",
]
