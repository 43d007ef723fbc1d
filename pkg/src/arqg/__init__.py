"""Advance reservations in a preemptive-resume M/D/1 queue.

Closed-form waits, equilibria and revenue, best-response learning
dynamics, and a discrete-event simulator that checks the waits.
"""

from .dynamics import (
    Action,
    LearningConfig,
    LearningTrace,
    Mode,
    best_response,
    compare_modes,
    decide,
    detect_limit,
    run_learning,
)
from .equilibrium import (
    CriticalCosts,
    EquilibriumSet,
    cost_for_threshold,
    critical_costs,
    find_equilibria,
)
from .queue import ParameterError, QueueParams, RegimeError, believed_wait_ar, wait_ar, wait_noar
from .revenue import (
    BeliefDistribution,
    companion_threshold,
    conservative_optimum,
    dynamic_revenue,
    optimal_dynamic_fee,
    price_of_conservatism,
    revenue_at,
    static_optimum,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "BeliefDistribution",
    "CriticalCosts",
    "EquilibriumSet",
    "LearningConfig",
    "LearningTrace",
    "Mode",
    "ParameterError",
    "QueueParams",
    "RegimeError",
    "believed_wait_ar",
    "best_response",
    "companion_threshold",
    "compare_modes",
    "conservative_optimum",
    "cost_for_threshold",
    "critical_costs",
    "decide",
    "detect_limit",
    "dynamic_revenue",
    "find_equilibria",
    "optimal_dynamic_fee",
    "price_of_conservatism",
    "revenue_at",
    "run_learning",
    "static_optimum",
    "wait_ar",
    "wait_noar",
]
