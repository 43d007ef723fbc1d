"""Provider revenue when the reservation cost is a fee.

Revenue at an equilibrium threshold is the reservation rate times the fee,
``lam (1 - tau) C(tau)``. Everything else here (the static optimum, the
conservative optimum, the price of conservatism, dynamic-game revenue) is
built on that one function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .equilibrium import cost_for_threshold, critical_costs, find_equilibria, peak_threshold
from .queue import ParameterError, QueueParams, RegimeError, check_unit

TWO_THIRDS = 2.0 / 3.0
SCAN_POINTS = 10_000
GOLDEN_TOL = 1e-10


@dataclass(frozen=True)
class StaticOptimum:
    tau_opt: float
    fee: float
    revenue: float
    multiple_equilibria: bool


@dataclass(frozen=True)
class ConservativeOptimum:
    """Best revenue the provider can guarantee with a unique equilibrium.

    Above utilization 2/3 the fee is the supremum ``C(1)`` and is not
    attained: any fee strictly below it works, the revenue is approached.
    """

    threshold: float
    fee: float
    revenue: float
    attained: bool


@dataclass(frozen=True)
class BeliefDistribution:
    """Distribution of the initial belief, given as ``x -> P(belief < x)``."""

    cdf: Callable[[float], float]
    kind: str = "custom"

    def __post_init__(self) -> None:
        if self.cdf(0.0) != 0.0 or self.cdf(1.0) != 1.0:
            raise ParameterError("belief cdf must satisfy cdf(0) = 0 and cdf(1) = 1")

    def __call__(self, x: float) -> float:
        return float(self.cdf(x))

    @classmethod
    def uniform(cls) -> BeliefDistribution:
        return cls(lambda x: min(max(x, 0.0), 1.0), kind="uniform")

    @classmethod
    def point_mass(cls, at: float) -> BeliefDistribution:
        at = check_unit("at", at)
        if at >= 1.0:
            raise ParameterError("point mass must sit below 1")
        return cls(lambda x: 1.0 if x > at else 0.0, kind="point-mass")


@dataclass(frozen=True)
class DynamicRevenue:
    revenue: float
    equilibria: tuple[float, ...]
    # none-make-AR is an equilibrium, so action learning absorbs there and earns nothing
    zero_under_action_learning: bool


@dataclass(frozen=True)
class DynamicFee:
    fee: float
    revenue: float
    threshold: float


def revenue_at(params: QueueParams, tau_e: float) -> float:
    tau_e = check_unit("tau_e", tau_e)
    return params.arrival_rate * (1.0 - tau_e) * cost_for_threshold(params, tau_e)


def revenue_from_utilization(rho: float, tau_e: float) -> float:
    """Dimensionless form of :func:`revenue_at`; depends on ``rho`` only.

    ``rho^2 tau (1 - tau) / (2 (1 - rho) (1 - rho + rho tau)^2)``.
    """
    return rho * rho * tau_e * (1.0 - tau_e) / (2.0 * (1.0 - rho) * (1.0 - rho + rho * tau_e) ** 2)


def static_optimum(params: QueueParams) -> StaticOptimum:
    lam, mu, rho = params.arrival_rate, params.service_rate, params.rho
    return StaticOptimum(
        tau_opt=(1.0 - rho) / (2.0 - rho),
        fee=lam * (2.0 * mu - lam) / (8.0 * mu * (mu - lam) ** 2),
        revenue=rho * rho / (8.0 * (1.0 - rho) ** 2),
        multiple_equilibria=rho > TWO_THIRDS,
    )


def guaranteed_threshold(params: QueueParams) -> float:
    """The interior threshold ``((1 - rho) / rho)^2`` that costs ``C(1)``."""
    rho = params.rho
    return ((1.0 - rho) / rho) ** 2


def conservative_optimum(params: QueueParams) -> ConservativeOptimum:
    rho = params.rho
    if rho <= 0.5:
        raise RegimeError(
            "utilization <= 1/2 always gives a unique equilibrium; use static_optimum"
        )
    if rho <= TWO_THIRDS:
        best = static_optimum(params)
        return ConservativeOptimum(best.tau_opt, best.fee, best.revenue, attained=True)
    return ConservativeOptimum(
        threshold=guaranteed_threshold(params),
        fee=critical_costs(params).lower,
        revenue=(2.0 * rho - 1.0) / (2.0 * (1.0 - rho)),
        attained=False,
    )


def price_of_conservatism(params: QueueParams) -> float:
    rho = params.rho
    if rho <= TWO_THIRDS:
        return 1.0
    return rho * rho / (-8.0 * rho * rho + 12.0 * rho - 4.0)


def companion_threshold(params: QueueParams, tau_e1: float) -> float:
    """Upper equilibrium sharing its cost with the lower one, ``tau_g / tau_e1``."""
    tau_e1 = check_unit("tau_e1", tau_e1)
    peak = peak_threshold(params)
    if peak is None:
        raise RegimeError("paired equilibria need utilization > 1/2")
    tau_g = guaranteed_threshold(params)
    slack = 1e-12
    if not (tau_g - slack <= tau_e1 <= peak + slack):
        raise ParameterError(f"tau_e1 must lie in [{tau_g:.6g}, {peak:.6g}], got {tau_e1!r}")
    tau_e2 = tau_g / tau_e1
    if 1.0 < tau_e2 <= 1.0 + slack:
        tau_e2 = 1.0
    return tau_e2


def dynamic_revenue(
    params: QueueParams, fee: float, beliefs: BeliefDistribution
) -> DynamicRevenue:
    """Long-run expected revenue under strategy learning from a random belief.

    Beliefs below the upper interior equilibrium drift to the lower one;
    beliefs above it drift to none-make-AR.
    """
    eq = find_equilibria(params, fee)
    roots = eq.some_make_ar
    if not roots:
        revenue = 0.0
    elif len(roots) == 2:
        revenue = beliefs(roots[1]) * revenue_at(params, roots[0])
    elif eq.boundary:
        revenue = beliefs(roots[0]) * revenue_at(params, roots[0])
    else:
        revenue = revenue_at(params, roots[0])
    return DynamicRevenue(revenue, eq.thresholds, eq.none_make_ar)


def golden_section_max(
    f: Callable[[float], float], lo: float, hi: float, tol: float = GOLDEN_TOL
) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def _numeric_dynamic_fee(params: QueueParams, beliefs: BeliefDistribution) -> DynamicFee:
    best_static = static_optimum(params)
    peak = peak_threshold(params)
    if peak is None:
        return DynamicFee(best_static.fee, best_static.revenue, best_static.tau_opt)

    tau_g = guaranteed_threshold(params)
    # unique-equilibrium fees reach thresholds in (0, tau_g)
    if best_static.tau_opt < tau_g:
        best = DynamicFee(best_static.fee, best_static.revenue, best_static.tau_opt)
    else:
        # at exactly C(1) the lower equilibrium tau_g is the only interior one
        best = DynamicFee(critical_costs(params).lower, revenue_at(params, tau_g), tau_g)

    def objective(tau_e1: float) -> float:
        tau_e1 = min(max(tau_e1, tau_g), peak)
        return beliefs(companion_threshold(params, tau_e1)) * revenue_at(params, tau_e1)

    grid = np.linspace(tau_g, peak, SCAN_POINTS)
    values = np.array([objective(x) for x in grid])
    k = int(np.argmax(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, SCAN_POINTS - 1)]
    x = golden_section_max(objective, lo, hi)
    candidates = [(values[k], grid[k]), (objective(x), x)]
    value, tau_e1 = max(candidates)
    if value > best.revenue:
        tau_e1 = float(tau_e1)
        best = DynamicFee(cost_for_threshold(params, tau_e1), float(value), tau_e1)
    return best


def optimal_dynamic_fee(params: QueueParams, beliefs: BeliefDistribution) -> DynamicFee:
    """Revenue-maximizing fee for the dynamic game under strategy learning.

    Uniform beliefs use the closed form: ``C(1)`` above utilization 2/3 and
    the static optimum below. Other belief laws are optimized numerically
    over the lower equilibrium of the multiple-equilibria band.
    """
    if beliefs.kind != "uniform":
        return _numeric_dynamic_fee(params, beliefs)
    if params.rho > TWO_THIRDS:
        cons = conservative_optimum(params)
        return DynamicFee(cons.fee, cons.revenue, cons.threshold)
    best = static_optimum(params)
    return DynamicFee(best.fee, best.revenue, best.tau_opt)
