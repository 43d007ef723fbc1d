"""Reservation cost as a function of the threshold, and its inverse.

``cost_for_threshold`` is the fee that makes the threshold customer
indifferent. Equilibria for a given cost are the interior solutions of
``C(tau) = cost`` plus, when ``cost >= C(1)``, the none-make-AR threshold 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .queue import ParameterError, QueueParams, check_unit

ROOT_EPS = 1e-12
TANGENT_RTOL = 1e-14


@dataclass(frozen=True)
class CriticalCosts:
    """``lower`` is ``C(1)``; ``upper`` is the interior peak of ``C``.

    ``upper`` and ``peak`` are ``None`` when utilization is at most 1/2,
    where ``C`` is increasing and ``lower`` is already its maximum.
    """

    lower: float
    upper: float | None = None
    peak: float | None = None


@dataclass(frozen=True)
class EquilibriumSet:
    some_make_ar: tuple[float, ...] = field(default_factory=tuple)
    none_make_ar: bool = False
    # cost sits exactly on the peak of C: a single tangent equilibrium
    boundary: bool = False

    @property
    def thresholds(self) -> tuple[float, ...]:
        """Every equilibrium threshold, 1.0 included for none-make-AR."""
        return self.some_make_ar + ((1.0,) if self.none_make_ar else ())

    @property
    def regime(self) -> str:
        n = len(self.some_make_ar)
        if n == 2:
            return "multiple"
        if n == 1 and self.none_make_ar:
            return "boundary"
        if n == 1:
            return "unique-some"
        return "unique-none"


def cost_for_threshold(params: QueueParams, tau: float) -> float:
    """Reservation cost ``lam mu tau / (2 (mu - lam) (mu - lam (1 - tau))^2)``."""
    tau = check_unit("tau", tau)
    lam, mu = params.arrival_rate, params.service_rate
    y = mu - lam * (1.0 - tau)
    return lam * mu * tau / (2.0 * (mu - lam) * y * y)


def peak_threshold(params: QueueParams) -> float | None:
    """Location ``(mu - lam) / lam`` of the maximum of ``C``, if interior."""
    if params.rho <= 0.5:
        return None
    return (params.service_rate - params.arrival_rate) / params.arrival_rate


def critical_costs(params: QueueParams) -> CriticalCosts:
    lam, mu = params.arrival_rate, params.service_rate
    lower = lam / (2.0 * mu * (mu - lam))
    if params.rho <= 0.5:
        return CriticalCosts(lower)
    upper = mu / (8.0 * (lam - mu) ** 2)
    return CriticalCosts(lower, upper, peak_threshold(params))


def _quadratic_roots(a: float, b: float, c: float) -> tuple[list[float], bool]:
    """Real roots of ``a x^2 + b x + c`` and whether they are a tangent pair."""
    disc = b * b - 4.0 * a * c
    if abs(disc) <= TANGENT_RTOL * b * b:
        return [-b / (2.0 * a)], True
    if disc < 0:
        return [], False
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return sorted([q / a, c / q]), False


def find_equilibria(params: QueueParams, cost: float) -> EquilibriumSet:
    """All equilibrium thresholds for a reservation cost.

    Interior thresholds solve ``C(tau) = cost``, rewritten with
    ``g = mu - lam`` as the quadratic
    ``2 cost g lam^2 tau^2 + (4 cost g^2 lam - lam mu) tau + 2 cost g^3 = 0``.
    A root at ``tau = 1`` is reported only through ``none_make_ar``.
    """
    cost = float(cost)
    if not math.isfinite(cost) or cost < 0:
        raise ParameterError(f"reservation cost must be finite and >= 0, got {cost!r}")
    lam, mu = params.arrival_rate, params.service_rate
    lower = lam / (2.0 * mu * (mu - lam))
    none = cost >= lower
    if cost == 0.0:
        # free reservations: everyone with p > 0 strictly prefers to reserve
        return EquilibriumSet((0.0,), none)

    g = mu - lam
    roots, tangent = _quadratic_roots(
        2.0 * cost * g * lam * lam,
        4.0 * cost * g * g * lam - lam * mu,
        2.0 * cost * g**3,
    )
    inside = tuple(r for r in roots if ROOT_EPS < r < 1.0 - ROOT_EPS)
    return EquilibriumSet(inside, none, boundary=tangent and bool(inside))
