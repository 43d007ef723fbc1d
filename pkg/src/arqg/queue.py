"""Preemptive-resume M/D/1 waiting times for threshold populations.

Customers carry a potential priority ``p`` uniform on [0, 1]. Under a
threshold strategy ``tau`` every customer with ``p > tau`` reserves and is
served at priority ``p``; the rest share the bottom class, FCFS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ParameterError(ValueError):
    """Raised when queue parameters or probabilities leave their domain."""


class RegimeError(ValueError):
    """Raised when an operation is asked outside the regime it applies to."""


def check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


@dataclass(frozen=True)
class QueueParams:
    """Arrival rate ``lambda`` and service rate ``mu`` of the M/D/1 queue.

    Service time is deterministic, ``1/mu``. Utilization is derived.
    """

    arrival_rate: float
    service_rate: float

    def __post_init__(self) -> None:
        lam, mu = self.arrival_rate, self.service_rate
        if not (math.isfinite(lam) and math.isfinite(mu)):
            raise ParameterError("rates must be finite")
        if lam <= 0:
            raise ParameterError("arrival rate must be > 0")
        if mu <= 0:
            raise ParameterError("service rate must be > 0")
        if lam >= mu:
            raise ParameterError("arrival rate must be < service rate")

    @classmethod
    def from_utilization(cls, rho: float, service_rate: float = 1.0) -> QueueParams:
        return cls(rho * service_rate, service_rate)

    @property
    def rho(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def service_time(self) -> float:
        return 1.0 / self.service_rate


def wait_ar(params: QueueParams, tau: float) -> float:
    """Expected wait of the threshold customer when it reserves.

    With ``d = lam (1 - tau)`` (rate of higher-priority reservers) and
    ``y = mu - d`` this is ``d (3 mu - 2 d) / (2 mu y^2)``, an
    exact rearrangement of the preemptive-resume priority formula that
    avoids subtracting ``1/mu`` and is exactly zero at ``tau = 1``.
    """
    tau = check_unit("tau", tau)
    lam, mu = params.arrival_rate, params.service_rate
    d = lam * (1.0 - tau)
    y = mu - d
    return d * (3.0 * mu - 2.0 * d) / (2.0 * mu * y * y)


def wait_noar(params: QueueParams, tau: float) -> float:
    """Expected wait of the threshold customer when it does not reserve.

    Reduces to the Pollaczek-Khinchine M/D/1 wait ``lam / (2 mu (mu - lam))``
    at ``tau = 1`` and to :func:`wait_ar` at ``tau = 0``.
    """
    tau = check_unit("tau", tau)
    lam, mu = params.arrival_rate, params.service_rate
    d = lam * (1.0 - tau)
    y = mu - d
    gap = mu - lam
    return (0.5 * mu * lam + d * gap) / (mu * y * gap)


def believed_wait_ar(params: QueueParams, belief: float, p: float) -> float:
    """Wait a customer with potential priority ``p`` expects from reserving.

    Everyone else is assumed to follow ``belief``. A customer above the
    believed threshold sees exactly the reservers above it, so it waits like
    a threshold customer at ``p``; below it, like one at ``belief``.
    """
    belief = check_unit("belief", belief)
    p = check_unit("p", p)
    return wait_ar(params, max(p, belief))


def pk_wait(params: QueueParams) -> float:
    """Single-class M/D/1 mean wait in queue."""
    lam, mu = params.arrival_rate, params.service_rate
    return lam / (2.0 * mu * (mu - lam))
