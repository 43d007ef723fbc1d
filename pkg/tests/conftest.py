"""Independent oracles shared by the test modules.

Nothing here calls into the closed forms under test beyond the literal
wait expressions, which are written out directly in their textbook shape.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from arqg import QueueParams

ACCEPTANCE_LINES: list[str] = []


def literal_wait_ar(lam: float, mu: float, tau: float) -> float:
    """Reserver wait in its uncancelled form."""
    return (mu - lam / 2 * (1 - tau)) / (mu - lam * (1 - tau)) ** 2 - 1 / mu


def literal_wait_noar(lam: float, mu: float, tau: float) -> float:
    """Non-reserver wait in its uncancelled form."""
    return (mu - lam / 2) / ((mu - lam * (1 - tau)) * (mu - lam)) - 1 / mu


def exact_wait_ar(lam, mu, tau) -> Fraction:
    """Reserver wait in exact rational arithmetic."""
    lam, mu, tau = Fraction(lam), Fraction(mu), Fraction(tau)
    return (mu - lam / 2 * (1 - tau)) / (mu - lam * (1 - tau)) ** 2 - 1 / mu


def exact_wait_noar(lam, mu, tau) -> Fraction:
    lam, mu, tau = Fraction(lam), Fraction(mu), Fraction(tau)
    return (mu - lam / 2) / ((mu - lam * (1 - tau)) * (mu - lam)) - 1 / mu


def bisect(f, lo: float, hi: float, iters: int = 200) -> float:
    """Plain bisection on a sign change of ``f`` over ``[lo, hi]``."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def oracle_best_response(lam: float, mu: float, fee: float, belief: float) -> float:
    """Best-response threshold by bisection on the indifference condition."""
    w_no = literal_wait_noar(lam, mu, belief)
    if literal_wait_ar(lam, mu, belief) + fee < w_no:
        return 0.0
    if fee >= w_no:
        return 1.0
    # gain of a customer with priority p is decreasing in p's wait
    tau = bisect(lambda p: literal_wait_ar(lam, mu, p) + fee - w_no, 0.0, 1.0)
    return max(tau, belief)


def grid_roots(lam: float, mu: float, cost: float, points: int = 10**6) -> np.ndarray:
    """Sign-change scan of the indifference gap on a uniform grid.

    Returns the midpoints of grid cells where the gap changes sign.
    """
    tau = np.linspace(0.0, 1.0, points)
    gap = literal_wait_noar(lam, mu, tau) - literal_wait_ar(lam, mu, tau) - cost
    s = np.sign(gap)
    idx = np.flatnonzero(s[:-1] * s[1:] < 0)
    return 0.5 * (tau[idx] + tau[idx + 1])


@pytest.fixture
def example_params() -> QueueParams:
    return QueueParams(45.0, 60.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
