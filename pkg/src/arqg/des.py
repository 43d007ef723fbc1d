"""Discrete-event simulation of the reservation queue.

Two engines compute the same schedule by different routes:

* ``run_priority`` is an event-driven preemptive-resume priority queue.
  Reservers carry priority ``p``, everyone else priority 0 served FCFS.
* ``run_calendar`` replays the booking process: reservers book the earliest
  free server time at or after their desired start, in request-time order,
  split around earlier bookings. Then non-reservers fill the remaining free
  time FCFS.

Waiting time is ``departure - arrival - 1/mu``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy import integrate, stats
from sortedcontainers import SortedDict

from .queue import ParameterError, QueueParams, check_unit, wait_ar, wait_noar
from .rng import make_generator

ENGINES = ("priority", "calendar", "both")
EQUIVALENCE_ATOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    params: QueueParams
    threshold: float
    horizon: float
    warmup: float = 0.2
    seed: int = 0
    engine: str = "priority"
    band_width: float = 0.05
    batches: int = 20

    def __post_init__(self) -> None:
        check_unit("threshold", self.threshold)
        if not (0.0 <= self.warmup < 1.0):
            raise ParameterError("warmup must lie in [0, 1)")
        if not self.horizon > self.params.service_time:
            raise ParameterError("horizon must exceed one service time")
        if self.engine not in ENGINES:
            raise ParameterError(f"engine must be one of {ENGINES}")
        if not (0.0 < self.band_width <= 1.0):
            raise ParameterError("band width must lie in (0, 1]")
        if self.batches < 2:
            raise ParameterError("need at least 2 batches")

    @property
    def measure_from(self) -> float:
        return self.warmup * self.horizon


@dataclass(frozen=True)
class Customer:
    id: int
    request_time: float
    arrival_time: float
    potential_priority: float
    reserves: bool
    departure_time: float | None = None

    @property
    def action(self) -> str:
        return "AR" if self.reserves else "AR'"


@dataclass
class Workload:
    """Customers as parallel arrays, ordered by arrival.

    Request times use a reservation period of length 1, ``t = -p``; any
    continuous request-time law maps to the same uniform ``p``.
    """

    arrival: np.ndarray
    priority: np.ndarray
    reserves: np.ndarray

    def __len__(self) -> int:
        return len(self.arrival)

    def __getitem__(self, i: int) -> Customer:
        return Customer(
            id=i,
            request_time=-float(self.priority[i]),
            arrival_time=float(self.arrival[i]),
            potential_priority=float(self.priority[i]),
            reserves=bool(self.reserves[i]),
        )

    def __iter__(self) -> Iterator[Customer]:
        return (self[i] for i in range(len(self)))

    @property
    def request_time(self) -> np.ndarray:
        return -self.priority

    @classmethod
    def from_arrays(cls, arrival, priority, threshold: float) -> Workload:
        arrival = np.asarray(arrival, dtype=float)
        priority = np.asarray(priority, dtype=float)
        if np.any(np.diff(arrival) <= 0):
            raise ParameterError("arrival times must be strictly increasing")
        return cls(arrival, priority, priority > threshold)


def generate_workload(config: SimConfig) -> Workload:
    rng = make_generator(config.seed)
    lam, horizon = config.params.arrival_rate, config.horizon
    n = rng.poisson(lam * horizon)
    # a Poisson process given its count is a sorted uniform sample
    arrival = np.sort(rng.uniform(0.0, horizon, n))
    priority = rng.random(n)
    return Workload(arrival, priority, priority > config.threshold)


@dataclass
class Schedule:
    """Raw engine output: per-customer departures and server busy periods."""

    engine: str
    departure: np.ndarray
    busy_start: np.ndarray
    busy_end: np.ndarray


def _priority_keys(workload: Workload) -> list[float]:
    # smaller key = served first: reservers by -p, then the rest by arrival order
    return np.where(workload.reserves, -workload.priority, np.arange(len(workload)) + 1.0).tolist()


def priority_schedule(workload: Workload, params: QueueParams) -> Schedule:
    arrival = workload.arrival.tolist()
    keys = _priority_keys(workload)
    n = len(arrival)
    service = params.service_time
    remaining = [service] * n
    departure = [0.0] * n
    busy_start: list[float] = []
    busy_end: list[float] = []

    heap: list[tuple[float, int]] = []
    push, pop = heapq.heappush, heapq.heappop
    seg_start = 0.0  # when the job at the top of the heap last (re)started
    i = 0
    while i < n or heap:
        if not heap:
            seg_start = arrival[i]
            busy_start.append(seg_start)
            push(heap, (keys[i], i))
            i += 1
            continue
        key, j = heap[0]
        finish = seg_start + remaining[j]
        if i < n and arrival[i] < finish:
            a = arrival[i]
            if keys[i] < key:
                remaining[j] = finish - a
                seg_start = a
            push(heap, (keys[i], i))
            i += 1
        else:
            pop(heap)
            departure[j] = finish
            seg_start = finish
            if not heap:
                busy_end.append(finish)
    return Schedule("priority", np.array(departure), np.array(busy_start), np.array(busy_end))


def calendar_schedule(workload: Workload, params: QueueParams) -> Schedule:
    n = len(workload)
    service = params.service_time
    arrival = workload.arrival.tolist()
    departure = [0.0] * n
    # free server time as disjoint gaps start -> end
    free = SortedDict({0.0: math.inf})

    reservers = np.flatnonzero(workload.reserves)
    by_request = reservers[np.argsort(-workload.priority[reservers], kind="stable")]
    walk_ins = np.flatnonzero(~workload.reserves)
    for k in np.concatenate((by_request, walk_ins)).tolist():
        departure[k] = _book(free, arrival[k], service)

    # busy periods are the holes between consecutive free gaps
    starts = list(free.keys())
    ends = list(free.values())
    busy_start = np.array(ends[:-1])
    busy_end = np.array(starts[1:])
    if starts[0] > 0.0:
        busy_start = np.concatenate(([0.0], busy_start))
        busy_end = np.concatenate(([starts[0]], busy_end))
    return Schedule("calendar", np.array(departure), busy_start, busy_end)


def _book(free: SortedDict, at: float, amount: float) -> float:
    """Take ``amount`` of free time from ``at`` onward; return when it ends."""
    idx = free.bisect_right(at) - 1
    if idx < 0 or free.peekitem(idx)[1] <= at:
        idx += 1
    while True:
        gap_start, gap_end = free.peekitem(idx)
        start = max(gap_start, at)
        avail = gap_end - start
        if start > gap_start:
            free[gap_start] = start
            idx += 1
        else:
            del free[gap_start]
        if avail > amount:
            end = start + amount
            if gap_end > end:
                free[end] = gap_end
            return end
        # the gap is used up and the booking continues in a later gap
        amount -= avail
        if amount <= 0.0:
            return gap_end


@dataclass(frozen=True)
class BandStat:
    lo: float
    hi: float
    reserves: bool
    count: int
    mean_wait: float
    ci_half_width: float
    batches: int


@dataclass
class SimReport:
    engine: str
    config: SimConfig
    workload: Workload = field(repr=False)
    schedule: Schedule = field(repr=False)

    @property
    def waits(self) -> np.ndarray:
        waits = self.schedule.departure - self.workload.arrival - self.config.params.service_time
        # an uninterrupted service can land a few ulps below zero
        return np.maximum(waits, 0.0)

    def _measured(self) -> np.ndarray:
        return self.workload.arrival >= self.config.measure_from

    def _batch_edges(self) -> np.ndarray:
        return np.linspace(self.config.measure_from, self.config.horizon, self.config.batches + 1)

    def _stat(self, mask: np.ndarray, lo: float, hi: float, reserves: bool) -> BandStat:
        mask = mask & self._measured()
        waits = self.waits[mask]
        if waits.size == 0:
            return BandStat(lo, hi, reserves, 0, math.nan, math.nan, 0)
        # batch means over time windows absorb the strong autocorrelation of waits
        batch = np.digitize(self.workload.arrival[mask], self._batch_edges()[1:-1])
        sums = np.bincount(batch, weights=waits, minlength=self.config.batches)
        counts = np.bincount(batch, minlength=self.config.batches)
        means = sums[counts > 0] / counts[counts > 0]
        k = means.size
        half = math.nan
        if k >= 2:
            half = float(stats.t.ppf(0.975, k - 1) * means.std(ddof=1) / math.sqrt(k))
        return BandStat(lo, hi, reserves, int(waits.size), float(waits.mean()), half, k)

    def band(self, lo: float, hi: float) -> BandStat:
        """Reservers with potential priority in ``[lo, hi)``."""
        p = self.workload.priority
        return self._stat(self.workload.reserves & (p >= lo) & (p < hi), lo, hi, True)

    def no_ar(self) -> BandStat:
        return self._stat(~self.workload.reserves, 0.0, self.config.threshold, False)

    def bands(self) -> list[BandStat]:
        tau, w = self.config.threshold, self.config.band_width
        count = max(1, math.ceil(round((1.0 - tau) / w, 9)))
        edges = [min(round(tau + j * w, 12), 1.0) for j in range(count + 1)]
        return [self.band(lo, hi) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]

    def utilization(self) -> tuple[float, float]:
        """Busy fraction of the measurement window and its 95% CI half-width."""
        edges = self._batch_edges()
        starts, ends = self.schedule.busy_start, self.schedule.busy_end
        busy = np.array(
            [
                np.sum(np.clip(ends, lo, hi) - np.clip(starts, lo, hi))
                for lo, hi in zip(edges[:-1], edges[1:])
            ]
        ) / np.diff(edges)
        k = busy.size
        half = float(stats.t.ppf(0.975, k - 1) * busy.std(ddof=1) / math.sqrt(k))
        return float(busy.mean()), half

    def to_dict(self) -> dict:
        util, util_ci = self.utilization()

        def band_dict(b: BandStat) -> dict:
            return {
                "lo": b.lo,
                "hi": b.hi,
                "count": b.count,
                "mean_wait": b.mean_wait,
                "ci_half_width": b.ci_half_width,
            }

        return {
            "engine": self.engine,
            "customers": len(self.workload),
            "measured_customers": int(self._measured().sum()),
            "utilization": util,
            "utilization_ci_half_width": util_ci,
            "no_ar": band_dict(self.no_ar()),
            "ar_bands": [band_dict(b) for b in self.bands()],
        }


def run_priority(config: SimConfig, workload: Workload) -> SimReport:
    return SimReport("priority", config, workload, priority_schedule(workload, config.params))


def run_calendar(config: SimConfig, workload: Workload) -> SimReport:
    return SimReport("calendar", config, workload, calendar_schedule(workload, config.params))


@dataclass(frozen=True)
class EngineComparison:
    equivalent: bool
    max_departure_delta: float


def compare_engines(a: SimReport, b: SimReport, atol: float = EQUIVALENCE_ATOL) -> EngineComparison:
    if len(a.workload) == 0:
        return EngineComparison(True, 0.0)
    delta = float(np.max(np.abs(a.schedule.departure - b.schedule.departure)))
    return EngineComparison(delta <= atol, delta)


@dataclass(frozen=True)
class BandVerdict:
    band: BandStat
    target: float
    verdict: str  # "pass", "fail" or "inconclusive"


@dataclass(frozen=True)
class Validation:
    bands: list[BandVerdict]

    @property
    def passed(self) -> bool:
        conclusive = [b for b in self.bands if b.verdict != "inconclusive"]
        return bool(conclusive) and all(b.verdict == "pass" for b in conclusive)


def mean_wait_ar(params: QueueParams, lo: float, hi: float) -> float:
    """Average of ``wait_ar(p)`` over reservers uniform on ``[lo, hi]``."""
    value, _ = integrate.quad(lambda p: wait_ar(params, p), lo, hi)
    return value / (hi - lo)


def validate_waits(
    report: SimReport,
    params: QueueParams,
    threshold: float,
    rel_tol: float = 0.03,
    ci_multiple: float = 3.0,
    min_samples: int = 500,
    ar_target: Callable[[float, float], float] | None = None,
) -> Validation:
    """Compare empirical waits with the analytic ones, band by band.

    A band passes when the gap is within ``max(ci_multiple * CI, rel_tol *
    target)``. Bands with fewer than ``min_samples`` customers or two
    batches are inconclusive. ``ar_target(lo, hi)`` overrides the analytic
    reserver wait, which defaults to the band average of ``wait_ar``.
    """
    if ar_target is None:
        ar_target = lambda lo, hi: mean_wait_ar(params, lo, hi)  # noqa: E731

    def judge(band: BandStat, target: float) -> BandVerdict:
        if band.count < min_samples or band.batches < 2:
            return BandVerdict(band, target, "inconclusive")
        allowed = max(ci_multiple * band.ci_half_width, rel_tol * target)
        ok = abs(band.mean_wait - target) <= allowed
        return BandVerdict(band, target, "pass" if ok else "fail")

    verdicts = []
    if threshold > 0.0:
        verdicts.append(judge(report.no_ar(), wait_noar(params, threshold)))
    verdicts += [judge(b, ar_target(b.lo, b.hi)) for b in report.bands()]
    return Validation(verdicts)


def simulate(config: SimConfig) -> tuple[list[SimReport], EngineComparison | None]:
    workload = generate_workload(config)
    reports = []
    if config.engine in ("priority", "both"):
        reports.append(run_priority(config, workload))
    if config.engine in ("calendar", "both"):
        reports.append(run_calendar(config, workload))
    comparison = compare_engines(*reports) if len(reports) == 2 else None
    return reports, comparison
