"""Best-response dynamics of the repeated reservation game.

At each step a fresh Poisson batch of customers best-responds to a shared
belief about the population threshold. Under strategy learning the next
belief is the threshold actually played; under action learning it is the
observed fraction of customers that did not reserve.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .equilibrium import critical_costs, find_equilibria
from .queue import ParameterError, QueueParams, RegimeError, check_unit, wait_ar, wait_noar
from .rng import make_generator

# relative gain below which customers under the belief stay with AR'
TIE_RTOL = 1e-12
CONVERGENCE_TOL = 1e-10
CONVERGENCE_RUN = 3
CYCLE_COLLAPSES = 2
CHUNK_STEPS = 4096


class Action(str, enum.Enum):
    AR = "AR"
    NO_AR = "AR'"


class Mode(str, enum.Enum):
    STRATEGY = "strategy"
    ACTION = "action"


def decide(params: QueueParams, fee: float, belief: float, p: float) -> Action:
    """Action of a customer with potential priority ``p`` under ``belief``.

    Reserving must be strictly cheaper; ties go to AR'. Customers below the
    belief gain nothing from their own priority and need a margin of
    ``TIE_RTOL`` relative, which keeps the belief ``tau_e`` from collapsing
    to 0 on rounding noise.
    """
    belief = check_unit("belief", belief)
    p = check_unit("p", p)
    w_no = wait_noar(params, belief)
    if p >= belief:
        reserve = wait_ar(params, p) + fee < w_no
    else:
        reserve = wait_ar(params, belief) + fee < w_no - TIE_RTOL * w_no
    return Action.AR if reserve else Action.NO_AR


def invert_wait_ar(params: QueueParams, wait: float) -> float:
    """Threshold at which the reserving threshold customer waits ``wait``.

    Solves the quadratic in ``d = lam (1 - tau)``,
    ``(2 + 2 mu w) d^2 - (3 mu + 4 mu^2 w) d + 2 mu^3 w = 0``,
    for its smaller root in cancellation-free form. Results are clipped to
    [0, 1].
    """
    lam, mu = params.arrival_rate, params.service_rate
    a = 2.0 + 2.0 * mu * wait
    b = 3.0 * mu + 4.0 * mu * mu * wait
    c = 2.0 * mu**3 * wait
    d = 2.0 * c / (b + math.sqrt(b * b - 4.0 * a * c))
    return min(max(1.0 - d / lam, 0.0), 1.0)


def best_response(params: QueueParams, fee: float, belief: float) -> float:
    """Threshold played by a population that best-responds to ``belief``.

    Everyone reserves if even the customers below the belief gain; nobody
    does if the fee exceeds the whole non-reserving wait; otherwise the
    threshold is where ``wait_ar`` meets ``wait_noar(belief) - fee``.
    """
    belief = check_unit("belief", belief)
    w_no = wait_noar(params, belief)
    target = w_no - fee
    if wait_ar(params, belief) < target - TIE_RTOL * w_no:
        return 0.0
    if target <= 0.0:
        return 1.0
    return max(invert_wait_ar(params, target), belief)


@dataclass(frozen=True)
class LearningConfig:
    params: QueueParams
    fee: float
    mode: Mode
    initial_belief: float
    steps: int
    step_duration: float = 1.0
    seed: int = 0
    replication: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        check_unit("initial_belief", self.initial_belief)
        if self.steps < 1:
            raise ParameterError("steps must be >= 1")
        if not self.step_duration > 0:
            raise ParameterError("step duration must be > 0")
        if not (math.isfinite(self.fee) and self.fee >= 0):
            raise ParameterError("fee must be finite and >= 0")


@dataclass(frozen=True)
class StepRecord:
    index: int
    belief_in: float
    realized_threshold: float
    demand: int
    reservations: int
    belief_out: float


@dataclass(frozen=True)
class Outcome:
    kind: str  # "converged", "cycling" or "max-steps"
    limit: float | None = None
    step: int | None = None


@dataclass
class LearningTrace:
    config: LearningConfig
    belief_in: np.ndarray
    realized_threshold: np.ndarray
    demand: np.ndarray
    reservations: np.ndarray
    belief_out: np.ndarray
    outcome: Outcome = field(default_factory=lambda: Outcome("max-steps"))

    def __len__(self) -> int:
        return len(self.belief_out)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> StepRecord:
        return StepRecord(
            index=i + 1,
            belief_in=float(self.belief_in[i]),
            realized_threshold=float(self.realized_threshold[i]),
            demand=int(self.demand[i]),
            reservations=int(self.reservations[i]),
            belief_out=float(self.belief_out[i]),
        )

    @property
    def ar_fraction(self) -> float:
        total = int(self.demand.sum())
        return float(self.reservations.sum()) / total if total else float("nan")


def detect_limit(
    mode: Mode | str,
    beliefs: np.ndarray,
    realized: np.ndarray,
    params: QueueParams,
    fee: float,
    final: bool = False,
) -> Outcome | None:
    """Classify the run so far, or return None while it is undecided.

    ``beliefs`` holds the initial belief followed by every step's outgoing
    belief; ``realized`` holds every step's played threshold. With
    ``final`` set the step budget is spent, so an action-learning run with
    repeated collapses to 0 is called cycling and anything else max-steps.
    """
    mode = Mode(mode)
    n = len(beliefs) - 1
    if mode is Mode.STRATEGY:
        if n >= CONVERGENCE_RUN:
            tail = np.abs(np.diff(beliefs[-CONVERGENCE_RUN - 1 :]))
            if np.all(tail < CONVERGENCE_TOL):
                # last step that still moved the belief, i.e. the one that reached the limit
                diffs = np.abs(np.diff(beliefs))
                moving = np.flatnonzero(diffs >= CONVERGENCE_TOL)
                reached = int(moving[-1]) + 1 if moving.size else 1
                return Outcome("converged", float(beliefs[-1]), reached)
        return Outcome("max-steps") if final else None

    absorbing = fee >= critical_costs(params).lower
    if absorbing and n >= 1 and beliefs[-1] == 1.0:
        return Outcome("converged", 1.0, n)
    if final:
        if np.count_nonzero(np.asarray(realized) == 0.0) >= CYCLE_COLLAPSES:
            return Outcome("cycling")
        return Outcome("max-steps")
    return None


def run_learning(config: LearningConfig, stop_at_limit: bool = True) -> LearningTrace:
    """Simulate best-response dynamics step by step.

    Both modes consume the same random stream, demand and potential
    priorities for one chunk of steps at a time, so runs with equal seeds
    see identical customers whatever the mode. A step with no customers
    leaves the action-learning belief unchanged.
    """
    params, fee, mode = config.params, config.fee, config.mode
    rng = make_generator(config.seed, config.replication)
    rate = params.arrival_rate * config.step_duration

    n = config.steps
    belief_in: list[float] = []
    realized: list[float] = []
    demand: list[int] = []
    reservations: list[int] = []
    belief_out: list[float] = []

    # action-mode beliefs are ratios k/D and recur constantly
    responses: dict[float, float] = {}
    belief = float(config.initial_belief)
    outcome = None
    action_mode = mode is Mode.ACTION
    absorbing = fee >= critical_costs(params).lower
    small_moves = 0
    while len(belief_out) < n and outcome is None:
        chunk = min(CHUNK_STEPS, n - len(belief_out))
        counts = rng.poisson(rate, size=chunk)
        priorities = rng.random(int(counts.sum()))
        offsets = np.concatenate(([0], np.cumsum(counts))).tolist()
        for j, d in enumerate(counts.tolist()):
            thr = responses.get(belief)
            if thr is None:
                thr = responses[belief] = best_response(params, fee, belief)
            if thr == 0.0:
                k = d
            elif thr == 1.0:
                k = 0
            else:
                k = int(np.count_nonzero(priorities[offsets[j] : offsets[j + 1]] > thr))
            if action_mode:
                new = 1.0 - k / d if d else belief
            else:
                new = thr
            belief_in.append(belief)
            realized.append(thr)
            demand.append(d)
            reservations.append(k)
            belief_out.append(new)
            if stop_at_limit:
                if action_mode:
                    stop = absorbing and new == 1.0
                else:
                    small_moves = small_moves + 1 if abs(new - belief) < CONVERGENCE_TOL else 0
                    stop = small_moves >= CONVERGENCE_RUN
                if stop:
                    outcome = detect_limit(
                        mode, np.array([config.initial_belief] + belief_out), realized, params, fee
                    )
            belief = new
            if outcome is not None:
                break

    trace = LearningTrace(
        config,
        np.array(belief_in),
        np.array(realized),
        np.array(demand, dtype=np.int64),
        np.array(reservations, dtype=np.int64),
        np.array(belief_out),
    )
    if outcome is None:
        beliefs = np.concatenate(([config.initial_belief], trace.belief_out))
        outcome = detect_limit(mode, beliefs, trace.realized_threshold, params, fee, final=True)
    trace.outcome = outcome
    return trace


@dataclass(frozen=True)
class ModeComparison:
    strategy_ar_fraction: float
    action_ar_fraction: float
    difference: float
    strategy_mean_reservations: float
    action_mean_reservations: float
    t_statistic: float
    p_value: float
    # share of steps where action learning reserved at least as much
    dominance: float
    steps: int
    replications: int
    seed: int
    # (strategy traces, action traces), one per replication
    traces: tuple[tuple[LearningTrace, ...], tuple[LearningTrace, ...]] = field(
        default=((), ()), repr=False, compare=False
    )


def compare_modes(
    params: QueueParams,
    fee: float,
    belief: float,
    steps: int,
    replications: int = 1,
    seed: int = 0,
    step_duration: float = 1.0,
) -> ModeComparison:
    """Action versus strategy learning on common random numbers.

    Each replication runs both modes from the same stream. The test is a
    one-sided Welch t-test that action learning reserves more per step.
    """
    eq = find_equilibria(params, fee)
    if len(eq.some_make_ar) != 1 or eq.none_make_ar:
        raise RegimeError("mode comparison needs a fee with a unique some-make-AR equilibrium")
    if replications < 1:
        raise ParameterError("replications must be >= 1")

    by_mode: dict[Mode, list[LearningTrace]] = {Mode.STRATEGY: [], Mode.ACTION: []}
    for r in range(replications):
        for mode in by_mode:
            cfg = LearningConfig(params, fee, mode, belief, steps, step_duration, seed, r)
            by_mode[mode].append(run_learning(cfg, stop_at_limit=False))

    def pooled(mode: Mode, name: str) -> np.ndarray:
        return np.concatenate([getattr(t, name) for t in by_mode[mode]])

    s_res, a_res = pooled(Mode.STRATEGY, "reservations"), pooled(Mode.ACTION, "reservations")
    total = pooled(Mode.STRATEGY, "demand").sum()
    s_frac = s_res.sum() / total
    a_frac = a_res.sum() / total
    test = stats.ttest_ind(a_res, s_res, equal_var=False, alternative="greater")
    return ModeComparison(
        strategy_ar_fraction=float(s_frac),
        action_ar_fraction=float(a_frac),
        difference=float(a_frac - s_frac),
        strategy_mean_reservations=float(s_res.mean()),
        action_mean_reservations=float(a_res.mean()),
        t_statistic=float(test.statistic),
        p_value=float(test.pvalue),
        dominance=float(np.mean(a_res >= s_res)),
        steps=steps,
        replications=replications,
        seed=seed,
        traces=(tuple(by_mode[Mode.STRATEGY]), tuple(by_mode[Mode.ACTION])),
    )
