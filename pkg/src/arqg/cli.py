"""Command-line front end.

Every command prints one JSON envelope (or CSV for ``sweep``) on stdout.
Exit codes: 0 success, 2 bad parameters, 3 I/O failure, 4 internal
invariant failure (the two simulation engines disagree).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import des, dynamics, equilibrium, revenue
from .queue import ParameterError, QueueParams, RegimeError, pk_wait, wait_ar, wait_noar
from .rng import SEED_ENV

SCHEMA_VERSION = "1.0"
SIGNIFICANT_DIGITS = 12

EXIT_PARAMS = 2
EXIT_IO = 3
EXIT_INVARIANT = 4

log = logging.getLogger("arqg")


def _round(value):
    if isinstance(value, (bool, type(None), str)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}")
    if isinstance(value, dict):
        return {k: _round(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v) for v in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def envelope(command: str, parameters: dict, result: dict, seed: int | None = None) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command, "parameters": parameters}
    if seed is not None:
        out["seed"] = seed
    out["result"] = result
    return _round(out)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@contextmanager
def _errors():
    try:
        yield
    except (ParameterError, RegimeError) as exc:
        _fail(str(exc), EXIT_PARAMS)


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        _fail(f"cannot write {out}: {exc.strerror or exc}", EXIT_IO)


def _emit(payload: dict, out: str | None) -> None:
    _write_text(json.dumps(payload, indent=2) + "\n", out)


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["NA" if v is None else _round(v) for v in row])
    return buf.getvalue()


def _load_config(ctx: click.Context, _param, value):
    """Read a JSON object of flag defaults; flags given on the command line win."""
    if value is None:
        return
    try:
        data = json.loads(Path(value).read_text(encoding="utf-8"))
    except OSError as exc:
        _fail(f"cannot read {value}: {exc.strerror or exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        _fail(f"config {value} is not valid JSON: {exc}", EXIT_PARAMS)
    if not isinstance(data, dict):
        _fail("config file must hold a JSON object", EXIT_PARAMS)
    names = {}
    for param in ctx.command.params:
        for opt in getattr(param, "opts", []):
            names[opt.lstrip("-")] = param.name
        names[param.name] = param.name
    defaults = {}
    for key, val in data.items():
        if key not in names:
            _fail(f"unknown config key {key!r}", EXIT_PARAMS)
        defaults[names[key]] = val
    ctx.default_map = {**(ctx.default_map or {}), **defaults}


config_option = click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="JSON file of flag values; explicit flags override it.",
)
lambda_option = click.option("--lambda", "lam", type=float, required=True, help="Arrival rate.")
mu_option = click.option("--mu", type=float, required=True, help="Service rate.")
out_option = click.option("--out", type=click.Path(dir_okay=False), help="Write output here.")
seed_option = click.option(
    "--seed", type=int, default=0, envvar=SEED_ENV, show_default=True, help="Random seed."
)


def _params(lam: float, mu: float) -> QueueParams:
    with _errors():
        return QueueParams(lam, mu)


def _critical(params: QueueParams) -> dict:
    cc = equilibrium.critical_costs(params)
    return {"lower": cc.lower, "upper": cc.upper, "peak_threshold": cc.peak}


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Equilibria, revenue and learning dynamics for advance reservations
    in a preemptive-resume M/D/1 queue."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@config_option
@lambda_option
@mu_option
@click.option("--tau", type=float, help="Threshold at which to report waits.")
@out_option
def analyze(lam: float, mu: float, tau: float | None, out: str | None) -> None:
    """Utilization, critical costs, waits and revenue optima."""
    params = _params(lam, mu)
    with _errors():
        best = revenue.static_optimum(params)
        result = {"rho": params.rho, "critical_costs": _critical(params), "pk_wait": pk_wait(params)}
        if tau is not None:
            result["wait_ar"] = wait_ar(params, tau)
            result["wait_noar"] = wait_noar(params, tau)
            result["cost_for_threshold"] = equilibrium.cost_for_threshold(params, tau)
        result["static_optimum"] = {
            "tau_opt": best.tau_opt,
            "fee": best.fee,
            "revenue": best.revenue,
            "multiple_equilibria": best.multiple_equilibria,
        }
        if params.rho > 0.5:
            cons = revenue.conservative_optimum(params)
            result["conservative_optimum"] = {
                "threshold": cons.threshold,
                "fee": cons.fee,
                "revenue": cons.revenue,
                "attained": cons.attained,
            }
        result["price_of_conservatism"] = revenue.price_of_conservatism(params)
        dyn = revenue.optimal_dynamic_fee(params, revenue.BeliefDistribution.uniform())
        result["dynamic_fee_uniform"] = {
            "fee": dyn.fee,
            "revenue": dyn.revenue,
            "threshold": dyn.threshold,
        }
    _emit(envelope("analyze", {"lambda": lam, "mu": mu, "tau": tau}, result), out)


@main.command()
@config_option
@lambda_option
@mu_option
@click.option("--cost", type=float, required=True, help="Reservation cost (fee).")
@out_option
def equilibria(lam: float, mu: float, cost: float, out: str | None) -> None:
    """All equilibria for a reservation cost."""
    params = _params(lam, mu)
    with _errors():
        eq = equilibrium.find_equilibria(params, cost)
        dyn = revenue.dynamic_revenue(params, cost, revenue.BeliefDistribution.uniform())
    result = {
        "some_make_ar": list(eq.some_make_ar),
        "none_make_ar": eq.none_make_ar,
        "regime": eq.regime,
        "boundary": eq.boundary,
        "critical_costs": _critical(params),
        "static_revenue": [revenue.revenue_at(params, t) for t in eq.some_make_ar],
        "dynamic_revenue_uniform": dyn.revenue,
        "zero_under_action_learning": dyn.zero_under_action_learning,
    }
    _emit(envelope("equilibria", {"lambda": lam, "mu": mu, "cost": cost}, result), out)


SWEEP_COLUMNS = {
    "cost-curve": ["tau", "cost", "optimal_fee", "lower_critical_cost"],
    "revenue": ["tau", "cost", "revenue", "guaranteed"],
    "poc": ["rho", "poc", "max_revenue", "guaranteed_revenue"],
}


@main.command()
@config_option
@click.option("--lambda", "lam", type=float, help="Arrival rate (cost-curve, revenue).")
@click.option("--mu", type=float, default=1.0, show_default=True, help="Service rate.")
@click.option("--what", type=click.Choice(list(SWEEP_COLUMNS)), required=True)
@click.option("--points", type=int, default=101, show_default=True)
@out_option
def sweep(lam: float | None, mu: float, what: str, points: int, out: str | None) -> None:
    """CSV curves for plotting.

    \b
    cost-curve  tau, cost, optimal_fee, lower_critical_cost
    revenue     tau, cost, revenue, guaranteed (1 if the fee gives a unique equilibrium)
    poc         rho, poc, max_revenue, guaranteed_revenue  (rho on (0, 1), lambda unused)
    """
    if points < 2:
        _fail("--points must be >= 2", EXIT_PARAMS)
    rows = []
    if what == "poc":
        with _errors():
            for rho in np.arange(1, points + 1) / (points + 1):
                params = QueueParams.from_utilization(float(rho), mu)
                best = revenue.static_optimum(params)
                guaranteed = (
                    revenue.conservative_optimum(params).revenue if rho > 0.5 else best.revenue
                )
                rows.append(
                    [rho, revenue.price_of_conservatism(params), best.revenue, guaranteed]
                )
    else:
        if lam is None:
            _fail(f"--lambda is required for {what}", EXIT_PARAMS)
        params = _params(lam, mu)
        lower = equilibrium.critical_costs(params).lower
        fee = revenue.static_optimum(params).fee
        for tau in np.linspace(0.0, 1.0, points):
            cost = equilibrium.cost_for_threshold(params, tau)
            if what == "cost-curve":
                rows.append([tau, cost, fee, lower])
            else:
                rows.append([tau, cost, revenue.revenue_at(params, tau), int(cost < lower)])
    _write_text(_csv_text(SWEEP_COLUMNS[what], rows), out)


TRACE_COLUMNS = [
    "replication",
    "index",
    "belief_in",
    "realized_threshold",
    "demand",
    "reservations",
    "belief_out",
]
COMPARE_COLUMNS = ["replication", "index", "demand", "strategy_reservations", "action_reservations"]


def _outcome(o: dynamics.Outcome) -> dict:
    return {"kind": o.kind, "limit": o.limit, "step": o.step}


@main.command()
@config_option
@click.option(
    "--mode", type=click.Choice(["strategy", "action", "compare"]), required=True,
    help="Learning rule, or 'compare' for both on common random numbers.",
)
@lambda_option
@mu_option
@click.option("--cost", type=float, required=True, help="Reservation fee.")
@click.option("--belief", type=float, required=True, help="Initial belief.")
@click.option("--steps", type=int, default=100, show_default=True)
@click.option("--step-duration", type=float, default=1.0, show_default=True)
@seed_option
@click.option("--replications", type=int, default=1, show_default=True)
@click.option("--trace", type=click.Path(dir_okay=False), help="Write the per-step CSV here.")
@out_option
def learn(
    mode: str,
    lam: float,
    mu: float,
    cost: float,
    belief: float,
    steps: int,
    step_duration: float,
    seed: int,
    replications: int,
    trace: str | None,
    out: str | None,
) -> None:
    """Best-response dynamics; JSON summary on stdout, CSV trace via --trace."""
    params = _params(lam, mu)
    parameters = {
        "mode": mode,
        "lambda": lam,
        "mu": mu,
        "cost": cost,
        "belief": belief,
        "steps": steps,
        "step_duration": step_duration,
        "replications": replications,
    }
    if replications < 1:
        _fail("--replications must be >= 1", EXIT_PARAMS)
    rows = []
    with _errors():
        if mode == "compare":
            cmp = dynamics.compare_modes(params, cost, belief, steps, replications, seed, step_duration)
            per_rep = []
            for r, (s_tr, a_tr) in enumerate(zip(*cmp.traces)):
                per_rep.append(
                    {
                        "steps": len(s_tr),
                        "strategy_ar_fraction": s_tr.ar_fraction,
                        "ar_fraction": a_tr.ar_fraction,
                        "outcome": _outcome(a_tr.outcome),
                    }
                )
                rows += [
                    [r, i + 1, int(d), int(sr), int(ar)]
                    for i, (d, sr, ar) in enumerate(
                        zip(s_tr.demand, s_tr.reservations, a_tr.reservations)
                    )
                ]
            result = {
                "mode": mode,
                "strategy_ar_fraction": cmp.strategy_ar_fraction,
                "action_ar_fraction": cmp.action_ar_fraction,
                "difference": cmp.difference,
                "strategy_mean_reservations": cmp.strategy_mean_reservations,
                "action_mean_reservations": cmp.action_mean_reservations,
                "t_statistic": cmp.t_statistic,
                "p_value": cmp.p_value,
                "dominance": cmp.dominance,
                "replications": per_rep,
            }
            header = COMPARE_COLUMNS
        else:
            per_rep = []
            for r in range(replications):
                cfg = dynamics.LearningConfig(
                    params, cost, mode, belief, steps, step_duration, seed, r
                )
                tr = dynamics.run_learning(cfg)
                log.info("replication %d: %s after %d steps", r, tr.outcome.kind, len(tr))
                per_rep.append(
                    {"steps": len(tr), "ar_fraction": tr.ar_fraction, "outcome": _outcome(tr.outcome)}
                )
                rows += [
                    [r, s.index, s.belief_in, s.realized_threshold, s.demand, s.reservations, s.belief_out]
                    for s in tr
                ]
            fractions = [p["ar_fraction"] for p in per_rep]
            result = {
                "mode": mode,
                "mean_ar_fraction": float(np.nanmean(fractions)) if any(map(math.isfinite, fractions)) else None,
                "replications": per_rep,
            }
            header = TRACE_COLUMNS
    if trace is not None:
        _write_text(_csv_text(header, rows), trace)
    _emit(envelope("learn", parameters, result, seed=seed), out)


CUSTOMER_COLUMNS = ["id", "p", "action", "arrival", "departure", "wait"]


@main.command()
@config_option
@lambda_option
@mu_option
@click.option("--tau", type=float, required=True, help="Population threshold.")
@click.option("--horizon", type=float, default=1000.0, show_default=True)
@click.option("--warmup", type=float, default=0.2, show_default=True)
@seed_option
@click.option(
    "--engine", type=click.Choice(list(des.ENGINES)), default="priority", show_default=True
)
@click.option("--band-width", type=float, default=0.05, show_default=True)
@click.option("--customers", type=click.Path(dir_okay=False), help="Per-customer CSV dump.")
@out_option
def simulate(
    lam: float,
    mu: float,
    tau: float,
    horizon: float,
    warmup: float,
    seed: int,
    engine: str,
    band_width: float,
    customers: str | None,
    out: str | None,
) -> None:
    """Discrete-event simulation checked against the analytic waits."""
    params = _params(lam, mu)
    with _errors():
        config = des.SimConfig(params, tau, horizon, warmup, seed, engine, band_width)
    reports, comparison = des.simulate(config)
    validation = des.validate_waits(reports[0], params, tau)
    result = {
        "reports": [r.to_dict() for r in reports],
        "validation": {
            "passed": validation.passed,
            "bands": [
                {
                    "lo": v.band.lo,
                    "hi": v.band.hi,
                    "reserves": v.band.reserves,
                    "target": v.target,
                    "mean_wait": v.band.mean_wait,
                    "verdict": v.verdict,
                }
                for v in validation.bands
            ],
        },
        "equivalence": None
        if comparison is None
        else {"equivalent": comparison.equivalent, "max_departure_delta": comparison.max_departure_delta},
    }
    parameters = {
        "lambda": lam,
        "mu": mu,
        "tau": tau,
        "horizon": horizon,
        "warmup": warmup,
        "engine": engine,
        "band_width": band_width,
    }
    if customers is not None:
        rep = reports[0]
        wl = rep.workload
        rows = zip(
            range(len(wl)),
            wl.priority.tolist(),
            np.where(wl.reserves, "AR", "AR'").tolist(),
            wl.arrival.tolist(),
            rep.schedule.departure.tolist(),
            rep.waits.tolist(),
        )
        _write_text(_csv_text(CUSTOMER_COLUMNS, rows), customers)
    _emit(envelope("simulate", parameters, result, seed=seed), out)
    if comparison is not None and not comparison.equivalent:
        _fail(
            f"engines disagree: max departure delta {comparison.max_departure_delta:.3g}",
            EXIT_INVARIANT,
        )


if __name__ == "__main__":
    main()
