import csv
import io
import json
from importlib import resources

import jsonschema
import pytest
from click.testing import CliRunner

from arqg import des
from arqg.cli import main

SCHEMA = json.loads(resources.files("arqg").joinpath("envelope.schema.json").read_text())
BASE = ["--lambda", "45", "--mu", "60"]


def run(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env, catch_exceptions=False)


def payload(*args, env=None):
    res = run(*args, env=env)
    assert res.exit_code == 0, res.output
    data = json.loads(res.stdout)
    jsonschema.validate(data, SCHEMA)
    return data


def rows(text):
    table = list(csv.reader(io.StringIO(text)))
    assert len({len(r) for r in table}) == 1
    return table[0], table[1:]


class TestAnalyze:
    def test_example(self):
        out = payload("analyze", *BASE)["result"]
        assert out["rho"] == 0.75
        assert out["critical_costs"]["lower"] == pytest.approx(0.025)
        assert out["critical_costs"]["upper"] == pytest.approx(1 / 30)
        assert out["static_optimum"]["revenue"] == pytest.approx(1.125)
        assert out["price_of_conservatism"] == pytest.approx(1.125)
        assert out["dynamic_fee_uniform"]["fee"] == pytest.approx(0.025)

    def test_tau(self):
        out = payload("analyze", *BASE, "--tau", "1")["result"]
        assert out["wait_ar"] == 0 and out["wait_noar"] == pytest.approx(0.025)

    def test_low_utilization_has_no_upper(self):
        out = payload("analyze", "--lambda", "20", "--mu", "60")["result"]
        assert out["critical_costs"]["upper"] is None
        assert "conservative_optimum" not in out

    @pytest.mark.parametrize(
        "args, message",
        [
            (["--lambda", "60", "--mu", "60"], "arrival rate must be < service rate"),
            (["--lambda", "-1", "--mu", "60"], "arrival rate must be > 0"),
            (BASE + ["--tau", "2"], "tau must lie in [0, 1]"),
        ],
    )
    def test_parameter_errors(self, args, message):
        res = run("analyze", *args)
        assert res.exit_code == 2
        assert message in res.stderr


class TestEquilibria:
    @pytest.mark.parametrize(
        "cost, some, none",
        [("0.024", [0.1026], False), ("0.032", [2 / 9, 0.5], True), ("0.04", [], True)],
    )
    def test_examples(self, cost, some, none):
        out = payload("equilibria", *BASE, "--cost", cost)["result"]
        assert out["some_make_ar"] == pytest.approx(some, abs=5e-4)
        assert out["none_make_ar"] is none

    def test_negative_cost(self):
        assert run("equilibria", *BASE, "--cost", "-0.1").exit_code == 2


class TestSweep:
    def test_cost_curve_peak(self):
        res = run("sweep", *BASE, "--what", "cost-curve", "--points", "301")
        header, body = rows(res.stdout)
        assert header == ["tau", "cost", "optimal_fee", "lower_critical_cost"]
        assert len(body) == 301
        tau, cost = max(((float(r[0]), float(r[1])) for r in body), key=lambda x: x[1])
        assert tau == pytest.approx(1 / 3) and cost == pytest.approx(1 / 30)

    def test_revenue_peak(self):
        header, body = rows(run("sweep", *BASE, "--what", "revenue", "--points", "101").stdout)
        assert header == ["tau", "cost", "revenue", "guaranteed"]
        tau, rev = max(((float(r[0]), float(r[2])) for r in body), key=lambda x: x[1])
        assert tau == pytest.approx(0.2) and rev == pytest.approx(1.125)

    def test_poc(self):
        header, body = rows(run("sweep", "--what", "poc", "--points", "59").stdout)
        assert header == ["rho", "poc", "max_revenue", "guaranteed_revenue"]
        for r in body:
            if float(r[0]) <= 2 / 3:
                assert float(r[1]) == 1.0

    def test_points_and_lambda(self):
        assert run("sweep", *BASE, "--what", "poc", "--points", "1").exit_code == 2
        assert run("sweep", "--what", "revenue").exit_code == 2

    def test_unwritable_out(self, tmp_path):
        res = run("sweep", *BASE, "--what", "revenue", "--out", str(tmp_path / "missing" / "x.csv"))
        assert res.exit_code == 3

    def test_out_file(self, tmp_path):
        target = tmp_path / "rev.csv"
        res = run("sweep", *BASE, "--what", "revenue", "--points", "5", "--out", str(target))
        assert res.exit_code == 0 and res.stdout == ""
        assert target.read_text().startswith("tau,cost,revenue,guaranteed\n")


class TestLearn:
    def test_strategy_converges(self):
        out = payload("learn", "--mode", "strategy", *BASE, "--cost", "0.032", "--belief", "0.4", "--steps", "300")
        (rep,) = out["result"]["replications"]
        assert rep["outcome"]["kind"] == "converged"
        assert rep["outcome"]["limit"] == pytest.approx(2 / 9, abs=1e-8)
        assert out["seed"] == 0

    def test_strategy_dips_to_zero(self, tmp_path):
        trace = tmp_path / "t.csv"
        payload("learn", "--mode", "strategy", *BASE, "--cost", "0.032", "--belief", "0.4", "--steps", "300", "--trace", str(trace))
        header, body = rows(trace.read_text())
        assert header == ["replication", "index", "belief_in", "realized_threshold", "demand", "reservations", "belief_out"]
        assert float(body[0][6]) == 0.0

    def test_fixed_point(self):
        out = payload("learn", "--mode", "strategy", *BASE, "--cost", "0.024", "--belief", "0.102638646099", "--steps", "50")
        assert out["result"]["replications"][0]["outcome"]["step"] == 1

    def test_action_and_trace(self, tmp_path):
        trace = tmp_path / "a.csv"
        out = payload(
            "learn", "--mode", "action", *BASE, "--cost", "0.024", "--belief", "0.1026",
            "--steps", "500", "--seed", "3", "--replications", "2", "--trace", str(trace),
        )
        assert len(out["result"]["replications"]) == 2
        _, body = rows(trace.read_text())
        assert len(body) == 1000

    def test_compare(self, tmp_path):
        trace = tmp_path / "c.csv"
        out = payload("learn", "--mode", "compare", *BASE, "--cost", "0.024", "--belief", "0.1026", "--steps", "1000", "--trace", str(trace))
        assert out["result"]["difference"] > 0
        header, body = rows(trace.read_text())
        assert header == ["replication", "index", "demand", "strategy_reservations", "action_reservations"]
        assert len(body) == 1000

    def test_compare_outside_regime(self):
        res = run("learn", "--mode", "compare", *BASE, "--cost", "0.032", "--belief", "0.1")
        assert res.exit_code == 2

    @pytest.mark.parametrize("extra", [["--steps", "0"], ["--belief", "1.5"], ["--replications", "0"]])
    def test_bad_config(self, extra):
        args = ["learn", "--mode", "action", *BASE, "--cost", "0.024", "--belief", "0.1"] + extra
        assert run(*args).exit_code == 2

    def test_repeatable(self):
        args = ["learn", "--mode", "action", *BASE, "--cost", "0.032", "--belief", "0.3", "--steps", "2000", "--seed", "9"]
        assert run(*args).stdout_bytes == run(*args).stdout_bytes

    def test_seed_from_environment(self):
        args = ["learn", "--mode", "action", *BASE, "--cost", "0.024", "--belief", "0.1", "--steps", "50"]
        env_run = payload(*args, env={"ARQG_SEED": "7"})
        flag_run = payload(*args, "--seed", "7")
        assert env_run["seed"] == 7 and env_run == flag_run
        assert payload(*args, "--seed", "8", env={"ARQG_SEED": "7"})["seed"] == 8


class TestSimulate:
    def test_both_engines(self, tmp_path):
        dump = tmp_path / "c.csv"
        out = payload("simulate", *BASE, "--tau", "0.5", "--horizon", "300", "--engine", "both", "--customers", str(dump))
        assert out["result"]["equivalence"]["equivalent"] is True
        assert out["result"]["equivalence"]["max_departure_delta"] < 1e-9
        header, body = rows(dump.read_text())
        assert header == ["id", "p", "action", "arrival", "departure", "wait"]
        assert all(float(r[5]) >= 0 for r in body)
        assert {r[2] for r in body} == {"AR", "AR'"}

    def test_pk(self):
        out = payload("simulate", *BASE, "--tau", "1", "--horizon", "5000", "--seed", "2")
        assert out["result"]["reports"][0]["no_ar"]["mean_wait"] == pytest.approx(0.025, rel=0.05)

    def test_repeatable(self):
        args = ["simulate", *BASE, "--tau", "0.3", "--horizon", "200", "--seed", "5"]
        assert run(*args).stdout_bytes == run(*args).stdout_bytes

    def test_engine_disagreement_exit(self, monkeypatch):
        monkeypatch.setattr(des, "compare_engines", lambda a, b: des.EngineComparison(False, 1.0))
        res = run("simulate", *BASE, "--tau", "0.5", "--horizon", "50", "--engine", "both")
        assert res.exit_code == 4
        jsonschema.validate(json.loads(res.stdout), SCHEMA)

    def test_bad_warmup(self):
        assert run("simulate", *BASE, "--tau", "0.5", "--warmup", "1.2").exit_code == 2


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lambda": 45, "mu": 60, "cost": 0.032}))
        from_file = payload("equilibria", "--config", str(cfg))
        assert len(from_file["result"]["some_make_ar"]) == 2
        overridden = payload("equilibria", "--config", str(cfg), "--cost", "0.024")
        assert overridden["parameters"]["cost"] == 0.024
        assert len(overridden["result"]["some_make_ar"]) == 1

    def test_hyphenated_keys(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lambda": 45, "mu": 60, "tau": 0.5, "horizon": 100, "band-width": 0.1}))
        assert payload("simulate", "--config", str(cfg))["parameters"]["band_width"] == 0.1

    def test_unknown_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"lambda": 45, "mu": 60, "colour": 1}))
        assert run("analyze", "--config", str(cfg)).exit_code == 2

    def test_missing_file(self, tmp_path):
        assert run("analyze", "--config", str(tmp_path / "nope.json")).exit_code == 3

    def test_invalid_json(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{")
        assert run("analyze", "--config", str(cfg)).exit_code == 2
