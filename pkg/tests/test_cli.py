import json
from importlib import resources

import jsonschema
import pytest

from erlangr import CapacityPair, ModelParams, perf_blocking, stationary_blocking
from erlangr.cli import main

ANALYZE_BLOCKING = [
    "analyze", "--model", "blocking", "--lambda", "2", "--mu", "1",
    "--delta", "0.25", "--p", "0.75", "--s", "9", "--n", "40",
]


@pytest.fixture(scope="module")
def schema():
    path = resources.files("erlangr").joinpath("schemas/cli_output.schema.json")
    with path.open() as fp:
        return json.load(fp)


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def smoke_config(name):
    return str(resources.files("erlangr").joinpath(f"data/{name}.json"))


class TestAnalyze:
    def test_blocking_matches_library(self, capsys, schema):
        code, payload = run_json(capsys, ANALYZE_BLOCKING)
        assert code == 0
        jsonschema.validate(payload, schema)
        params = ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75)
        rep = perf_blocking(stationary_blocking(params, CapacityPair(s=9, n=40)))
        assert payload["kind"] == "report"
        assert payload["report"]["p_delay"] == pytest.approx(rep.p_delay, rel=1e-9)
        assert payload["report"]["e_holding_queue"] == 0.0

    def test_holding_matches_library(self, capsys, schema):
        argv = [a if a != "blocking" else "holding" for a in ANALYZE_BLOCKING]
        code, payload = run_json(capsys, argv)
        assert code == 0
        jsonschema.validate(payload, schema)
        assert payload["report"]["e_holding_queue"] > 0.0

    def test_unstable_exit_code(self, capsys):
        argv = [
            "analyze", "--model", "holding", "--lambda", "2", "--mu", "1",
            "--delta", "0.25", "--p", "0.75", "--s", "8", "--n", "32",
        ]
        assert main(argv) == 2
        assert "rho" in capsys.readouterr().err

    def test_missing_flag_is_usage_error(self, capsys):
        argv = [
            "analyze", "--model", "blocking", "--lambda", "2", "--mu", "1",
            "--delta", "0.25", "--s", "9", "--n", "40",
        ]
        assert main(argv) == 1

    def test_s_above_n_warns(self, capsys):
        argv = [
            "analyze", "--model", "blocking", "--lambda", "0.2", "--mu", "1",
            "--delta", "0.5", "--p", "0.5", "--s", "5", "--n", "3",
        ]
        assert main(argv) == 0
        assert "warning" in capsys.readouterr().err

    def test_csv_format(self, capsys):
        code = main(ANALYZE_BLOCKING + ["--format", "csv"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("key,value\n")
        assert any(line.startswith("report.p_delay,") for line in out.splitlines())

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "report.json"
        assert main(ANALYZE_BLOCKING + ["--output", str(target)]) == 0
        assert json.loads(target.read_text())["kind"] == "report"


class TestLimits:
    def test_values(self, capsys, schema):
        code, payload = run_json(
            capsys, ["limits", "--beta", "1", "--gamma", "1", "--r", "0.25"]
        )
        assert code == 0
        jsonschema.validate(payload, schema)
        assert payload["g_blocking"] == pytest.approx(0.1429, abs=5e-4)
        assert payload["g_holding"] == pytest.approx(0.1840, abs=5e-4)

    def test_r_one_rejected(self, capsys):
        assert main(["limits", "--beta", "1", "--gamma", "1", "--r", "1.0"]) == 1
        assert "--loss" in capsys.readouterr().err

    def test_missing_r_rejected(self, capsys):
        assert main(["limits", "--beta", "1", "--gamma", "1"]) == 1

    def test_loss_mode(self, capsys, schema):
        code, payload = run_json(capsys, ["limits", "--beta", "1", "--gamma", "2", "--loss"])
        assert code == 0
        jsonschema.validate(payload, schema)
        assert payload["kind"] == "loss_limits"
        assert 0.0 < payload["g_loss"] < 1.0


class TestDimension:
    BASE = [
        "dimension", "--lambda", "0.32", "--mu", "4", "--delta", "0.4",
        "--p", "0.975", "--epsilon", "0.5",
    ]

    def test_blocking_reference(self, capsys, schema):
        code, payload = run_json(capsys, self.BASE + ["--gamma", "1"])
        assert code == 0
        jsonschema.validate(payload, schema)
        assert (payload["s"], payload["n"]) == (4, 40)
        assert payload["beta"] == pytest.approx(0.3590, abs=5e-4)

    def test_holding_n_pinned(self, capsys, schema):
        code, payload = run_json(
            capsys, self.BASE + ["--mode", "holding", "--n", "40"]
        )
        assert code == 0
        jsonschema.validate(payload, schema)
        assert payload["s"] == 5
        assert payload["beta"] == pytest.approx(0.4847, abs=5e-4)
        assert payload["alpha"] == pytest.approx(0.1321, abs=5e-4)

    def test_infeasible_exit_code(self, capsys):
        argv = [a if a != "0.5" else "0.9" for a in self.BASE] + ["--beta", "2"]
        assert main(argv) == 3
        assert "infeasible" in capsys.readouterr().err

    def test_two_pins_rejected(self, capsys):
        assert main(self.BASE + ["--beta", "1", "--gamma", "1"]) == 1

    def test_n_pin_needs_holding_mode(self, capsys):
        assert main(self.BASE + ["--n", "40"]) == 1


class TestSimulate:
    @pytest.mark.parametrize(
        "name", ["sim_blocking_smoke", "sim_holding_smoke", "sim_timevarying_smoke"]
    )
    def test_smoke_configs(self, capsys, schema, name):
        code, payload = run_json(capsys, ["simulate", "--config", smoke_config(name)])
        assert code == 0
        jsonschema.validate(payload, schema)
        assert payload["kind"] == "simresult"
        assert payload["estimates"]["p_delay"]["mean"] is not None

    def test_deterministic(self, capsys):
        argv = ["simulate", "--config", smoke_config("sim_holding_smoke")]
        _, a = run_json(capsys, argv)
        _, b = run_json(capsys, argv)
        assert a == b

    def test_seed_flag_overrides_config(self, capsys):
        argv = ["simulate", "--config", smoke_config("sim_holding_smoke")]
        _, base = run_json(capsys, argv)
        _, other = run_json(capsys, argv + ["--seed", "99"])
        assert other["seed"] == 99
        assert other["estimates"] != base["estimates"]

    def test_env_seed_wins(self, capsys, monkeypatch):
        argv = ["simulate", "--config", smoke_config("sim_holding_smoke")]
        _, flagged = run_json(capsys, argv + ["--seed", "99"])
        monkeypatch.setenv("ERLANGR_SEED", "123")
        _, enved = run_json(capsys, argv + ["--seed", "99"])
        assert enved["seed"] == 123
        assert enved["estimates"] != flagged["estimates"]

    def test_missing_config(self, capsys, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 1

    def test_record_paths_writes_csvs(self, capsys, tmp_path):
        conf = {
            "model": "holding",
            "params": {"lam": 0.4, "mu": 1.0, "delta": 0.25, "p": 0.75},
            "s": 3, "n": 8, "horizon": 50.0, "warmup": 0.0,
            "replications": 1, "seed": 5, "record_paths": True,
        }
        cpath = tmp_path / "conf.json"
        cpath.write_text(json.dumps(conf))
        out = tmp_path / "res.json"
        code = main(["simulate", "--config", str(cpath), "--output", str(out)])
        assert code == 0
        ts = tmp_path / "res_timeseries.csv"
        ev = tmp_path / "res_events.csv"
        assert ts.read_text().startswith("t,metric,value\n")
        assert ev.read_text().startswith("patient_id,event,t\n")


class TestMol:
    def test_schedule_csv(self, capsys, tmp_path):
        out = tmp_path / "schedule.csv"
        argv = [
            "mol", "--profile", "ed_day_profile", "--lambda", "1", "--mu", "6.67",
            "--delta", "2.18", "--p", "0.76", "--beta", "0.5", "--gamma", "0.5",
            "--interval", "1", "--output", str(out),
        ]
        assert main(argv) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "t_start,t_end,s,n"
        assert len(lines) == 25

    def test_unknown_profile(self, capsys):
        argv = [
            "mol", "--profile", "no_such_profile", "--lambda", "1", "--mu", "1",
            "--delta", "1", "--p", "0.5", "--beta", "0.5", "--gamma", "0.5",
        ]
        assert main(argv) == 1


class TestTables:
    def test_no_sim_outputs(self, capsys, tmp_path):
        outdir = tmp_path / "tables"
        assert main(["tables", "--outdir", str(outdir), "--no-sim"]) == 0
        for name in (
            "limit_tables.csv",
            "exact_convergence.csv",
            "fig_rho_max.csv",
            "fig_dimensioning.csv",
        ):
            text = (outdir / name).read_text()
            assert len(text.splitlines()) > 1
