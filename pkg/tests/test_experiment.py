import json

import numpy as np
import pytest

from simbf import cli, experiment
from simbf.experiment import (
    ExperimentError,
    PowerModel,
    emit_fairness_tables,
    load_spec,
    parse_spec_text,
    run_experiment,
    total_power,
)

TINY = """
num_users = 2
num_antennas = 2
meta_atoms = 4
num_layers = 1
p_max_dbm = 10
admm_penalty = 10
seed = 11
"""


def _write_spec(tmp_path, body, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(TINY + body, encoding="utf-8")
    return p


def test_power_model_reference_values():
    assert total_power(PowerModel(), 20.0, 4, 6, 100) == pytest.approx(20.1, abs=1e-9)
    assert total_power(PowerModel(), 20.0, 16, 0, 0) == pytest.approx(26.1, abs=1e-9)
    with pytest.raises(ValueError):
        total_power(PowerModel(), 20.0, -1, 1, 1)


def test_parse_defaults_and_overrides():
    spec = parse_spec_text("solver = mr, SR\nsweep = L\nvalues = 1 2\noutput = o\np_max_dbm = 5", env={})
    assert spec.solvers == ("MR", "SR") and spec.values == (1, 2) and spec.trials == 1
    assert spec.config.p_max_dbm == 5.0 and spec.config.num_users == 3
    assert spec.cell_config(2, 3).num_layers == 2 and spec.cell_config(2, 3).seed == spec.config.seed + 3
    full = parse_spec_text("solver = MR\nsweep = N\nvalues = 100\noutput = o", full_scale=True, env={})
    assert full.config.num_users == 4


def test_seed_environment_override():
    spec = parse_spec_text("solver = MR\nsweep = p_max\nvalues = 0\noutput = o", env={"SIMBF_SEED": "77"})
    assert spec.config.seed == 77


@pytest.mark.parametrize(
    "text",
    [
        "solver = MR\nsweep = p_max\nvalues = 0",  # no output
        "solver = XX\nsweep = p_max\nvalues = 0\noutput = o",
        "solver = MR\nsweep = K\nvalues = 0\noutput = o",
        "solver = MR\nsweep = N\nvalues = 10\noutput = o",  # not a square
        "solver = MR\nsweep = p_max\nvalues = 0\noutput = o\ntrials = 0",
        "solver = MR\nsweep = p_max\nvalues = 0\noutput = o\nbogus = 1",
        "solver = MR\nsweep = p_max\nvalues = 0\noutput = o\nscenario = missing.cfg",
        "solver = MR\nsweep p_max",
    ],
)
def test_bad_specs(text, tmp_path):
    with pytest.raises(ExperimentError):
        parse_spec_text(text, tmp_path, env={})


def test_single_trial_rows(tmp_path):
    spec = load_spec(_write_spec(tmp_path, "solver = SR\nsweep = p_max\nvalues = 10\noutput = out\n"), env={})
    res = run_experiment(spec)
    assert [r["kind"] for r in res.rows] == ["data", "mean"]
    lines = res.csv_path.read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("kind,solver")


def test_rerun_is_byte_identical_and_resumes(tmp_path):
    body = "solver = MR, GMR\nsweep = p_max\nvalues = 0, 10\ntrials = 2\noutput = out\n"
    spec = load_spec(_write_spec(tmp_path, body), env={})
    first = run_experiment(spec)
    text = first.csv_path.read_text()
    assert first.ran == 8 and first.skipped == 0 and first.failures == 0
    # a fresh directory reproduces the same bytes
    spec2 = load_spec(_write_spec(tmp_path, body.replace("= out", "= out2"), "exp2.cfg"), env={})
    assert run_experiment(spec2).csv_path.read_text() == text
    # resuming reuses every finished cell
    again = run_experiment(spec)
    assert again.ran == 0 and again.skipped == 8
    assert again.csv_path.read_text() == text


def test_aggregates_are_means(tmp_path):
    spec = load_spec(_write_spec(tmp_path, "solver = GMR\nsweep = p_max\nvalues = 10\ntrials = 3\noutput = out\n"), env={})
    rows = run_experiment(spec).rows
    data = [r for r in rows if r["kind"] == "data"]
    mean = [r for r in rows if r["kind"] == "mean"][0]
    for m in experiment.METRICS:
        assert mean[m] == pytest.approx(np.mean([r[m] for r in data]), rel=1e-12)
    assert mean["status"] == "3/3"


def test_changed_spec_refuses_old_directory(tmp_path):
    spec = load_spec(_write_spec(tmp_path, "solver = SR\nsweep = p_max\nvalues = 10\noutput = out\n"), env={})
    run_experiment(spec)
    spec.trials = 2
    with pytest.raises(ExperimentError):
        run_experiment(spec)


def test_traces_written(tmp_path):
    spec = load_spec(_write_spec(tmp_path, "solver = MR\nsweep = p_max\nvalues = 10\noutput = out\ntrace = true\n"), env={})
    run_experiment(spec)
    lines = (tmp_path / "out" / "traces" / "MR_p_max=10.0_t0000.jsonl").read_text().splitlines()
    recs = [json.loads(x) for x in lines]
    assert recs[0]["iteration"] == 0 and all(r["solver"] == "MR" for r in recs)


def test_failed_cell_recorded(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("diverged")

    monkeypatch.setattr(experiment, "solve", boom)
    spec = load_spec(_write_spec(tmp_path, "solver = SR\nsweep = p_max\nvalues = 10\noutput = out\n"), env={})
    res = run_experiment(spec)
    assert res.failures == 1
    assert res.rows[0]["status"] == "failed" and "diverged" in res.rows[0]["error"]
    assert res.rows[1]["status"] == "0/1" and res.rows[1]["min_rate"] is None


def test_fairness_display_floor():
    rows = [
        {"kind": "mean", "solver": "MR", "sweep": "p_max", "value": 0.0, "status": "1/1", "rate_stddev": 4e-4, "min_max_ratio": 0.9999},
        {"kind": "mean", "solver": "SR", "sweep": "p_max", "value": 0.0, "status": "1/1", "rate_stddev": 0.5, "min_max_ratio": 0.0},
    ]
    out = emit_fairness_tables(rows).splitlines()
    assert out[1].split(",")[4] == "0" and out[1].split(",")[5] == "0.0004"
    assert out[2].split(",")[4] == "0.5"


def test_single_user_ratio_is_one(tmp_path):
    p = tmp_path / "one.cfg"
    p.write_text("num_users = 1\nnum_antennas = 1\nmeta_atoms = 4\nnum_layers = 1\nsolver = MR\nsweep = p_max\nvalues = 10\noutput = out\n")
    rows = run_experiment(load_spec(p, env={})).rows
    assert rows[0]["min_max_ratio"] == 1.0 and rows[0]["rate_stddev"] == 0.0


# --- command line -------------------------------------------------------------


def test_cli_power(capsys):
    assert cli.main(["power", "--m", "4", "--l", "6", "--n", "100"]) == 0
    assert capsys.readouterr().out.strip() == "20.1000 W"
    assert cli.main(["power", "--m", "16", "--l", "0", "--n", "0"]) == 0
    assert capsys.readouterr().out.strip() == "26.1000 W"


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.delenv("SIMBF_SEED", raising=False)
    good = _write_spec(tmp_path, "solver = SR\nsweep = p_max\nvalues = 10\noutput = out\n")
    assert cli.main(["run", "--spec", str(good)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text("solver = MR\n")
    assert cli.main(["run", "--spec", str(bad)]) == 1
    assert cli.main(["run", "--spec", str(tmp_path / "nope.cfg")]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["run", "--spec", str(good), "--jobs", "0"]) == 1
    monkeypatch.setattr(experiment, "solve", lambda *a, **k: 1 / 0)
    other = _write_spec(tmp_path, "solver = SR\nsweep = p_max\nvalues = 10\noutput = out_fail\n", "f.cfg")
    assert cli.main(["run", "--spec", str(other)]) == 2
