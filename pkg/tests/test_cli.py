import json
import math

import pytest

from macronode.cli import ConfigError, load_config_file, main, parse_config
from macronode.montecarlo import read_table


def _flags(**kw):
    base = {"config": None, "subcommand": "sweep", "out": None}
    base.update(kw)
    return base


def test_minimal_config_file(tmp_path):
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps({"distances": [3], "epsilon": [0.05], "trials": 100}))
    cfg = parse_config(_flags(config=str(cfg_path), subcommand="trial"))
    assert cfg.distances == [3] and cfg.epsilons == [0.05] and cfg.n_trials == 100


def test_yaml_config_and_flag_override(tmp_path):
    cfg_path = tmp_path / "run.yaml"
    cfg_path.write_text("distances: [3, 5]\nepsilon: [0.05, 0.06]\ntrials: 10\nseed: 4\n")
    cfg = parse_config(_flags(config=str(cfg_path), subcommand="trial", trials=7))
    assert cfg.distances == [3, 5] and cfg.n_trials == 7 and cfg.seed == 4


def test_negative_epsilon_rejected():
    with pytest.raises(ConfigError):
        parse_config(_flags(subcommand="trial", epsilon="-0.1"))


def test_db_eta_grid_expands():
    cfg = parse_config(_flags(subcommand="trial", db="10,13", eta="1,0.95"))
    assert len(cfg.epsilons) == 4
    # hand formula for (13 dB, eta = 0.95)
    assert math.isclose(cfg.epsilons[3], 10 ** (-1.3) + 0.05 / 1.9, rel_tol=1e-14)


def test_contradictory_grids_rejected():
    with pytest.raises(ConfigError):
        parse_config(_flags(subcommand="trial", epsilon="0.1", db="10"))


def test_unknown_and_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"distance": 3}))
    with pytest.raises(ConfigError):
        load_config_file(bad)
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(broken)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.json")


def test_fixed_one_gkp_with_swap_rejected():
    with pytest.raises(ConfigError):
        parse_config(_flags(subcommand="trial", epsilon="0.1", prep="fixed-one-gkp", p_swap="0.2"))


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv("MACRONODE_WORKERS", "3")
    assert parse_config(_flags(subcommand="trial", epsilon="0.1")).workers == 3
    assert parse_config(_flags(subcommand="trial", epsilon="0.1", workers=2)).workers == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--epsilon", "0.1", "--out", str(blocker / "sub" / "x")]) == 2


def test_verify_identities_exit_zero(capsys):
    assert main(["verify-identities"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] and max(report["deviations"].values()) < 1e-12


def test_trial_stable_verdict(capsys):
    args = ["trial", "--distances", "3", "--epsilon", "0.1", "--seed", "5", "--trial-index", "2"]
    assert main(args) == 0
    first = capsys.readouterr().out
    assert main(args) == 0
    assert capsys.readouterr().out == first
    assert "failure" in json.loads(first)


def test_sweep_then_fit_pipeline(tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = main(["sweep", "--distances", "3,5,7", "--epsilon", "0.06,0.08,0.1,0.12,0.14,0.16", "--trials", "40",
               "--seed", "2", "--out", str(out)])
    assert rc == 0
    rows = read_table(tmp_path / "sweep.txt")
    assert len(rows) == 18
    assert main(["fit-threshold", "--input", str(tmp_path / "sweep.txt"), "--out", str(tmp_path / "th")]) == 0
    rep = json.loads((tmp_path / "th.jsonl").read_text().splitlines()[0])
    assert 0.0 < rep["epsilon_th"] < 1.0
    assert (tmp_path / "th.txt").read_text().startswith("# prep")
    # the checkpoint is an equally valid fit input
    assert main(["fit-threshold", "--input", str(tmp_path / "sweep.jsonl")]) == 0


def test_fit_without_crossing_exit_four(tmp_path):
    table = tmp_path / "t.txt"
    from macronode.gaussian import StatePrepConfig
    from macronode.montecarlo import SweepRow, write_table

    rows = [SweepRow.from_counts(d, e, StatePrepConfig(), 1000, 10 * d) for d in (3, 5, 7)
            for e in (0.05, 0.06, 0.07, 0.08, 0.09)]
    write_table(rows, table)
    assert main(["fit-threshold", "--input", str(table)]) == 4


def test_fit_runtime_error_exit_three(tmp_path):
    table = tmp_path / "t.txt"
    table.write_text("# d epsilon p_swap prep n_trials n_failures rate ci_low ci_high\n")
    assert main(["fit-scaling", "--input", str(table)]) == 3


def test_config_errors_exit_two(tmp_path):
    assert main(["sweep", "--epsilon", "0.1"]) == 2  # no --out
    assert main(["fit-threshold"]) == 2
    assert main(["fit-threshold", "--input", str(tmp_path / "nope.txt")]) == 2
    assert main(["trial", "--epsilon", "abc"]) == 2
    assert main(["bogus"]) == 2
