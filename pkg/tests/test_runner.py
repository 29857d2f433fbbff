import json

import pytest

from rmtlab import runner
from rmtlab.runner import REGISTRY, ConfigError, ExperimentConfig, list_experiments, main, run

REQUIRED = ["lsc", "rigidity", "deloc", "flucavg", "dbm", "loggas-xval", "repulsion", "gap-local", "band", "surmise"]
SMALL_LSC = ["--param", "samples=2"]


def test_catalog_contents():
    ids = [row[0] for row in list_experiments()]
    assert set(REQUIRED) <= set(ids)
    assert len(ids) >= 10
    assert len(ids) == len(set(ids))
    assert "suite" in ids


def test_each_id_maps_to_one_operation():
    fns = [e.fn for e in REGISTRY.values()]
    assert len(set(fns)) == len(fns)
    for e in REGISTRY.values():
        assert e.module.startswith("rmtlab.")
        assert callable(e.fn) and e.description and e.anchor
        if e.size_param is not None:
            assert e.size_param in e.parameters()


def test_list_command(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for rid in REQUIRED:
        assert rid in out


def test_run_twice_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        code = main(["run", "--experiment", "lsc", "--N", "500", "--seed", "7", "--out", str(tmp_path / name)]
                    + SMALL_LSC)
        assert code in (0, 1)
        outs.append((tmp_path / name / "lsc.csv").read_bytes())
    assert outs[0] == outs[1]
    header = json.loads(outs[0].decode().splitlines()[0][2:])
    assert header["seed"] == 7 and len(header["config_hash"]) > 8
    assert capsys.readouterr().out.startswith(("PASS", "FAIL"))


def test_seed_changes_output(tmp_path):
    for seed in ("1", "2"):
        main(["run", "--experiment", "lsc", "--N", "300", "--seed", seed, "--out", str(tmp_path / seed)] + SMALL_LSC)
    assert (tmp_path / "1" / "lsc.csv").read_bytes() != (tmp_path / "2" / "lsc.csv").read_bytes()


def test_unknown_experiment_exit_code(capsys):
    assert main(["run", "--experiment", "nope"]) == 2
    err = capsys.readouterr().err
    for rid in REQUIRED:
        assert rid in err


def test_invalid_parameters_exit_code(capsys, tmp_path):
    assert main(["run", "--experiment", "lsc", "--param", "bogus=1"]) == 2
    assert main(["run", "--experiment", "dbm-n2", "--N", "10"]) == 2
    assert main(["run", "--experiment", "lsc", "--param", "noequals"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"experiment": "lsc", "colour": 1}')
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run"]) == 2
    assert main(["run", "--experiment", "lsc", "--threads", "0"]) == 2


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig("sine", seed=3, threads=2, out="x", params={"N": 100, "r_max": 2.5})
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    default = ExperimentConfig()
    assert ExperimentConfig.from_json(default.to_json()) == default
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("{not json")


def test_config_file_with_flag_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(ExperimentConfig("lsc", seed=1, params={"N_list": [200], "samples": 2}).to_json())
    args = runner._build_parser().parse_args(["run", "--config", str(path), "--seed", "5", "--N", "[300, 400]",
                                               "--param", "E=0.5"])
    cfg = runner.config_from_args(args)
    assert cfg.seed == 5
    assert cfg.params == {"N_list": [300, 400], "samples": 2, "E": 0.5}
    assert cfg.resolved_params()["eta_exponent"] == 0.8


def test_param_value_parsing():
    assert runner._parse_value("3") == 3
    assert runner._parse_value("[1, 2]") == [1, 2]
    assert runner._parse_value("goe") == "goe"
    assert runner._kwargs({"z": {"re": 0.3, "im": 0.1}}) == {"z": 0.3 + 0.1j}


def test_default_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("RMTLAB_OUT", str(tmp_path / "env-out"))
    assert runner.default_out() == str(tmp_path / "env-out")
    cfg = ExperimentConfig("lsc", seed=0, params={"N_list": [200], "samples": 2})
    run(cfg)
    assert (tmp_path / "env-out" / "lsc.csv").exists()
    assert (tmp_path / "env-out" / "lsc.json").exists()
    monkeypatch.delenv("RMTLAB_OUT")
    assert runner.default_out() == "rmtlab-out"


def test_thread_count_independence():
    a = run(ExperimentConfig("lsc", seed=4, threads=1, params={"N_list": [200, 300], "samples": 3}), write=False)
    b = run(ExperimentConfig("lsc", seed=4, threads=4, params={"N_list": [200, 300], "samples": 3}), write=False)
    assert a.rows == b.rows
    assert a.summary == b.summary


def test_suite_config_validates():
    cfg = ExperimentConfig("suite")
    assert cfg.validate() is cfg
    args = runner._build_parser().parse_args(["suite", "--only", "1", "--only", "2", "--seed", "3"])
    cfg = runner.config_from_args(args)
    assert cfg.experiment == "suite" and cfg.params == {"only": [1, 2]} and cfg.seed == 3


def test_suite_subset_runs(tmp_path, capsys):
    assert main(["suite", "--only", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS criterion  1" in out and "1/1 criteria passed" in out
    assert (tmp_path / "criterion01" / "0" / "identities.csv").exists()


def test_run_experiment_suite_alias(tmp_path, capsys):
    assert main(["run", "--experiment", "suite", "--param", "only=[1]", "--out", str(tmp_path)]) == 0
    assert "PASS criterion  1" in capsys.readouterr().out
