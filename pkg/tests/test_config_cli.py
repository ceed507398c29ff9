import hashlib
import os

import pytest
import yaml

from hypoplan import cli
from hypoplan.config import ConfigError, config_from_mapping, dump_config, load_config, parse_override
from hypoplan.harness import SUMMARY_FIELDS, read_csv

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
LINEAR = os.path.join(ROOT, "configs", "linear.yaml")
VDP = os.path.join(ROOT, "configs", "vdp_track.yaml")
SDA = os.path.join(ROOT, "configs", "sda.yaml")
TINY = ["--set", "solver.iterations=4", "--set", "solver.max_depth=2", "--set", "linear.horizon=5"]


def tree_digest(path):
    h = hashlib.sha256()
    for root, dirs, files in sorted(os.walk(path)):
        dirs.sort()
        for f in sorted(files):
            full = os.path.join(root, f)
            h.update(os.path.relpath(full, path).encode())
            with open(full, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def run(argv):
    return cli.main([str(a) for a in argv])


# -- configuration ---------------------------------------------------------


def test_shipped_configs_load():
    for path, problem in ((LINEAR, "linear_gaussian_bench"), (VDP, "vdp_track"), (SDA, "sda")):
        cfg = load_config(path)
        assert cfg.problem == problem
        assert cfg.solver is not None and cfg.resolution is not None and cfg.updater is not None


def test_vdp_defaults_match_the_benchmark():
    cfg = load_config(VDP)
    assert cfg.vdp.mu == (0.6, 2.0, 1.4)
    assert cfg.vdp.hypothesis_mus == (1.4, 3.0, 0.75)
    assert cfg.vdp.detect_probs == (0.95, 0.8, 0.65)
    assert cfg.resolution.deadline == 30
    assert cfg.updater.particle_count == 250


def test_sda_deadline_is_27_steps():
    assert load_config(SDA).resolution.deadline == 27


def test_parse_override_values():
    assert parse_override("solver.iterations=10") == (["solver", "iterations"], 10)
    assert parse_override("campaign.weight_list=[0, 50]") == (["campaign", "weight_list"], [0, 50])
    assert parse_override("vdp.dt=0.25") == (["vdp", "dt"], 0.25)
    with pytest.raises(ConfigError):
        parse_override("solver.iterations")
    with pytest.raises(ConfigError):
        parse_override("solver..iterations=3")


def test_schema_errors_name_the_field():
    base = yaml.safe_load(open(LINEAR))
    bad = dict(base, solver={"iterations": "many"})
    with pytest.raises(ConfigError, match="solver.iterations"):
        config_from_mapping(bad)
    with pytest.raises(ConfigError, match="solver.bogus"):
        config_from_mapping(dict(base, solver={"bogus": 1}))
    with pytest.raises(ConfigError, match="problem"):
        config_from_mapping(dict(base, problem="chess"))
    with pytest.raises(ConfigError, match="campaign.runs_per_cell"):
        config_from_mapping(dict(base, campaign=dict(base["campaign"], runs_per_cell=0)))
    with pytest.raises(ConfigError, match="resolution"):
        config_from_mapping(dict(base, resolution={"epsilon": 0.8, "deadline": 5}))


def test_effective_config_round_trips(tmp_path):
    cfg = load_config(LINEAR, ["solver.iterations=10"], seed=42, output=str(tmp_path))
    again = config_from_mapping(yaml.safe_load(dump_config(cfg)))
    assert again == cfg
    assert again.solver.iterations == 10
    assert again.campaign.seed_base == 42


# -- commands --------------------------------------------------------------


def test_missing_config_exits_2(tmp_path, capsys):
    path = tmp_path / "nope.yaml"
    assert run(["run", path]) == 2
    assert str(path) in capsys.readouterr().err


def test_bad_override_exits_2(tmp_path, capsys):
    assert run(["run", LINEAR, "--set", "solver.iterations=abc", "--output", tmp_path]) == 2
    assert "solver.iterations" in capsys.readouterr().err


def test_usage_errors():
    assert run(["frobnicate", LINEAR]) == 2
    assert run([]) == 2
    assert run(["--help"]) == 0


def test_runtime_failure_exits_1(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("worker died")

    monkeypatch.setattr(cli, "sweep_weights", broken)
    assert run(["run", LINEAR, "--output", tmp_path]) == 1


def test_run_minimal(tmp_path, capsys):
    out = tmp_path / "run"
    argv = ["run", LINEAR, *TINY, "--set", "campaign.weight_list=[5]", "--set", "campaign.runs_per_cell=1",
            "--set", "solver.iterations=10", "--output", out]
    assert run(argv) == 0
    assert len(os.listdir(out / "traces")) == 1
    eff = yaml.safe_load((out / "effective_config.yaml").read_text())
    assert eff["solver"]["iterations"] == 10
    assert "base_reward_mean" in capsys.readouterr().out
    assert len(read_csv(str(out / "summary.csv"), SUMMARY_FIELDS)) == 1


def test_single_weight_sweep_equals_run(tmp_path):
    common = ["--set", "campaign.weight_list=[5]", "--set", "campaign.runs_per_cell=2", *TINY]
    assert run(["run", LINEAR, *common, "--output", tmp_path / "r"]) == 0
    assert run(["sweep", LINEAR, *common, "--output", tmp_path / "s"]) == 0
    assert (tmp_path / "r" / "summary.csv").read_bytes() == (tmp_path / "s" / "summary.csv").read_bytes()
    assert (tmp_path / "r" / "summary.csv").read_bytes() == (tmp_path / "s" / "w_5" / "summary.csv").read_bytes()


def test_sweep_is_byte_deterministic(tmp_path):
    argv = ["sweep", LINEAR, *TINY, "--seed", 7]
    assert run([*argv, "--output", tmp_path / "a"]) == 0
    assert run([*argv, "--output", tmp_path / "b"]) == 0
    for name in ("a", "b"):
        os.remove(tmp_path / name / "effective_config.yaml")  # holds the output path
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_vdp_sweep_mirrors_table_rows(tmp_path):
    argv = ["sweep", VDP, "--set", "campaign.weight_list=[0, 50, 75]", "--set", "campaign.runs_per_cell=1",
            "--set", "solver.iterations=2", "--set", "solver.max_depth=2", "--set", "vdp.horizon=2",
            "--set", "vdp.particle_count=30", "--set", "resolution.deadline=2", "--output", tmp_path]
    assert run(argv) == 0
    summary = read_csv(str(tmp_path / "summary.csv"), SUMMARY_FIELDS)
    assert [r["weight"] for r in summary] == [0.0, 50.0, 75.0]
    assert sorted(os.listdir(tmp_path)) == sorted(
        ["campaign.csv", "effective_config.yaml", "summary.csv", "w_0", "w_50", "w_75"])


def test_report_is_idempotent_and_pure(tmp_path):
    out = tmp_path / "run"
    assert run(["run", LINEAR, *TINY, "--output", out]) == 0
    before = tree_digest(out)
    assert run(["report", out]) == 0
    assert tree_digest(out) == before
    rep = tmp_path / "run-report"
    assert (rep / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
    for name in ("decision_times.csv", "mean_traces.csv", "run_traces.csv",
                 "decision_probabilities.png", "mean_traces.png", "run_traces.png"):
        assert (rep / name).stat().st_size > 0
    assert run(["report", out, "--output", tmp_path / "again"]) == 0
    assert (tmp_path / "again" / "summary.csv").read_bytes() == (rep / "summary.csv").read_bytes()


def test_report_on_sweep_directory(tmp_path):
    out = tmp_path / "sweep"
    assert run(["sweep", LINEAR, *TINY, "--output", out]) == 0
    assert run(["report", out, "--output", tmp_path / "rep"]) == 0
    assert (tmp_path / "rep" / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()


def test_report_errors(tmp_path):
    assert run(["report", tmp_path / "missing"]) == 2
    d = tmp_path / "empty"
    d.mkdir()
    (d / "campaign.csv").write_text("")
    assert run(["report", d]) == 2
    (d / "campaign.csv").write_text("not,a,campaign\n")
    assert run(["report", d]) == 2
    assert run(["report", d, "--output", d]) == 2
