"""End-to-end runs of the ``avsearch`` commands."""

import logging

import pandas as pd
import pytest
from click.testing import CliRunner

from src.main import cli


@pytest.fixture(autouse=True)
def restore_root_logger():
    # every invocation reconfigures the root logger on the runner's stderr
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture
def maps_dir(runner, tmp_path):
    out = tmp_path / "maps"
    result = runner.invoke(
        cli, ["gen-maps", "--seed", "0", "--per-condition", "1", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture
def metrics_csv(runner, maps_dir, tmp_path):
    out = tmp_path / "run" / "metrics.csv"
    result = runner.invoke(
        cli,
        [
            "run",
            "--policy",
            "heuristic",
            "--maps",
            str(maps_dir),
            "--repeats",
            "1",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    return out


def test_gen_maps_is_deterministic(runner, maps_dir, tmp_path):
    again = tmp_path / "again"
    result = runner.invoke(
        cli, ["gen-maps", "--seed", "0", "--per-condition", "1", "--out", str(again)]
    )
    assert result.exit_code == 0
    files = sorted(p.name for p in maps_dir.iterdir())
    assert len(files) == 27
    assert files == sorted(p.name for p in again.iterdir())
    for name in files:
        assert (maps_dir / name).read_bytes() == (again / name).read_bytes()


def test_run_writes_metrics_and_logs(metrics_csv):
    table = pd.read_csv(metrics_csv)
    assert len(table) == 27
    assert table["steps"].between(1, 30).all()
    assert set(table["outcome"]) <= {
        "committed_correct",
        "committed_wrong",
        "collision",
        "timeout",
    }
    assert metrics_csv.with_name("metrics_episodes.jsonl").exists()


def test_run_is_byte_identical(runner, maps_dir, metrics_csv, tmp_path):
    out = tmp_path / "rerun" / "metrics.csv"
    result = runner.invoke(
        cli,
        ["run", "--policy", "heuristic", "--maps", str(maps_dir)]
        + ["--repeats", "1", "--out", str(out)],
    )
    assert result.exit_code == 0
    assert out.read_bytes() == metrics_csv.read_bytes()
    logs = "metrics_episodes.jsonl"
    assert out.with_name(logs).read_bytes() == metrics_csv.with_name(logs).read_bytes()


def test_aggregate(runner, metrics_csv, tmp_path):
    out = tmp_path / "agg"
    result = runner.invoke(cli, ["aggregate", str(metrics_csv), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "accuracy" in result.output
    assert len(pd.read_csv(out / "by_condition.csv")) == 27
    assert len(pd.read_csv(out / "by_map.csv")) == 27


def test_render_commands(runner, maps_dir, metrics_csv, tmp_path):
    map_id = pd.read_csv(metrics_csv)["map_id"].iloc[0]
    log = str(metrics_csv.with_name("metrics_episodes.jsonl"))

    out = tmp_path / "traj.png"
    result = runner.invoke(
        cli,
        ["render", "trajectory", "--log", log, "--episode", f"{map_id}#0"]
        + ["--maps", str(maps_dir), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert "S" in result.output
    assert out.read_bytes().startswith(b"\x89PNG")

    heat = tmp_path / "heat.png"
    result = runner.invoke(
        cli,
        ["render", "heatmap", "--log", log, "--episode", f"{map_id}#0"]
        + ["--maps", str(maps_dir), "--out", str(heat)],
    )
    assert result.exit_code == 0, result.output
    assert heat.with_suffix(".txt").read_text().startswith("# avsearch belief matrix")


def test_heatmap_needs_maps_without_snapshots(runner, metrics_csv, tmp_path):
    map_id = pd.read_csv(metrics_csv)["map_id"].iloc[0]
    result = runner.invoke(
        cli,
        [
            "render",
            "heatmap",
            "--log",
            str(metrics_csv.with_name("metrics_episodes.jsonl")),
            "--episode",
            f"{map_id}#0",
            "--step",
            "1",
            "--out",
            str(tmp_path / "h.png"),
        ],
    )
    assert result.exit_code == 1


def test_unknown_episode(runner, maps_dir, metrics_csv, tmp_path):
    result = runner.invoke(
        cli,
        [
            "render",
            "trajectory",
            "--log",
            str(metrics_csv.with_name("metrics_episodes.jsonl")),
            "--episode",
            "nope#0",
            "--maps",
            str(maps_dir),
            "--out",
            str(tmp_path / "t.png"),
        ],
    )
    assert result.exit_code == 1


def test_scenario(runner):
    result = runner.invoke(
        cli, ["scenario", "occlusion", "--episodes", "2", "--policy", "heuristic"]
    )
    assert result.exit_code == 0, result.output
    assert "distractor commits" in result.output


def test_bad_flag(runner):
    assert runner.invoke(cli, ["run", "--policy", "ppo"]).exit_code == 2
    assert runner.invoke(cli, ["gen-maps"]).exit_code == 2
    assert runner.invoke(cli, ["launch"]).exit_code == 2


def test_invalid_config(runner, tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[planner]\nhorizon = 5\n")
    result = runner.invoke(
        cli, ["scenario", "occlusion", "--episodes", "1", "--config", str(bad)]
    )
    assert result.exit_code == 1


@pytest.mark.slow
def test_selftest_command(runner):
    result = runner.invoke(cli, ["selftest"])
    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output
