import json

import pytest

from aurora_xcon.cli import EXIT_OK, EXIT_RUN, EXIT_USAGE, main

TINY = dict(env="point_maze", batch_size=16, total_evaluations=64, population_size=32,
            n_centroids=32, repertoire_capacity=32, encoder_hidden=8, latent_dim=3,
            encoder={"max_epochs": 3})


def write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_run_writes_run_directory(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"algorithm": "aurora", **TINY})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "r")]) == EXIT_OK
    assert (tmp_path / "r" / "metrics.csv").exists()
    assert "best_fitness" in capsys.readouterr().out


def test_compare_then_stats(tmp_path, capsys):
    exp = write(tmp_path / "e.json", {"variants": ["ga", "map_elites_xy"], "common": TINY})
    out = str(tmp_path / "exp")
    assert main(["compare", "--config", exp, "--seeds", "0,1", "--out", out]) == EXIT_OK
    first = capsys.readouterr().out
    assert "ga vs map_elites_xy" in first
    assert main(["stats", "--out", out]) == EXIT_OK
    assert capsys.readouterr().out == first


@pytest.mark.parametrize("argv", [
    ["run", "--variant", "nope", "--out", "x"],
    ["run", "--out", "x"],
    ["run", "--variant", "ga", "--out", "x", "--seeds", "a,b"],
    ["bogus"],
])
def test_usage_errors_exit_one(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == EXIT_USAGE


def test_bad_config_file_is_usage_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    cfg = write(tmp_path / "c.json", {"algorithm": "ga", "typo": 1})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_failed_run_exits_two(tmp_path):
    cfg = write(tmp_path / "c.json", {"algorithm": "map_elites", "feature_kind": "bumper", **TINY})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_RUN
