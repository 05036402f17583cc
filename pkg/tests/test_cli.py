import json

import pytest

from engagement import cli
from engagement.config import ConfigError, Settings, load_thresholds, read_key_values
from engagement.evaluation import BenchReport, LatencyStats
from engagement.svm import load_model

SMALL = "games = 1\nswitches = 4\npairs = 1\nn_frames = 800\nn_train = 300\n"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.cfg").write_text(SMALL)
    assert cli.main(["simulate", "--config", str(root / "small.cfg"), "--out", str(root / "corpus")]) == 0
    assert cli.main(["train", "--corpus", str(root / "corpus"), "--out", str(root / "model")]) == 0
    return root


def test_simulate_train_evaluate(trained, tmp_path, capsys):
    manifest = json.loads((trained / "corpus" / "manifest.json").read_text())
    assert len(manifest["train"]) == 300 and len(manifest["test"]) == 500
    code, out, _ = run(["evaluate", "--model", trained / "model" / "model.svm", "--corpus", trained / "corpus", "--out", tmp_path], capsys)
    assert code == 0
    assert "scoring: three_class" in out
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["n_test_frames"] == 500
    assert (tmp_path / "report.txt").read_text() == out


def test_classify_and_aggregate(trained, tmp_path, capsys):
    streams = sorted((trained / "corpus" / "streams").glob("*.stream"))
    code, out, _ = run(["classify", "--model", trained / "model" / "model.svm", *streams, "--out", tmp_path / "res"], capsys)
    assert code == 0
    results = sorted((tmp_path / "res").glob("*.results.jsonl"))
    assert len(results) == 2
    first = json.loads(results[0].read_text().splitlines()[0])
    assert set(first) == {"timestamp", "participant_id", "raw_state", "final_state", "hand_speed", "latency_us"}
    code, out, _ = run(["aggregate", *results, "--out", tmp_path / "agg"], capsys)
    assert code == 0
    snaps = [json.loads(line) for line in (tmp_path / "agg" / "snapshots.jsonl").read_text().splitlines()]
    assert snaps and all(s["N"] in (1, 2) for s in snaps)
    assert snaps[-1]["N"] == 2


def test_bench_gate(trained, monkeypatch, capsys):
    stream = sorted((trained / "corpus" / "streams").glob("*.stream"))[0]
    args = ["bench", "--model", trained / "model" / "model.svm", "--stream", stream, "--repetitions", 1]
    code, out, _ = run(args, capsys)
    assert code == 0 and "PASS" in out

    def failing(*a, **k):
        return BenchReport(LatencyStats(3, 2e4, 2e4, 2e4, 2e4), 3, 1)

    monkeypatch.setattr(cli, "bench_stream", failing)
    code, out, _ = run(args, capsys)
    assert code == 3 and "FAIL" in out
    code, out, _ = run(args + ["--no-gate"], capsys)
    assert code == 0 and "p99=20000.0" in out


def test_usage_errors(trained, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["train"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 1
    code, _, err = run(["train", "--corpus", trained / "corpus", "--threshold", "nope=1"], capsys)
    assert code == 1 and "unknown threshold" in err
    code, _, err = run(["train", "--corpus", trained / "corpus", "--threshold", "lean_fwd_deg"], capsys)
    assert code == 1 and "KEY=VALUE" in err
    code, _, err = run(["simulate", "--config", trained / "missing.cfg"], capsys)
    assert code == 1 and "config file not found" in err


def test_data_errors_name_module_and_input(trained, tmp_path, capsys):
    model = trained / "model" / "model.svm"
    stream = sorted((trained / "corpus" / "streams").glob("*.stream"))[0]
    code, _, err = run(["bench", "--model", tmp_path / "none.svm", "--stream", stream], capsys)
    assert code == 2 and "[svm-smo]" in err and "none.svm" in err
    broken = tmp_path / "broken.stream"
    broken.write_text(stream.read_text().splitlines()[0] + "\n0.0 head 1 2\n")
    code, _, err = run(["classify", "--model", model, broken, "--out", tmp_path], capsys)
    assert code == 2 and "[skeleton-model]" in err and "broken.stream" in err and "line 2" in err
    corrupt = tmp_path / "corrupt.svm"
    corrupt.write_bytes(model.read_bytes()[:100])
    code, _, err = run(["classify", "--model", corrupt, stream, "--out", tmp_path], capsys)
    assert code == 2 and "corrupted" in err
    code, _, err = run(["classify", "--model", model, stream, "--threshold", "lean_fwd_deg=9", "--out", tmp_path], capsys)
    assert code == 2 and "[engagement-pipeline]" in err and "fingerprint" in err
    code, _, err = run(["evaluate", "--model", model, "--corpus", tmp_path], capsys)
    assert code == 2 and "manifest not found" in err


def test_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# comment\nlean_fwd_deg = 6\nseed = 5\nmode = six\n")
    args = cli.build_parser().parse_args(["simulate", "--config", str(cfg), "--seed", "9", "--threshold", "lateral_deg=12"])
    settings = cli.resolve_settings(args)
    assert settings.game.seed == 9 and settings.train.seed == 9  # flag beats file
    assert settings.thresholds.lean_fwd_deg == 6.0  # file beats default
    assert settings.thresholds.lateral_deg == 12.0
    assert settings.thresholds.yaw_away_deg == 30.0  # default
    assert settings.mode == "six_state"


def test_config_helpers(tmp_path):
    path = tmp_path / "t.cfg"
    path.write_text("lean_fwd_deg = 7.5\nwindow_frames = 12\n")
    th = load_thresholds(path)
    assert th.lean_fwd_deg == 7.5 and th.window_frames == 12
    path.write_text("lean_fwd_deg = 7.5\nc = 2\n")
    with pytest.raises(ConfigError, match="unknown threshold"):
        load_thresholds(path)
    assert read_key_values(path) == {"lean_fwd_deg": "7.5", "c": "2"}
    with pytest.raises(ConfigError, match="unknown configuration key"):
        Settings.resolve({"bogus": 1})
    with pytest.raises(ConfigError, match="invalid value"):
        Settings.resolve({"pairs": "many"})
    with pytest.raises(ConfigError):
        Settings.resolve({"smoothing_window": "2"})
    assert Settings.resolve({"action_override_enabled": "no"}).pipeline.action_override_enabled is False


def test_run_all_small(tmp_path, capsys):
    (tmp_path / "small.cfg").write_text(SMALL)
    code, out, _ = run(["run-all", "--config", tmp_path / "small.cfg", "--out", tmp_path / "run"], capsys)
    assert code == 0
    run_dir = tmp_path / "run"
    for name in ("manifest.json", "model.svm", "report.json", "report.txt"):
        assert (run_dir / name).is_file()
    assert len(list((run_dir / "streams").glob("*.stream"))) == 2
    assert [p.name for p in (run_dir / "snapshots").iterdir()] == ["pair1_game1.jsonl"]
    assert load_model(run_dir / "model.svm").class_labels == (1, 4)
    assert "accuracy" in out


def test_run_all_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(["run-all", "--out", blocker / "sub"], capsys)
    assert code == 2 and "run-all:setup" in err
