"""CLI subcommands: exit codes, determinism, file formats."""

import json
import signal
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import pytest

from aquafarm.cli import main

FAST_ML = {
    "forest": {"n_trees": 5, "max_depth": 4, "min_leaf": 2},
    "svm": {"lambda": 0.01, "epochs": 8},
    "gbm": {"n_stages": 15, "learning_rate": 0.1, "max_depth": 2, "min_leaf": 2},
    "mlp": {"n_hidden": 8, "epochs": 40, "lr": 0.5, "batch": 256},
}


def write_config(path, seed=7, n_ticks=120, disease=0.01, extra=None):
    doc = {
        "seed": seed,
        "episode": {"n_ticks": n_ticks},
        "plant": {"disease_onset_prob_per_tick": disease,
                  "initial": {"water_level": 55.0}},
        "sensors": {"dropout_prob": 0.02, "spike_prob": 0.01},
        "ml": FAST_ML,
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def workdir(tmp_path):
    return tmp_path


def simulate(cfg, out_dir, *extra) -> Path:
    assert main(["simulate", str(cfg), "--out", str(out_dir), *extra]) == 0
    files = sorted(Path(out_dir).glob("episode_seed*.jsonl"))
    assert files
    return files[-1]


class TestSimulate:
    def test_single_tick_log(self, workdir):
        cfg = write_config(workdir / "c.json", n_ticks=5)
        log = simulate(cfg, workdir / "out", "--ticks", "1")
        lines = [l for l in log.read_text().splitlines() if l.strip()]
        assert len(lines) == 1

    def test_bad_config_exit_2(self, workdir):
        bad = workdir / "bad.json"
        bad.write_text(json.dumps({"plants": {}}))   # unknown section
        assert main(["simulate", str(bad), "--out", str(workdir / "o")]) == 2

    def test_missing_config_exit_2(self, workdir):
        assert main(["simulate", str(workdir / "none.json"),
                     "--out", str(workdir / "o")]) == 2

    def test_same_seed_byte_identical(self, workdir):
        cfg = write_config(workdir / "c.json", n_ticks=60)
        a = simulate(cfg, workdir / "a")
        b = simulate(cfg, workdir / "b")
        assert a.read_bytes() == b.read_bytes()

    def test_ml_assist_requires_bundle(self, workdir):
        cfg = write_config(workdir / "c.json")
        assert main(["simulate", str(cfg), "--out", str(workdir / "o"),
                     "--mode", "ml_assist"]) == 2


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """Simulate episodes, build a dataset, train once; reused by tests."""
    root = tmp_path_factory.mktemp("trained")
    episodes = []
    for seed in (21, 22):
        cfg = write_config(root / f"c{seed}.json", seed=seed, n_ticks=160)
        episodes.append(str(simulate(cfg, root / f"ep{seed}")))
    cfg = write_config(root / "c.json")
    assert main(["dataset", *episodes, "--config", str(cfg),
                 "--out", str(root / "dataset.jsonl")]) == 0
    assert main(["train", str(root / "dataset.jsonl"), "--config", str(cfg),
                 "--out", str(root / "bundle.json"), "--seed", "3"]) == 0
    return root, cfg


class TestDatasetAndTrain:
    def test_dataset_rows_have_frame_targets_split(self, trained):
        root, _ = trained
        line = json.loads((root / "dataset.jsonl").read_text().splitlines()[0])
        assert set(line) == {"frame", "targets", "split"}
        assert line["split"] in ("train", "val", "test")

    def test_bundle_schema(self, trained):
        root, _ = trained
        doc = json.loads((root / "bundle.json").read_text())
        assert doc["format_version"] == 1
        assert set(doc) == {"format_version", "forest", "svm", "gbm", "mlp", "metadata"}
        assert doc["metadata"]["dataset_hash"]

    def test_metrics_report_written(self, trained):
        root, _ = trained
        metrics = json.loads((root / "bundle.metrics.json").read_text())
        stage = metrics["metrics"]["gbm"]
        assert stage["stage_mse_non_increasing"] is True

    def test_train_reruns_identically(self, trained, tmp_path):
        root, cfg = trained
        assert main(["train", str(root / "dataset.jsonl"), "--config", str(cfg),
                     "--out", str(tmp_path / "bundle2.json"), "--seed", "3"]) == 0
        a = json.loads((root / "bundle.json").read_text())
        b = json.loads((tmp_path / "bundle2.json").read_text())
        assert a == b

    def test_missing_split_exit_2(self, trained, tmp_path):
        root, cfg = trained
        rows = [json.loads(l) for l in (root / "dataset.jsonl").read_text().splitlines()]
        trimmed = tmp_path / "dataset.jsonl"
        trimmed.write_text("\n".join(json.dumps(r) for r in rows
                                     if r["split"] != "val") + "\n")
        assert main(["train", str(trimmed), "--config", str(cfg),
                     "--out", str(tmp_path / "b.json")]) == 2

    def test_evaluate_prints_metrics(self, trained, capsys):
        root, cfg = trained
        assert main(["evaluate", "--bundle", str(root / "bundle.json"),
                     "--dataset", str(root / "dataset.jsonl"),
                     "--config", str(cfg)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert set(out) >= {"forest_test_mse", "svm_accuracy", "gbm_test_mse",
                            "mlp_agreement"}

    def test_simulate_ml_assist_with_bundle(self, trained, tmp_path):
        root, cfg = trained
        assert main(["simulate", str(cfg), "--out", str(tmp_path),
                     "--ticks", "20", "--mode", "ml_assist",
                     "--bundle", str(root / "bundle.json")]) == 0
        log = next(tmp_path.glob("episode_seed*.jsonl"))
        doc = json.loads(log.read_text().splitlines()[0])
        assert doc["decision"]["mode"] == "ml_assist"


class TestReplay:
    def event_log(self, tmp_path):
        from aquafarm.service import EventLog
        log = EventLog(tmp_path / "events.jsonl")
        for i in range(6):
            log.append("reading" if i % 2 == 0 else "decision", {"i": i}, float(i * 60))
        return tmp_path / "events.jsonl"

    def test_replay_event_log_identical(self, tmp_path):
        src = self.event_log(tmp_path)
        out = tmp_path / "replayed.jsonl"
        assert main(["replay", str(src), "--out", str(out)]) == 0
        assert out.read_bytes() == src.read_bytes()

    def test_replay_episode_log(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", n_ticks=5)
        log = simulate(cfg, tmp_path / "out")
        out = tmp_path / "replayed.jsonl"
        assert main(["replay", str(log), "--out", str(out)]) == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert [e["seq"] for e in lines] == list(range(1, len(lines) + 1))
        assert lines[0]["kind"] == "reading" and lines[1]["kind"] == "decision"

    def test_corrupt_line_exit_3(self, tmp_path, capsys):
        src = self.event_log(tmp_path)
        text = src.read_text().splitlines()
        text[3] = text[3][:20]   # truncate mid-record
        src.write_text("\n".join(text) + "\n")
        assert main(["replay", str(src)]) == 3
        assert "line 4" in capsys.readouterr().err

    def test_sequence_gap_exit_3(self, tmp_path):
        src = self.event_log(tmp_path)
        lines = src.read_text().splitlines()
        del lines[2]
        src.write_text("\n".join(lines) + "\n")
        assert main(["replay", str(src)]) == 3

    def test_speed_multiplier_paces_output(self, tmp_path):
        src = self.event_log(tmp_path)
        t0 = time.time()
        assert main(["replay", str(src), "--speed", "3000",
                     "--out", str(tmp_path / "r.jsonl")]) == 0
        elapsed = time.time() - t0
        assert 0.05 < elapsed < 3.0    # 5 gaps of 60 s sim at 3000x = 0.1 s


class TestServe:
    def test_serve_state_sigint_clean_exit(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", n_ticks=9999,
                           extra={"service": {"tick_wall_s": 0.02}})
        data_dir = tmp_path / "data"

        import socket
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        sock.close()

        proc = subprocess.Popen(
            [sys.executable, "-m", "aquafarm", "serve", str(cfg),
             "--port", str(port), "--data-dir", str(data_dir)],
            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
        try:
            deadline = time.time() + 15
            state = None
            while time.time() < deadline:
                try:
                    with urllib.request.urlopen(
                            f"http://127.0.0.1:{port}/api/state", timeout=2) as resp:
                        state = json.loads(resp.read())
                    if state["decision"] is not None:
                        break
                except OSError:
                    time.sleep(0.1)
            assert state is not None and state["seq"] >= 1
            proc.send_signal(signal.SIGINT)
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
        log = data_dir / "episode.jsonl"
        assert log.exists()
        # the flushed log replays cleanly
        assert main(["replay", str(log), "--out", str(tmp_path / "r.jsonl")]) == 0
        assert (tmp_path / "r.jsonl").read_bytes() == log.read_bytes()

    def test_port_busy_exit_2(self, tmp_path):
        import socket
        cfg = write_config(tmp_path / "c.json")
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
        try:
            r = subprocess.run(
                [sys.executable, "-m", "aquafarm", "serve", str(cfg),
                 "--port", str(port)],
                capture_output=True, text=True, timeout=30)
            assert r.returncode == 2
        finally:
            sock.close()
