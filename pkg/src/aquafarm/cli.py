"""The aquafarm command: simulate, dataset, train, evaluate, serve, replay.

Exit codes: 0 success, 2 usage or configuration problems, 3 corrupt data.
Every subcommand is deterministic under a fixed seed; log timestamps are
simulated time, never wall clock.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

import numpy as np

from . import jsonio
from .config import ConfigError, load_config
from .controller import episode_callback
from .datasets import EPISODE_FEATURES, build_dataset, dataset_hash
from .ml.bundle import BundleError, ModelBundle, load_bundle, save_bundle
from .ml.forest import fit_random_forest, forest_predict
from .ml.gbm import fit_gbm
from .ml.labels import MLP_FEATURES, make_imitation_grid, split_grid
from .ml.mlp import agreement, fit_mlp_imitation
from .ml.svm import fit_linear_svm
from .plant import run_episode
from .preprocess import frame_vector
from .service import EventRecord, FarmService, record_from_dict, serve, shutdown

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CORRUPT = 3


def _fail(message: str, code: int = EXIT_USAGE) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    bundle = None
    if args.bundle:
        try:
            bundle = load_bundle(args.bundle)
        except (BundleError, FileNotFoundError) as exc:
            return _fail(str(exc))
    mode = args.mode or cfg.ml["mode"]
    if mode == "ml_assist" and bundle is None:
        return _fail("--mode ml_assist requires --bundle")
    n_ticks = args.ticks or cfg.n_ticks

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    controller = episode_callback(cfg.control, cfg.sensors, bundle, mode,
                                  cfg.ml["max_feed_g"])
    log = run_episode(cfg.plant, cfg.sensors, controller, n_ticks,
                      initial=cfg.initial)
    out_path = out_dir / f"episode_seed{cfg.plant.seed}.jsonl"
    jsonio.write_episode(log, out_path)
    print(out_path)
    return EXIT_OK


def cmd_dataset(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    episodes = [Path(p) for p in args.episodes]
    for p in episodes:
        if not p.exists():
            return _fail(f"episode log not found: {p}")
    try:
        ds = build_dataset(episodes, grid_dt_s=cfg.control.tick_interval_s,
                           noise_sigma=cfg.sensors.noise_sigma)
    except jsonio.LogFormatError as exc:
        return _fail(str(exc), EXIT_CORRUPT)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    jsonio.write_dataset(ds, out)
    print(out)
    return EXIT_OK


def _dataset_path(arg: str) -> Path:
    path = Path(arg)
    if path.is_dir():
        path = path / "dataset.jsonl"
    return path


def train_bundle(ds, ml_cfg: dict, control_cfg, seed: int, ds_hash: str) -> ModelBundle:
    """Fit all four learners; deterministic under seed."""
    seeds = np.random.SeedSequence(seed).spawn(4)
    forest_rng, svm_rng, mlp_rng, grid_rng = (np.random.default_rng(s) for s in seeds)

    forest = fit_random_forest(
        ds, n_trees=ml_cfg["forest"]["n_trees"], max_depth=ml_cfg["forest"]["max_depth"],
        min_leaf=ml_cfg["forest"]["min_leaf"], rng=forest_rng,
        feature_names=EPISODE_FEATURES)
    svm = fit_linear_svm(ds, lam=ml_cfg["svm"]["lambda"],
                         epochs=ml_cfg["svm"]["epochs"], rng=svm_rng,
                         feature_names=EPISODE_FEATURES)
    gbm = fit_gbm(ds, n_stages=ml_cfg["gbm"]["n_stages"],
                  learning_rate=ml_cfg["gbm"]["learning_rate"],
                  max_depth=ml_cfg["gbm"]["max_depth"],
                  min_leaf=ml_cfg["gbm"]["min_leaf"],
                  feature_names=EPISODE_FEATURES)

    X, Y = make_imitation_grid(control_cfg)
    Xtr, Ytr, Xho, Yho = split_grid(X, Y, holdout_frac=0.2, rng=grid_rng)
    mlp = fit_mlp_imitation(Xtr, Ytr, epochs=ml_cfg["mlp"]["epochs"],
                            lr=ml_cfg["mlp"]["lr"], batch=ml_cfg["mlp"]["batch"],
                            rng=mlp_rng, n_hidden=ml_cfg["mlp"]["n_hidden"],
                            feature_names=MLP_FEATURES)

    metrics = compute_metrics(ds, forest, svm, gbm, mlp, Xtr, Ytr, Xho, Yho)
    bundle = ModelBundle(forest=forest, svm=svm, gbm=gbm, mlp=mlp,
                         metadata={"seed": seed, "dataset_hash": ds_hash,
                                   "metrics": metrics})
    return bundle


def _split_arrays(ds, tag: str, feature_names, target: str):
    idx = ds.indices(tag)
    X = np.array([frame_vector(ds.frames[i], feature_names) for i in idx])
    y = np.array([ds.targets[target][i] for i in idx], dtype=np.float64)
    return X, y


def compute_metrics(ds, forest, svm, gbm, mlp, Xtr, Ytr, Xho, Yho) -> dict:
    metrics: dict = {"forest": {}, "svm": {}, "gbm": {}, "mlp": {}}
    train_targets = {t: np.array([ds.targets[t][i] for i in ds.indices("train")])
                     for t in forest.targets}
    for target in forest.targets:
        X_test, y_test = _split_arrays(ds, "test", forest.feature_names, target)
        preds = np.array([forest_predict(forest.trees[target], x) for x in X_test])
        baseline = float(train_targets[target].mean())
        metrics["forest"][target] = {
            "test_mse": float(np.mean((preds - y_test) ** 2)),
            "baseline_mse": float(np.mean((baseline - y_test) ** 2)),
        }

    X_test, y_test = _split_arrays(ds, "test", svm.feature_names, "diseased")
    scores = (X_test - svm.means) / svm.stds @ svm.weights + svm.bias
    labels = np.where(scores > 0, 1.0, -1.0)
    pos = y_test > 0
    metrics["svm"] = {
        "test_accuracy": float(np.mean(labels == y_test)),
        "recall": float(np.mean(labels[pos] > 0)) if pos.any() else None,
        "false_positive_rate": float(np.mean(labels[~pos] > 0)) if (~pos).any() else None,
    }

    X_test, y_test = _split_arrays(ds, "test", gbm.feature_names, gbm.target)
    preds = np.array([gbm.predict(x) for x in X_test])
    metrics["gbm"] = {
        "test_mse": float(np.mean((preds - y_test) ** 2)),
        "train_stage_mse_first": gbm.stage_mse[0],
        "train_stage_mse_last": gbm.stage_mse[-1],
        "stage_mse_non_increasing": all(b <= a + 1e-9 for a, b in
                                        zip(gbm.stage_mse, gbm.stage_mse[1:])),
    }

    metrics["mlp"] = {
        "agreement_train": agreement(mlp, Xtr, Ytr),
        "agreement_holdout": agreement(mlp, Xho, Yho),
        "final_loss": mlp.epoch_losses[-1] if mlp.epoch_losses else None,
    }
    return metrics


def cmd_train(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    ds_path = _dataset_path(args.dataset)
    if not ds_path.exists():
        return _fail(f"dataset not found: {ds_path}")
    try:
        ds = jsonio.read_dataset(ds_path)
    except jsonio.LogFormatError as exc:
        return _fail(str(exc), EXIT_CORRUPT)
    for tag in ("train", "val", "test"):
        if not ds.indices(tag):
            return _fail(f"dataset is missing the {tag} split")

    seed = args.seed if args.seed is not None else cfg.seed
    bundle = train_bundle(ds, cfg.ml, cfg.control, seed, dataset_hash(ds_path))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.json")
    metrics_path.write_text(json.dumps(bundle.metadata, indent=1) + "\n")
    print(out)
    print(metrics_path)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
        bundle = load_bundle(args.bundle)
        ds = jsonio.read_dataset(_dataset_path(args.dataset))
    except (ConfigError, BundleError, FileNotFoundError) as exc:
        return _fail(str(exc))
    except jsonio.LogFormatError as exc:
        return _fail(str(exc), EXIT_CORRUPT)
    if not ds.indices("test"):
        return _fail("dataset has no test split")
    try:
        X, Y = make_imitation_grid(cfg.control)
        metrics = compute_metrics(ds, bundle.forest, bundle.svm, bundle.gbm,
                                  bundle.mlp, X, Y, X, Y)
    except Exception as exc:   # schema mismatch between bundle and dataset
        return _fail(f"evaluation failed: {exc}")
    summary = {
        "forest_test_mse": {t: m["test_mse"] for t, m in metrics["forest"].items()},
        "forest_baseline_mse": {t: m["baseline_mse"] for t, m in metrics["forest"].items()},
        "svm_accuracy": metrics["svm"]["test_accuracy"],
        "gbm_test_mse": metrics["gbm"]["test_mse"],
        "mlp_agreement": metrics["mlp"]["agreement_train"],
    }
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        return _fail(str(exc))
    bundle = None
    if args.bundle:
        try:
            bundle = load_bundle(args.bundle)
        except (BundleError, FileNotFoundError) as exc:
            return _fail(str(exc))
    mode = args.mode or cfg.ml["mode"]
    port = args.port or cfg.service["port"]
    ui_dir = cfg.service.get("ui_dir")
    if ui_dir is None and Path("frontend/dist/index.html").exists():
        ui_dir = "frontend/dist"   # repo-root convenience default
    try:
        farm = FarmService(
            cfg.plant, cfg.sensors, cfg.control,
            data_dir=args.data_dir or cfg.service["data_dir"],
            bundle=bundle, mode=mode, initial=cfg.initial,
            max_feed_g=cfg.ml["max_feed_g"], episode_name=args.episode,
            tick_wall_s=args.tick_wall_s or cfg.service["tick_wall_s"])
        server = serve(farm, port, ui_dir=ui_dir)
    except OSError as exc:
        return _fail(f"cannot bind port {port}: {exc}")
    except Exception as exc:
        return _fail(str(exc))

    print(f"serving on http://127.0.0.1:{port} (mode={mode}); Ctrl-C to stop")
    stopping = []

    def handle_sigint(_sig, _frm):
        stopping.append(True)

    signal.signal(signal.SIGINT, handle_sigint)
    signal.signal(signal.SIGTERM, handle_sigint)
    try:
        while not stopping:
            time.sleep(0.1)
    finally:
        shutdown(server)
    print("stopped; event log flushed")
    return EXIT_OK


def _load_event_records(path: Path) -> list[EventRecord]:
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise jsonio.LogFormatError(i, f"invalid JSON ({exc.msg})") from exc
            try:
                records.append(record_from_dict(doc))
            except (KeyError, TypeError, ValueError) as exc:
                raise jsonio.LogFormatError(i, f"bad event record: {exc}") from exc
    for prev, cur in zip(records, records[1:]):
        if cur.seq != prev.seq + 1:
            raise jsonio.LogFormatError(0, f"sequence gap after seq {prev.seq}")
    return records


def _episode_to_events(docs: list[dict]) -> list[EventRecord]:
    records = []
    seq = 0
    for doc in docs:
        seq += 1
        records.append(EventRecord(seq, "reading", float(doc["t"]), {
            "state": doc["state"], "readings": doc["readings"]}))
        if doc.get("decision") is not None:
            seq += 1
            records.append(EventRecord(seq, "decision", float(doc["t"]), doc["decision"]))
    return records


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.log)
    if not path.exists():
        return _fail(f"log not found: {path}")
    try:
        first = None
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    first = line
                    break
        if first is None:
            return _fail("log is empty", EXIT_CORRUPT)
        if "\"seq\"" in first:
            records = _load_event_records(path)
        else:
            records = _episode_to_events(jsonio.read_episode_lines(path))
    except jsonio.LogFormatError as exc:
        return _fail(str(exc), EXIT_CORRUPT)

    out_fh = open(args.out, "w") if args.out else None
    emitted = 0
    prev_t = None
    try:
        for rec in records:
            if args.speed > 0 and prev_t is not None:
                delay = (rec.timestamp_s - prev_t) / args.speed
                if delay > 0:
                    time.sleep(min(delay, 30.0))
            prev_t = rec.timestamp_s
            line = json.dumps(rec.to_dict())
            if out_fh is not None:
                out_fh.write(line + "\n")
            else:
                print(line)
            emitted += 1
    finally:
        if out_fh is not None:
            out_fh.close()
    print(f"replayed {emitted} events", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquafarm",
        description="Closed-loop fish farm simulator, trainer and telemetry service.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a bounded closed-loop episode")
    p.add_argument("config", nargs="?", default=None, help="run config JSON")
    p.add_argument("--ticks", type=int, default=None)
    p.add_argument("--out", default="data", help="output directory")
    p.add_argument("--mode", choices=["rule_only", "ml_assist"], default=None)
    p.add_argument("--bundle", default=None, help="trained bundle for ml modes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", help="build a labeled dataset from episode logs")
    p.add_argument("episodes", nargs="+", help="episode JSONL files")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="data/dataset.jsonl")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="fit the four learners on a dataset")
    p.add_argument("dataset", help="dataset file or directory containing dataset.jsonl")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="data/bundle.json")
    p.add_argument("--metrics", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained bundle on a dataset")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the live loop and HTTP API")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--bundle", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--mode", choices=["rule_only", "ml_assist"], default=None)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--episode", default="episode")
    p.add_argument("--tick-wall-s", type=float, default=None,
                   help="wall seconds per simulated tick")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="re-stream a recorded log in order")
    p.add_argument("log")
    p.add_argument("--speed", type=float, default=0.0,
                   help="sim-time multiplier; 0 = as fast as possible")
    p.add_argument("--out", default=None, help="write re-emitted events here")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
