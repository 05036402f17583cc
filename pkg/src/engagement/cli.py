"""``engagement`` command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 latency gate failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import THRESHOLD_KEYS, ConfigError, Settings, read_key_values
from .evaluation import LATENCY_BUDGET_US, bench_stream, evaluate_streams
from .pipeline import PipelineError, process_stream, read_results, write_results
from .simulator import generate_dataset, read_manifest
from .skeleton import StreamFormatError, read_stream
from .svm import ModelFormatError, load_model, save_model
from .team import align_streams, write_snapshots
from .workflow import StepError, run_all, train_on_corpus

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_GATE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    def __init__(self, module: str, source, message: str):
        self.module = module
        self.source = source
        super().__init__(f"[{module}] {source}: {message}" if source else f"[{module}] {message}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(parser):
    parser.add_argument("--config", type=Path, help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="random seed (simulation and SMO partner sweeps)")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--mode", choices=("three", "six"), help="engagement state set")
    parser.add_argument(
        "--threshold",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one classifier threshold; repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="engagement", description="Skeleton-based engagement detection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a labeled hand-off game corpus")
    _common(p)
    p.add_argument("--pairs", type=int)
    p.add_argument("--games", type=int)
    p.add_argument("--noise", type=float, dest="noise_sigma_m", help="joint jitter std-dev, meters")
    p.add_argument("--frames", type=int, dest="n_frames", help="labeled frames kept in the split")
    p.add_argument("--train-frames", type=int, dest="n_train")

    p = sub.add_parser("train", help="train the SVM on a corpus's training split")
    _common(p)
    p.add_argument("--corpus", type=Path, required=True, help="directory holding manifest.json")
    p.add_argument("--keep-action-class", action="store_true", help="train Action as its own SVM class")
    p.add_argument("-C", type=float, dest="c")

    p = sub.add_parser("classify", help="classify every frame of one or more streams")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("streams", nargs="+", type=Path)
    p.add_argument("--smoothing", type=int, dest="smoothing_window")

    p = sub.add_parser("evaluate", help="score a model on a corpus's test split")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--corpus", type=Path, help="directory holding manifest.json and streams/")
    p.add_argument("--manifest", type=Path)
    p.add_argument("--streams", nargs="+", type=Path, help="stream files in manifest order")
    p.add_argument("--smoothing", type=int, dest="smoothing_window")

    p = sub.add_parser("aggregate", help="team snapshots from per-participant result files")
    _common(p)
    p.add_argument("results", nargs="+", type=Path)
    p.add_argument("--period", type=float, dest="period_s")
    p.add_argument("--alert-threshold", type=float, dest="alert_threshold")

    p = sub.add_parser("bench", help="per-frame latency over a replayed stream")
    _common(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--stream", type=Path, required=True)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--no-gate", action="store_true", help="always exit 0, still print statistics")

    p = sub.add_parser("run-all", help="simulate, train, evaluate and aggregate in one go")
    _common(p)
    p.add_argument("--pairs", type=int)
    p.add_argument("--noise", type=float, dest="noise_sigma_m")
    return parser


def resolve_settings(args) -> Settings:
    overrides = {}
    for item in args.threshold:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--threshold expects KEY=VALUE, got {item!r}")
        if key.strip() not in THRESHOLD_KEYS:
            raise UsageError(f"unknown threshold {key.strip()!r}")
        overrides[key.strip()] = value.strip()
    for key in ("pairs", "games", "noise_sigma_m", "n_frames", "n_train", "c", "smoothing_window", "period_s", "alert_threshold"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mode is not None:
        overrides["mode"] = args.mode
    file_values = {}
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"config file not found: {args.config}")
        file_values = read_key_values(args.config)
    return Settings.resolve(file_values, overrides)


def _out(args, default: str) -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_model(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        raise DataError("svm-smo", path, "model file not found") from None
    except ModelFormatError as exc:
        raise DataError("svm-smo", path, str(exc)) from None


def _load_stream(path):
    try:
        return read_stream(path)
    except FileNotFoundError:
        raise DataError("skeleton-model", path, "stream file not found") from None
    except StreamFormatError as exc:
        raise DataError("skeleton-model", path, str(exc)) from None


def _load_corpus(args):
    manifest_path = args.manifest if getattr(args, "manifest", None) else (args.corpus / "manifest.json" if args.corpus else None)
    if manifest_path is None:
        raise UsageError("need --corpus or --manifest")
    try:
        manifest = read_manifest(manifest_path)
    except FileNotFoundError:
        raise DataError("game-simulator", manifest_path, "manifest not found") from None
    except (ValueError, KeyError) as exc:
        raise DataError("game-simulator", manifest_path, str(exc)) from None
    paths = getattr(args, "streams", None)
    if paths is None:
        paths = [manifest_path.parent / e["path"] for e in manifest["streams"]]
    if len(paths) != len(manifest["streams"]):
        raise DataError("game-simulator", manifest_path, f"lists {len(manifest['streams'])} streams, got {len(paths)}")
    return manifest, paths


def cmd_simulate(args, settings: Settings) -> int:
    out = _out(args, "corpus")
    corpus = generate_dataset(
        settings.game,
        settings.pairs,
        out_dir=out,
        n_frames=settings.n_frames,
        n_train=settings.n_train,
        window_frames=settings.thresholds.window_frames,
    )
    counts = corpus.manifest["label_counts"]
    print(f"wrote {len(corpus.streams)} streams and manifest.json to {out}")
    print(f"train frames: {len(corpus.manifest['train'])} {counts['train']}")
    print(f"test frames:  {len(corpus.manifest['test'])} {counts['test']}")
    return EXIT_OK


def cmd_train(args, settings: Settings) -> int:
    manifest, paths = _load_corpus(args)
    needed = {s for s, _ in manifest["train"]}
    streams = {i: _load_stream(p) for i, p in enumerate(paths) if i in needed}
    try:
        model = train_on_corpus(streams, manifest, settings, keep_action=args.keep_action_class)
    except ValueError as exc:
        raise DataError("svm-smo", args.corpus, str(exc)) from None
    out = _out(args, ".")
    save_model(out / "model.svm", model)
    print(f"classes {list(model.class_labels)}; fingerprint {model.thresholds_fingerprint}")
    print(f"wrote {out / 'model.svm'}")
    return EXIT_OK


def cmd_classify(args, settings: Settings) -> int:
    model = _load_model(args.model)
    out = _out(args, "results")
    for path in args.streams:
        stream = _load_stream(path)
        try:
            results = process_stream(stream, model, settings.pipeline)
        except PipelineError as exc:
            raise DataError("engagement-pipeline", path, str(exc)) from None
        target = out / f"{path.stem}.results.jsonl"
        with target.open("w") as fh:
            write_results(results, fh)
        print(f"{path}: {len(results)} frames -> {target}")
    return EXIT_OK


def cmd_evaluate(args, settings: Settings) -> int:
    manifest, paths = _load_corpus(args)
    model = _load_model(args.model)
    needed = {s for s, _ in manifest["test"]}
    streams = {i: _load_stream(p) for i, p in enumerate(paths) if i in needed}
    try:
        evaluation = evaluate_streams(streams, manifest, model, settings.pipeline)
    except PipelineError as exc:
        raise DataError("engagement-pipeline", args.model, str(exc)) from None
    except ValueError as exc:
        raise DataError("cli", args.corpus or args.manifest, str(exc)) from None
    out = _out(args, ".")
    (out / "report.json").write_text(evaluation.to_json())
    (out / "report.txt").write_text(evaluation.to_text())
    sys.stdout.write(evaluation.to_text())
    return EXIT_OK


def cmd_aggregate(args, settings: Settings) -> int:
    per = {}
    for path in args.results:
        try:
            with open(path) as fh:
                results = read_results(fh)
        except FileNotFoundError:
            raise DataError("team-aggregate", path, "results file not found") from None
        except (ValueError, KeyError) as exc:
            raise DataError("team-aggregate", path, f"malformed result record: {exc}") from None
        for r in results:
            per.setdefault(r.participant_id, []).append(r)
    try:
        snapshots = align_streams(per, settings.period_s, settings.alert_threshold)
    except ValueError as exc:
        raise DataError("team-aggregate", None, str(exc)) from None
    out = _out(args, ".")
    with (out / "snapshots.jsonl").open("w") as fh:
        write_snapshots(snapshots, fh)
    alerts = sum(s.alert for s in snapshots)
    print(f"{len(snapshots)} snapshots for {len(per)} participants, {alerts} with the disengagement alert")
    print(f"wrote {out / 'snapshots.jsonl'}")
    return EXIT_OK


def cmd_bench(args, settings: Settings) -> int:
    model = _load_model(args.model)
    stream = _load_stream(args.stream)
    try:
        report = bench_stream(stream, model, settings.pipeline, args.repetitions)
    except PipelineError as exc:
        raise DataError("engagement-pipeline", args.stream, str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    lat = report.latency
    print(f"frames/repetition: {report.frames_per_repetition}  repetitions: {report.repetitions}  samples: {lat.n}")
    print(f"latency_us mean={lat.mean:.1f} p50={lat.p50:.1f} p99={lat.p99:.1f} max={lat.max:.1f}")
    print(f"gate p99 < {LATENCY_BUDGET_US:.0f} us: {'PASS' if report.gate_passed else 'FAIL'}")
    if args.out is not None:
        (_out(args, ".") / "bench.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if not report.gate_passed and not args.no_gate:
        return EXIT_GATE
    return EXIT_OK


def cmd_run_all(args, settings: Settings) -> int:
    out = args.out if args.out is not None else Path("engagement-run")
    try:
        artifacts = run_all(settings, out)
    except StepError as exc:
        raise DataError(f"run-all:{exc.step}", out, str(exc.cause)) from None
    sys.stdout.write(artifacts["evaluation"].to_text())
    print(f"artifacts in {out}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "aggregate": cmd_aggregate,
    "bench": cmd_bench,
    "run-all": cmd_run_all,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](args, settings)
    except (UsageError, ConfigError) as exc:
        print(f"engagement {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"engagement {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"engagement {args.command}: data error: [io] {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
