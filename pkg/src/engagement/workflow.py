"""Multi-step workflows shared by the CLI: training on a corpus split, team snapshots, run-all."""
from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from .config import Settings
from .evaluation import evaluate_streams
from .features import feature_matrix
from .pipeline import FrameResult, PipelineConfig, classify_batch, training_states
from .simulator import generate_dataset
from .states import EngagementState
from .svm import MulticlassModel, save_model, train_multiclass
from .team import align_streams, write_snapshots


class StepError(RuntimeError):
    def __init__(self, step: str, cause: BaseException):
        self.step = step
        self.cause = cause
        super().__init__(f"step '{step}' failed: {cause}")


def split_features(streams, manifest: dict, split: str, thresholds):
    """Feature bits and labels for the frames of a manifest split, in manifest order."""
    if manifest["window_frames"] != thresholds.window_frames:
        raise ValueError(
            f"manifest was split for window_frames={manifest['window_frames']}, "
            f"thresholds use {thresholds.window_frames}"
        )
    frames = manifest[split]
    by_stream = {}
    for s, f in frames:
        by_stream.setdefault(s, []).append(f)
    X, y = [], []
    for s in sorted(by_stream):
        idx = by_stream[s]
        _, bits, _ = feature_matrix(streams[s], thresholds, idx)
        X.append(bits)
        y.append(streams[s].labels[idx])
    return np.concatenate(X).astype(float), np.concatenate(y)


def train_on_corpus(streams, manifest: dict, settings: Settings, keep_action: bool = False) -> MulticlassModel:
    X, y = split_features(streams, manifest, "train", settings.thresholds)
    dataset = zip(X, training_states(y, keep_action))
    return train_multiclass(dataset, settings.train, settings.thresholds.fingerprint())


def batch_results(stream, model: MulticlassModel, config: PipelineConfig) -> list:
    """FrameResults from the vectorized path; latency is the amortized per-frame cost."""
    start = time.perf_counter_ns()
    times, raw, final, speed = classify_batch(stream, model, config)
    per_frame = (time.perf_counter_ns() - start) / 1000.0 / max(1, len(times))
    return [
        FrameResult(float(t), stream.participant_id, EngagementState(int(r)), EngagementState(int(f)), float(s), per_frame)
        for t, r, f, s in zip(times, raw, final, speed)
    ]


def session_snapshots(streams, model, settings: Settings) -> list:
    results = {s.participant_id: batch_results(s, model, settings.pipeline) for s in streams}
    return align_streams(results, settings.period_s, settings.alert_threshold)


def run_all(settings: Settings, out_dir) -> dict:
    """simulate -> train -> evaluate -> aggregate, writing every artifact under ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise StepError("setup", exc) from exc

    def step(name, fn):
        try:
            return fn()
        except Exception as exc:  # noqa: BLE001 - re-raised with the step name
            raise StepError(name, exc) from exc

    corpus = step(
        "simulate",
        lambda: generate_dataset(
            settings.game,
            settings.pairs,
            out_dir=out,
            n_frames=settings.n_frames,
            n_train=settings.n_train,
            window_frames=settings.thresholds.window_frames,
        ),
    )
    model = step("train", lambda: train_on_corpus(corpus.streams, corpus.manifest, settings))
    step("train", lambda: save_model(out / "model.svm", model))
    evaluation = step("evaluate", lambda: evaluate_streams(corpus.streams, corpus.manifest, model, settings.pipeline))
    step("evaluate", lambda: (out / "report.json").write_text(evaluation.to_json()))
    step("evaluate", lambda: (out / "report.txt").write_text(evaluation.to_text()))

    def aggregate_all():
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        sessions = {}
        for i, entry in enumerate(corpus.manifest["streams"]):
            sessions.setdefault((entry["pair"], entry["game"]), []).append(i)
        paths = []
        for (pair, game), idx in sorted(sessions.items()):
            snaps = session_snapshots([corpus.streams[i] for i in idx], model, settings)
            path = snap_dir / f"pair{pair}_game{game}.jsonl"
            with path.open("w") as fh:
                write_snapshots(snaps, fh)
            paths.append(path)
        return paths

    snapshot_paths = step("aggregate", aggregate_all)
    return {
        "corpus": corpus,
        "model": model,
        "evaluation": evaluation,
        "snapshots": snapshot_paths,
    }
