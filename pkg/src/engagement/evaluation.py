"""Accuracy evaluation on a corpus split and per-frame latency benchmarking."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from .pipeline import FrameClassifier, PipelineConfig, classify_batch, process_stream
from .simulator import read_manifest
from .skeleton import read_stream
from .states import EngagementState, state_set
from .svm import MulticlassModel, load_model

REPORT_FORMAT = "engagement-evaluation-report"
REPORT_VERSION = 1
SCORING_MODES = ("three_class", "collapsed_intention_action")
LATENCY_BUDGET_US = 10_000.0


@dataclass(frozen=True)
class LatencyStats:
    n: int
    mean: float
    p50: float
    p99: float
    max: float

    @classmethod
    def from_samples(cls, samples_us) -> "LatencyStats":
        s = np.asarray(samples_us, dtype=float)
        if not len(s):
            raise ValueError("no latency samples")
        return cls(int(len(s)), float(s.mean()), float(np.percentile(s, 50)), float(np.percentile(s, 99)), float(s.max()))

    def to_dict(self) -> dict:
        return {"n": self.n, "mean_us": self.mean, "p50_us": self.p50, "p99_us": self.p99, "max_us": self.max}


@dataclass(frozen=True)
class EvaluationReport:
    scoring_mode: str
    labels: tuple
    confusion_matrix: np.ndarray
    accuracy: float
    precision: dict
    recall: dict
    latency: LatencyStats

    def to_dict(self) -> dict:
        return {
            "scoring_mode": self.scoring_mode,
            "labels": list(self.labels),
            "confusion_matrix": self.confusion_matrix.tolist(),
            "accuracy": self.accuracy,
            "precision": {str(k): v for k, v in self.precision.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
        }


def collapse(states) -> np.ndarray:
    states = np.asarray(states)
    return np.where(states == EngagementState.ACTION, int(EngagementState.INTENTION_TO_ACT), states)


def score(truth, predicted, labels, scoring_mode: str, latency: LatencyStats) -> EvaluationReport:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if scoring_mode == "collapsed_intention_action":
        truth, predicted = collapse(truth), collapse(predicted)
        labels = [s for s in labels if s != EngagementState.ACTION]
    elif scoring_mode != "three_class":
        raise ValueError(f"unknown scoring mode {scoring_mode!r}")
    labels = [int(s) for s in labels]
    if not len(truth):
        raise ValueError("empty test set")
    cm = confusion_matrix(truth, predicted, labels=labels)
    precision, recall, _, _ = precision_recall_fscore_support(
        truth, predicted, labels=labels, zero_division=0.0
    )
    return EvaluationReport(
        scoring_mode,
        tuple(labels),
        cm,
        float(np.trace(cm) / cm.sum()),
        {k: float(v) for k, v in zip(labels, precision)},
        {k: float(v) for k, v in zip(labels, recall)},
        latency,
    )


@dataclass(frozen=True)
class Evaluation:
    reports: dict
    latency: LatencyStats
    n_test_frames: int
    mode: str

    def to_dict(self, include_latency: bool = True) -> dict:
        d = {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "mode": self.mode,
            "n_test_frames": self.n_test_frames,
            "scoring": {name: r.to_dict() for name, r in self.reports.items()},
        }
        if include_latency:
            d["latency"] = self.latency.to_dict()
        return d

    def to_json(self, include_latency: bool = True) -> str:
        return json.dumps(self.to_dict(include_latency), indent=2, sort_keys=True) + "\n"

    def to_text(self, include_latency: bool = True) -> str:
        return render_text(self.to_dict(include_latency))


def render_text(report: dict) -> str:
    """Fixed-layout table built from the structured report."""
    lines = [f"mode: {report['mode']}", f"test frames: {report['n_test_frames']}"]
    for name in SCORING_MODES:
        r = report["scoring"][name]
        labels = r["labels"]
        lines.append("")
        lines.append(f"scoring: {name}")
        lines.append(f"accuracy: {r['accuracy']:.6f}")
        lines.append("truth\\pred " + "".join(f"{label:>8d}" for label in labels))
        for label, row in zip(labels, r["confusion_matrix"]):
            lines.append(f"{label:>10d} " + "".join(f"{v:>8d}" for v in row))
        lines.append("class      precision   recall")
        for label in labels:
            lines.append(f"{label:>5d}      {r['precision'][str(label)]:>9.6f} {r['recall'][str(label)]:>8.6f}")
    if "latency" in report:
        lat = report["latency"]
        lines.append("")
        lines.append(
            f"latency_us: n={lat['n']} mean={lat['mean_us']:.1f} p50={lat['p50_us']:.1f} "
            f"p99={lat['p99_us']:.1f} max={lat['max_us']:.1f}"
        )
    return "\n".join(lines) + "\n"


def evaluate_streams(streams, manifest: dict, model: MulticlassModel, config: PipelineConfig) -> Evaluation:
    """Classify the manifest's test frames and score them in both modes."""
    if manifest["window_frames"] != config.thresholds.window_frames:
        raise ValueError(
            f"manifest was split for window_frames={manifest['window_frames']}, "
            f"pipeline uses {config.thresholds.window_frames}"
        )
    test = manifest["test"]
    if not test:
        raise ValueError("empty test set")
    classify = FrameClassifier(model, config)
    w = config.thresholds.window_frames
    truth, predicted, latencies = [], [], []
    by_stream = {}
    for s, f in test:
        by_stream.setdefault(s, []).append(f)
    for s in sorted(by_stream):
        stream = streams[s]
        if stream.labels is None:
            raise ValueError(f"stream {s} ({stream.participant_id}) carries no labels")
        frames = by_stream[s]
        times, positions = stream.timestamps, stream.positions
        finals = []
        for f in frames:
            start = time.perf_counter_ns()
            _, final, _ = classify(times[f - w + 1 : f + 1], positions[f - w + 1 : f + 1])
            latencies.append((time.perf_counter_ns() - start) / 1000.0)
            finals.append(final)
        if config.smoothing_window > 1:
            _, _, smoothed, _ = classify_batch(stream, model, config)
            finals = [int(smoothed[f - w + 1]) for f in frames]
        predicted.extend(finals)
        truth.extend(int(v) for v in stream.labels[frames])
    latency = LatencyStats.from_samples(latencies)
    labels = state_set(config.mode)
    reports = {name: score(truth, predicted, labels, name, latency) for name in SCORING_MODES}
    return Evaluation(reports, latency, len(truth), config.mode)


def run_evaluate(model_path, stream_paths, manifest_path, config: PipelineConfig) -> Evaluation:
    """File-level evaluation. ``stream_paths`` defaults to the manifest's own list."""
    manifest = read_manifest(manifest_path)
    if stream_paths is None:
        root = Path(manifest_path).parent
        stream_paths = [root / e["path"] for e in manifest["streams"]]
    stream_paths = list(stream_paths)
    if len(stream_paths) != len(manifest["streams"]):
        raise ValueError(f"manifest lists {len(manifest['streams'])} streams, got {len(stream_paths)} paths")
    model = load_model(model_path)
    needed = {s for s, _ in manifest["test"]}
    streams = {i: read_stream(p) for i, p in enumerate(stream_paths) if i in needed}
    return evaluate_streams(streams, manifest, model, config)


@dataclass(frozen=True)
class BenchReport:
    latency: LatencyStats
    frames_per_repetition: int
    repetitions: int
    budget_us: float = LATENCY_BUDGET_US

    @property
    def gate_passed(self) -> bool:
        return self.latency.p99 < self.budget_us

    def to_dict(self) -> dict:
        return {
            "frames_per_repetition": self.frames_per_repetition,
            "repetitions": self.repetitions,
            "budget_us": self.budget_us,
            "gate_passed": self.gate_passed,
            "latency": self.latency.to_dict(),
        }


def bench_stream(stream, model: MulticlassModel, config: PipelineConfig, repetitions: int) -> BenchReport:
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples = []
    per_rep = 0
    for _ in range(repetitions):
        results = process_stream(stream, model, config)
        per_rep = len(results)
        samples.extend(r.latency_us for r in results)
    return BenchReport(LatencyStats.from_samples(samples), per_rep, repetitions)


def run_bench(model_path, stream_path, repetitions: int, config: PipelineConfig | None = None) -> BenchReport:
    return bench_stream(read_stream(stream_path), load_model(model_path), config or PipelineConfig(), repetitions)
