"""Plain-text ``key = value`` configuration files.

Keys are the field names of :class:`~engagement.features.ClassifierThresholds`,
:class:`~engagement.svm.TrainParams` and
:class:`~engagement.simulator.GameConfig`, plus the pipeline, corpus and
aggregation settings listed in :data:`OTHER_KEYS`. Blank lines and lines
starting with ``#`` or ``;`` are ignored.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .features import ClassifierThresholds
from .pipeline import PipelineConfig
from .simulator import GameConfig
from .svm import TrainParams


class ConfigError(ValueError):
    pass


THRESHOLD_KEYS = {f.name: f.type for f in fields(ClassifierThresholds)}
TRAIN_KEYS = {f.name: f.type for f in fields(TrainParams)}
GAME_KEYS = {f.name: f.type for f in fields(GameConfig)}
OTHER_KEYS = {
    "mode": "str",
    "smoothing_window": "int",
    "action_override_enabled": "bool",
    "pairs": "int",
    "n_frames": "int",
    "n_train": "int",
    "period_s": "float",
    "alert_threshold": "float",
}
# ``seed`` appears in both TrainParams and GameConfig; one value drives both.
ALL_KEYS = {**THRESHOLD_KEYS, **TRAIN_KEYS, **GAME_KEYS, **OTHER_KEYS}


def read_key_values(path) -> dict:
    parser = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string("[settings]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["settings"])


def _convert(key: str, raw):
    kind = ALL_KEYS[key]
    if not isinstance(raw, str):
        return raw
    try:
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw.strip()


def load_thresholds(path) -> ClassifierThresholds:
    """Thresholds from a key-value file; every key must be a threshold field."""
    values = read_key_values(path)
    unknown = set(values) - set(THRESHOLD_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown threshold keys {sorted(unknown)}")
    try:
        return ClassifierThresholds(**{k: _convert(k, v) for k, v in values.items()})
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class Settings:
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)
    train: TrainParams = field(default_factory=TrainParams)
    game: GameConfig = field(default_factory=GameConfig)
    mode: str = "three_state"
    smoothing_window: int = 1
    action_override_enabled: bool = True
    pairs: int = 3
    n_frames: int = 2321
    n_train: int = 500
    period_s: float = 1.0
    alert_threshold: float = 0.40

    @property
    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(self.mode, self.smoothing_window, self.thresholds, self.action_override_enabled)

    @classmethod
    def resolve(cls, *sources) -> "Settings":
        """Merge key-value mappings, later ones winning, over the defaults."""
        merged = {}
        for source in sources:
            for key, value in (source or {}).items():
                if key not in ALL_KEYS:
                    raise ConfigError(f"unknown configuration key {key!r}")
                merged[key] = _convert(key, value)
        if "mode" in merged:
            merged["mode"] = {"three": "three_state", "six": "six_state"}.get(merged["mode"], merged["mode"])
        base = cls()
        try:
            thresholds = replace(base.thresholds, **{k: v for k, v in merged.items() if k in THRESHOLD_KEYS})
            train = replace(base.train, **{k: v for k, v in merged.items() if k in TRAIN_KEYS})
            game = replace(base.game, **{k: v for k, v in merged.items() if k in GAME_KEYS})
            settings = replace(
                base,
                thresholds=thresholds,
                train=train,
                game=game,
                **{k: v for k, v in merged.items() if k in OTHER_KEYS},
            )
            settings.pipeline  # validates mode and smoothing window
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return settings
