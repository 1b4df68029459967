"""Pipeline configuration: a strict TOML file with paper-derived defaults.

A bare config reproduces the published operating point: threshold schedule
(0.85, 0.05, 4 levels), min search count 5, 450/6 token limits, similarity
thresholds 0.89 (lexical) / 0.86 (semantic) / 0.90 (dedup), and PCA to 300
dimensions. Unknown keys are rejected.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class PathsConfig:
    input: str = "interactions.jsonl"
    rules: str = ""  # empty -> packaged defaults
    gazetteer: str = ""  # empty -> packaged defaults
    vectors: str = ""  # required when embedder = "external"
    out_dir: str = "out"
    summaries: str = ""  # optional external intent summaries (JSONL)
    curated_questions: str = ""  # optional curated question DB (JSONL)
    judgments: str = ""  # optional relevance judgments (CSV)


@dataclass
class ScheduleConfig:
    x0: float = 0.85
    delta: float = 0.05
    levels: int = 4


@dataclass
class ThresholdsConfig:
    lexical: float = 0.89
    semantic: float = 0.86
    dedup: float = 0.90


@dataclass
class SynthConfig:
    topics: int = 8
    members_per_topic: int = 40
    noise_rate: float = 0.1
    questions_per_topic: int = 4
    phrase_tokens: int = 4
    # topic index (as a TOML key string) -> gazetteer surface form to plant
    entities: dict = field(default_factory=dict)


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    thresholds: ThresholdsConfig = field(default_factory=ThresholdsConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    min_search_count: int = 5
    max_transcript_tokens: int = 450
    max_intent_tokens: int = 6
    pca_k: int = 300  # 0 disables PCA; clamped to the achievable maximum
    embedder: str = "hash"  # hash | external
    hash_dim: int = 4096
    dedup_channel: str = "semantic"  # vectors used for near-duplicate collapsing
    seed: int = 7

    def validate(self) -> None:
        if not 0.0 < self.schedule.x0 <= 1.0:
            raise ConfigError(f"schedule.x0 must be in (0, 1], got {self.schedule.x0}")
        if self.schedule.delta < 0:
            raise ConfigError(f"schedule.delta must be >= 0, got {self.schedule.delta}")
        if self.schedule.levels < 1:
            raise ConfigError(f"schedule.levels must be >= 1, got {self.schedule.levels}")
        if self.schedule.x0 - (self.schedule.levels - 1) * self.schedule.delta <= 0:
            raise ConfigError("threshold schedule reaches 0 before the last level")
        for name, value in (
            ("thresholds.lexical", self.thresholds.lexical),
            ("thresholds.semantic", self.thresholds.semantic),
            ("thresholds.dedup", self.thresholds.dedup),
        ):
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if self.min_search_count < 1:
            raise ConfigError(f"min_search_count must be >= 1, got {self.min_search_count}")
        if self.max_transcript_tokens < 1:
            raise ConfigError("max_transcript_tokens must be >= 1")
        if self.max_intent_tokens < 1:
            raise ConfigError("max_intent_tokens must be >= 1")
        if self.pca_k < 0:
            raise ConfigError(f"pca_k must be >= 0, got {self.pca_k}")
        if self.embedder not in ("hash", "external"):
            raise ConfigError(f"embedder must be 'hash' or 'external', got {self.embedder!r}")
        if self.embedder == "external" and not self.paths.vectors:
            raise ConfigError("embedder 'external' requires paths.vectors")
        if self.dedup_channel not in ("semantic", "lexical"):
            raise ConfigError(
                f"dedup_channel must be 'semantic' or 'lexical', got {self.dedup_channel!r}"
            )
        if self.hash_dim < 1:
            raise ConfigError(f"hash_dim must be >= 1, got {self.hash_dim}")
        if self.synth.topics < 2:
            raise ConfigError("synth.topics must be >= 2")
        for key, value in self.synth.entities.items():
            if not str(key).isdigit() or int(key) >= self.synth.topics:
                raise ConfigError(f"synth.entities key {key!r} is not a valid topic index")
            if not isinstance(value, str) or not value:
                raise ConfigError(f"synth.entities[{key}] must be a non-empty surface form")

    def out_path(self, name: str) -> Path:
        return Path(self.paths.out_dir) / name


_SECTION_TYPES = {
    "paths": PathsConfig,
    "schedule": ScheduleConfig,
    "thresholds": ThresholdsConfig,
    "synth": SynthConfig,
}
_SCALAR_KEYS = {
    "min_search_count": int,
    "max_transcript_tokens": int,
    "max_intent_tokens": int,
    "pca_k": int,
    "embedder": str,
    "hash_dim": int,
    "dedup_channel": str,
    "seed": int,
}


def _fill_section(section_name: str, cls, data: dict):
    obj = cls()
    known = set(obj.__dataclass_fields__)
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {section_name}.{key}")
        expected = type(getattr(obj, key))
        if expected is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, expected):
            raise ConfigError(
                f"{section_name}.{key}: expected {expected.__name__}, got {type(value).__name__}"
            )
        setattr(obj, key, value)
    return obj


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}")
    cfg = PipelineConfig()
    for key, value in data.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"section [{key}] must be a table")
            setattr(cfg, key, _fill_section(key, _SECTION_TYPES[key], value))
        elif key in _SCALAR_KEYS:
            expected = _SCALAR_KEYS[key]
            if expected is int and isinstance(value, bool):
                raise ConfigError(f"{key}: expected int, got bool")
            if not isinstance(value, expected):
                raise ConfigError(
                    f"{key}: expected {expected.__name__}, got {type(value).__name__}"
                )
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown key {key}")
    cfg.validate()
    return cfg
