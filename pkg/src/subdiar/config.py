"""Pipeline configuration: typed defaults, flat dotted-key files, overrides.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
CLI flags override file values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Union

MODALITIES = ("A", "AV", "AVT")
CLUSTER_METHODS = ("ahc", "spectral")
METRIC_MODES = ("line", "timeline")


@dataclass(frozen=True)
class PipelineConfig:
    modality: str = "AVT"
    clustering_method: str = "spectral"
    k_max_visual: int = 50
    k_max_audio: int = 60
    ahc_threshold: float = 0.5
    turn_w: float = 0.45
    turn_window: int = 10
    supplement_eta: float = 0.45
    supplement_epsilon: float = 0.6
    metrics_mode: str = "line"
    metrics_collar: float = 0.0
    rng_seed: int = 0
    subtitles: str | None = None
    features: str | None = None
    turn_scores: str | None = None
    ground_truth: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.clustering_method not in CLUSTER_METHODS:
            raise ValueError(
                f"clustering.method must be one of {CLUSTER_METHODS}, "
                f"got {self.clustering_method!r}"
            )
        if self.metrics_mode not in METRIC_MODES:
            raise ValueError(
                f"metrics.mode must be one of {METRIC_MODES}, got {self.metrics_mode!r}"
            )
        if self.k_max_visual < 1 or self.k_max_audio < 1:
            raise ValueError("cluster-count caps must be at least 1")
        if not -1.0 <= self.ahc_threshold <= 1.0:
            raise ValueError("ahc.threshold must be in [-1, 1]")
        if not 0.0 <= self.turn_w <= 1.0:
            raise ValueError("turn.w must be in [0, 1]")
        if not 2 <= self.turn_window <= 10:
            raise ValueError("turn.window must be between 2 and 10")
        if not 0.0 <= self.supplement_eta <= 1.0:
            raise ValueError("supplement.eta must be in [0, 1]")
        if not 0.0 <= self.supplement_epsilon <= 1.0:
            raise ValueError("supplement.epsilon must be in [0, 1]")
        if self.metrics_collar < 0:
            raise ValueError("metrics.collar must be non-negative")


# Dotted config key -> (dataclass field, type coercion).
_KEY_MAP: dict[str, tuple[str, Any]] = {
    "modality": ("modality", str),
    "clustering.method": ("clustering_method", str),
    "clustering.k_max_visual": ("k_max_visual", int),
    "clustering.k_max_audio": ("k_max_audio", int),
    "ahc.threshold": ("ahc_threshold", float),
    "turn.w": ("turn_w", float),
    "turn.window": ("turn_window", int),
    "supplement.eta": ("supplement_eta", float),
    "supplement.epsilon": ("supplement_epsilon", float),
    "metrics.mode": ("metrics_mode", str),
    "metrics.collar": ("metrics_collar", float),
    "rng_seed": ("rng_seed", int),
    "paths.subtitles": ("subtitles", str),
    "paths.features": ("features", str),
    "paths.turn_scores": ("turn_scores", str),
    "paths.ground_truth": ("ground_truth", str),
    "paths.output_dir": ("output_dir", str),
}

_FIELD_TO_KEY = {field_name: key for key, (field_name, _) in _KEY_MAP.items()}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a raw string mapping."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def config_from_mapping(
    mapping: dict[str, str], base: PipelineConfig | None = None
) -> PipelineConfig:
    """Apply dotted-key string values over a base config with type coercion."""
    cfg = base if base is not None else PipelineConfig()
    updates: dict[str, Any] = {}
    for key, value in mapping.items():
        if key not in _KEY_MAP:
            raise ValueError(f"unknown config key {key!r}")
        field_name, coerce = _KEY_MAP[key]
        try:
            updates[field_name] = coerce(value)
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: cannot parse {value!r}") from exc
    return replace(cfg, **updates)


def load_config(path: Union[str, Path], base: PipelineConfig | None = None) -> PipelineConfig:
    return config_from_mapping(parse_config_text(Path(path).read_text(encoding="utf-8")), base)


def config_items(cfg: PipelineConfig) -> list[tuple[str, str]]:
    """The config as sorted (dotted key, rendered value) pairs for reports."""
    items = []
    for f in fields(cfg):
        key = _FIELD_TO_KEY[f.name]
        value = getattr(cfg, f.name)
        items.append((key, "" if value is None else str(value)))
    return sorted(items)
