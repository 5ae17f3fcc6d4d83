"""Shared pipeline configuration.

Sources merge with standard precedence: built-in defaults, then the
config file (``--config`` flag or the NUCLEOSEG_CONFIG environment
variable), then command-line flags. The reference constants ship as
defaults, so a config file and command line only carry experiment
deltas.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import DEFAULT_RATIOS
from .errors import ConfigError
from .fileio import read_json
from .postprocess import PostprocessConfig

__all__ = ["PipelineConfig", "load_config", "resolve_config", "CONFIG_ENV_VAR"]

CONFIG_ENV_VAR = "NUCLEOSEG_CONFIG"


@dataclass(frozen=True)
class PipelineConfig:
    dataset_dir: str = "dataset"
    predictions_dir: str = "predictions"
    reports_dir: str = "reports"
    tile_width: int = 1600
    tile_height: int = 1200
    tile_policy: str = "discard"
    split_seed: int = 0
    split_ratios: tuple[float, float, float] = DEFAULT_RATIOS
    postprocess: PostprocessConfig = field(default_factory=PostprocessConfig)
    schedule_stages: int = 3
    frozen_epochs: int = 5
    unfrozen_epochs: int = 10
    weight_decay: float = 1e-3
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.tile_width < 1 or self.tile_height < 1:
            raise ConfigError(f"tile size must be positive, got {self.tile_width}x{self.tile_height}")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.split_ratios}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.schedule_stages < 1:
            raise ConfigError(f"schedule stages must be >= 1, got {self.schedule_stages}")


def load_config(path: str | Path) -> PipelineConfig:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    kwargs = {}
    try:
        for key in (
            "dataset_dir",
            "predictions_dir",
            "reports_dir",
            "parallelism",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        tile = doc.get("tile", {})
        if "width" in tile:
            kwargs["tile_width"] = int(tile["width"])
        if "height" in tile:
            kwargs["tile_height"] = int(tile["height"])
        if "policy" in tile:
            kwargs["tile_policy"] = str(tile["policy"])
        split = doc.get("split", {})
        if "seed" in split:
            kwargs["split_seed"] = int(split["seed"])
        if "ratios" in split:
            kwargs["split_ratios"] = tuple(float(r) for r in split["ratios"])
        if "postprocess" in doc:
            kwargs["postprocess"] = PostprocessConfig(**doc["postprocess"])
        schedule = doc.get("schedule", {})
        if "stages" in schedule:
            kwargs["schedule_stages"] = int(schedule["stages"])
        if "frozen_epochs" in schedule:
            kwargs["frozen_epochs"] = int(schedule["frozen_epochs"])
        if "unfrozen_epochs" in schedule:
            kwargs["unfrozen_epochs"] = int(schedule["unfrozen_epochs"])
        if "weight_decay" in schedule:
            kwargs["weight_decay"] = float(schedule["weight_decay"])
        return PipelineConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config file {path}: {exc}") from exc


def resolve_config(explicit_path: str | None) -> PipelineConfig:
    """Load the config named by flag or environment, else defaults."""
    path = explicit_path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        return load_config(path)
    return PipelineConfig()
