"""Training schedules as pure numeric sequences and JSON files.

Three generators live here:

* :func:`lr_sweep` / :func:`lr_find` -- geometric learning-rate range
  test with smoothed-loss divergence detection and a "minimum / 10"
  suggestion.
* :func:`one_cycle` -- warmup/anneal learning-rate curve with inverse
  momentum cycling (cosine interpolation in both phases).
* :func:`progressive_plan` -- the three-stage resizing plan: quarter,
  half, then full resolution, each stage with a frozen and an unfrozen
  part.

Schedule files are plain JSON; floats round-trip bit-for-bit because
Python serializes them via repr.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fileio import read_json, write_json_atomic

__all__ = [
    "LrFinderConfig",
    "LrFindResult",
    "OneCycleConfig",
    "StageConfig",
    "StagePlan",
    "lr_sweep",
    "lr_find",
    "one_cycle",
    "progressive_plan",
    "stage_steps",
    "plan_to_doc",
    "plan_from_doc",
    "save_plan",
    "load_plan",
]

SCHEDULE_FORMAT = "schedule/1"

DEFAULT_BATCH_LADDER = (16, 4, 1)
DEFAULT_LR_LADDER = (1e-2, 1e-4, 1e-5)
DEFAULT_FROZEN_EPOCHS = 5
DEFAULT_UNFROZEN_EPOCHS = 10
DEFAULT_WEIGHT_DECAY = 1e-3


@dataclass(frozen=True)
class LrFinderConfig:
    lr_min: float = 1e-7
    lr_max: float = 10.0
    steps: int = 100
    smoothing_beta: float = 0.98
    divergence_factor: float = 4.0

    def __post_init__(self) -> None:
        if not 0.0 < self.lr_min < self.lr_max:
            raise ConfigError(f"need 0 < lr_min < lr_max, got {self.lr_min}, {self.lr_max}")
        if self.steps < 2:
            raise ConfigError(f"sweep needs at least 2 steps, got {self.steps}")
        if not 0.0 <= self.smoothing_beta < 1.0:
            raise ConfigError(f"smoothing beta must be in [0, 1), got {self.smoothing_beta}")
        if self.divergence_factor <= 1.0:
            raise ConfigError(f"divergence factor must exceed 1, got {self.divergence_factor}")


def lr_sweep(cfg: LrFinderConfig = LrFinderConfig()) -> np.ndarray:
    """Geometric sequence from lr_min to lr_max with exact endpoints."""
    i = np.arange(cfg.steps, dtype=np.float64)
    rates = cfg.lr_min * (cfg.lr_max / cfg.lr_min) ** (i / (cfg.steps - 1))
    rates[0] = cfg.lr_min
    rates[-1] = cfg.lr_max
    return rates


@dataclass(frozen=True)
class LrFindResult:
    suggestion: float
    stop_index: int
    smoothed: tuple[float, ...]

    @property
    def diverged(self) -> bool:
        return self.stop_index < len(self.smoothed)


def lr_find(losses, cfg: LrFinderConfig = LrFinderConfig(), rates=None) -> LrFindResult:
    """Pick a learning rate from a range-test loss curve.

    Losses are smoothed with a bias-corrected exponential average
    (``smoothing_beta``); the sweep stops at the first point whose
    smoothed loss exceeds ``divergence_factor`` times the best smoothed
    loss so far. The suggestion is the rate at the smoothed minimum
    divided by 10 -- a step before the minimum, where the loss is still
    improving. Points after the stop never influence the result.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or len(losses) < 2:
        raise ValueError(f"need at least 2 loss points, got shape {losses.shape}")
    if rates is None:
        rates = lr_sweep(cfg)
    rates = np.asarray(rates, dtype=np.float64)
    if len(losses) > len(rates):
        raise ValueError(f"{len(losses)} losses but only {len(rates)} sweep rates")

    beta = cfg.smoothing_beta
    smoothed: list[float] = []
    avg = 0.0
    stop = len(losses)
    for i, loss in enumerate(losses):
        if not np.isfinite(loss):
            stop = i
            break
        avg = beta * avg + (1.0 - beta) * loss
        corrected = avg / (1.0 - beta ** (i + 1))
        smoothed.append(corrected)
        if i > 0 and corrected > cfg.divergence_factor * min(smoothed[:i]):
            stop = i
            break
    if stop == 0:
        raise ValueError("first loss point is non-finite")
    valid = smoothed[:stop]
    best = int(np.argmin(valid))
    return LrFindResult(
        suggestion=float(rates[best] / 10.0),
        stop_index=stop,
        smoothed=tuple(smoothed),
    )


@dataclass(frozen=True)
class OneCycleConfig:
    lr_max: float
    total_steps: int
    pct_start: float = 0.3
    div_start: float = 25.0
    div_final: float = 2.5e5
    mom_high: float = 0.95
    mom_low: float = 0.85
    weight_decay: float = DEFAULT_WEIGHT_DECAY

    def __post_init__(self) -> None:
        if self.lr_max <= 0:
            raise ConfigError(f"lr_max must be positive, got {self.lr_max}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if not 0.0 < self.pct_start < 1.0:
            raise ConfigError(f"pct_start must be in (0, 1), got {self.pct_start}")
        if self.div_start <= 1.0 or self.div_final <= 1.0:
            raise ConfigError("div_start and div_final must exceed 1")
        if not 0.0 <= self.mom_low <= self.mom_high <= 1.0:
            raise ConfigError(f"need 0 <= mom_low <= mom_high <= 1, got {self.mom_low}, {self.mom_high}")


def _cosine(start: float, end: float, t: np.ndarray) -> np.ndarray:
    return end + (start - end) / 2.0 * (1.0 + np.cos(np.pi * t))


def one_cycle(cfg: OneCycleConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-step (learning rate, momentum) arrays of length total_steps.

    Phase 1 anneals lr from lr_max/div_start up to lr_max while momentum
    drops mom_high -> mom_low; phase 2 anneals lr down to
    lr_max/div_final while momentum recovers. The peak sits at step
    floor(pct_start * total_steps).
    """
    T = cfg.total_steps
    if T == 1:
        return np.array([cfg.lr_max]), np.array([cfg.mom_low])
    peak = int(np.floor(cfg.pct_start * T))
    peak = min(max(peak, 1), T - 1)

    t_up = np.arange(peak + 1, dtype=np.float64) / peak
    lrs_up = _cosine(cfg.lr_max / cfg.div_start, cfg.lr_max, t_up)
    moms_up = _cosine(cfg.mom_high, cfg.mom_low, t_up)

    down_steps = T - 1 - peak
    if down_steps > 0:
        t_down = np.arange(1, down_steps + 1, dtype=np.float64) / down_steps
        lrs_down = _cosine(cfg.lr_max, cfg.lr_max / cfg.div_final, t_down)
        moms_down = _cosine(cfg.mom_low, cfg.mom_high, t_down)
    else:
        lrs_down = np.empty(0)
        moms_down = np.empty(0)
    return np.concatenate([lrs_up, lrs_down]), np.concatenate([moms_up, moms_down])


@dataclass(frozen=True)
class StageConfig:
    width: int
    height: int
    batch: int
    frozen_epochs: int = DEFAULT_FROZEN_EPOCHS
    unfrozen_epochs: int = DEFAULT_UNFROZEN_EPOCHS
    lr_max: float = DEFAULT_LR_LADDER[0]
    weight_decay: float = DEFAULT_WEIGHT_DECAY

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"stage size must be positive, got {self.width}x{self.height}")
        if self.batch < 1:
            raise ConfigError(f"stage batch must be >= 1, got {self.batch}")
        if self.frozen_epochs < 0 or self.unfrozen_epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.lr_max < 0:
            raise ConfigError(f"stage lr_max must be >= 0, got {self.lr_max}")


@dataclass(frozen=True)
class StagePlan:
    base_width: int
    base_height: int
    stages: tuple[StageConfig, ...]

    @property
    def total_epochs(self) -> int:
        return sum(s.frozen_epochs + s.unfrozen_epochs for s in self.stages)


def progressive_plan(
    base_width: int = 1600,
    base_height: int = 1200,
    stages: int = 3,
    batch_sizes=None,
    lr_maxes=None,
    frozen_epochs: int = DEFAULT_FROZEN_EPOCHS,
    unfrozen_epochs: int = DEFAULT_UNFROZEN_EPOCHS,
    weight_decay: float = DEFAULT_WEIGHT_DECAY,
) -> StagePlan:
    """Progressive-resizing plan: each stage doubles the previous size.

    Defaults reproduce the reference three-stage setup for 1200x1600
    patches: 300x400 / 600x800 / 1200x1600 with batches 16/4/1, lr_max
    1e-2/1e-4/1e-5, and 5 frozen + 10 unfrozen epochs per stage.
    """
    if stages < 1:
        raise ConfigError(f"need at least one stage, got {stages}")
    divisor = 2 ** (stages - 1)
    if base_width % divisor or base_height % divisor:
        raise ConfigError(
            f"base size {base_width}x{base_height} not divisible by 2^(stages-1)={divisor}"
        )
    if batch_sizes is None:
        batch_sizes = [DEFAULT_BATCH_LADDER[min(s, len(DEFAULT_BATCH_LADDER) - 1)] for s in range(stages)]
    if lr_maxes is None:
        lr_maxes = [DEFAULT_LR_LADDER[min(s, len(DEFAULT_LR_LADDER) - 1)] for s in range(stages)]
    if len(batch_sizes) != stages or len(lr_maxes) != stages:
        raise ConfigError("batch_sizes and lr_maxes must have one entry per stage")

    configs = []
    for s in range(stages):
        scale = 2 ** (stages - 1 - s)
        configs.append(
            StageConfig(
                width=base_width // scale,
                height=base_height // scale,
                batch=int(batch_sizes[s]),
                frozen_epochs=frozen_epochs,
                unfrozen_epochs=unfrozen_epochs,
                lr_max=float(lr_maxes[s]),
                weight_decay=weight_decay,
            )
        )
    return StagePlan(base_width=base_width, base_height=base_height, stages=tuple(configs))


def stage_steps(stage: StageConfig, steps_per_epoch: int) -> tuple[np.ndarray, np.ndarray]:
    """Expand one stage into its per-step (lr, momentum) sequence.

    The frozen part and the unfrozen part each run their own one-cycle
    curve; the sequences are concatenated. A stage with lr_max == 0
    yields all-zero learning rates (a no-op stage).
    """
    if steps_per_epoch < 1:
        raise ConfigError(f"steps_per_epoch must be >= 1, got {steps_per_epoch}")
    lrs, moms = [], []
    for epochs in (stage.frozen_epochs, stage.unfrozen_epochs):
        total = epochs * steps_per_epoch
        if total == 0:
            continue
        if stage.lr_max == 0.0:
            lrs.append(np.zeros(total))
            moms.append(np.full(total, 0.95))
            continue
        seg_lrs, seg_moms = one_cycle(
            OneCycleConfig(lr_max=stage.lr_max, total_steps=total, weight_decay=stage.weight_decay)
        )
        lrs.append(seg_lrs)
        moms.append(seg_moms)
    if not lrs:
        return np.empty(0), np.empty(0)
    return np.concatenate(lrs), np.concatenate(moms)


def plan_to_doc(plan: StagePlan, steps_per_epoch: int = 1, train_count: int | None = None) -> dict:
    """Serialize a plan, expanding per-step lr/momentum for each stage.

    With ``train_count`` the steps per epoch are derived per stage from
    the stage batch size (what a trainer iterating that dataset will
    actually execute); otherwise ``steps_per_epoch`` applies to every
    stage.
    """
    stages_doc = []
    for stage in plan.stages:
        if train_count is not None:
            batch = min(stage.batch, train_count)
            spe = -(-train_count // batch)
        else:
            spe = steps_per_epoch
        lrs, moms = stage_steps(stage, spe)
        stages_doc.append(
            {
                "width": stage.width,
                "height": stage.height,
                "batch": stage.batch,
                "frozen_epochs": stage.frozen_epochs,
                "unfrozen_epochs": stage.unfrozen_epochs,
                "lr_max": stage.lr_max,
                "weight_decay": stage.weight_decay,
                "steps": [{"lr": float(lr), "mom": float(m)} for lr, m in zip(lrs, moms)],
            }
        )
    return {
        "format": SCHEDULE_FORMAT,
        "base_width": plan.base_width,
        "base_height": plan.base_height,
        "stages": stages_doc,
    }


def plan_from_doc(doc: dict) -> StagePlan:
    """Parse a schedule document back into a StagePlan (steps are derived)."""
    try:
        stages = tuple(
            StageConfig(
                width=int(s["width"]),
                height=int(s["height"]),
                batch=int(s["batch"]),
                frozen_epochs=int(s["frozen_epochs"]),
                unfrozen_epochs=int(s["unfrozen_epochs"]),
                lr_max=float(s["lr_max"]),
                weight_decay=float(s.get("weight_decay", DEFAULT_WEIGHT_DECAY)),
            )
            for s in doc["stages"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid schedule document: {exc}") from exc
    if not stages:
        raise ConfigError("schedule document has no stages")
    base_w = int(doc.get("base_width", stages[-1].width))
    base_h = int(doc.get("base_height", stages[-1].height))
    return StagePlan(base_width=base_w, base_height=base_h, stages=stages)


def save_plan(
    plan: StagePlan, path: str | Path, steps_per_epoch: int = 1, train_count: int | None = None
) -> None:
    write_json_atomic(path, plan_to_doc(plan, steps_per_epoch, train_count))


def load_plan(path: str | Path) -> StagePlan:
    return plan_from_doc(read_json(path))
