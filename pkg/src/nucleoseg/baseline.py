"""Minimal per-pixel logistic segmenter.

The model scores each pixel from 9 features: the 3 normalized channel
values plus their local 5x5 window means and standard deviations. It is
deliberately tiny -- 10 parameters -- so the full training loop
(progressive resizing, frozen/unfrozen parts, one-cycle momentum SGD,
learning-rate finder) runs end-to-end on a laptop-scale dataset, and an
external segmenter can later replace it through the same file contracts.

Window statistics are computed from exact integer sums, so a constant
image yields std features that are exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .dataset import (
    IMAGENET_MEANS,
    IMAGENET_STDS,
    DatasetSplit,
    load_image,
    load_mask,
)
from .errors import ConfigError, PipelineError
from .fileio import read_json, write_json_atomic
from .imaging import as_rgb, quantize
from .schedules import LrFinderConfig, StagePlan, lr_find, lr_sweep, stage_steps

__all__ = [
    "FEATURE_WINDOW",
    "FEATURE_COUNT",
    "BaselineWeights",
    "TrainStep",
    "extract_features",
    "predict",
    "predict_image",
    "loss_and_grad",
    "train",
    "save_weights",
    "load_weights",
]

FEATURE_WINDOW = 5
FEATURE_COUNT = 9
WEIGHTS_FORMAT = "baseline-weights/1"
_PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class BaselineWeights:
    w: np.ndarray  # (9,) float64
    b: float
    means: tuple[float, float, float] = IMAGENET_MEANS
    stds: tuple[float, float, float] = IMAGENET_STDS

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64)
        if w.shape != (FEATURE_COUNT,):
            raise ValueError(f"expected {FEATURE_COUNT} weights, got shape {w.shape}")
        if not (np.isfinite(w).all() and np.isfinite(self.b)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def zeros(cls, means=IMAGENET_MEANS, stds=IMAGENET_STDS) -> "BaselineWeights":
        return cls(w=np.zeros(FEATURE_COUNT), b=0.0, means=tuple(means), stds=tuple(stds))


def _window_sums(plane: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact int64 5x5 sums of values and squared values, edges replicated."""
    r = FEATURE_WINDOW // 2
    padded = np.pad(plane.astype(np.int64), r, mode="edge")
    h, w = plane.shape
    s = np.zeros((h, w), dtype=np.int64)
    s2 = np.zeros((h, w), dtype=np.int64)
    for di in range(FEATURE_WINDOW):
        for dj in range(FEATURE_WINDOW):
            window = padded[di : di + h, dj : dj + w]
            s += window
            s2 += window * window
    return s, s2


def extract_features(
    img: np.ndarray, means=IMAGENET_MEANS, stds=IMAGENET_STDS
) -> np.ndarray:
    """Per-pixel feature planes of shape (H, W, 9).

    Channels 0-2: normalized values, 3-5: local 5x5 means of the
    normalized values, 6-8: local 5x5 population standard deviations.
    """
    img = as_rgb(img)
    h, w = img.shape[:2]
    n = FEATURE_WINDOW * FEATURE_WINDOW
    features = np.empty((h, w, FEATURE_COUNT), dtype=np.float64)
    for c in range(3):
        plane = img[..., c]
        features[..., c] = (plane.astype(np.float64) / 255.0 - means[c]) / stds[c]
        s, s2 = _window_sums(plane)
        features[..., 3 + c] = (s / float(n) / 255.0 - means[c]) / stds[c]
        var_num = n * s2 - s * s  # n^2 times the window variance; integer, >= 0
        features[..., 6 + c] = np.sqrt(var_num.astype(np.float64)) / (n * 255.0 * stds[c])
    return features


def predict(weights: BaselineWeights, features: np.ndarray) -> np.ndarray:
    """Sigmoid probability per pixel, quantized to an 8-bit map."""
    z = features @ weights.w + weights.b
    return quantize(255.0 * expit(z))


def predict_image(weights: BaselineWeights, img: np.ndarray) -> np.ndarray:
    return predict(weights, extract_features(img, weights.means, weights.stds))


def _target_to_labels(target: np.ndarray) -> np.ndarray:
    t = np.asarray(target)
    bad = (t != 0) & (t != 255)
    if bad.any():
        raise ValueError("target mask contains values other than 0 and 255")
    return t.reshape(-1).astype(np.float64) / 255.0


def loss_and_grad(
    weights: BaselineWeights,
    features: np.ndarray,
    target: np.ndarray,
    weight_decay: float = 0.0,
):
    """Mean binary cross-entropy plus L2 decay on w, with analytic gradient.

    Probabilities are clamped to [1e-7, 1 - 1e-7] inside the logs only;
    the gradient is the exact gradient of the unclamped objective. Any
    non-finite intermediate raises instead of propagating NaN.
    """
    x = np.asarray(features, dtype=np.float64).reshape(-1, FEATURE_COUNT)
    y = _target_to_labels(target)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"{x.shape[0]} feature rows vs {y.shape[0]} target pixels")
    z = x @ weights.w + weights.b
    p = expit(z)
    p_safe = np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    bce = -np.mean(y * np.log(p_safe) + (1.0 - y) * np.log1p(-p_safe))
    loss = bce + 0.5 * weight_decay * float(weights.w @ weights.w)

    d = (p - y) / y.shape[0]
    grad_w = x.T @ d + weight_decay * weights.w
    grad_b = float(d.sum())
    if not (np.isfinite(loss) and np.isfinite(grad_w).all() and np.isfinite(grad_b)):
        raise ArithmeticError("non-finite loss or gradient")
    return float(loss), grad_w, grad_b


def _box_downsample_rgb(img: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return img
    h, w = img.shape[:2]
    if h % factor or w % factor:
        raise ConfigError(f"image size {w}x{h} not divisible by stage factor {factor}")
    blocks = img.reshape(h // factor, factor, w // factor, factor, 3).astype(np.float64)
    return quantize(blocks.mean(axis=(1, 3)))


def _nearest_downsample(mask: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return mask
    off = factor // 2
    return mask[off::factor, off::factor]


@dataclass(frozen=True)
class TrainStep:
    stage: int
    phase: str
    step: int
    lr: float
    mom: float
    loss: float


def _batch_arrays(samples, indices, means, stds):
    feats = []
    labels = []
    for i in indices:
        img, mask = samples[i]
        feats.append(extract_features(img, means, stds).reshape(-1, FEATURE_COUNT))
        labels.append(mask.reshape(-1))
    return np.concatenate(feats), np.concatenate(labels)


def _probe_stage_lr(
    weights: BaselineWeights,
    samples,
    batch: int,
    weight_decay: float,
    rng: np.random.Generator,
    finder_cfg: LrFinderConfig,
) -> float:
    """Learning-rate range test on a throwaway copy of the weights."""
    rates = lr_sweep(finder_cfg)
    w = weights.w.copy()
    b = weights.b
    order = rng.permutation(len(samples))
    losses = []
    for i, lr in enumerate(rates):
        indices = [order[(i * batch + j) % len(samples)] for j in range(batch)]
        x, y = _batch_arrays(samples, indices, weights.means, weights.stds)
        try:
            probe = BaselineWeights(w=w, b=b, means=weights.means, stds=weights.stds)
            loss, grad_w, grad_b = loss_and_grad(probe, x, y, weight_decay)
        except (ArithmeticError, ValueError):
            break
        losses.append(loss)
        w = w - lr * grad_w
        b = b - lr * grad_b
        if not (np.isfinite(w).all() and np.isfinite(b)):
            break
    if len(losses) < 2:
        return 0.0
    return lr_find(losses, finder_cfg, rates=rates).suggestion


def train(
    dataset_dir: str | Path,
    split: DatasetSplit,
    plan: StagePlan,
    seed: int,
    means=IMAGENET_MEANS,
    stds=IMAGENET_STDS,
    auto_lr: bool = False,
    lr_finder_cfg: LrFinderConfig | None = None,
) -> tuple[BaselineWeights, list[TrainStep]]:
    """Train through the progressive-resizing plan.

    Each stage downsamples the training set to the stage size (box
    filter for images, nearest for masks) and runs two one-cycle
    segments of classical-momentum SGD: a frozen part that only updates
    the bias, then an unfrozen part that updates all parameters. With
    ``auto_lr`` the stage lr_max is replaced by a learning-rate range
    test run from the current weights, which is how the per-stage rates
    were chosen in the reference workflow. Deterministic given the seed.
    """
    if not split.train:
        raise PipelineError("training split is empty")
    rng = np.random.default_rng(seed)
    full = []
    for stem in split.train:
        img = load_image(dataset_dir, stem)
        mask = load_mask(dataset_dir, stem)
        if img.shape[:2] != (plan.base_height, plan.base_width):
            raise ConfigError(
                f"sample {stem} is {img.shape[1]}x{img.shape[0]}, plan expects "
                f"{plan.base_width}x{plan.base_height}"
            )
        if mask.shape != img.shape[:2]:
            raise ConfigError(f"sample {stem} mask/image size mismatch")
        full.append((img, mask))

    weights = BaselineWeights.zeros(means=means, stds=stds)
    history: list[TrainStep] = []

    for stage_idx, stage in enumerate(plan.stages):
        factor = plan.base_width // stage.width
        if stage.width * factor != plan.base_width or stage.height * factor != plan.base_height:
            raise ConfigError(
                f"stage {stage_idx} size {stage.width}x{stage.height} does not divide "
                f"base {plan.base_width}x{plan.base_height}"
            )
        samples = [
            (_box_downsample_rgb(img, factor), _nearest_downsample(mask, factor))
            for img, mask in full
        ]
        batch = min(stage.batch, len(samples))
        steps_per_epoch = -(-len(samples) // batch)

        lr_max = stage.lr_max
        if auto_lr:
            suggested = _probe_stage_lr(
                weights, samples, batch, stage.weight_decay, rng,
                lr_finder_cfg or LrFinderConfig(steps=50),
            )
            if suggested > 0.0:
                lr_max = suggested

        lrs, moms = stage_steps(replace(stage, lr_max=lr_max), steps_per_epoch)
        offset = 0
        for phase, epochs in (("frozen", stage.frozen_epochs), ("unfrozen", stage.unfrozen_epochs)):
            total = epochs * steps_per_epoch
            seg_lrs = lrs[offset : offset + total]
            seg_moms = moms[offset : offset + total]
            offset += total
            if total == 0:
                continue
            vel_w = np.zeros(FEATURE_COUNT)
            vel_b = 0.0
            step = 0
            for _epoch in range(epochs):
                order = rng.permutation(len(samples))
                for start in range(0, len(samples), batch):
                    x, y = _batch_arrays(samples, order[start : start + batch], means, stds)
                    loss, grad_w, grad_b = loss_and_grad(weights, x, y, stage.weight_decay)
                    lr = float(seg_lrs[step])
                    mom = float(seg_moms[step])
                    vel_b = mom * vel_b - lr * grad_b
                    new_b = weights.b + vel_b
                    if phase == "frozen":
                        new_w = weights.w
                    else:
                        vel_w = mom * vel_w - lr * grad_w
                        new_w = weights.w + vel_w
                    weights = BaselineWeights(w=new_w, b=new_b, means=weights.means, stds=weights.stds)
                    history.append(TrainStep(stage_idx, phase, step, lr, mom, loss))
                    step += 1
    return weights, history


def save_weights(weights: BaselineWeights, path: str | Path) -> None:
    write_json_atomic(
        path,
        {
            "format": WEIGHTS_FORMAT,
            "w": [float(v) for v in weights.w],
            "b": weights.b,
            "means": list(weights.means),
            "stds": list(weights.stds),
        },
    )


def load_weights(path: str | Path) -> BaselineWeights:
    doc = read_json(path)
    if doc.get("format") != WEIGHTS_FORMAT:
        raise ConfigError(f"unsupported weights format {doc.get('format')!r} in {path}")
    try:
        return BaselineWeights(
            w=np.asarray(doc["w"], dtype=np.float64),
            b=float(doc["b"]),
            means=tuple(doc.get("means", IMAGENET_MEANS)),
            stds=tuple(doc.get("stds", IMAGENET_STDS)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid weights file {path}: {exc}") from exc
