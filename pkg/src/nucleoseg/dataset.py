"""Dataset splitting, augmentation and synthetic sample generation.

On-disk layout of a dataset directory::

    images/<id>.png   RGB patches
    masks/<id>.png    binary ground-truth masks, same stem
    split.json        {"seed": ..., "ratios": [...], "train": [...],
                       "val": [...], "test": [...]}

Randomness is always explicit: callers pass either a seed or a
``numpy.random.Generator``, and per-sample generators are derived from
(seed, index) so batch results do not depend on scheduling order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi

from .errors import ConfigError, MissingInputError
from .fileio import read_json, read_mask, read_rgb, write_json_atomic, write_png
from .imaging import as_mask, as_rgb, gaussian_blur, quantize

__all__ = [
    "IMAGENET_MEANS",
    "IMAGENET_STDS",
    "DEFAULT_RATIOS",
    "DatasetSplit",
    "AugmentConfig",
    "split_ids",
    "augment",
    "normalize",
    "synth_sample",
    "sample_rng",
    "write_sample",
    "list_ids",
    "load_image",
    "load_mask",
    "load_split",
    "save_split",
]

IMAGENET_MEANS = (0.485, 0.456, 0.406)
IMAGENET_STDS = (0.229, 0.224, 0.225)
DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    val: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float] = DEFAULT_RATIOS


def _round_half_up(value: Decimal) -> int:
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def split_ids(ids, seed: int, ratios=DEFAULT_RATIOS) -> DatasetSplit:
    """Deterministic train/val/test split.

    Ids are sorted, shuffled with numpy's PCG64 generator seeded by
    ``seed``, then cut as round-half-up(r_train*n) / round-half-up(r_val*n)
    with the remainder as test. Counts use exact decimal arithmetic, so
    4753 ids split as 3327/713/713 under the default 70/15/15 ratios.
    """
    ids = [str(i) for i in ids]
    if not ids:
        raise ValueError("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate ids in input")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios}")

    n = len(ids)
    n_train = _round_half_up(Decimal(str(ratios[0])) * n)
    n_val = _round_half_up(Decimal(str(ratios[1])) * n)
    n_test = n - n_train - n_val
    if n_test < 0:
        raise ConfigError(f"ratios {ratios} leave a negative test split for n={n}")

    ordered = sorted(ids)
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [ordered[i] for i in order]
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
        seed=int(seed),
        ratios=ratios,
    )


def save_split(split: DatasetSplit, path: str | Path) -> None:
    write_json_atomic(
        path,
        {
            "seed": split.seed,
            "ratios": list(split.ratios),
            "train": list(split.train),
            "val": list(split.val),
            "test": list(split.test),
        },
    )


def load_split(path: str | Path) -> DatasetSplit:
    doc = read_json(path)
    try:
        return DatasetSplit(
            train=tuple(doc["train"]),
            val=tuple(doc["val"]),
            test=tuple(doc["test"]),
            seed=int(doc["seed"]),
            ratios=tuple(doc["ratios"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid split file {path}: {exc}") from exc


@dataclass(frozen=True)
class AugmentConfig:
    """Training-time augmentation parameters.

    Geometric transforms (flip, rotation, zoom) hit image and mask with
    the same parameters; lighting jitter touches the image only.
    """

    flip_p: float = 0.5
    rotate_deg: float = 10.0
    zoom_max: float = 1.1
    affine_p: float = 0.2
    lighting_p: float = 0.75
    lighting_delta: float = 0.2
    means: tuple[float, float, float] = IMAGENET_MEANS
    stds: tuple[float, float, float] = IMAGENET_STDS

    def __post_init__(self) -> None:
        for name in ("flip_p", "affine_p", "lighting_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        if self.zoom_max < 1.0:
            raise ConfigError(f"zoom_max must be >= 1, got {self.zoom_max}")


def _affine_resample(img: np.ndarray, mask: np.ndarray, angle_deg: float, zoom: float):
    """Rotate/zoom both arrays about the center, output size unchanged.

    Bilinear for the image, nearest for the mask; out-of-frame samples
    replicate the edge.
    """
    h, w = mask.shape
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # Maps output (row, col) to input coordinates: inverse rotation, then unzoom.
    matrix = np.array([[cos_t, sin_t], [-sin_t, cos_t]], dtype=np.float64) / zoom
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    offset = center - matrix @ center

    channels = []
    for c in range(img.shape[2]):
        plane = ndi.affine_transform(
            img[..., c].astype(np.float64), matrix, offset=offset, order=1, mode="nearest"
        )
        channels.append(quantize(plane))
    new_img = np.stack(channels, axis=-1)
    new_mask = ndi.affine_transform(mask, matrix, offset=offset, order=0, mode="nearest")
    return new_img, new_mask


def augment(img: np.ndarray, mask: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator):
    """Apply one random augmentation draw to an (image, mask) pair."""
    img = as_rgb(img)
    mask = as_mask(mask)
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} dimensions differ")

    if rng.random() < cfg.flip_p:
        img = img[:, ::-1].copy()
        mask = mask[:, ::-1].copy()

    angle = 0.0
    zoom = 1.0
    if rng.random() < cfg.affine_p:
        angle = float(rng.uniform(-cfg.rotate_deg, cfg.rotate_deg))
    if rng.random() < cfg.affine_p:
        zoom = float(rng.uniform(1.0, cfg.zoom_max))
    if angle != 0.0 or zoom != 1.0:
        img, mask = _affine_resample(img, mask, angle, zoom)

    if rng.random() < cfg.lighting_p:
        contrast = float(rng.uniform(1.0 - cfg.lighting_delta, 1.0 + cfg.lighting_delta))
        brightness = float(rng.uniform(-cfg.lighting_delta, cfg.lighting_delta))
        adjusted = (img.astype(np.float64) - 128.0) * contrast + 128.0 + brightness * 255.0
        img = quantize(adjusted)

    return img, mask


def normalize(img: np.ndarray, means=IMAGENET_MEANS, stds=IMAGENET_STDS) -> np.ndarray:
    """Per-channel (value/255 - mean) / std, as float64 planes."""
    img = as_rgb(img)
    means = np.asarray(means, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if means.shape != (3,) or stds.shape != (3,):
        raise ConfigError("normalization needs 3 means and 3 stds")
    if (stds <= 0).any():
        raise ConfigError(f"normalization stds must be positive, got {stds.tolist()}")
    return (img.astype(np.float64) / 255.0 - means) / stds


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for sample ``index``, independent of scheduling order."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(index))))


# Synthetic sample palette: pale pink background, dark magenta nuclei.
_BG_COLOR = np.array([246.0, 222.0, 232.0])
_BG_NOISE_SIGMA = 3.0
_NUCLEUS_COLOR = np.array([150.0, 45.0, 110.0])
_NUCLEUS_JITTER = 10.0
_BLUR_FRACTION = 0.3


def synth_sample(
    rng: np.random.Generator,
    width: int,
    height: int,
    nucleus_count_range: tuple[int, int] = (4, 12),
):
    """Generate one stained-slide-like image and its exact ground truth.

    Dark elliptical nuclei (random center, axes, rotation; some
    overlapping, some locally blurred) on a noisy pale background. The
    mask is the analytic union of the ellipses sampled at pixel centers,
    so it is exact by construction.
    """
    if width < 64 or height < 64:
        raise ValueError(f"synthetic samples need width/height >= 64, got {width}x{height}")
    lo, hi = nucleus_count_range
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid nucleus count range {nucleus_count_range}")

    noise = rng.normal(0.0, _BG_NOISE_SIGMA, size=(height, width, 3))
    img = quantize(_BG_COLOR[None, None, :] + noise)
    mask = np.zeros((height, width), dtype=np.uint8)

    count = int(rng.integers(lo, hi + 1)) if hi > 0 else 0
    min_dim = min(width, height)
    blur_boxes = []
    for _ in range(count):
        cx = rng.uniform(0.12 * width, 0.88 * width)
        cy = rng.uniform(0.12 * height, 0.88 * height)
        ax = rng.uniform(0.05, 0.11) * min_dim
        ay = rng.uniform(0.05, 0.11) * min_dim
        theta = rng.uniform(0.0, np.pi)
        color = quantize(_NUCLEUS_COLOR + rng.uniform(-_NUCLEUS_JITTER, _NUCLEUS_JITTER, 3))

        r = max(ax, ay)
        x0, x1 = max(0, int(cx - r - 2)), min(width, int(cx + r + 3))
        y0, y1 = max(0, int(cy - r - 2)), min(height, int(cy + r + 3))
        yy, xx = np.mgrid[y0:y1, x0:x1]
        px = xx + 0.5 - cx
        py = yy + 0.5 - cy
        u = (px * np.cos(theta) + py * np.sin(theta)) / ax
        v = (-px * np.sin(theta) + py * np.cos(theta)) / ay
        inside = u * u + v * v <= 1.0
        img[y0:y1, x0:x1][inside] = color
        mask[y0:y1, x0:x1][inside] = 255
        if rng.random() < _BLUR_FRACTION:
            blur_boxes.append((x0, x1, y0, y1))

    for x0, x1, y0, y1 in blur_boxes:
        bx0, bx1 = max(0, x0 - 4), min(width, x1 + 4)
        by0, by1 = max(0, y0 - 4), min(height, y1 + 4)
        for c in range(3):
            img[by0:by1, bx0:bx1, c] = gaussian_blur(img[by0:by1, bx0:bx1, c])
    return img, mask


def write_sample(dataset_dir: str | Path, stem: str, img: np.ndarray, mask: np.ndarray) -> None:
    dataset_dir = Path(dataset_dir)
    write_png(dataset_dir / "images" / f"{stem}.png", img)
    write_png(dataset_dir / "masks" / f"{stem}.png", mask)


def list_ids(dataset_dir: str | Path) -> list[str]:
    images = Path(dataset_dir) / "images"
    if not images.is_dir():
        raise MissingInputError(f"dataset has no images directory: {images}")
    return sorted(p.stem for p in images.glob("*.png"))


def load_image(dataset_dir: str | Path, stem: str) -> np.ndarray:
    return read_rgb(Path(dataset_dir) / "images" / f"{stem}.png")


def load_mask(dataset_dir: str | Path, stem: str) -> np.ndarray:
    return read_mask(Path(dataset_dir) / "masks" / f"{stem}.png")
