"""Pixel-grid types and low-level image operators.

Images are plain numpy arrays of dtype uint8:

* RGB raster: shape ``(H, W, 3)``
* grayscale / probability map: shape ``(H, W)``, a probability map reads
  as ``value / 255``
* binary mask: shape ``(H, W)`` with samples restricted to {0, 255}

All operators are pure functions. Borders are handled by edge
replication throughout, and every float-to-uint8 conversion rounds
half up so results are identical across platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

__all__ = [
    "StructuringElement",
    "as_rgb",
    "as_gray",
    "as_mask",
    "to_grayscale",
    "gaussian_blur",
    "gaussian_kernel_1d",
    "default_sigma",
    "threshold_binary",
    "make_structuring_element",
    "erode",
    "dilate",
    "opening",
    "canny_edges",
    "quantize",
]


def quantize(values: np.ndarray) -> np.ndarray:
    """Round half up, clamp to [0, 255] and convert to uint8."""
    return np.clip(np.floor(np.asarray(values, dtype=np.float64) + 0.5), 0, 255).astype(np.uint8)


def as_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 RGB array of shape (H, W, 3), got {img.dtype} {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return img


def as_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 array of shape (H, W), got {img.dtype} {img.shape}")
    return img


def as_mask(mask: np.ndarray) -> np.ndarray:
    mask = as_gray(mask)
    bad = (mask != 0) & (mask != 255)
    if bad.any():
        raise ValueError("binary mask contains values other than 0 and 255")
    return mask


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """RGB to 8-bit grayscale with ITU-R 601 luma weights."""
    img = as_rgb(img)
    planes = img.astype(np.float64)
    gray = 0.299 * planes[..., 0] + 0.587 * planes[..., 1] + 0.114 * planes[..., 2]
    return quantize(gray)


def default_sigma(kernel_size: int) -> float:
    """Size-to-sigma rule used when no sigma is given (1.1 at k=5)."""
    return 0.3 * ((kernel_size - 1) / 2 - 1) + 0.8


def gaussian_kernel_1d(kernel_size: int, sigma: float) -> np.ndarray:
    """Sampled 1-D Gaussian, normalized to sum exactly 1."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {kernel_size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = kernel_size // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img: np.ndarray, kernel_size: int = 5, sigma: float | None = None) -> np.ndarray:
    """Separable Gaussian blur with replicated borders.

    The convolution runs in float64 and the result is rounded half up
    per pixel, so a constant image is reproduced exactly.
    """
    img = as_gray(img)
    if sigma is None:
        sigma = default_sigma(kernel_size)
    kernel = gaussian_kernel_1d(kernel_size, sigma)
    blurred = ndi.correlate1d(img.astype(np.float64), kernel, axis=0, mode="nearest")
    blurred = ndi.correlate1d(blurred, kernel, axis=1, mode="nearest")
    return quantize(blurred)


def threshold_binary(img: np.ndarray, threshold: int) -> np.ndarray:
    """Binarize: strictly greater than ``threshold`` becomes foreground 255."""
    img = as_gray(img)
    return np.where(img > threshold, 255, 0).astype(np.uint8)


@dataclass(frozen=True)
class StructuringElement:
    """Boolean neighborhood footprint for morphology.

    ``footprint`` has odd dimensions, contains its center cell, and is
    tagged with the shape it was built from.
    """

    footprint: np.ndarray
    shape: str

    def __post_init__(self) -> None:
        fp = np.asarray(self.footprint, dtype=bool)
        h, w = fp.shape
        if h % 2 == 0 or w % 2 == 0:
            raise ValueError(f"structuring element dimensions must be odd, got {w}x{h}")
        if not fp[h // 2, w // 2]:
            raise ValueError("structuring element must contain its center cell")
        object.__setattr__(self, "footprint", fp)

    @property
    def width(self) -> int:
        return self.footprint.shape[1]

    @property
    def height(self) -> int:
        return self.footprint.shape[0]


def make_structuring_element(shape: str, width: int, height: int) -> StructuringElement:
    """Build a square or elliptical footprint of odd dimensions.

    The elliptical inclusion rule is normative: cell (i, j) is set iff
    ((j-cx)/rx)^2 + ((i-cy)/ry)^2 <= 1 with cx=(w-1)/2, cy=(h-1)/2,
    rx=max(cx, 0.5), ry=max(cy, 0.5). A 3x3 ellipse is therefore the
    5-cell cross, not the full square.
    """
    if width < 1 or height < 1 or width % 2 == 0 or height % 2 == 0:
        raise ValueError(f"structuring element dimensions must be odd and >= 1, got {width}x{height}")
    if shape == "square":
        footprint = np.ones((height, width), dtype=bool)
    elif shape == "ellipse":
        cx = (width - 1) / 2.0
        cy = (height - 1) / 2.0
        rx = max(cx, 0.5)
        ry = max(cy, 0.5)
        ii, jj = np.mgrid[0:height, 0:width]
        footprint = ((jj - cx) / rx) ** 2 + ((ii - cy) / ry) ** 2 <= 1.0
    else:
        raise ValueError(f"unknown structuring element shape {shape!r}")
    return StructuringElement(footprint=footprint, shape=shape)


def _window_reduce(mask: np.ndarray, se: StructuringElement, reducer) -> np.ndarray:
    """Sliding min/max over the footprint cells with replicated edges."""
    h, w = mask.shape
    pad_y = se.height // 2
    pad_x = se.width // 2
    padded = np.pad(mask, ((pad_y, pad_y), (pad_x, pad_x)), mode="edge")
    out = None
    for di, dj in zip(*np.nonzero(se.footprint)):
        window = padded[di : di + h, dj : dj + w]
        out = window.copy() if out is None else reducer(out, window, out=out)
    return out


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """255 where every footprint cell covers 255."""
    return _window_reduce(as_mask(mask), se, np.minimum)


def dilate(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """255 where any footprint cell covers 255."""
    return _window_reduce(as_mask(mask), se, np.maximum)


def opening(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Erosion followed by dilation with the same element."""
    return dilate(erode(mask, se), se)


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64)


def canny_edges(mask: np.ndarray, low: float = 50.0, high: float = 150.0) -> np.ndarray:
    """Canny edge detection specialized for near-binary inputs.

    Gaussian smoothing (k=5, sigma=1.1), Sobel gradients, non-maximum
    suppression with 4-direction quantization, then hysteresis: weak
    pixels survive only in 8-connected components that contain a strong
    pixel. Thresholds apply to the L2 gradient magnitude.
    """
    mask = as_gray(mask)
    if low > high:
        raise ValueError(f"low threshold {low} must not exceed high threshold {high}")
    smoothed = gaussian_blur(mask, kernel_size=5, sigma=1.1).astype(np.float64)
    gx = ndi.correlate(smoothed, _SOBEL_X, mode="nearest")
    gy = ndi.correlate(smoothed, _SOBEL_Y, mode="nearest")
    magnitude = np.hypot(gx, gy)

    # Quantize gradient direction into 4 bins (degrees mod 180).
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    bins = np.zeros(angle.shape, dtype=np.uint8)  # 0: E-W
    bins[(angle >= 22.5) & (angle < 67.5)] = 1  # NE-SW diagonal
    bins[(angle >= 67.5) & (angle < 112.5)] = 2  # N-S
    bins[(angle >= 112.5) & (angle < 157.5)] = 3  # NW-SE diagonal

    padded = np.pad(magnitude, 1, mode="constant")
    h, w = magnitude.shape
    offsets = {
        0: ((0, 1), (0, -1)),
        1: ((-1, 1), (1, -1)),
        2: ((1, 0), (-1, 0)),
        3: ((-1, -1), (1, 1)),
    }
    keep = np.zeros((h, w), dtype=bool)
    for b, ((di1, dj1), (di2, dj2)) in offsets.items():
        n1 = padded[1 + di1 : 1 + di1 + h, 1 + dj1 : 1 + dj1 + w]
        n2 = padded[1 + di2 : 1 + di2 + h, 1 + dj2 : 1 + dj2 + w]
        sel = bins == b
        # Strict on one side, non-strict on the other: plateaus keep one pixel.
        keep |= sel & (magnitude > n1) & (magnitude >= n2)
    keep &= magnitude > 0

    nms = np.where(keep, magnitude, 0.0)
    strong = nms >= high
    candidate = nms >= low
    if not strong.any():
        return np.zeros((h, w), dtype=np.uint8)
    labels, count = ndi.label(candidate, structure=np.ones((3, 3), dtype=int))
    keep_labels = np.unique(labels[strong])
    edge = np.isin(labels, keep_labels) & candidate
    return np.where(edge, 255, 0).astype(np.uint8)
