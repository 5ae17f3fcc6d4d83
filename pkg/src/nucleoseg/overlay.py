"""Visualization overlays painted onto the original patch."""
from __future__ import annotations

import numpy as np

from .imaging import as_mask, as_rgb, canny_edges

__all__ = ["overlay_edges", "overlay_iou", "GREEN", "BLUE"]

GREEN = (0, 255, 0)
BLUE = (0, 0, 255)


def _check_pair(img: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    img = as_rgb(img)
    mask = as_mask(mask)
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} dimensions differ")
    return img, mask


def overlay_edges(img: np.ndarray, mask: np.ndarray, low: float = 50.0, high: float = 150.0) -> np.ndarray:
    """Paint the mask's Canny edges onto a copy of the image in green."""
    img, mask = _check_pair(img, mask)
    edges = canny_edges(mask, low, high)
    out = img.copy()
    out[edges == 255] = GREEN
    return out


def overlay_iou(img: np.ndarray, target: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """Green where target and prediction agree, blue on the disagreement.

    Green marks the intersection, blue the union minus the
    intersection; everything else is left untouched.
    """
    img, target = _check_pair(img, target)
    _, pred = _check_pair(img, pred)
    t = target == 255
    p = pred == 255
    out = img.copy()
    out[t & p] = GREEN
    out[(t | p) & ~(t & p)] = BLUE
    return out
