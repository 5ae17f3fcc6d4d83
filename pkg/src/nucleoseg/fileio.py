"""Atomic file writing and 8-bit PNG image I/O.

Every output of the toolkit goes through :func:`write_bytes_atomic`
(write to a temp file in the target directory, then rename), so a
crashed run never leaves a truncated artifact behind.
"""
from __future__ import annotations

import io
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import MissingInputError

__all__ = [
    "write_bytes_atomic",
    "write_text_atomic",
    "write_json_atomic",
    "read_json",
    "read_rgb",
    "read_gray",
    "read_mask",
    "write_png",
]


def write_bytes_atomic(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.{os.getpid()}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink(missing_ok=True)


def write_text_atomic(path: str | Path, text: str) -> None:
    write_bytes_atomic(path, text.encode("utf-8"))


def write_json_atomic(path: str | Path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _open_image(path: str | Path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"image not found: {path}")
    return Image.open(path)


def read_rgb(path: str | Path) -> np.ndarray:
    """Read any raster file Pillow understands as (H, W, 3) uint8."""
    with _open_image(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def read_gray(path: str | Path) -> np.ndarray:
    """Read a single-channel 8-bit image as (H, W) uint8."""
    with _open_image(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def read_mask(path: str | Path) -> np.ndarray:
    """Read a binary mask PNG; values other than {0, 255} are rejected."""
    data = read_gray(path)
    bad = (data != 0) & (data != 255)
    if bad.any():
        values = np.unique(data[bad])[:8]
        raise ValueError(f"mask file {path} contains non-binary values {values.tolist()}")
    return data


def write_png(path: str | Path, arr: np.ndarray) -> None:
    """Write a uint8 array as PNG: (H, W) -> grayscale, (H, W, 3) -> RGB."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim not in (2, 3):
        raise ValueError(f"expected uint8 image array, got {arr.dtype} with {arr.ndim} dims")
    mode = "L" if arr.ndim == 2 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    write_bytes_atomic(path, buf.getvalue())
