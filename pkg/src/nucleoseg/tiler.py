"""Split large slide rasters into fixed-size patches.

The grid is anchored at the top-left corner. Partial tiles at the
right/bottom borders are either discarded (default, fixed-size training
sets) or completed by replicating edge pixels (full coverage at
inference time).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .imaging import as_rgb

__all__ = ["TilePolicy", "TileGrid", "plan_tiles", "extract_tiles", "tile_name"]

DEFAULT_TILE_WIDTH = 1600
DEFAULT_TILE_HEIGHT = 1200


class TilePolicy(str, Enum):
    DISCARD_PARTIAL = "discard"
    PAD_REPLICATE = "pad"


@dataclass(frozen=True)
class TileGrid:
    src_width: int
    src_height: int
    tile_width: int
    tile_height: int
    rows: int
    cols: int
    policy: TilePolicy


def plan_tiles(
    src_width: int,
    src_height: int,
    tile_width: int = DEFAULT_TILE_WIDTH,
    tile_height: int = DEFAULT_TILE_HEIGHT,
    policy: TilePolicy = TilePolicy.DISCARD_PARTIAL,
) -> TileGrid:
    """Plan a non-overlapping axis-aligned tile grid anchored at (0, 0)."""
    if tile_width < 1 or tile_height < 1:
        raise ValueError(f"tile dimensions must be >= 1, got {tile_width}x{tile_height}")
    if src_width < 1 or src_height < 1:
        raise ValueError(f"source dimensions must be >= 1, got {src_width}x{src_height}")
    policy = TilePolicy(policy)
    if policy is TilePolicy.DISCARD_PARTIAL:
        rows = src_height // tile_height
        cols = src_width // tile_width
    else:
        rows = -(-src_height // tile_height)
        cols = -(-src_width // tile_width)
    return TileGrid(src_width, src_height, tile_width, tile_height, rows, cols, policy)


def extract_tiles(img: np.ndarray, grid: TileGrid) -> list[tuple[int, int, np.ndarray]]:
    """Cut the planned tiles out of ``img`` in row-major order.

    With the pad policy the source is extended by edge replication so
    boundary tiles are full-size. Returned tiles are copies.
    """
    img = as_rgb(img)
    h, w = img.shape[:2]
    if (w, h) != (grid.src_width, grid.src_height):
        raise ValueError(
            f"image is {w}x{h} but grid was planned for {grid.src_width}x{grid.src_height}"
        )
    th, tw = grid.tile_height, grid.tile_width
    need_h = grid.rows * th
    need_w = grid.cols * tw
    if need_h > h or need_w > w:
        img = np.pad(img, ((0, max(0, need_h - h)), (0, max(0, need_w - w)), (0, 0)), mode="edge")
    tiles = []
    for row in range(grid.rows):
        for col in range(grid.cols):
            tile = img[row * th : (row + 1) * th, col * tw : (col + 1) * tw].copy()
            tiles.append((row, col, tile))
    return tiles


def tile_name(stem: str, row: int, col: int) -> str:
    return f"{stem}_row{row}_col{col}"
