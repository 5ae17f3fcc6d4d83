"""Parse polygon annotation documents and rasterize them to masks.

The document format is a minimal labelme-style subset::

    {"imageWidth": int, "imageHeight": int,
     "shapes": [{"label": str, "shape_type": "polygon",
                 "points": [[x, y], ...]}]}

Rasterization uses the even-odd rule sampled at pixel centers
(x + 0.5, y + 0.5); overlapping polygons union into a single
foreground class.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AnnotationError

__all__ = ["Polygon", "AnnotationSet", "parse_annotations", "rasterize"]


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.vertices) < 3:
            raise ValueError(f"polygon needs at least 3 vertices, got {len(self.vertices)}")


@dataclass
class AnnotationSet:
    width: int
    height: int
    shapes: list[tuple[str, Polygon]] = field(default_factory=list)


def parse_annotations(document: bytes | str) -> AnnotationSet:
    """Parse an annotation document, rejecting anything degenerate.

    Malformed JSON reports the offending line/column; non-polygon shapes
    and shapes with fewer than 3 points report the shape index.
    """
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise AnnotationError(f"annotation document is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise AnnotationError(
            f"malformed annotation document: {exc.msg} at line {exc.lineno} column {exc.colno}"
        ) from exc
    if not isinstance(doc, dict):
        raise AnnotationError("annotation document must be a JSON object")

    try:
        width = int(doc["imageWidth"])
        height = int(doc["imageHeight"])
    except (KeyError, TypeError, ValueError) as exc:
        raise AnnotationError("annotation document needs integer imageWidth/imageHeight") from exc
    if width < 1 or height < 1:
        raise AnnotationError(f"invalid annotated image size {width}x{height}")

    raw_shapes = doc.get("shapes", [])
    if not isinstance(raw_shapes, list):
        raise AnnotationError("shapes must be a list")

    shapes: list[tuple[str, Polygon]] = []
    for index, shape in enumerate(raw_shapes):
        if not isinstance(shape, dict):
            raise AnnotationError(f"shape at index {index} is not an object")
        shape_type = shape.get("shape_type", "polygon")
        if shape_type != "polygon":
            raise AnnotationError(f"unsupported shape type {shape_type!r} at index {index}")
        points = shape.get("points")
        if not isinstance(points, list):
            raise AnnotationError(f"shape at index {index} has no point list")
        if len(points) < 3:
            raise AnnotationError(f"degenerate polygon at index {index}: {len(points)} points")
        try:
            vertices = tuple((float(p[0]), float(p[1])) for p in points)
        except (TypeError, ValueError, IndexError) as exc:
            raise AnnotationError(f"non-numeric point in shape at index {index}") from exc
        label = str(shape.get("label", ""))
        shapes.append((label, Polygon(vertices)))
    return AnnotationSet(width=width, height=height, shapes=shapes)


def rasterize(ann: AnnotationSet) -> np.ndarray:
    """Rasterize all polygons into one binary mask (union of shapes).

    A pixel (x, y) is foreground iff its center (x+0.5, y+0.5) lies
    inside some polygon under the even-odd rule. Vertices outside the
    image rectangle are clamped to it before filling.
    """
    mask = np.zeros((ann.height, ann.width), dtype=np.uint8)
    for _label, polygon in ann.shapes:
        _fill_even_odd(mask, polygon, ann.width, ann.height)
    return mask


def _fill_even_odd(mask: np.ndarray, polygon: Polygon, width: int, height: int) -> None:
    verts = np.asarray(polygon.vertices, dtype=np.float64)
    xs = np.clip(verts[:, 0], 0.0, float(width))
    ys = np.clip(verts[:, 1], 0.0, float(height))
    x1, y1 = xs, ys
    x2, y2 = np.roll(xs, -1), np.roll(ys, -1)

    row_lo = max(0, int(math.floor(ys.min())))
    row_hi = min(height - 1, int(math.ceil(ys.max())))
    for row in range(row_lo, row_hi + 1):
        cy = row + 0.5
        crossing = (y1 <= cy) != (y2 <= cy)
        if not crossing.any():
            continue
        t = (cy - y1[crossing]) / (y2[crossing] - y1[crossing])
        cross_x = np.sort(x1[crossing] + t * (x2[crossing] - x1[crossing]))
        # Even-odd: pixel centers between consecutive crossing pairs are inside.
        for xa, xb in cross_x.reshape(-1, 2):
            col_lo = max(0, int(math.ceil(xa - 0.5)))
            col_hi = min(width - 1, int(math.ceil(xb - 0.5)) - 1)
            if col_hi >= col_lo:
                mask[row, col_lo : col_hi + 1] = 255
