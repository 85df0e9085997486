"""Binary PGM (P5) rendering of 2D point sets."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .sets import PointSet

MARGIN = 0.05


def auto_bounds(data: np.ndarray) -> tuple[float, float, float, float]:
    """Tight bounding box with a 5% margin; zero extents widen to 1."""
    lo, hi = data.min(axis=0), data.max(axis=0)
    ext = hi - lo
    ext = np.where(ext > 0, ext, 1.0)
    mid = (lo + hi) / 2
    half = ext * (0.5 + MARGIN)
    return float(mid[0] - half[0]), float(mid[0] + half[0]), float(mid[1] - half[1]), float(mid[1] + half[1])


def pixel_coords(data: np.ndarray, width: int, height: int, bounds) -> tuple[np.ndarray, np.ndarray]:
    """Column and row of each point; row 0 is the top edge (largest y)."""
    xmin, xmax, ymin, ymax = bounds
    col = np.floor((data[:, 0] - xmin) / (xmax - xmin) * width).astype(np.int64)
    row = height - 1 - np.floor((data[:, 1] - ymin) / (ymax - ymin) * height).astype(np.int64)
    return np.clip(col, 0, width - 1), np.clip(row, 0, height - 1)


def render_pgm(
    attractor: PointSet,
    width: int,
    height: int,
    bounds: Optional[Sequence[float]] = None,
    comment: Optional[str] = None,
) -> bytes:
    """White raster with one black pixel per point.

    ``bounds`` is ``(xmin, xmax, ymin, ymax)``; ``None`` fits the points
    (see :func:`auto_bounds`). Output bytes depend only on the inputs.
    """
    space = attractor.space
    if not space.is_euclidean or space.domain.dim != 2:
        raise ValueError("PGM rendering needs points of a 2D Euclidean domain")
    if width < 1 or height < 1:
        raise ValueError("raster width and height must be >= 1")
    data = attractor.data
    if bounds is None:
        bounds = auto_bounds(data)
    xmin, xmax, ymin, ymax = (float(b) for b in bounds)
    if not (xmax > xmin and ymax > ymin):
        raise ValueError("bounds must have positive extent")
    col, row = pixel_coords(data, width, height, (xmin, xmax, ymin, ymax))
    img = np.full((height, width), 255, dtype=np.uint8)
    img[row, col] = 0
    header = b"P5\n"
    if comment:
        header += b"# " + comment.replace("\n", " ").encode("ascii", "replace") + b"\n"
    header += f"{width} {height}\n255\n".encode("ascii")
    return header + img.tobytes()
