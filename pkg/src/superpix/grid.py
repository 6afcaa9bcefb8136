"""Integer grid geometry: seed intervals, superpixel windows, candidate sets."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class GridGeometry:
    """Seed grid over a W x H image.

    Superpixel k sits at grid cell (k % cols, k // cols); cells are
    interval_x by interval_y pixels, with the last row/column absorbing
    any remainder strip.
    """

    width: int
    height: int
    interval_x: int
    interval_y: int
    cols: int
    rows: int
    num_superpixels: int

    def __post_init__(self):
        if self.interval_x < 1 or self.interval_y < 1:
            raise ValueError("intervals must be >= 1")
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid must have at least one cell per axis")
        if self.cols != self.width // self.interval_x:
            raise ValueError("cols inconsistent with width // interval_x")
        if self.rows != self.height // self.interval_y:
            raise ValueError("rows inconsistent with height // interval_y")
        if self.num_superpixels != self.cols * self.rows:
            raise ValueError("num_superpixels != cols * rows")


@dataclass(frozen=True)
class Window:
    """Half-open pixel range [x_begin, x_end) x [y_begin, y_end)."""

    x_begin: int
    x_end: int
    y_begin: int
    y_end: int

    @property
    def area(self) -> int:
        return (self.x_end - self.x_begin) * (self.y_end - self.y_begin)

    def contains(self, x: int, y: int) -> bool:
        return self.x_begin <= x < self.x_end and self.y_begin <= y < self.y_end


def geometry_from_intervals(width: int, height: int, interval_x: int,
                            interval_y: int) -> GridGeometry:
    """Build a grid directly from the seed intervals."""
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")
    if interval_x < 1 or interval_y < 1:
        raise ValueError("intervals must be >= 1")
    cols = width // interval_x
    rows = height // interval_y
    if cols < 1 or rows < 1:
        raise ValueError("interval larger than the image along some axis")
    return GridGeometry(width, height, interval_x, interval_y,
                        cols, rows, cols * rows)


def intervals_from_count(width: int, height: int,
                         num_requested: int) -> GridGeometry:
    """Derive square seed intervals from a requested superpixel count.

    The actual count cols*rows generally differs from the request because
    the interval is floored to an integer.
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be positive")
    if num_requested < 1:
        raise ValueError("requested superpixel count must be >= 1")
    v = math.floor(math.sqrt(width * height / num_requested))
    if v < 1:
        raise ValueError(
            f"requested {num_requested} superpixels exceeds pixel count "
            f"{width * height}")
    return geometry_from_intervals(width, height, v, v)


def window_of(geom: GridGeometry, k: int) -> Window:
    """Pixel window from which superpixel k may draw members.

    Spans the 3x3 block of grid cells centered on k's cell, clipped to the
    image; for the last row/column the clip extends over the remainder
    strip so every pixel is covered.
    """
    if not 0 <= k < geom.num_superpixels:
        raise ValueError(f"superpixel index {k} out of range")
    kx = k % geom.cols
    ky = k // geom.cols
    return Window(
        x_begin=max(0, geom.interval_x * (kx - 1)),
        x_end=min(geom.width, geom.interval_x * (kx + 2)),
        y_begin=max(0, geom.interval_y * (ky - 1)),
        y_end=min(geom.height, geom.interval_y * (ky + 2)),
    )


def candidates_of(geom: GridGeometry, x: int, y: int) -> list[int]:
    """Superpixels whose window contains pixel (x, y), ascending.

    Between 1 and 9 candidates; computed arithmetically from the pixel's
    grid cell and filtered by the window membership predicate.
    """
    if not (0 <= x < geom.width and 0 <= y < geom.height):
        raise ValueError(f"pixel ({x}, {y}) out of range")
    vx, vy = geom.interval_x, geom.interval_y
    kx0 = min(x // vx, geom.cols - 1)
    ky0 = min(y // vy, geom.rows - 1)
    out = []
    for dy in (-1, 0, 1):
        ky = ky0 + dy
        if not 0 <= ky < geom.rows:
            continue
        if not max(0, vy * (ky - 1)) <= y < min(geom.height, vy * (ky + 2)):
            continue
        for dx in (-1, 0, 1):
            kx = kx0 + dx
            if not 0 <= kx < geom.cols:
                continue
            if max(0, vx * (kx - 1)) <= x < min(geom.width, vx * (kx + 2)):
                out.append(ky * geom.cols + kx)
    return out
