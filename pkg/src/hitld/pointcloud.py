"""Colored point clouds and the crop + farthest-point-sampling front end.

Clouds are stored as parallel (N, 3) float arrays of positions (meters) and
colors (RGB in [0, 1]). Point order is preserved by cropping and is the only
thing, besides the start index, that determines the FPS selection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ColoredPoint:
    position: np.ndarray
    color: np.ndarray


@dataclass(frozen=True)
class ColoredPointCloud:
    """Ordered colored point cloud: positions (N, 3) m, colors (N, 3) in [0, 1]."""

    positions: np.ndarray
    colors: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("point positions must be finite")
        col = self.colors
        if col is None:
            col = np.zeros_like(pos)
        col = np.asarray(col, dtype=float).reshape(-1, 3)
        if col.shape != pos.shape:
            raise ValueError(f"colors shape {col.shape} does not match positions {pos.shape}")
        if col.size and (col.min() < 0.0 or col.max() > 1.0):
            raise ValueError("color components must lie in [0, 1]")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def point(self, i: int) -> ColoredPoint:
        return ColoredPoint(self.positions[i].copy(), self.colors[i].copy())

    @classmethod
    def empty(cls) -> "ColoredPointCloud":
        return cls(np.zeros((0, 3)), np.zeros((0, 3)))


@dataclass(frozen=True)
class CropBox:
    """Axis-aligned closed box, min_corner <= max_corner componentwise."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.min_corner, dtype=float).reshape(3)
        hi = np.asarray(self.max_corner, dtype=float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("crop box corners must be finite")
        if np.any(lo > hi):
            raise ValueError(f"inverted crop box: min {lo} > max {hi}")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min_corner + self.max_corner)

    @property
    def half_extent(self) -> np.ndarray:
        return 0.5 * (self.max_corner - self.min_corner)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the closed box."""
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((p >= self.min_corner) & (p <= self.max_corner), axis=1)


def crop(cloud: ColoredPointCloud, box: CropBox) -> ColoredPointCloud:
    """Keep exactly the points inside the closed box, preserving order."""
    mask = box.contains(cloud.positions)
    return ColoredPointCloud(cloud.positions[mask], cloud.colors[mask])


def farthest_point_sample_indices(positions: np.ndarray, n: int, start_index: int = 0) -> np.ndarray:
    """Greedy FPS on positions; returns the selected indices in pick order.

    Distance is squared Euclidean on positions only. Each step picks the point
    maximizing the min-distance to the selected set; ties break to the lowest
    index. Deterministic for a given (positions, n, start_index).
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    count = pos.shape[0]
    if count == 0:
        raise ValueError("cannot sample from an empty cloud")
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    if not (0 <= start_index < count):
        raise ValueError(f"start_index {start_index} out of range for {count} points")
    if count <= n:
        return np.arange(count)

    selected = np.empty(n, dtype=np.intp)
    selected[0] = start_index
    diff = pos - pos[start_index]
    min_d2 = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, n):
        # argmax returns the lowest index among ties
        idx = int(np.argmax(min_d2))
        selected[i] = idx
        diff = pos - pos[idx]
        d2 = np.einsum("ij,ij->i", diff, diff)
        np.minimum(min_d2, d2, out=min_d2)
    return selected


def farthest_point_sample(cloud: ColoredPointCloud, n: int, start_index: int = 0) -> ColoredPointCloud:
    """Downsample to n points with greedy farthest point sampling.

    Clouds already at or below the budget pass through whole (original order).
    """
    idx = farthest_point_sample_indices(cloud.positions, n, start_index)
    return ColoredPointCloud(cloud.positions[idx], cloud.colors[idx])
