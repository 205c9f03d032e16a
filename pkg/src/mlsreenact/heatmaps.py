"""Embedding-to-heatmap-to-point conversion and the spreading loss.

Heatmaps live on a fixed 32x32 grid over the unit square. A cell (i, j)
has center ((j + 0.5)/32, (i + 0.5)/32), so a uniform map reduces to the
exact image center and every extracted point is a convex combination of
cell centers inside [1/64, 1 - 1/64]^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError
from .mls import Point2

GRID = 32
EMBED_DIM = GRID * GRID

# cell-center coordinate for index 0..31 along either axis
_CENTERS = (np.arange(GRID, dtype=np.float64) + 0.5) / GRID
_CENTERS.setflags(write=False)


@dataclass(frozen=True)
class HeatmapStack:
    """N channels of 32x32 nonnegative maps, each summing to 1."""

    maps: np.ndarray

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.float64)
        if maps.ndim != 3 or maps.shape[1:] != (GRID, GRID):
            raise ShapeError(f"heatmap stack must be (N, {GRID}, {GRID}), got {maps.shape}")
        if not np.all(np.isfinite(maps)):
            raise InvalidInputError("heatmap stack contains non-finite entries")
        if maps.min() < 0:
            raise InvalidInputError("heatmap entries must be nonnegative")
        sums = maps.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise InvalidInputError("each heatmap channel must sum to 1 within 1e-6")
        maps.setflags(write=False)
        object.__setattr__(self, "maps", maps)

    @property
    def n(self) -> int:
        return self.maps.shape[0]


@dataclass(frozen=True)
class SpreadConfig:
    """Threshold below which pairwise point distances are penalized."""

    tau: float = 0.1

    def __post_init__(self):
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise InvalidInputError(f"tau must be positive and finite, got {self.tau}")


def soft_argmax(heatmap) -> Point2:
    """Probability-weighted mean of cell centers of one normalized map."""
    m = np.asarray(heatmap, dtype=np.float64)
    if m.shape != (GRID, GRID):
        raise ShapeError(f"heatmap must be {GRID}x{GRID}, got {m.shape}")
    if not np.all(np.isfinite(m)) or m.min() < 0:
        raise InvalidInputError("heatmap entries must be finite and nonnegative")
    if abs(m.sum() - 1.0) > 1e-6:
        raise InvalidInputError("heatmap must sum to 1 within 1e-6")
    x = float(m.sum(axis=0) @ _CENTERS)
    y = float(m.sum(axis=1) @ _CENTERS)
    return Point2(x, y)


def _softmax_rows(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def embeddings_to_points(embedding) -> tuple[list[Point2], HeatmapStack]:
    """Softmax each 1024-wide row into a 32x32 map and reduce to a point.

    Accepts a bare (N, 1024) array or any object exposing one as ``.values``.
    """
    values = np.asarray(getattr(embedding, "values", embedding), dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != EMBED_DIM:
        raise ShapeError(f"embedding must be (N, {EMBED_DIM}), got {values.shape}")
    if values.shape[0] < 1:
        raise ShapeError("embedding needs at least one row")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("embedding contains non-finite entries")
    maps = _softmax_rows(values).reshape(-1, GRID, GRID)
    stack = HeatmapStack(maps=maps)
    points = [soft_argmax(channel) for channel in stack.maps]
    return points, stack


def render_gaussian(p: Point2, sigma: float) -> np.ndarray:
    """Isotropic Gaussian at cell centers, normalized to sum 1."""
    if not (np.isfinite(sigma) and sigma > 0):
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    if not isinstance(p, Point2):
        p = Point2.from_array(np.asarray(p, dtype=np.float64))
    dx2 = (_CENTERS - p.x) ** 2
    dy2 = (_CENTERS - p.y) ** 2
    g = np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * sigma * sigma))
    total = g.sum()
    if total <= 0:
        raise InvalidInputError("gaussian mass underflowed to zero; point too far off-grid")
    return g / total


def spreading_loss(points, cfg: SpreadConfig) -> float:
    """Squared hinge on pairwise distances below cfg.tau, summed over i < j."""
    pts = [p.as_array() if isinstance(p, Point2) else np.asarray(p, dtype=np.float64) for p in points]
    if len(pts) < 2:
        return 0.0
    arr = np.stack(pts)
    diff = arr[:, None, :] - arr[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    iu = np.triu_indices(len(pts), k=1)
    hinge = np.maximum(0.0, cfg.tau - dist[iu])
    return float((hinge * hinge).sum())
