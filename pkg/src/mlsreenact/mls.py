"""Closed-form moving-least-squares machinery.

Every query point x gets its own distance-weighted least-squares fit of a
2x2 linear map M between the driving and source point sets; the motion at x
is then f(x) = (x - kd*) M + ks* with kd*/ks* the weighted centroids.

Coordinates are normalized to [0,1] x [0,1], origin top-left, x rightward,
y downward. Points are row vectors, so M multiplies from the right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateConfigurationError,
    InvalidInputError,
)

MODES = ("affine", "similarity", "external")

# Relative floor on det(A)/trace(A)^2 below which the weighted 2x2 normal
# matrix is treated as rank-deficient. Exactly collinear configurations land
# around machine epsilon (~1e-16) after cancellation, well below this.
_RANK_RTOL = 1e-12


@dataclass(frozen=True)
class Point2:
    """A 2D point in normalized image coordinates (x right, y down)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f"point components must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    @classmethod
    def from_array(cls, a) -> "Point2":
        a = np.asarray(a, dtype=np.float64).reshape(2)
        return cls(float(a[0]), float(a[1]))


PointsLike = Union[np.ndarray, Sequence]


def as_points_array(points: PointsLike, name: str = "points") -> np.ndarray:
    """Coerce a sequence of Point2 / pairs / an (N,2) array to float64 (N,2)."""
    if isinstance(points, np.ndarray):
        arr = points.astype(np.float64, copy=True)
    else:
        rows = [p.as_array() if isinstance(p, Point2) else np.asarray(p, dtype=np.float64) for p in points]
        arr = np.array(rows, dtype=np.float64) if rows else np.empty((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"{name} must have shape (N, 2), got {arr.shape}")
    if arr.shape[0] == 0:
        raise InvalidInputError(f"{name} must contain at least one point")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite coordinates")
    return arr


@dataclass(frozen=True)
class PairedPointSet:
    """N corresponding feature points on the source and driving images."""

    source: np.ndarray
    driving: np.ndarray

    def __post_init__(self):
        src = as_points_array(self.source, "source")
        drv = as_points_array(self.driving, "driving")
        if src.shape[0] != drv.shape[0]:
            raise InvalidInputError(
                f"source and driving must have the same length, got {src.shape[0]} vs {drv.shape[0]}"
            )
        src.flags.writeable = False
        drv.flags.writeable = False
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "driving", drv)

    @property
    def n(self) -> int:
        return int(self.source.shape[0])

    def source_points(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.source]

    def driving_points(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.driving]


@dataclass(frozen=True)
class MlsConfig:
    """Weight exponent, clamp floor and transformation class for the solve."""

    alpha: float = 1.0
    eps: float = 1e-8
    mode: str = "affine"

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidInputError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (self.eps > 0.0 and math.isfinite(self.eps)):
            raise InvalidInputError(f"eps must be positive and finite, got {self.eps}")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class WeightVector:
    """Per-point weights w_n evaluated at one query point."""

    w: np.ndarray
    alpha: float
    eps: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] == 0:
            raise InvalidInputError(f"weights must be a non-empty 1D array, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise InvalidInputError("all weights must be positive and finite")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class TransformMatrix:
    """2x2 linear transformation, applied to row vectors from the right."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (2, 2):
            raise InvalidInputError(f"transformation matrix must be 2x2, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("transformation matrix contains non-finite entries")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "TransformMatrix":
        return cls(np.eye(2))


def compute_weights(x: Point2, driving: PointsLike, cfg: MlsConfig) -> WeightVector:
    """Distance weights w_n = 1 / max(|k_dn - x|^(2*alpha), eps) at query x."""
    drv = as_points_array(driving, "driving")
    d = drv - x.as_array()[None, :]
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    if cfg.alpha == 1.0:
        denom = r2
    else:
        denom = r2**cfg.alpha
    w = 1.0 / np.maximum(denom, cfg.eps)
    return WeightVector(w=w, alpha=cfg.alpha, eps=cfg.eps)


def weighted_centroids(pairs: PairedPointSet, w: WeightVector) -> tuple[Point2, Point2]:
    """Weighted means (k_d*, k_s*) of the driving and source sets under w."""
    if w.w.shape[0] != pairs.n:
        raise InvalidInputError(f"got {w.w.shape[0]} weights for {pairs.n} point pairs")
    wsum = w.w.sum()
    kd = (w.w[:, None] * pairs.driving).sum(axis=0) / wsum
    ks = (w.w[:, None] * pairs.source).sum(axis=0) / wsum
    return Point2.from_array(kd), Point2.from_array(ks)


def _centered(pairs: PairedPointSet, w: WeightVector):
    kd_star, ks_star = weighted_centroids(pairs, w)
    hd = pairs.driving - kd_star.as_array()[None, :]
    hs = pairs.source - ks_star.as_array()[None, :]
    return kd_star, ks_star, hd, hs


def solve_affine(pairs: PairedPointSet, w: WeightVector) -> TransformMatrix:
    """Weighted least-squares 2x2 matrix minimizing sum_n w_n |hd_n M - hs_n|^2.

    hd/hs are the centroid-subtracted driving/source points. Raises
    DegenerateConfigurationError when the centered driving points do not span
    2D (fewer than 3 points, collinear or coincident).
    """
    _, _, hd, hs = _centered(pairs, w)
    ww = w.w
    a11 = float((ww * hd[:, 0] * hd[:, 0]).sum())
    a12 = float((ww * hd[:, 0] * hd[:, 1]).sum())
    a22 = float((ww * hd[:, 1] * hd[:, 1]).sum())
    det = a11 * a22 - a12 * a12
    trace = a11 + a22
    if trace <= 0.0 or det <= trace * trace * _RANK_RTOL:
        raise DegenerateConfigurationError(
            "driving points are collinear or coincident; affine solve needs rank-2 spread"
        )
    b11 = float((ww * hd[:, 0] * hs[:, 0]).sum())
    b12 = float((ww * hd[:, 0] * hs[:, 1]).sum())
    b21 = float((ww * hd[:, 1] * hs[:, 0]).sum())
    b22 = float((ww * hd[:, 1] * hs[:, 1]).sum())
    m = np.array(
        [
            [(a22 * b11 - a12 * b21) / det, (a22 * b12 - a12 * b22) / det],
            [(a11 * b21 - a12 * b11) / det, (a11 * b22 - a12 * b12) / det],
        ]
    )
    return TransformMatrix(m)


def solve_similarity(pairs: PairedPointSet, w: WeightVector, rigid: bool = False) -> TransformMatrix:
    """Best scaled rotation (matrix of the form [[a, b], [-b, a]]) under w.

    With rigid=True the scale is normalized to 1, leaving a pure rotation.
    """
    _, _, hd, hs = _centered(pairs, w)
    ww = w.w
    den = float((ww * (hd[:, 0] ** 2 + hd[:, 1] ** 2)).sum())
    if den <= 1e-24:
        raise DegenerateConfigurationError(
            "all driving points coincide with their centroid; similarity solve undefined"
        )
    a = float((ww * (hd[:, 0] * hs[:, 0] + hd[:, 1] * hs[:, 1])).sum()) / den
    b = float((ww * (hd[:, 0] * hs[:, 1] - hd[:, 1] * hs[:, 0])).sum()) / den
    if rigid:
        s = math.hypot(a, b)
        if s <= 1e-24:
            raise DegenerateConfigurationError("rotation undefined: similarity scale collapsed to zero")
        a, b = a / s, b / s
    return TransformMatrix(np.array([[a, b], [-b, a]]))


def _solve_for_mode(pairs: PairedPointSet, w: WeightVector, cfg: MlsConfig,
                    external_m: Optional[TransformMatrix]) -> TransformMatrix:
    if cfg.mode == "external":
        if external_m is None:
            raise ConfigurationError("mode 'external' requires an externally supplied matrix")
        return external_m
    if cfg.mode == "similarity":
        return solve_similarity(pairs, w)
    return solve_affine(pairs, w)


def motion_at(x: Point2, pairs: PairedPointSet, cfg: MlsConfig,
              external_m: Optional[TransformMatrix] = None) -> Point2:
    """Motion f(x) = (x - kd*) M + ks*, mapping driving-frame x into the source frame."""
    w = compute_weights(x, pairs.driving, cfg)
    m = _solve_for_mode(pairs, w, cfg, external_m)
    kd_star, ks_star = weighted_centroids(pairs, w)
    q = x.as_array() - kd_star.as_array()
    f = q @ m.m + ks_star.as_array()
    return Point2.from_array(f)


def motion_loss(pairs: PairedPointSet, m: TransformMatrix, x: Point2, cfg: MlsConfig) -> float:
    """Weighted residual sum_n w_n(x) |hd_n M - hs_n|^2 with centroids taken at x."""
    w = compute_weights(x, pairs.driving, cfg)
    _, _, hd, hs = _centered(pairs, w)
    r = hd @ m.m - hs
    return float((w.w * (r[:, 0] ** 2 + r[:, 1] ** 2)).sum())


def motion_field(xs: np.ndarray, pairs: PairedPointSet, cfg: MlsConfig,
                 external_m: Optional[TransformMatrix] = None) -> np.ndarray:
    """Vectorized motion_at over an (P, 2) array of query points.

    Pure elementwise arithmetic plus fixed-order reductions over the point
    axis, so results are bit-identical regardless of how callers partition
    the query array.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != 2:
        raise InvalidInputError(f"query array must have shape (P, 2), got {xs.shape}")
    kd = pairs.driving
    ks = pairs.source

    d = xs[:, None, :] - kd[None, :, :]
    r2 = d[:, :, 0] ** 2 + d[:, :, 1] ** 2
    if cfg.alpha == 1.0:
        denom = r2
    else:
        denom = r2**cfg.alpha
    w = 1.0 / np.maximum(denom, cfg.eps)

    wsum = w.sum(axis=1)
    kdx = (w * kd[None, :, 0]).sum(axis=1) / wsum
    kdy = (w * kd[None, :, 1]).sum(axis=1) / wsum
    ksx = (w * ks[None, :, 0]).sum(axis=1) / wsum
    ksy = (w * ks[None, :, 1]).sum(axis=1) / wsum

    qx = xs[:, 0] - kdx
    qy = xs[:, 1] - kdy

    if cfg.mode == "external":
        if external_m is None:
            raise ConfigurationError("mode 'external' requires an externally supplied matrix")
        m = external_m.m
        fx = qx * m[0, 0] + qy * m[1, 0] + ksx
        fy = qx * m[0, 1] + qy * m[1, 1] + ksy
        return np.stack([fx, fy], axis=1)

    hdx = kd[None, :, 0] - kdx[:, None]
    hdy = kd[None, :, 1] - kdy[:, None]
    hsx = ks[None, :, 0] - ksx[:, None]
    hsy = ks[None, :, 1] - ksy[:, None]

    if cfg.mode == "similarity":
        den = (w * (hdx**2 + hdy**2)).sum(axis=1)
        if np.any(den <= 1e-24):
            raise DegenerateConfigurationError(
                "all driving points coincide with their centroid; similarity solve undefined"
            )
        a = (w * (hdx * hsx + hdy * hsy)).sum(axis=1) / den
        b = (w * (hdx * hsy - hdy * hsx)).sum(axis=1) / den
        fx = qx * a - qy * b + ksx
        fy = qx * b + qy * a + ksy
        return np.stack([fx, fy], axis=1)

    a11 = (w * hdx * hdx).sum(axis=1)
    a12 = (w * hdx * hdy).sum(axis=1)
    a22 = (w * hdy * hdy).sum(axis=1)
    det = a11 * a22 - a12 * a12
    trace = a11 + a22
    if np.any(trace <= 0.0) or np.any(det <= trace * trace * _RANK_RTOL):
        raise DegenerateConfigurationError(
            "driving points are collinear or coincident; affine solve needs rank-2 spread"
        )
    b11 = (w * hdx * hsx).sum(axis=1)
    b12 = (w * hdx * hsy).sum(axis=1)
    b21 = (w * hdy * hsx).sum(axis=1)
    b22 = (w * hdy * hsy).sum(axis=1)
    m11 = (a22 * b11 - a12 * b21) / det
    m12 = (a22 * b12 - a12 * b22) / det
    m21 = (a11 * b21 - a12 * b11) / det
    m22 = (a11 * b22 - a12 * b12) / det
    fx = qx * m11 + qy * m21 + ksx
    fy = qx * m12 + qy * m22 + ksy
    return np.stack([fx, fy], axis=1)
