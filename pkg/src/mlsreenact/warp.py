"""Dense flow construction, motion blending, and backward warping.

Flow fields store, for every driving-frame pixel, the normalized source
coordinate to sample. Pixels are addressed by their centers:
((j + 0.5)/W, (i + 0.5)/H). Dense evaluation is tiled by fixed 16-row
bands regardless of worker count, and each band is computed with the
same fixed-order arithmetic, so results are bit-identical across thread
counts.
"""

from __future__ import annotations

import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError
from .images import ImageBuffer, MaskBuffer
from .mls import MlsConfig, PairedPointSet, TransformMatrix, motion_field

TILE_ROWS = 16

# fields up to this many cells are exported as plain JSON
_JSON_FLOW_LIMIT = 64 * 64

_FLOW_CONVENTION = "normalized [0,1]^2, origin top-left, x right, y down, backward sampling"


def worker_count(requested: int | None = None) -> int:
    """Worker threads to use: explicit argument, else MLSR_THREADS, else 1:1 with cores."""
    if requested is not None:
        if requested < 1:
            raise InvalidInputError(f"worker count must be >= 1, got {requested}")
        return requested
    env = os.environ.get("MLSR_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidInputError(f"MLSR_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise InvalidInputError(f"MLSR_THREADS must be >= 1, got {cap}")
        return cap
    return os.cpu_count() or 1


@dataclass(frozen=True)
class FlowField:
    """(H, W, 2) array of normalized source sampling coordinates."""

    map: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.float64)
        if m.ndim != 3 or m.shape[2] != 2:
            raise ShapeError(f"flow map must be (H, W, 2), got {m.shape}")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise InvalidInputError("flow dimensions must be positive")
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("flow map contains non-finite values")
        m.setflags(write=False)
        object.__setattr__(self, "map", m)

    @property
    def height(self) -> int:
        return self.map.shape[0]

    @property
    def width(self) -> int:
        return self.map.shape[1]

    @staticmethod
    def identity(width: int, height: int) -> "FlowField":
        return FlowField(map=pixel_centers(width, height))


def pixel_centers(width: int, height: int) -> np.ndarray:
    """(H, W, 2) grid of normalized cell centers."""
    if width < 1 or height < 1:
        raise InvalidInputError(f"dimensions must be positive, got {width}x{height}")
    xs = (np.arange(width, dtype=np.float64) + 0.5) / width
    ys = (np.arange(height, dtype=np.float64) + 0.5) / height
    grid = np.empty((height, width, 2), dtype=np.float64)
    grid[:, :, 0] = xs[None, :]
    grid[:, :, 1] = ys[:, None]
    return grid


def dense_flow(
    pairs: PairedPointSet,
    cfg: MlsConfig,
    width: int,
    height: int,
    external_m: TransformMatrix | None = None,
    workers: int | None = None,
) -> FlowField:
    """Per-pixel MLS motion over the full grid, tiled in fixed 16-row bands."""
    centers = pixel_centers(width, height)
    out = np.empty_like(centers)
    tiles = [(r, min(r + TILE_ROWS, height)) for r in range(0, height, TILE_ROWS)]

    def fill(tile):
        r0, r1 = tile
        flat = centers[r0:r1].reshape(-1, 2)
        out[r0:r1] = motion_field(flat, pairs, cfg, external_m=external_m).reshape(r1 - r0, width, 2)

    n_workers = worker_count(workers)
    if n_workers == 1 or len(tiles) == 1:
        for tile in tiles:
            fill(tile)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            # list() propagates the first worker exception
            list(pool.map(fill, tiles))
    return FlowField(map=out)


def blend_background(fg_flow: FlowField, fg_mask: MaskBuffer) -> FlowField:
    """Convex blend of the foreground flow with the identity background motion."""
    if (fg_mask.height, fg_mask.width) != (fg_flow.height, fg_flow.width):
        raise ShapeError(
            f"mask {fg_mask.width}x{fg_mask.height} does not match flow {fg_flow.width}x{fg_flow.height}"
        )
    identity = pixel_centers(fg_flow.width, fg_flow.height)
    m = fg_mask.values[:, :, None]
    return FlowField(map=m * fg_flow.map + (1.0 - m) * identity)


def backward_warp(source: ImageBuffer, flow: FlowField) -> ImageBuffer:
    """Bilinear sample of source at each flow coordinate, clamped to the border."""
    px = source.pixels
    h, w = source.height, source.width
    u = np.clip(flow.map[:, :, 0] * w - 0.5, 0.0, w - 1.0)
    v = np.clip(flow.map[:, :, 1] * h - 0.5, 0.0, h - 1.0)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (u - u0)[:, :, None]
    fv = (v - v0)[:, :, None]
    top = px[v0, u0] * (1.0 - fu) + px[v0, u1] * fu
    bottom = px[v1, u0] * (1.0 - fu) + px[v1, u1] * fu
    return ImageBuffer(pixels=top * (1.0 - fv) + bottom * fv)


def apply_occlusion(warped: ImageBuffer, mask: MaskBuffer, fill) -> ImageBuffer:
    """out = mask * warped + (1 - mask) * fill, fill an image or constant color."""
    if (mask.height, mask.width) != (warped.height, warped.width):
        raise ShapeError(
            f"mask {mask.width}x{mask.height} does not match image {warped.width}x{warped.height}"
        )
    if isinstance(fill, ImageBuffer):
        if (fill.height, fill.width, fill.channels) != (warped.height, warped.width, warped.channels):
            raise ShapeError("fill image dimensions do not match the warped image")
        fill_px = fill.pixels
    else:
        fill_arr = np.asarray(fill, dtype=np.float64).reshape(-1)
        if fill_arr.size not in (1, warped.channels):
            raise ShapeError(
                f"fill color needs 1 or {warped.channels} components, got {fill_arr.size}"
            )
        fill_px = np.clip(fill_arr, 0.0, 1.0)[None, None, :]
    m = mask.values[:, :, None]
    return ImageBuffer(pixels=m * warped.pixels + (1.0 - m) * fill_px)


# ---------------------------------------------------------------- flow files

def flow_stats(flow: FlowField) -> dict:
    """Displacement statistics relative to the identity flow."""
    disp = flow.map - pixel_centers(flow.width, flow.height)
    mag = np.hypot(disp[:, :, 0], disp[:, :, 1])
    return {
        "mean_displacement": float(mag.mean()),
        "max_displacement": float(mag.max()),
        "min_x": float(flow.map[:, :, 0].min()),
        "max_x": float(flow.map[:, :, 0].max()),
        "min_y": float(flow.map[:, :, 1].min()),
        "max_y": float(flow.map[:, :, 1].max()),
    }


def flow_to_json_dict(flow: FlowField, limit: int = _JSON_FLOW_LIMIT) -> dict:
    """Fully-JSON form for small fields; raises when the field is too large."""
    if flow.width * flow.height > limit:
        raise InvalidInputError(
            f"field {flow.width}x{flow.height} exceeds the JSON export limit of {limit} cells"
        )
    return {
        "width": flow.width,
        "height": flow.height,
        "convention": _FLOW_CONVENTION,
        "encoding": "json",
        "data": [[float(x), float(y)] for x, y in flow.map.reshape(-1, 2)],
    }


def save_flow(flow: FlowField, path) -> None:
    """JSON for fields up to 64x64 cells, JSON header + f32 pairs above that."""
    if flow.width * flow.height <= _JSON_FLOW_LIMIT:
        blob = json.dumps(flow_to_json_dict(flow), sort_keys=True, separators=(",", ":")).encode("ascii")
    else:
        header = {
            "width": flow.width,
            "height": flow.height,
            "convention": _FLOW_CONVENTION,
            "encoding": "f32le",
        }
        buf = io.BytesIO()
        buf.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii"))
        buf.write(b"\n")
        buf.write(np.ascontiguousarray(flow.map, dtype="<f4").tobytes())
        blob = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(blob)


def load_flow(path) -> FlowField:
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    header_bytes = blob if newline < 0 else blob[:newline]
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"flow file header is not valid JSON: {exc}") from exc
    width, height = int(header.get("width", 0)), int(header.get("height", 0))
    encoding = header.get("encoding")
    if encoding == "json":
        data = np.asarray(header.get("data", []), dtype=np.float64)
        if data.shape != (width * height, 2):
            raise InvalidInputError("flow JSON data does not match declared dimensions")
        return FlowField(map=data.reshape(height, width, 2))
    if encoding == "f32le":
        payload = blob[newline + 1:]
        expected = width * height * 2 * 4
        if len(payload) != expected:
            raise InvalidInputError(
                f"flow payload holds {len(payload)} bytes, header needs {expected}"
            )
        data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
        return FlowField(map=data.reshape(height, width, 2))
    raise InvalidInputError(f"unknown flow encoding {encoding!r}")
