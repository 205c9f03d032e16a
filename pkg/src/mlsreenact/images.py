"""Float image and mask buffers with deterministic PNG round trips.

Pixel values live in [0, 1] and are clamped on ingest. PNG encoding pins
the zlib compression level so identical buffers always produce identical
bytes, which the service and CLI rely on for byte-equality guarantees.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import InvalidInputError, ShapeError

# pinned so encoded bytes are reproducible across runs and processes
_COMPRESS_LEVEL = 6

_ALLOWED_CHANNELS = (1, 3, 4)
_PIL_MODES = {1: "L", 3: "RGB", 4: "RGBA"}


@dataclass(frozen=True)
class ImageBuffer:
    """Height x width x channels array of floats in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3:
            raise ShapeError(f"image must be (H, W, C), got {px.shape}")
        if px.shape[2] not in _ALLOWED_CHANNELS:
            raise ShapeError(f"channel count must be one of {_ALLOWED_CHANNELS}, got {px.shape[2]}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError("image dimensions must be positive")
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("image contains non-finite values")
        px = np.clip(px, 0.0, 1.0)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @staticmethod
    def constant(width: int, height: int, channels: int = 3, value=0.5) -> "ImageBuffer":
        px = np.empty((height, width, channels), dtype=np.float64)
        px[:] = np.asarray(value, dtype=np.float64)
        return ImageBuffer(pixels=px)


@dataclass(frozen=True)
class MaskBuffer:
    """Height x width array of floats in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 3 and v.shape[2] == 1:
            v = v[:, :, 0]
        if v.ndim != 2:
            raise ShapeError(f"mask must be (H, W), got {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidInputError("mask dimensions must be positive")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("mask contains non-finite values")
        v = np.clip(v, 0.0, 1.0)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @staticmethod
    def full(width: int, height: int, value: float = 1.0) -> "MaskBuffer":
        return MaskBuffer(values=np.full((height, width), value, dtype=np.float64))


def _from_pil(im: Image.Image) -> ImageBuffer:
    if im.mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(im, dtype=np.float64) / 65535.0
        return ImageBuffer(pixels=arr[:, :, None])
    if im.mode == "I":
        arr = np.asarray(im, dtype=np.float64) / 65535.0
        return ImageBuffer(pixels=arr[:, :, None])
    if im.mode == "LA" or im.mode == "P":
        im = im.convert("RGBA")
    elif im.mode not in ("L", "RGB", "RGBA"):
        im = im.convert("RGB")
    arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return ImageBuffer(pixels=arr)


def decode_png(data: bytes) -> ImageBuffer:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            return _from_pil(im)
    except InvalidInputError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"payload is not a decodable image: {exc}") from exc


def load_png(path) -> ImageBuffer:
    try:
        with Image.open(path) as im:
            im.load()
            return _from_pil(im)
    except FileNotFoundError:
        raise
    except InvalidInputError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"{path} is not a decodable image: {exc}") from exc


def encode_png(img: ImageBuffer, bit_depth: int = 8) -> bytes:
    if bit_depth == 8:
        arr = np.round(img.pixels * 255.0).astype(np.uint8)
        if img.channels == 1:
            pil = Image.fromarray(arr[:, :, 0], mode="L")
        else:
            pil = Image.fromarray(arr, mode=_PIL_MODES[img.channels])
    elif bit_depth == 16:
        if img.channels != 1:
            raise InvalidInputError("16-bit PNG output supports single-channel images only")
        arr = np.round(img.pixels[:, :, 0] * 65535.0).astype(np.uint16)
        pil = Image.fromarray(arr)  # uint16 maps to mode I;16
    else:
        raise InvalidInputError(f"bit depth must be 8 or 16, got {bit_depth}")
    buf = io.BytesIO()
    pil.save(buf, format="PNG", compress_level=_COMPRESS_LEVEL)
    return buf.getvalue()


def save_png(img: ImageBuffer, path, bit_depth: int = 8) -> None:
    data = encode_png(img, bit_depth=bit_depth)
    with open(path, "wb") as fh:
        fh.write(data)


def load_mask_png(path) -> MaskBuffer:
    img = load_png(path)
    if img.channels == 1:
        return MaskBuffer(values=img.pixels[:, :, 0])
    # collapse color masks by averaging the color channels, ignoring alpha
    return MaskBuffer(values=img.pixels[:, :, :3].mean(axis=2))
