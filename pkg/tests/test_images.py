"""PNG round trips, clamping, and deterministic encoding."""

import numpy as np
import pytest

from mlsreenact.errors import InvalidInputError, ShapeError
from mlsreenact.images import (
    ImageBuffer,
    MaskBuffer,
    decode_png,
    encode_png,
    load_mask_png,
    load_png,
    save_png,
)


class TestImageBuffer:
    def test_clamps_on_ingest(self):
        img = ImageBuffer(pixels=np.array([[[-0.5], [1.5]]]))
        assert img.pixels[0, 0, 0] == 0.0
        assert img.pixels[0, 1, 0] == 1.0

    def test_rejects_bad_channel_count(self, rng):
        with pytest.raises(ShapeError):
            ImageBuffer(pixels=rng.uniform(0, 1, (4, 4, 2)))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            ImageBuffer(pixels=np.full((2, 2, 3), np.nan))

    def test_grayscale_promoted_to_channel_axis(self, rng):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (5, 4)))
        assert img.pixels.shape == (5, 4, 1)
        assert (img.width, img.height, img.channels) == (4, 5, 1)

    def test_constant_constructor(self):
        img = ImageBuffer.constant(3, 2, channels=3, value=0.25)
        assert img.pixels.shape == (2, 3, 3)
        np.testing.assert_array_equal(img.pixels, 0.25)


class TestPngRoundTrip:
    def test_rgb_8bit_quantization_bound(self, rng, tmp_path):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (16, 12, 3)))
        path = tmp_path / "img.png"
        save_png(img, path)
        loaded = load_png(path)
        assert (loaded.width, loaded.height, loaded.channels) == (12, 16, 3)
        np.testing.assert_allclose(loaded.pixels, img.pixels, atol=0.5 / 255.0 + 1e-12)

    def test_gray_16bit_round_trip(self, rng, tmp_path):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (8, 8, 1)))
        path = tmp_path / "img16.png"
        save_png(img, path, bit_depth=16)
        loaded = load_png(path)
        np.testing.assert_allclose(loaded.pixels, img.pixels, atol=0.5 / 65535.0 + 1e-12)

    def test_16bit_rejects_color(self, rng):
        with pytest.raises(InvalidInputError):
            encode_png(ImageBuffer(pixels=rng.uniform(0, 1, (4, 4, 3))), bit_depth=16)

    def test_encoding_is_deterministic(self, rng):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (32, 32, 3)))
        assert encode_png(img) == encode_png(ImageBuffer(pixels=img.pixels.copy()))

    def test_decode_rejects_garbage(self):
        with pytest.raises(InvalidInputError):
            decode_png(b"this is not a png")

    def test_rgba_preserved(self, rng, tmp_path):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (6, 6, 4)))
        path = tmp_path / "img.png"
        save_png(img, path)
        assert load_png(path).channels == 4


class TestMasks:
    def test_mask_clamped(self):
        m = MaskBuffer(values=np.array([[2.0, -1.0]]))
        np.testing.assert_array_equal(m.values, [[1.0, 0.0]])

    def test_mask_from_gray_png(self, rng, tmp_path):
        img = ImageBuffer(pixels=rng.uniform(0, 1, (8, 8, 1)))
        path = tmp_path / "mask.png"
        save_png(img, path)
        mask = load_mask_png(path)
        np.testing.assert_allclose(mask.values, img.pixels[:, :, 0], atol=0.5 / 255.0 + 1e-12)

    def test_mask_from_color_png_averages(self, tmp_path):
        px = np.zeros((4, 4, 3))
        px[:, :, 0] = 0.9
        path = tmp_path / "mask.png"
        save_png(ImageBuffer(pixels=px), path)
        mask = load_mask_png(path)
        np.testing.assert_allclose(mask.values, 0.3, atol=1.0 / 255.0)
