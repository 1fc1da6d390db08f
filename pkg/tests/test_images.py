import numpy as np
import pytest

from pcakit.images import RasterImage, center_crop_square, resize, standardize_image, write_ppm

from conftest import make_image


def reference_bilinear(pixels: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Independent scalar-loop bilinear resample (half-pixel centers)."""
    h, w, c = pixels.shape
    out = np.zeros((out_h, out_w, c))
    for i in range(out_h):
        for j in range(out_w):
            y = min(max((i + 0.5) * h / out_h - 0.5, 0.0), h - 1.0)
            x = min(max((j + 0.5) * w / out_w - 0.5, 0.0), w - 1.0)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            wy, wx = y - y0, x - x0
            for k in range(c):
                top = pixels[y0, x0, k] * (1 - wx) + pixels[y0, x1, k] * wx
                bot = pixels[y1, x0, k] * (1 - wx) + pixels[y1, x1, k] * wx
                out[i, j, k] = top * (1 - wy) + bot * wy
    return out


def test_raster_image_invariants():
    with pytest.raises(ValueError):
        RasterImage(np.zeros((4, 4, 2), dtype=np.float32))
    with pytest.raises(ValueError):
        RasterImage(np.full((2, 2, 1), 1.5, dtype=np.float32))
    with pytest.raises(ValueError):
        RasterImage(np.full((2, 2, 1), -0.1, dtype=np.float32))
    with pytest.raises(ValueError):
        RasterImage(np.zeros((4, 4), dtype=np.float32))


def test_standardize_square_noop():
    img = make_image(np.random.default_rng(0), 64, 64)
    out = standardize_image(img, 64)
    assert np.array_equal(out.pixels, img.pixels)


def test_standardize_shorter_side_is_center_crop():
    img = make_image(np.random.default_rng(1), 64, 32)
    out = standardize_image(img, 32)
    assert np.array_equal(out.pixels, img.pixels[16:48, :, :])


def test_standardize_crop_then_resize_matches_reference():
    img = make_image(np.random.default_rng(2), 48, 96)
    out = standardize_image(img, 32)
    square = img.pixels[:, 24:72, :]
    expected = reference_bilinear(square.astype(np.float64), 32, 32)
    assert out.pixels.shape == (32, 32, 3)
    assert np.allclose(out.pixels, expected, atol=1e-6)


def test_standardize_upscales_degenerate():
    img = RasterImage(np.full((1, 1, 1), 0.25, dtype=np.float32))
    out = standardize_image(img, 4)
    assert out.pixels.shape == (4, 4, 1)
    assert np.allclose(out.pixels, 0.25)


@pytest.mark.parametrize("h,w,side", [(10, 7, 5), (7, 10, 3), (33, 47, 32)])
def test_standardize_always_square(h, w, side):
    img = make_image(np.random.default_rng(h * w), h, w)
    out = standardize_image(img, side)
    assert out.pixels.shape == (side, side, 3)


def test_nearest_resize_exact_provenance():
    rng = np.random.default_rng(5)
    px = rng.random((8, 8, 1), dtype=np.float32)
    out = resize(px, 4, 4, mode="nearest")
    # every output pixel is some input pixel, bit for bit
    assert all(v in px.reshape(-1) for v in out.reshape(-1))


def test_center_crop_square_geometry():
    px = np.arange(24, dtype=np.float32).reshape(6, 4, 1) / 24.0
    out = center_crop_square(px)
    assert out.shape == (4, 4, 1)
    assert np.array_equal(out, px[1:5])


def test_resize_rejects_bad_args():
    px = np.zeros((4, 4, 1), dtype=np.float32)
    with pytest.raises(ValueError):
        resize(px, 0, 4)
    with pytest.raises(ValueError):
        resize(px, 4, 4, mode="bicubic")


def test_ppm_export(tmp_path):
    img = RasterImage(np.stack([np.full((2, 2), v, dtype=np.float32) for v in (0.0, 0.5, 1.0)], axis=-1))
    path = tmp_path / "x.ppm"
    write_ppm(img, path)
    data = path.read_bytes()
    assert data.startswith(b"P6\n2 2\n255\n")
    assert data[-12:] == bytes([0, 128, 255] * 4)


def test_ppm_grayscale_replicates(tmp_path):
    img = RasterImage(np.full((1, 1, 1), 1.0, dtype=np.float32))
    path = tmp_path / "g.ppm"
    write_ppm(img, path)
    assert path.read_bytes().endswith(bytes([255, 255, 255]))
