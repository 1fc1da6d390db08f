"""Raster image container and geometry primitives.

Images are float32 arrays of shape (H, W, C) with values in [0, 1],
channel-last, C either 1 or 3. Resampling is done here (bilinear by
default, nearest-neighbor when exact pixel provenance matters) so the
semantics are pinned down and testable pixel by pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VALID_CHANNELS = (1, 3)


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Dense H x W x C pixel tensor, the unit of all geometry and augmentation."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        px = self.pixels
        if px.ndim != 3:
            raise ValueError(f"pixels must be rank 3 (H, W, C), got rank {px.ndim}")
        h, w, c = px.shape
        if h < 1 or w < 1:
            raise ValueError(f"image must be at least 1x1, got {h}x{w}")
        if c not in VALID_CHANNELS:
            raise ValueError(f"channels must be 1 or 3, got {c}")
        if px.dtype != np.float32:
            object.__setattr__(self, "pixels", px.astype(np.float32))
            px = self.pixels
        lo, hi = float(px.min()), float(px.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"pixel values must lie in [0, 1], got range [{lo}, {hi}]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


def resize(pixels: np.ndarray, out_h: int, out_w: int, mode: str = "bilinear") -> np.ndarray:
    """Resample an (H, W, C) float array to (out_h, out_w, C).

    Sampling uses the half-pixel-center convention: output pixel i samples the
    source at (i + 0.5) * scale - 0.5. Identity sizes return the input
    unchanged so a no-op resize is exactly the identity.
    """
    h, w = pixels.shape[:2]
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    if mode not in ("nearest", "bilinear"):
        raise ValueError(f"unknown interpolation mode {mode!r}")
    if (out_h, out_w) == (h, w):
        return pixels
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    if mode == "nearest":
        yi = np.clip(np.rint(ys).astype(np.int64), 0, h - 1)
        xi = np.clip(np.rint(xs).astype(np.int64), 0, w - 1)
        return pixels[yi][:, xi]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    p = pixels.astype(np.float64)
    top = p[y0][:, x0] * (1 - wx) + p[y0][:, x1] * wx
    bot = p[y1][:, x0] * (1 - wx) + p[y1][:, x1] * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(out, 0.0, 1.0).astype(pixels.dtype)


def center_crop_square(pixels: np.ndarray) -> np.ndarray:
    """The largest centered square on the shorter side."""
    h, w = pixels.shape[:2]
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    return pixels[top : top + side, left : left + side]


def standardize_image(image: RasterImage, side: int, mode: str = "bilinear") -> RasterImage:
    """Center-crop to the largest square on the shorter side, then resize to side x side."""
    if side < 1:
        raise ValueError(f"side must be >= 1, got {side}")
    square = center_crop_square(image.pixels)
    return RasterImage(resize(square, side, side, mode=mode))


def crop(image: RasterImage, top: int, left: int, height: int, width: int) -> RasterImage:
    if height < 1 or width < 1:
        raise ValueError("crop size must be positive")
    if top < 0 or left < 0 or top + height > image.height or left + width > image.width:
        raise ValueError(
            f"crop [{top}:{top + height}, {left}:{left + width}] exceeds "
            f"{image.height}x{image.width} image"
        )
    return RasterImage(image.pixels[top : top + height, left : left + width].copy())


def flip_horizontal(image: RasterImage) -> RasterImage:
    return RasterImage(image.pixels[:, ::-1].copy())


def write_ppm(image: RasterImage, path) -> None:
    """8-bit PPM (P6) export, for human inspection only; 1-channel images are replicated to RGB."""
    px = image.pixels
    if px.shape[2] == 1:
        px = np.repeat(px, 3, axis=2)
    data = np.clip(np.rint(px * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())
