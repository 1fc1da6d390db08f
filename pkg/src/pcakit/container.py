"""DCT1 binary tensor container.

Layout: bytes 0-3 magic "DCT1"; u8 rank; rank x u32 little-endian dims;
u8 dtype code (0 = f32); payload row-major f32 little-endian. Single
images are rank 3 (H, W, C); batches are rank 4 (N, H, W, C). Round-trips
are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .images import RasterImage

MAGIC = b"DCT1"
DTYPE_F32 = 0


class ContainerFormatError(ValueError):
    """Malformed DCT1 file; the message names the offending field."""


def _encode(array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array, dtype="<f4")
    parts = [MAGIC, struct.pack("<B", arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    parts.append(struct.pack("<B", DTYPE_F32))
    parts.append(arr.tobytes())
    return b"".join(parts)


def _decode(blob: bytes, path) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise ContainerFormatError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 5:
        raise ContainerFormatError(f"{path}: truncated before rank byte")
    rank = blob[4]
    if rank not in (3, 4):
        raise ContainerFormatError(f"{path}: unsupported rank {rank}, expected 3 or 4")
    header_end = 5 + 4 * rank
    if len(blob) < header_end + 1:
        raise ContainerFormatError(f"{path}: truncated dims header")
    dims = struct.unpack_from(f"<{rank}I", blob, 5)
    if any(d < 1 for d in dims):
        raise ContainerFormatError(f"{path}: non-positive dim in {dims}")
    dtype_code = blob[header_end]
    if dtype_code != DTYPE_F32:
        raise ContainerFormatError(f"{path}: unknown dtype code {dtype_code}, expected {DTYPE_F32}")
    payload = blob[header_end + 1 :]
    expected = 4 * int(np.prod(dims))
    if len(payload) != expected:
        raise ContainerFormatError(
            f"{path}: payload is {len(payload)} bytes, dims {dims} require {expected}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def save_tensor_container(image_or_batch, path) -> None:
    """Write a RasterImage (rank 3) or an (N, H, W, C) float batch."""
    if isinstance(image_or_batch, RasterImage):
        array = image_or_batch.pixels
    else:
        array = np.asarray(image_or_batch)
        if array.ndim != 4:
            raise ValueError(f"batch must be rank 4 (N, H, W, C), got rank {array.ndim}")
    Path(path).write_bytes(_encode(array))


def load_tensor_container(path):
    """Read back a RasterImage (rank 3 file) or a raw (N, H, W, C) array (rank 4 file)."""
    array = _decode(Path(path).read_bytes(), path)
    if array.ndim == 3:
        return RasterImage(array)
    return array


def container_payload_bytes(height: int, width: int, channels: int) -> int:
    """Payload size of one rank-3 image, excluding the header."""
    return 4 * height * width * channels


def container_file_bytes(height: int, width: int, channels: int) -> int:
    """Total file size of one rank-3 image: magic + rank + dims + dtype + payload."""
    return 4 + 1 + 4 * 3 + 1 + container_payload_bytes(height, width, channels)
