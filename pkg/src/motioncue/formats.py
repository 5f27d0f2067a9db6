"""CUE1 tensor files and PGM/PPM images.

CUE1 layout, fixed little-endian regardless of host:

    bytes 0..3   magic "CUE1"
    bytes 4..7   version, u32 (always 1)
    bytes 8..19  H, W, C as u32
    rest         H*W*C float32 values, row-major with the channel axis
                 fastest (payload[y, x, c])

PGM (P5) and PPM (P6) are the binary netpbm formats with maxval 255;
nonzero PGM pixels count as mask-inside.
"""

import struct

import numpy as np

from .errors import MalformedFile, ShapeMismatch

CUE1_MAGIC = b"CUE1"
CUE1_VERSION = 1


def write_cue1(path, array: np.ndarray) -> None:
    """Write an (H, W, C) float tensor; values are cast to float32."""
    array = np.asarray(array)
    if array.ndim != 3:
        raise ShapeMismatch(f"CUE1 stores (H, W, C) tensors, got {array.shape}")
    h, w, c = array.shape
    with open(path, "wb") as fh:
        fh.write(CUE1_MAGIC)
        fh.write(struct.pack("<IIII", CUE1_VERSION, h, w, c))
        fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def read_cue1(path) -> np.ndarray:
    """Read a CUE1 file back as a float32 (H, W, C) array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:4] != CUE1_MAGIC:
        raise MalformedFile(f"{path}: not a CUE1 file")
    version, h, w, c = struct.unpack("<IIII", blob[4:20])
    if version != CUE1_VERSION:
        raise MalformedFile(f"{path}: unsupported CUE1 version {version}")
    expected = 20 + 4 * h * w * c
    if len(blob) != expected:
        raise MalformedFile(
            f"{path}: payload is {len(blob) - 20} bytes, header implies {expected - 20}"
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=20)
    return flat.reshape(h, w, c).copy()


def _read_pnm_header(blob: bytes, path) -> tuple[bytes, list[int], int]:
    """Magic plus the next 3 header integers, tolerant of '#' comments."""
    if len(blob) < 2:
        raise MalformedFile(f"{path}: truncated netpbm file")
    magic = blob[:2]
    pos = 2
    values = []
    while len(values) < 3:
        if pos >= len(blob):
            raise MalformedFile(f"{path}: truncated netpbm header")
        ch = blob[pos:pos + 1]
        if ch in b" \t\r\n":
            pos += 1
        elif ch == b"#":
            while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(blob) and blob[pos:pos + 1].isdigit():
                pos += 1
            values.append(int(blob[start:pos]))
        else:
            raise MalformedFile(f"{path}: unexpected byte {ch!r} in header")
    pos += 1  # single whitespace separating header from raster
    return magic, values, pos


def write_pgm(path, image: np.ndarray) -> None:
    """Write a grayscale image; floats in [0, 1] are scaled to 0..255."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeMismatch(f"PGM stores (H, W) images, got {image.shape}")
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(image.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM as a uint8 (H, W) array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, (w, h, maxval), pos = _read_pnm_header(blob, path)
    if magic != b"P5":
        raise MalformedFile(f"{path}: expected P5 magic, got {magic!r}")
    if not 0 < maxval < 256:
        raise MalformedFile(f"{path}: only 8-bit PGM supported, maxval {maxval}")
    raster = blob[pos:]
    if len(raster) != w * h:
        raise MalformedFile(f"{path}: raster is {len(raster)} bytes, expected {w * h}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w).copy()


def write_ppm(path, image: np.ndarray) -> None:
    """Write an RGB image; floats in [0, 1] are scaled to 0..255."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatch(f"PPM stores (H, W, 3) images, got {image.shape}")
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(image.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM as a uint8 (H, W, 3) array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, (w, h, maxval), pos = _read_pnm_header(blob, path)
    if magic != b"P6":
        raise MalformedFile(f"{path}: expected P6 magic, got {magic!r}")
    if not 0 < maxval < 256:
        raise MalformedFile(f"{path}: only 8-bit PPM supported, maxval {maxval}")
    raster = blob[pos:]
    if len(raster) != 3 * w * h:
        raise MalformedFile(f"{path}: raster is {len(raster)} bytes, expected {3 * w * h}")
    return np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3).copy()
