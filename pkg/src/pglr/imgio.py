"""Grayscale image file I/O.

Two formats are always available:

* binary PGM (``P5``), 8-bit, maxval 255;
* a float raster (``.pfmg``) holding unquantized pixels: an 8-byte magic
  ``PFMG0001``, little-endian uint32 width and height, then float64 pixel
  data in row-major order.

PNG is supported when Pillow is installed (``pip install pglr[png]``).

Images are 2-D float64 arrays everywhere in this package. Writing an 8-bit
format clamps to [0, 255] and rounds half away from zero.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import FormatError, InvalidInputError

PFMG_MAGIC = b"PFMG0001"


def ensure_image(arr, name: str = "image") -> np.ndarray:
    """Validate and return ``arr`` as a 2-D float64 array with finite entries."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return a


def quantize(image) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to uint8."""
    a = np.clip(np.asarray(image, dtype=np.float64), 0.0, 255.0)
    return np.floor(a + 0.5).astype(np.uint8)


def _read_pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skip whitespace and '#' comment lines, then collect one token.
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError("PGM header ended prematurely")
    return data[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) file into a float64 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (expected magic P5)")
    pos = 2
    fields = []
    for _ in range(3):
        token, pos = _read_pgm_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise FormatError(f"{path}: non-numeric PGM header field {token!r}") from None
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval} (only 8-bit, maxval <= 255)")
    pos += 1  # single whitespace byte after maxval
    expected = width * height
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise FormatError(
            f"{path}: truncated PGM raster, expected {expected} bytes, got {len(raster)}"
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    return pixels.reshape(height, width)


def write_pgm(path, image) -> None:
    """Write an image as binary PGM (P5, maxval 255), quantizing to 8 bits."""
    a = quantize(ensure_image(image))
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(a.tobytes())


def read_pfmg(path) -> np.ndarray:
    """Read the float raster format."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != PFMG_MAGIC:
        raise FormatError(f"{path}: bad float raster magic {data[:8]!r}")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated float raster header")
    width, height = np.frombuffer(data[8:16], dtype="<u4")
    width, height = int(width), int(height)
    if width == 0 or height == 0:
        raise FormatError(f"{path}: bad float raster dimensions {width}x{height}")
    expected = 16 + 8 * width * height
    if len(data) != expected:
        raise FormatError(
            f"{path}: float raster has {len(data)} bytes, expected {expected} "
            f"for {width}x{height}"
        )
    pixels = np.frombuffer(data, dtype="<f8", offset=16)
    return pixels.reshape(height, width).copy()


def write_pfmg(path, image) -> None:
    """Write an image as the float raster format (no quantization)."""
    a = ensure_image(image)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(PFMG_MAGIC)
        fh.write(np.array([w, h], dtype="<u4").tobytes())
        fh.write(a.astype("<f8").tobytes())


def _require_pillow():
    try:
        from PIL import Image  # noqa: PLC0415
    except ImportError:
        raise FormatError(
            "PNG support requires Pillow (install with: pip install pglr[png])"
        ) from None
    return Image


def read_png(path) -> np.ndarray:
    Image = _require_pillow()
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.float64)


def write_png(path, image) -> None:
    Image = _require_pillow()
    a = quantize(ensure_image(image))
    Image.fromarray(a, mode="L").save(path, format="PNG")


_READERS = {".pgm": read_pgm, ".pfmg": read_pfmg, ".png": read_png}
_WRITERS = {".pgm": write_pgm, ".pfmg": write_pfmg, ".png": write_png}


def read_image(path) -> np.ndarray:
    """Read a grayscale image, dispatching on the file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    reader = _READERS.get(ext)
    if reader is None:
        raise FormatError(f"{path}: unsupported image extension {ext!r} "
                          f"(expected one of {sorted(_READERS)})")
    return reader(path)


def write_image(path, image) -> None:
    """Write a grayscale image, dispatching on the file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    writer = _WRITERS.get(ext)
    if writer is None:
        raise FormatError(f"{path}: unsupported image extension {ext!r} "
                          f"(expected one of {sorted(_WRITERS)})")
    writer(path, image)
