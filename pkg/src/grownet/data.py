"""Grayscale image ingestion and training-set construction.

Two dataset builders:

* ``brightness_dataset`` — predict a pixel from nearby already-scanned
  pixels. The neighborhood is a fixed ordering of raster-previous offsets;
  the left neighbor is subtracted from everything as a base and values are
  scaled by 1/100, so a p-point neighborhood yields p-1 inputs.
* ``xy_dataset`` — approximate the whole image as a function of normalized
  (x, y) in [0,1]^2 with brightness scaled to [0,1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .training import TrainingMatrix


class PgmError(ValueError):
    """Raised for malformed or unsupported PGM input."""


@dataclass
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array {self.pixels.shape} does not match "
                f"{self.height}x{self.width}"
            )

    def at(self, x: int, y: int) -> int:
        return int(self.pixels[y, x])


#: Offsets (dx, dy) of the previous points, in consideration order. Index 0
#: is the left neighbor, the base value subtracted during normalization.
PREVIOUS_POINT_OFFSETS: tuple[tuple[int, int], ...] = (
    (-1, 0),
    (0, -1),
    (-1, -1),
    (1, -1),
    (-2, 0),
    (0, -2),
    (-2, -1),
    (-1, -2),
    (1, -2),
    (2, -1),
    (-2, -2),
    (2, -2),
    (-3, 0),
    (0, -3),
    (-3, -1),
    (-1, -3),
    (1, -3),
    (3, -1),
)


def validate_ordering(ordering) -> None:
    """Every offset must be strictly previous in raster order."""
    for dx, dy in ordering:
        if not (dy < 0 or (dy == 0 and dx < 0)):
            raise ValueError(f"offset ({dx},{dy}) is not raster-previous")


# ---------------------------------------------------------------------------
# PGM


def load_pgm(path) -> GrayImage:
    """Parse a P5 (binary) or P2 (ASCII) PGM file with maxval 255."""
    data = Path(path).read_bytes()
    pos = 0
    whitespace = b" \t\r\n\x0b\x0c"

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos] in whitespace:
                pos += 1
            elif data[pos] == ord("#"):
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in whitespace:
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated header")
        return data[start:pos]

    magic = token()
    if magic not in (b"P2", b"P5"):
        raise PgmError(f"{path}: not a P2/P5 PGM (magic {magic!r})")
    try:
        width = int(token())
        height = int(token())
        maxval = int(token())
    except ValueError:
        raise PgmError(f"{path}: non-numeric header field") from None
    if width < 1 or height < 1:
        raise PgmError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise PgmError(f"{path}: only maxval 255 is supported, got {maxval}")

    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        raw = data[pos : pos + count]
        if len(raw) < count:
            raise PgmError(f"{path}: truncated pixel data")
        pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width).copy()
    else:
        fields = data[pos:].split()
        if len(fields) < count:
            raise PgmError(f"{path}: truncated pixel data")
        try:
            flat = np.array([int(v) for v in fields[:count]], dtype=np.int64)
        except ValueError:
            raise PgmError(f"{path}: non-numeric pixel value") from None
        if flat.min() < 0 or flat.max() > 255:
            raise PgmError(f"{path}: pixel value out of range")
        pixels = flat.astype(np.uint8).reshape(height, width)
    return GrayImage(width, height, pixels)


def save_pgm(img: GrayImage, path, binary: bool = True) -> None:
    with open(path, "wb") as fh:
        if binary:
            fh.write(f"P5\n{img.width} {img.height}\n255\n".encode())
            fh.write(img.pixels.tobytes())
        else:
            fh.write(f"P2\n{img.width} {img.height}\n255\n".encode())
            for row in img.pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def synthetic_wave_image(width: int = 64, height: int = 64) -> GrayImage:
    """Smooth sinusoidal test image: 127.5*(1 + sin(x/7)*cos(y/9)), rounded."""
    x = np.arange(width, dtype=np.float64)
    y = np.arange(height, dtype=np.float64)
    b = 127.5 * (1.0 + np.sin(x[None, :] / 7.0) * np.cos(y[:, None] / 9.0))
    return GrayImage(width, height, np.clip(np.rint(b), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# dataset builders


def brightness_dataset(
    img: GrayImage, num_points: int, ordering=PREVIOUS_POINT_OFFSETS
) -> TrainingMatrix:
    """Rows predicting each pixel from its first ``num_points`` previous
    points.

    For a pixel at (x, y) with every used offset inside the image, the
    target is (B(x,y) - base)/100 and input j is (B at offset j+1 -
    base)/100, where base is the value at offset 0 (the left neighbor).
    Pixels with any offset out of bounds are skipped; rows come out in
    raster order.
    """
    if not 2 <= num_points <= len(ordering):
        raise ValueError(f"num_points must be in 2..{len(ordering)}")
    validate_ordering(ordering)
    offs = list(ordering[:num_points])

    dxs = [dx for dx, _ in offs]
    dys = [dy for _, dy in offs]
    x_lo = max(0, -min(dxs))
    x_hi = img.width - 1 - max(0, max(dxs))
    y_lo = max(0, -min(dys))
    y_hi = img.height - 1
    if x_lo > x_hi or y_lo > y_hi:
        raise ValueError("image too small for the requested neighborhood")

    b = img.pixels.astype(np.float64)
    h = y_hi - y_lo + 1
    w = x_hi - x_lo + 1

    def window(dx: int, dy: int) -> np.ndarray:
        return b[y_lo + dy : y_lo + dy + h, x_lo + dx : x_lo + dx + w]

    base = window(*offs[0])
    target = ((window(0, 0) - base) / 100.0).ravel()
    columns = [((window(dx, dy) - base) / 100.0).ravel() for dx, dy in offs[1:]]
    return TrainingMatrix(target, np.column_stack(columns))


def xy_dataset(img: GrayImage) -> TrainingMatrix:
    """One row per pixel: inputs (x, y) normalized to [0,1], target B/255."""
    xs = np.arange(img.width, dtype=np.float64)
    ys = np.arange(img.height, dtype=np.float64)
    xs = xs / (img.width - 1) if img.width > 1 else np.zeros_like(xs)
    ys = ys / (img.height - 1) if img.height > 1 else np.zeros_like(ys)
    gx, gy = np.meshgrid(xs, ys)
    inputs = np.column_stack([gx.ravel(), gy.ravel()])
    target = img.pixels.astype(np.float64).ravel() / 255.0
    return TrainingMatrix(target, inputs)
