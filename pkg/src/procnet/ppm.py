"""Binary netpbm image I/O: PPM (P6) colour and PGM (P5) greyscale."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _read_header(data: bytes, magic: bytes) -> tuple[int, int, int, int]:
    if not data.startswith(magic):
        raise ValueError(f"expected {magic.decode()} image")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError("only 8-bit images supported")
    return width, height, maxval, pos


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, _, pos = _read_header(data, b"P6")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).copy()


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("PPM image must have shape (h, w, 3)")
    h, w = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    width, height, _, pos = _read_header(data, b"P5")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return pixels.reshape(height, width).copy()


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    if image.ndim != 2:
        raise ValueError("PGM image must have shape (h, w)")
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())
