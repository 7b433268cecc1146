"""Image and heat-map file formats.

``.lhm`` heat maps are ``b"LHM1"``, then width and height as little-endian
uint32, then ``width * height`` little-endian float32 values in row-major
order.  PNG heat maps are 16-bit grayscale read as ``value / 65535``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

LHM_MAGIC = b"LHM1"
IMAGE_EXTS = (".png", ".tif", ".tiff", ".pgm", ".bmp", ".jpg", ".jpeg")


class FormatError(ValueError):
    pass


def read_gray(path) -> np.ndarray:
    """Grayscale image scaled to [0, 1]; 8-bit by /255, 16-bit by /65535."""
    with Image.open(path) as im:
        mode = im.mode
        if mode in ("I;16", "I;16B", "I;16L", "I;16N"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
        elif mode == "I":
            raw = np.asarray(im, dtype=np.float64)
            arr = raw / (65535.0 if raw.max(initial=0) > 255 else 255.0)
        elif mode == "F":
            arr = np.asarray(im, dtype=np.float64)
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    if arr.ndim != 2:
        raise FormatError(f"{path}: not a single-channel image")
    return np.clip(arr, 0.0, 1.0)


def write_png16(path, img) -> None:
    arr = np.round(np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0) * 65535.0)
    Image.fromarray(arr.astype(np.uint16)).save(path, format="PNG")


def write_mask(path, mask) -> None:
    arr = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def read_mask(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def write_lhm(path, heat) -> None:
    arr = np.asarray(heat, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"heat map must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(LHM_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_lhm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != LHM_MAGIC:
        raise FormatError(f"{path}: missing LHM1 header")
    w, h = struct.unpack("<II", data[4:12])
    if len(data) != 12 + 4 * w * h:
        raise FormatError(f"{path}: expected {w}x{h} floats, file has {len(data) - 12} payload bytes")
    return np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w).astype(np.float64)


def read_heatmap(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".lhm":
        return read_lhm(path)
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I;16B", "I;16L", "I;16N", "I"):
            raise FormatError(f"{path}: heat-map PNGs must be 16-bit grayscale, got mode {im.mode}")
        return np.asarray(im, dtype=np.float64) / 65535.0


def find_heatmap(directory, sample_id: str):
    """Path of the heat map for ``sample_id`` (``.lhm`` preferred) or None."""
    directory = Path(directory)
    for ext in (".lhm", ".png"):
        p = directory / f"{sample_id}{ext}"
        if p.is_file():
            return p
    return None
