"""Raster operators: smoothing, thresholding, morphology, labeling, shape stats.

Images are 2-D numpy arrays indexed ``[row, col]``.  Gray images are
``float64`` with values in [0, 1]; binary images are ``bool``.  Every
function returns a new array and never mutates its input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._backend import kernels


class MorphOp(str, Enum):
    ERODE = "erode"
    DILATE = "dilate"
    OPEN = "open"


class EdgeKind(str, Enum):
    SOBEL = "sobel"
    LAPLACE = "laplace"


SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()
LAPLACE_4 = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray  # int32, 0 = background
    count: int

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class ComponentStats:
    label: int
    area: int
    perimeter: float
    bbox: tuple[int, int, int, int]  # row0, col0, row1, col1 (inclusive)
    compactness: float


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    return arr


def as_binary(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    return arr.astype(bool)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian truncated at ``ceil(3 * sigma)``."""
    half = int(math.ceil(3.0 * sigma))
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img, radius: float) -> np.ndarray:
    """Separable Gaussian smoothing with ``sigma = radius`` and replicated edges."""
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    arr = as_gray(img)
    k = gaussian_kernel(radius)
    half = len(k) // 2
    h, w = arr.shape
    tmp = kernels.correlate_rows(np.pad(arr, ((0, 0), (half, half)), mode="edge"), k, w)
    out = kernels.correlate_rows(np.pad(tmp.T, ((0, 0), (half, half)), mode="edge"), k, h)
    return out.T.copy()


def quantize(img) -> np.ndarray:
    """Map [0, 1] intensities onto 256 integer bins, ``floor(i * 255)``."""
    arr = as_gray(img)
    return np.clip(np.floor(arr * 255.0), 0, 255).astype(np.int64)


def otsu_threshold(img) -> tuple[int, np.ndarray]:
    """Otsu's method on 256 bins.

    Returns the bin index maximising between-class variance (lowest index on
    ties) and the binary image ``bin > threshold``.  When no split has
    positive variance the threshold is 255 and the result is all False.

    Scores are compared exactly in integer arithmetic: up to the constant
    ``1/N**2`` the between-class variance equals
    ``(s0*n1 - s1*n0)**2 / (n0*n1)`` with class counts ``n`` and bin sums ``s``.
    """
    bins = quantize(img)
    hist = np.bincount(bins.ravel(), minlength=256).tolist()
    total = sum(hist)
    total_sum = sum(i * h for i, h in enumerate(hist))
    best_t = 255
    best_num, best_den = 0, 1
    n0 = s0 = 0
    for t in range(255):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (s0 * n1 - (total_sum - s0) * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t, bins > best_t


def structuring_element(size: int = 3) -> np.ndarray:
    """Solid square structuring element of odd side ``size``."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"structuring element size must be odd and positive, got {size}")
    return np.ones((size, size), dtype=bool)


def _check_se(se) -> np.ndarray:
    se = np.asarray(se, dtype=bool)
    if se.ndim != 2 or se.shape[0] % 2 == 0 or se.shape[1] % 2 == 0:
        raise ValueError(f"structuring element must be odd-sized, got shape {se.shape}")
    if not se[se.shape[0] // 2, se.shape[1] // 2]:
        raise ValueError("structuring element centre must be set")
    return se


def _shifted(img: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """``out[r, c] = img[r + dr, c + dc]``, False outside the image."""
    h, w = img.shape
    out = np.zeros_like(img)
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r0 < r1 and c0 < c1:
        out[r0:r1, c0:c1] = img[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return out


def _offsets(se: np.ndarray):
    cy, cx = se.shape[0] // 2, se.shape[1] // 2
    return [(r - cy, c - cx) for r, c in zip(*np.nonzero(se))]


def erode(img, se=None) -> np.ndarray:
    se = structuring_element() if se is None else _check_se(se)
    src = as_binary(img)
    out = np.ones_like(src)
    for dr, dc in _offsets(se):
        out &= _shifted(src, dr, dc)
    return out


def dilate(img, se=None) -> np.ndarray:
    se = structuring_element() if se is None else _check_se(se)
    src = as_binary(img)
    out = np.zeros_like(src)
    for dr, dc in _offsets(se):
        out |= _shifted(src, -dr, -dc)
    return out


def opening(img, se=None) -> np.ndarray:
    return dilate(erode(img, se), se)


def morphology(img, kind: MorphOp | str, se=None) -> np.ndarray:
    """Binary erosion, dilation or opening; pixels outside the image are False."""
    kind = MorphOp(kind)
    if kind is MorphOp.ERODE:
        return erode(img, se)
    if kind is MorphOp.DILATE:
        return dilate(img, se)
    return opening(img, se)


def connected_components(img, connectivity: int = 8) -> LabelMap:
    """Label connected True regions 1..count in first-encounter raster order."""
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, count = kernels.label(as_binary(img).view(np.uint8), connectivity)
    return LabelMap(labels=labels, count=int(count))


def compactness(area: float, perimeter: float) -> float:
    return 4.0 * math.pi * area / (perimeter * perimeter)


def component_stats(lm: LabelMap) -> list[ComponentStats]:
    """Area, traced contour length, bounding box and compactness per component."""
    area, bbox, perim = kernels.component_table(lm.labels, lm.count)
    return [
        ComponentStats(
            label=i + 1,
            area=int(area[i]),
            perimeter=float(perim[i]),
            bbox=tuple(int(v) for v in bbox[i]),
            compactness=compactness(float(area[i]), float(perim[i])),
        )
        for i in range(lm.count)
    ]


def shape_stats(support) -> ComponentStats:
    """Stats of a binary image holding exactly one 8-connected shape."""
    lm = connected_components(support, 8)
    if lm.count != 1:
        raise ValueError(f"expected exactly one component, found {lm.count}")
    return component_stats(lm)[0]


def edge_filter(img, kind: EdgeKind | str) -> np.ndarray:
    """Sobel gradient magnitude or absolute 4-neighbour Laplacian.

    Kernels are evaluated as differences of neighbour sums, so constant
    regions give exactly zero.
    """
    kind = EdgeKind(kind)
    arr = as_gray(img)
    if arr.shape[0] < 3 or arr.shape[1] < 3:
        raise ValueError(f"edge filters need at least a 3x3 image, got {arr.shape}")
    h, w = arr.shape
    p = np.pad(arr, 1, mode="edge")

    def at(dr: int, dc: int) -> np.ndarray:
        return p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]

    if kind is EdgeKind.SOBEL:
        gx = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1))
        gy = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1))
        return np.sqrt(gx * gx + gy * gy)
    c = at(0, 0)
    return np.abs((at(-1, 0) - c) + (at(1, 0) - c) + (at(0, -1) - c) + (at(0, 1) - c))


def _fit_axis(n: int, target: int) -> tuple[int, int, int, int]:
    """(pad_before, pad_after, crop_before, crop_after) for one axis."""
    if n < target:
        extra = target - n
        return extra // 2, extra - extra // 2, 0, 0
    extra = n - target
    return 0, 0, extra // 2, extra - extra // 2


def center_fit(img, target: int = 270) -> np.ndarray:
    """Zero-pad or crop each axis about the centre to ``target`` pixels.

    Odd remainders put the extra row/column at the bottom/right.
    """
    if target < 1:
        raise ValueError(f"target must be >= 1, got {target}")
    arr = np.asarray(img)
    h, w = arr.shape
    pt, pb, ct, cb = _fit_axis(h, target)
    pl, pr, cl, cr = _fit_axis(w, target)
    arr = arr[ct : h - cb, cl : w - cr]
    return np.pad(arr, ((pt, pb), (pl, pr)), mode="constant")
