"""Lesion stamps grown from seeded white noise.

A noise image is smoothed, Otsu-binarised, eroded and opened.  Connected
components of the right size whose compactness is high become regular
lesions.  A further erosion of the same binary image yields the irregular
lesions (low compactness).  Each accepted shape is padded, softened with a
small Gaussian and peak-normalised into a stamp.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import raster, rng


class ShapeClass(str, Enum):
    REGULAR = "regular"
    IRREGULAR = "irregular"
    DISCARD = "discard"


class LesionExhaustedError(RuntimeError):
    """Raised when the noise-image budget runs out before a quota is met."""

    def __init__(self, shape_class: ShapeClass, have: int, want: int, images: int):
        self.shape_class = shape_class
        super().__init__(
            f"only {have} of {want} {shape_class.value} lesions found "
            f"in {images} noise images"
        )


@dataclass(frozen=True)
class SynthConfig:
    noise_size: int = 256
    blur1_radius: float = 2.0
    blur2_radius: float = 0.75
    area_min: int = 49
    area_max: int = 49
    margin: int = 2
    regular_min_c: float = 0.8
    irregular_max_c: float = 0.4
    max_noise_images: int = 10000
    # "split": regular shapes are taken before the second erosion, irregular
    # shapes after it.  "single": both classes come from the twice-eroded image.
    erosion_mode: str = "split"

    def __post_init__(self):
        if self.noise_size < 16:
            raise ValueError("noise_size must be >= 16")
        if not (0 < self.irregular_max_c < self.regular_min_c):
            raise ValueError("need 0 < irregular_max_c < regular_min_c")
        if not (1 <= self.area_min <= self.area_max):
            raise ValueError("need 1 <= area_min <= area_max")
        if self.blur1_radius <= 0 or self.blur2_radius <= 0:
            raise ValueError("blur radii must be positive")
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.erosion_mode not in ("split", "single"):
            raise ValueError(f"unknown erosion_mode {self.erosion_mode!r}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class LesionStamp:
    image: np.ndarray  # float64, soft stamp, max == 1
    support: np.ndarray  # bool, pre-smoothing shape, same shape as image
    shape_class: ShapeClass
    area: int
    compactness: float
    seed: int  # seed of the noise image the shape came from
    component: int  # label of the shape within that noise image

    @property
    def shape(self) -> tuple[int, int]:
        return self.image.shape

    def __eq__(self, other):
        if not isinstance(other, LesionStamp):
            return NotImplemented
        return (
            self.shape_class == other.shape_class
            and self.area == other.area
            and self.compactness == other.compactness
            and self.seed == other.seed
            and self.component == other.component
            and np.array_equal(self.image, other.image)
            and np.array_equal(self.support, other.support)
        )


def make_noise(seed: int, size: int = 256) -> np.ndarray:
    """i.i.d. uniform [0, 1) noise image from the Philox stream of ``seed``."""
    if size < 16:
        raise ValueError(f"noise size must be >= 16, got {size}")
    return rng.generator(seed).random((size, size))


def _binarize(noise: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    smooth = raster.gaussian_blur(noise, cfg.blur1_radius)
    _, binary = raster.otsu_threshold(smooth)
    return raster.opening(raster.erode(binary))


def _candidates(binary: np.ndarray, cfg: SynthConfig):
    lm = raster.connected_components(binary, 8)
    out = []
    for st in raster.component_stats(lm):
        if cfg.area_min <= st.area <= cfg.area_max:
            r0, c0, r1, c1 = st.bbox
            cut = lm.labels[r0 : r1 + 1, c0 : c1 + 1] == st.label
            out.append((cut, st))
    return out


def extract_candidates(noise, cfg: SynthConfig = SynthConfig(), second_erosion: bool = True):
    """Size-filtered lesion candidates as ``(bbox cutout, stats)`` pairs.

    Pipeline: blur, Otsu, erode, open, then (by default) a second erosion,
    8-connected labeling and shape statistics.
    """
    binary = _binarize(raster.as_gray(noise), cfg)
    if second_erosion:
        binary = raster.erode(binary)
    return _candidates(binary, cfg)


def classify_shape(stats: raster.ComponentStats, cfg: SynthConfig = SynthConfig()) -> ShapeClass:
    c = stats.compactness
    if c > cfg.regular_min_c:
        return ShapeClass.REGULAR
    if c < cfg.irregular_max_c:
        return ShapeClass.IRREGULAR
    return ShapeClass.DISCARD


def finalize_stamp(
    support,
    shape_class: ShapeClass,
    stats: raster.ComponentStats,
    cfg: SynthConfig = SynthConfig(),
    seed: int = 0,
) -> LesionStamp:
    """Pad the shape by the margin, smooth it and rescale the peak to 1."""
    m = cfg.margin
    padded = np.pad(raster.as_binary(support), m, mode="constant")
    img = raster.gaussian_blur(padded.astype(np.float64), cfg.blur2_radius)
    img = img / img.max()
    return LesionStamp(
        image=img,
        support=padded,
        shape_class=ShapeClass(shape_class),
        area=int(stats.area),
        compactness=float(stats.compactness),
        seed=int(seed),
        component=int(stats.label),
    )


def lesions_from_noise(noise_seed: int, cfg: SynthConfig = SynthConfig(), classes=None):
    """All classified stamps one noise image yields, regular branch first.

    ``classes`` restricts the output (and the work done) to those classes.
    """
    classes = set(classes) if classes is not None else {ShapeClass.REGULAR, ShapeClass.IRREGULAR}
    binary = _binarize(make_noise(noise_seed, cfg.noise_size), cfg)
    if cfg.erosion_mode == "single":
        passes = [(raster.erode(binary), (ShapeClass.REGULAR, ShapeClass.IRREGULAR))]
    else:
        passes = [
            (binary, (ShapeClass.REGULAR,)),
            (raster.erode(binary), (ShapeClass.IRREGULAR,)),
        ]
    out = []
    for img, wanted in passes:
        wanted = classes.intersection(wanted)
        if not wanted:
            continue
        for cut, st in _candidates(img, cfg):
            cls = classify_shape(st, cfg)
            if cls in wanted:
                out.append(finalize_stamp(cut, cls, st, cfg, noise_seed))
    return out


def harvest_lesions(
    seed: int,
    want_regular: int,
    want_irregular: int,
    cfg: SynthConfig = SynthConfig(),
) -> list[LesionStamp]:
    """Collect exactly the requested number of stamps per class.

    Noise image ``i`` uses seed ``mix(seed, i)``; images are consumed in
    index order, so the result depends only on the arguments.  Regular
    stamps come first in the returned list.
    """
    if want_regular < 0 or want_irregular < 0:
        raise ValueError("lesion counts must be non-negative")
    regular: list[LesionStamp] = []
    irregular: list[LesionStamp] = []
    index = 0
    while len(regular) < want_regular or len(irregular) < want_irregular:
        if index >= cfg.max_noise_images:
            if len(irregular) < want_irregular:
                raise LesionExhaustedError(ShapeClass.IRREGULAR, len(irregular), want_irregular, index)
            raise LesionExhaustedError(ShapeClass.REGULAR, len(regular), want_regular, index)
        need = set()
        if len(regular) < want_regular:
            need.add(ShapeClass.REGULAR)
        if len(irregular) < want_irregular:
            need.add(ShapeClass.IRREGULAR)
        for stamp in lesions_from_noise(rng.mix(seed, index), cfg, need):
            if stamp.shape_class is ShapeClass.REGULAR:
                if len(regular) < want_regular:
                    regular.append(stamp)
            elif len(irregular) < want_irregular:
                irregular.append(stamp)
        index += 1
    return regular + irregular
