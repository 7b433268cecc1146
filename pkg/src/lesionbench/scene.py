"""Backgrounds, lesion placement, composition and dataset assembly."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io as _stdio
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import io, raster, rng
from .lesions import LesionStamp, ShapeClass, SynthConfig, harvest_lesions

log = logging.getLogger(__name__)

MANIFEST_FIELDS = (
    "id", "label", "split", "n_lesions", "gt_pixels",
    "background_id", "seed", "image_path", "mask_path",
)
LESION_FIELDS = (
    "id", "lesion", "row", "col", "height", "width",
    "shape_class", "area", "compactness", "noise_seed", "component",
)
SPLITS = ("train", "val", "test")
MAX_INTENSITY = 0.7
LABELS = {ShapeClass.REGULAR: 0, ShapeClass.IRREGULAR: 1}


class ComposeMode(str, Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


class EmptyInputError(ValueError):
    pass


class PlacementError(RuntimeError):
    def __init__(self, stamp_index: int, message: str):
        self.stamp_index = stamp_index
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Background:
    image: np.ndarray
    background_id: str


@dataclass(frozen=True)
class Placement:
    stamp: LesionStamp
    row: int
    col: int


@dataclass(frozen=True)
class SceneSpec:
    label: int
    placements: tuple[Placement, ...]
    w: float = 0.5
    compose_mode: ComposeMode = ComposeMode.ADDITIVE


@dataclass(frozen=True)
class DatasetConfig:
    n_samples: int = 200
    master_seed: int = 0
    w: float = 0.5
    lesions_min: int = 3
    lesions_max: int = 5
    brain_threshold: float = 0.1
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    compose_mode: str = "additive"
    backgrounds_dir: str | None = None
    phantom_count: int | None = 10
    black_frac_max: float = 0.55
    mean_target: float = 0.25
    image_size: int = 270
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0 < self.w <= 1:
            raise ValueError("w must lie in (0, 1]")
        if not 1 <= self.lesions_min <= self.lesions_max:
            raise ValueError("need 1 <= lesions_min <= lesions_max")
        if len(self.split_fractions) != 3 or any(f < 0 for f in self.split_fractions):
            raise ValueError("split_fractions must be three non-negative numbers")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        ComposeMode(self.compose_mode)
        if (self.backgrounds_dir is None) == (self.phantom_count is None):
            raise ValueError("set exactly one of backgrounds_dir and phantom_count")
        if self.phantom_count is not None and self.phantom_count < 1:
            raise ValueError("phantom_count must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["split_fractions"] = list(self.split_fractions)
        return d


@dataclass
class SampleRecord:
    id: str
    label: int
    split: str
    n_lesions: int
    gt_pixels: int
    background_id: str
    seed: int
    image_path: str
    mask_path: str

    def row(self) -> dict:
        return dataclasses.asdict(self)


def derive(seed: int, tag: str) -> int:
    """Independent 64-bit stream seed named ``tag`` under ``seed``."""
    h = int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")
    return rng.splitmix64((seed & rng.MASK64) ^ h)


# -- backgrounds --------------------------------------------------------------

def phantom_background(seed: int, size: int = 270) -> Background:
    """Deterministic brain-like phantom of nested tissue ellipses in [0, 0.7]."""
    g = rng.generator(derive(seed, "phantom"))
    cy = size / 2 + g.uniform(-6, 6)
    cx = size / 2 + g.uniform(-6, 6)
    a = size * g.uniform(0.41, 0.44)  # vertical semi-axis
    b = size * g.uniform(0.35, 0.38)
    theta = g.uniform(-0.15, 0.15)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    ry = dy * np.cos(theta) + dx * np.sin(theta)
    rx = -dy * np.sin(theta) + dx * np.cos(theta)
    rho = np.sqrt((ry / a) ** 2 + (rx / b) ** 2)

    img = np.zeros((size, size))
    img[rho <= 1.0] = 0.35  # scalp
    img[rho <= 0.93] = 0.22  # CSF
    img[rho <= 0.86] = 0.45  # grey matter
    img[rho <= 0.55] = 0.62  # white matter
    for side in (-1.0, 1.0):
        vy = (ry + 0.05 * a) / (0.22 * a)
        vx = (rx - side * 0.09 * b) / (0.06 * b)
        img[vy * vy + vx * vx <= 1.0] = 0.24  # ventricles

    head = raster.gaussian_blur((rho <= 1.0).astype(np.float64), 2.0)
    texture = raster.gaussian_blur(g.random((size, size)), 6.0)
    texture = (texture - texture.mean()) / (texture.std() + 1e-12)
    img = raster.gaussian_blur(img, 1.5) + 0.025 * texture * head
    img = np.clip(img, 0.0, None)
    img[head < 1e-3] = 0.0
    img *= MAX_INTENSITY / img.max()
    return Background(np.clip(img, 0.0, MAX_INTENSITY), f"phantom-{seed & rng.MASK64:016x}")


def black_fraction(img) -> float:
    return float(np.mean(np.asarray(img) <= 1.0 / 255.0))


def prepare_slice(img, cfg: DatasetConfig) -> np.ndarray | None:
    """Filter, fit and normalise one slice; None if it is mostly black."""
    img = raster.as_gray(img)
    if black_fraction(img) >= cfg.black_frac_max:
        return None
    out = raster.center_fit(img, cfg.image_size)
    nz = out[out > 0]
    if nz.size:
        out = out * (cfg.mean_target / nz.mean())
    return np.clip(out, 0.0, MAX_INTENSITY)


def ingest_backgrounds(directory, cfg: DatasetConfig) -> list[Background]:
    """Backgrounds from every readable grayscale image in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyInputError(f"{directory}: not a directory")
    out = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() not in io.IMAGE_EXTS:
            continue
        try:
            img = io.read_gray(path)
        except Exception as exc:  # unreadable files are skipped, not fatal
            log.warning("skipping %s: %s", path.name, exc)
            continue
        prepared = prepare_slice(img, cfg)
        if prepared is None:
            log.info("rejecting %s: black fraction >= %.2f", path.name, cfg.black_frac_max)
            continue
        out.append(Background(prepared, path.stem))
    if not out:
        raise EmptyInputError(f"{directory}: no usable background slices")
    return out


# -- scenes -------------------------------------------------------------------

def place_lesions(
    bg: Background,
    stamps,
    gen: np.random.Generator,
    *,
    brain_threshold: float = 0.1,
    w: float = 0.5,
    compose_mode: ComposeMode | str = ComposeMode.ADDITIVE,
    max_attempts: int = 200,
    max_restarts: int = 20,
) -> SceneSpec:
    """Rejection-sample non-overlapping in-brain offsets for ``stamps``.

    Every nonzero stamp pixel must land on the brain mask, and footprints
    keep at least one pixel of clearance so each lesion stays its own
    8-connected component in the ground-truth mask.
    """
    stamps = list(stamps)
    if not stamps:
        raise ValueError("need at least one stamp")
    classes = {s.shape_class for s in stamps}
    if len(classes) != 1 or ShapeClass.DISCARD in classes:
        raise ValueError(f"stamps must share one lesion class, got {sorted(c.value for c in classes)}")
    label = LABELS[classes.pop()]
    brain = np.asarray(bg.image) > brain_threshold
    H, W = brain.shape
    feet = [s.image > 0 for s in stamps]
    halos = [np.pad(f, 1) for f in feet]
    halos = [raster.dilate(h) for h in halos]

    failed = 0
    for _ in range(max_restarts + 1):
        occupied = np.zeros((H + 2, W + 2), dtype=bool)
        placed = []
        for idx, (stamp, foot, halo) in enumerate(zip(stamps, feet, halos)):
            h, wd = foot.shape
            if h > H or wd > W:
                raise PlacementError(idx, f"stamp {idx} ({h}x{wd}) larger than background")
            for _ in range(max_attempts):
                r = int(gen.integers(0, H - h + 1))
                c = int(gen.integers(0, W - wd + 1))
                if not brain[r : r + h, c : c + wd][foot].all():
                    continue
                if occupied[r + 1 : r + 1 + h, c + 1 : c + 1 + wd][foot].any():
                    continue
                occupied[r : r + h + 2, c : c + wd + 2] |= halo
                placed.append(Placement(stamp, r, c))
                break
            else:
                failed = idx
                break
        else:
            return SceneSpec(label, tuple(placed), w, ComposeMode(compose_mode))
    raise PlacementError(failed, f"could not place stamp {failed} after {max_restarts} restarts")


def lesion_map(shape, scene: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled stamp intensities and their nonzero footprint."""
    L = np.zeros(shape)
    for p in scene.placements:
        h, w = p.stamp.shape
        region = L[p.row : p.row + h, p.col : p.col + w]
        np.maximum(region, p.stamp.image, out=region)
    return L, L > 0


def compose(bg: Background, scene: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Composite image and ground-truth mask for a scene."""
    B = np.asarray(bg.image, dtype=np.float64)
    unit, mask = lesion_map(B.shape, scene)
    L = scene.w * unit
    if scene.w == 0:
        out = B.copy()
    elif scene.compose_mode is ComposeMode.ADDITIVE:
        out = np.clip(B + L, 0.0, 1.0)
    else:
        out = B.copy()
        out[mask] = np.clip(B[mask] * (1.0 - unit[mask]) + L[mask], 0.0, 1.0)
    return out, mask


# -- dataset ------------------------------------------------------------------

def split_backgrounds(ids, fractions, seed: int) -> dict[str, str]:
    """Assign whole backgrounds to train/val/test by the given fractions."""
    n = len(ids)
    order = rng.generator(derive(seed, "split")).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = min(n - n_train, int(round(fractions[1] * n)))
    out = {}
    for rank, i in enumerate(order):
        if rank < n_train:
            out[ids[i]] = "train"
        elif rank < n_train + n_val:
            out[ids[i]] = "val"
        else:
            out[ids[i]] = "test"
    return out


def sample_label(index: int) -> int:
    return index % 2


def sample_background(index: int, n_backgrounds: int) -> int:
    # consecutive pairs share a background, so each one carries both labels
    return (index // 2) % n_backgrounds


def make_sample(index: int, bg: Background, cfg: DatasetConfig):
    """Build one sample: (image, mask, scene, seed)."""
    seed = rng.mix(cfg.master_seed, index)
    gen = rng.generator(seed)
    n = int(gen.integers(cfg.lesions_min, cfg.lesions_max + 1))
    label = sample_label(index)
    want = (n, 0) if label == 0 else (0, n)
    stamps = harvest_lesions(derive(seed, "lesions"), *want, cfg.synth)
    scene = place_lesions(
        bg, stamps, gen,
        brain_threshold=cfg.brain_threshold, w=cfg.w, compose_mode=cfg.compose_mode,
    )
    image, mask = compose(bg, scene)
    return image, mask, scene, seed


def id_width(n_samples: int) -> int:
    return max(5, len(str(n_samples - 1)))


_WORKER_STATE: dict = {}


def _init_worker(backgrounds, cfg, out_dir):
    _WORKER_STATE["bgs"] = backgrounds
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["out"] = Path(out_dir)


def _build_one(index: int):
    bgs = _WORKER_STATE["bgs"]
    cfg: DatasetConfig = _WORKER_STATE["cfg"]
    out: Path = _WORKER_STATE["out"]
    bg = bgs[sample_background(index, len(bgs))]
    image, mask, scene, seed = make_sample(index, bg, cfg)
    sid = str(index).zfill(id_width(cfg.n_samples))
    io.write_png16(out / "images" / f"{sid}.png", image)
    io.write_mask(out / "masks" / f"{sid}.png", mask)
    lesions = [
        (sid, k, p.row, p.col, p.stamp.shape[0], p.stamp.shape[1], p.stamp.shape_class.value,
         p.stamp.area, repr(p.stamp.compactness), p.stamp.seed, p.stamp.component)
        for k, p in enumerate(scene.placements)
    ]
    return (sid, scene.label, len(scene.placements), int(mask.sum()), bg.background_id, seed), lesions


def load_backgrounds(cfg: DatasetConfig) -> list[Background]:
    if cfg.backgrounds_dir is not None:
        return ingest_backgrounds(cfg.backgrounds_dir, cfg)
    root = derive(cfg.master_seed, "backgrounds")
    return [phantom_background(rng.mix(root, k), cfg.image_size) for k in range(cfg.phantom_count)]


def _csv_text(header, rows) -> str:
    buf = _stdio.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def build_dataset(cfg: DatasetConfig, out_dir, jobs: int = 1) -> list[SampleRecord]:
    """Generate the full dataset under ``out_dir`` and return its manifest rows.

    Output bytes depend only on ``cfg``; ``jobs`` only changes the speed.
    On failure an ``INCOMPLETE`` marker describing the error is left behind.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE"
    marker.write_text("generation in progress\n")
    try:
        bgs = load_backgrounds(cfg)
        ids = [b.background_id for b in bgs]
        if len(set(ids)) != len(ids):
            raise ValueError("background ids are not unique")
        split_of = split_backgrounds(ids, cfg.split_fractions, cfg.master_seed)

        indices = range(cfg.n_samples)
        if jobs <= 1:
            _init_worker(bgs, cfg, out)
            results = [_build_one(i) for i in indices]
        else:
            with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(bgs, cfg, str(out))) as ex:
                results = list(ex.map(_build_one, indices, chunksize=max(1, cfg.n_samples // (4 * jobs))))

        records = []
        lesion_rows = []
        for (sid, label, n_les, gt, bg_id, seed), lesions in results:
            records.append(SampleRecord(
                id=sid, label=label, split=split_of[bg_id], n_lesions=n_les, gt_pixels=gt,
                background_id=bg_id, seed=seed,
                image_path=f"images/{sid}.png", mask_path=f"masks/{sid}.png",
            ))
            lesion_rows.extend(lesions)

        (out / "manifest.csv").write_text(
            _csv_text(MANIFEST_FIELDS, [[getattr(r, f) for f in MANIFEST_FIELDS] for r in records])
        )
        (out / "lesions.csv").write_text(_csv_text(LESION_FIELDS, lesion_rows))
        meta = {
            "format": "lesionbench-dataset/1",
            "config": cfg.to_dict(),
            "backgrounds": {bid: split_of[bid] for bid in ids},
        }
        (out / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except BaseException as exc:
        marker.write_text(f"generation failed: {type(exc).__name__}: {exc}\n")
        raise
    marker.unlink()
    return records


def read_manifest(path) -> list[SampleRecord]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.csv"
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        SampleRecord(
            id=r["id"], label=int(r["label"]), split=r["split"], n_lesions=int(r["n_lesions"]),
            gt_pixels=int(r["gt_pixels"]), background_id=r["background_id"], seed=int(r["seed"]),
            image_path=r["image_path"], mask_path=r["mask_path"],
        )
        for r in rows
    ]
