"""Scoring heat maps against ground-truth lesion masks.

Explanation performance is top-n precision: take the ``n`` pixels with the
largest absolute heat, where ``n`` is the mask size, and report the fraction
that fall inside the mask.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import io, raster, rng
from .scene import SampleRecord, read_manifest

log = logging.getLogger(__name__)

EVAL_FIELDS = ("id", "n_gt", "true_positives", "precision")


class BaselineMethod(str, Enum):
    SOBEL = "sobel"
    LAPLACE = "laplace"
    RANDOM = "random"


class EmptyEvaluationError(RuntimeError):
    pass


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True)
class EvalRecord:
    sample_id: str
    n_gt: int
    true_positives: int
    precision: float


@dataclass(frozen=True)
class BoxStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


@dataclass(frozen=True)
class PredictionSet:
    run_id: str
    predictions: dict[str, int]

    def __post_init__(self):
        bad = {k: v for k, v in self.predictions.items() if v not in (0, 1)}
        if bad:
            raise ValueError(f"{self.run_id}: predicted labels must be 0 or 1, got {bad}")


@dataclass
class RunSummary:
    run_id: str
    accuracy: float | None
    evaluated_ids: list[str]
    precision: BoxStats
    n_samples: int = 0
    n_missing: int = 0
    accuracies: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["precision"] = asdict(self.precision)
        return d


def top_n_precision(heat, mask, sample_id: str = "") -> EvalRecord:
    """Precision of the ``n_gt`` strongest ``|heat|`` pixels against ``mask``.

    Ties are broken by row-major index, so constant maps are deterministic.
    """
    s = np.abs(np.asarray(heat, dtype=np.float64))
    m = np.asarray(mask, dtype=bool)
    if s.shape != m.shape:
        raise ValueError(f"heat map shape {s.shape} does not match mask shape {m.shape}")
    if np.isnan(s).any():
        raise ValueError("heat map contains NaN")
    n = int(m.sum())
    if n == 0:
        raise ValueError("ground-truth mask is empty")
    flat, mflat = s.ravel(), m.ravel()
    # the n-th largest value splits the selection; pixels equal to it are
    # taken in row-major order until n are chosen
    cut = np.partition(flat, flat.size - n)[flat.size - n]
    above = flat > cut
    ties = np.flatnonzero(flat == cut)[: n - int(above.sum())]
    tp = int(mflat[above].sum()) + int(mflat[ties].sum())
    return EvalRecord(sample_id, n, tp, tp / n)


def viz_transform(s, b: float = 0.5):
    """Display transform ``-ln(1 - s(1 - 1/b)) / ln(b)``; maps [0, 1] onto [0, 1]."""
    if not 0.0 < b < 1.0:
        raise ValueError(f"b must lie in (0, 1), got {b}")
    arr = np.asarray(s, dtype=np.float64)
    if np.isnan(arr).any() or (arr < 0).any() or (arr > 1).any():
        raise ValueError("s must lie in [0, 1]")
    out = -np.log1p(-arr * (1.0 - 1.0 / b)) / math.log(b)
    return float(out) if out.ndim == 0 else out


def baseline_heatmap(img, method: BaselineMethod | str, seed: int = 0) -> np.ndarray:
    """Model-free heat map: Sobel or Laplace edges, or uniform noise."""
    method = BaselineMethod(method)
    arr = raster.as_gray(img)
    if method is BaselineMethod.RANDOM:
        return rng.generator(seed).random(arr.shape)
    return raster.edge_filter(arr, method.value)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation; raises on constant input."""
    x = [float(v) for v in xs]
    y = [float(v) for v in ys]
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValueError("need at least two points")
    if min(x) == max(x) or min(y) == max(y):
        raise DegenerateInputError("correlation undefined for a constant series")
    mx = math.fsum(x) / len(x)
    my = math.fsum(y) / len(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateInputError("correlation undefined for a constant series")
    return max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))


def _quantile(sorted_vals: list[float], p: float) -> float:
    pos = p * (len(sorted_vals) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(sorted_vals) - 1)
    frac = pos - lo
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * frac


def boxplot_stats(values) -> BoxStats:
    """Five-number summary plus mean; quantiles interpolate at ``p * (N - 1)``."""
    v = sorted(float(x) for x in values)
    if not v:
        raise ValueError("boxplot_stats needs at least one value")
    return BoxStats(
        min=v[0], q1=_quantile(v, 0.25), median=_quantile(v, 0.5),
        q3=_quantile(v, 0.75), max=v[-1], mean=math.fsum(v) / len(v),
    )


# -- runs ---------------------------------------------------------------------

def read_predictions(path, run_id: str | None = None) -> PredictionSet:
    path = Path(path)
    preds = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "predicted_label"]:
            raise ValueError(f"{path}:1: expected header 'id,predicted_label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields")
            try:
                preds[row[0]] = int(row[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad label {row[1]!r}") from None
    return PredictionSet(run_id or path.stem, preds)


def filter_correct(samples: list[SampleRecord], prediction_sets) -> tuple[list[SampleRecord], dict[str, float]]:
    """Samples every prediction set got right, and each set's accuracy.

    A sample missing from a prediction set counts as misclassified.
    """
    accuracies = {}
    keep = list(samples)
    for ps in prediction_sets:
        correct = {s.id for s in samples if ps.predictions.get(s.id) == s.label}
        accuracies[ps.run_id] = len(correct) / len(samples) if samples else 0.0
        keep = [s for s in keep if s.id in correct]
    return keep, accuracies


def evaluate_run(
    dataset,
    heatmap_dir,
    prediction_sets=(),
    run_id: str | None = None,
    split: str | None = None,
) -> tuple[list[EvalRecord], RunSummary]:
    """Score every heat map in ``heatmap_dir`` against the dataset masks.

    With prediction sets, only samples classified correctly by all of them
    are scored; the run's accuracy is that of the first set.
    """
    dataset = Path(dataset)
    root = dataset if dataset.is_dir() else dataset.parent
    samples = read_manifest(dataset)
    if split is not None:
        samples = [s for s in samples if s.split == split]
    prediction_sets = list(prediction_sets)
    retained, accuracies = filter_correct(samples, prediction_sets)

    records = []
    missing = []
    for s in sorted(retained, key=lambda s: s.id):
        path = io.find_heatmap(heatmap_dir, s.id)
        if path is None:
            missing.append(s.id)
            continue
        mask = io.read_mask(root / s.mask_path)
        records.append(top_n_precision(io.read_heatmap(path), mask, s.id))
    if missing:
        log.warning("%d heat maps missing, e.g. %s", len(missing), ", ".join(missing[:5]))
    if not records:
        raise EmptyEvaluationError("no samples left to evaluate")

    run_id = run_id or Path(heatmap_dir).name
    accuracy = accuracies[prediction_sets[0].run_id] if prediction_sets else None
    summary = RunSummary(
        run_id=run_id,
        accuracy=accuracy,
        evaluated_ids=[r.sample_id for r in records],
        precision=boxplot_stats(r.precision for r in records),
        n_samples=len(samples),
        n_missing=len(missing),
        accuracies=accuracies,
    )
    return records, summary


def write_records(path, records) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(EVAL_FIELDS)
        for r in records:
            wr.writerow([r.sample_id, r.n_gt, r.true_positives, repr(r.precision)])


def read_records(path) -> list[EvalRecord]:
    """Parse an evaluation CSV; errors name the file and line."""
    path = Path(path)
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EVAL_FIELDS:
            raise ValueError(f"{path}:1: expected header {','.join(EVAL_FIELDS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                n_gt, tp, prec = int(row[1]), int(row[2]), float(row[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if not (0 <= tp <= n_gt and n_gt >= 1 and 0.0 <= prec <= 1.0):
                raise ValueError(f"{path}:{lineno}: inconsistent record")
            out.append(EvalRecord(row[0], n_gt, tp, prec))
    return out


def write_summary(path, summary: RunSummary) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")


# -- reports ------------------------------------------------------------------

def build_report(result_paths) -> dict:
    """Merge evaluation CSVs into per-run box stats plus accuracy correlation.

    A run's accuracy is read from the summary JSON next to its CSV (same
    stem), when present.  With three or more runs that have an accuracy, the
    Pearson r between accuracy and mean precision is included.
    """
    runs = []
    for p in result_paths:
        p = Path(p)
        records = read_records(p)
        if not records:
            raise ValueError(f"{p}: no records")
        accuracy = None
        side = p.with_suffix(".json")
        if side.is_file():
            accuracy = json.loads(side.read_text()).get("accuracy")
        runs.append({
            "run_id": p.stem,
            "n": len(records),
            "accuracy": accuracy,
            "precision": asdict(boxplot_stats(r.precision for r in records)),
        })
    report: dict = {"runs": runs, "correlation": None}
    with_acc = [r for r in runs if r["accuracy"] is not None]
    if len(with_acc) >= 3:
        xs = [r["accuracy"] for r in with_acc]
        ys = [r["precision"]["mean"] for r in with_acc]
        try:
            r = pearson(xs, ys)
        except DegenerateInputError as exc:
            report["correlation"] = {"n_runs": len(with_acc), "pearson_r": None, "error": str(exc)}
        else:
            report["correlation"] = {"n_runs": len(with_acc), "pearson_r": r}
    return report


def render_svg(result_paths, out_path) -> None:
    """Boxplot of per-run precision as an SVG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "lesionbench"
    names, data = [], []
    for p in result_paths:
        names.append(Path(p).stem)
        data.append([r.precision for r in read_records(p)])
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 4.0))
    ax.boxplot(data)
    ax.set_xticks(range(1, len(names) + 1), names, rotation=30, ha="right")
    ax.set_ylabel("precision")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
