"""Command-line entry point: ``lesionbench generate|baseline|evaluate|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__, evaluation, io, rng, scene
from .lesions import SynthConfig

log = logging.getLogger("lesionbench")


def _add_generate(sub):
    p = sub.add_parser("generate", help="generate a synthetic lesion dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--phantom", type=int, metavar="N", help="use N synthetic phantom backgrounds (default 10)")
    src.add_argument("--backgrounds", metavar="DIR", help="directory of grayscale background slices")
    p.add_argument("--num-images", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--w", type=float, default=0.5, help="lesion intensity scale")
    p.add_argument("--min-lesions", type=int, default=3)
    p.add_argument("--max-lesions", type=int, default=5)
    p.add_argument("--brain-threshold", type=float, default=0.1)
    p.add_argument("--split", type=float, nargs=3, default=(0.6, 0.2, 0.2), metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--compose", choices=[m.value for m in scene.ComposeMode], default="additive")
    p.add_argument("--black-frac-max", type=float, default=0.55)
    p.add_argument("--mean-target", type=float, default=0.25)
    p.add_argument("--size", type=int, default=270, help="background side length")
    p.add_argument("--noise-size", type=int, default=256)
    p.add_argument("--blur1", type=float, default=2.0, help="noise smoothing radius")
    p.add_argument("--blur2", type=float, default=0.75, help="lesion edge smoothing radius")
    p.add_argument("--area-min", type=int, default=49)
    p.add_argument("--area-max", type=int, default=49)
    p.add_argument("--margin", type=int, default=2)
    p.add_argument("--regular-min-c", type=float, default=0.8)
    p.add_argument("--irregular-max-c", type=float, default=0.4)
    p.add_argument("--max-noise-images", type=int, default=10000)
    p.add_argument("--erosion-mode", choices=["split", "single"], default="split")
    p.set_defaults(func=run_generate)


def _add_baseline(sub):
    p = sub.add_parser("baseline", help="write model-free baseline heat maps")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--method", required=True, choices=[m.value for m in evaluation.BaselineMethod])
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int, default=0, help="seed for the random baseline")
    p.add_argument("--split", choices=scene.SPLITS)
    p.add_argument("--format", choices=["lhm", "png"], default="lhm")
    p.add_argument("--viz-dir", metavar="DIR", help="also write display PNGs here")
    p.add_argument("--viz-b", type=float, default=0.5, help="display transform parameter")
    p.set_defaults(func=run_baseline)


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score heat maps against ground-truth masks")
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--heatmaps", required=True, metavar="DIR")
    p.add_argument("--predictions", nargs="*", default=[], metavar="CSV")
    p.add_argument("--run-id")
    p.add_argument("--split", choices=scene.SPLITS)
    p.add_argument("--out", required=True, metavar="CSV", help="per-sample CSV; summary JSON goes alongside")
    p.set_defaults(func=run_evaluate)


def _add_report(sub):
    p = sub.add_parser("report", help="merge evaluation results into a JSON report")
    p.add_argument("--results", nargs="+", required=True, metavar="CSV")
    p.add_argument("--out", metavar="JSON", help="write the report here instead of stdout")
    p.add_argument("--svg", nargs="?", const="", metavar="PATH", help="also render a boxplot SVG")
    p.set_defaults(func=run_report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionbench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_baseline(sub)
    _add_evaluate(sub)
    _add_report(sub)
    return parser


def dataset_config(args) -> scene.DatasetConfig:
    synth = SynthConfig(
        noise_size=args.noise_size,
        blur1_radius=args.blur1,
        blur2_radius=args.blur2,
        area_min=args.area_min,
        area_max=args.area_max,
        margin=args.margin,
        regular_min_c=args.regular_min_c,
        irregular_max_c=args.irregular_max_c,
        max_noise_images=args.max_noise_images,
        erosion_mode=args.erosion_mode,
    )
    phantom = None if args.backgrounds else (args.phantom if args.phantom is not None else 10)
    return scene.DatasetConfig(
        n_samples=args.num_images,
        master_seed=args.seed,
        w=args.w,
        lesions_min=args.min_lesions,
        lesions_max=args.max_lesions,
        brain_threshold=args.brain_threshold,
        split_fractions=tuple(args.split),
        compose_mode=args.compose,
        backgrounds_dir=args.backgrounds,
        phantom_count=phantom,
        black_frac_max=args.black_frac_max,
        mean_target=args.mean_target,
        image_size=args.size,
        synth=synth,
    )


def run_generate(args, parser) -> int:
    try:
        cfg = dataset_config(args)
    except ValueError as exc:
        parser.error(str(exc))
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    records = scene.build_dataset(cfg, args.out, jobs=args.jobs)
    labels = Counter(r.label for r in records)
    splits = Counter(r.split for r in records)
    print(
        f"wrote {len(records)} samples to {args.out} "
        f"(label 0: {labels[0]}, label 1: {labels[1]}; "
        + ", ".join(f"{s} {splits[s]}" for s in scene.SPLITS)
        + ")"
    )
    return 0


def run_baseline(args, parser) -> int:
    root = Path(args.dataset)
    samples = scene.read_manifest(root)
    if args.split:
        samples = [s for s in samples if s.split == args.split]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    viz = Path(args.viz_dir) if args.viz_dir else None
    if viz:
        viz.mkdir(parents=True, exist_ok=True)
    for s in samples:
        img = io.read_gray(root / s.image_path)
        heat = evaluation.baseline_heatmap(img, args.method, seed=rng.mix(args.seed, int(s.id)))
        if args.format == "lhm":
            io.write_lhm(out / f"{s.id}.lhm", heat)
        else:
            peak = heat.max()
            io.write_png16(out / f"{s.id}.png", heat / peak if peak > 0 else heat)
        if viz:
            a = np.abs(heat)
            peak = a.max()
            io.write_png16(viz / f"{s.id}.png", evaluation.viz_transform(a / peak if peak > 0 else a, args.viz_b))
    label = "random-uniform" if args.method == "random" else args.method
    print(f"wrote {len(samples)} {label} heat maps to {out}")
    return 0


def run_evaluate(args, parser) -> int:
    preds = [evaluation.read_predictions(p) for p in args.predictions]
    records, summary = evaluation.evaluate_run(
        args.dataset, args.heatmaps, preds, run_id=args.run_id, split=args.split
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    evaluation.write_records(out, records)
    evaluation.write_summary(out.with_suffix(".json"), summary)
    st = summary.precision
    acc = "n/a" if summary.accuracy is None else f"{summary.accuracy:.4f}"
    print(
        f"{summary.run_id}: {len(records)} evaluated, {summary.n_missing} missing, "
        f"accuracy {acc}, precision median {st.median:.4f} mean {st.mean:.4f}"
    )
    return 0


def run_report(args, parser) -> int:
    report = evaluation.build_report(args.results)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.svg is not None:
        svg = args.svg or (str(Path(args.out).with_suffix(".svg")) if args.out else "report.svg")
        evaluation.render_svg(args.results, svg)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args, parser)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"lesionbench {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
