"""histokit command line.

Every subcommand writes a JSON run report next to its primary output
(<output>.run.json, or run_report.json inside output directories) recording
inputs, seed, versions and summary metrics -- also on partial failure, where
the exit code is 1 and each failing tile gets a one-line diagnostic. Usage
errors exit 2. Randomized subcommands always have an explicit or defaulted
seed, echoed in the report; tile-level parallelism (--jobs, default from
HISTOKIT_JOBS) never changes the output bytes.
"""

import argparse
import csv
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    FEATURE_NAMES,
    classification_accuracy,
    extract_features,
    load_probmap,
    read_features_csv,
    save_probmap,
    write_features_csv,
)
from .forest import classify_wsi, fit_classifier, load_model, predict_score, save_model
from .imaging import (
    HistokitError,
    load_binary_mask,
    load_labeled_mask,
    load_rgb,
    save_binary_mask,
    save_labeled_mask,
    save_rgb,
)
from .metrics import score_tile
from .patches import gen_nbd, gen_nbl, gen_sn
from .rng import derive_seed
from .segmentation import SegmentationConfig, segment_instances
from .stain import StainStats, reinhard_normalize
from .synth import SynthSlideSpec, SynthTileSpec, gen_synthetic_probmap, gen_synthetic_tile


def _default_jobs():
    return int(os.environ.get("HISTOKIT_JOBS", "1"))


def _versions():
    return {
        "histokit": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def _write_report(path, subcommand, inputs, summary, failures=(), seed=None):
    payload = {
        "subcommand": subcommand,
        "inputs": inputs,
        "seed": seed,
        "versions": _versions(),
        "summary": summary,
        "failures": list(failures),
        "status": "partial" if failures else "ok",
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_tiles(work, jobs, fail_fast):
    """Run (key, thunk) pairs, in parallel when jobs > 1.

    Returns (results dict, failures list of one-line diagnostics); results
    depend only on the work items, never on the job count.
    """
    results = {}
    failures = []

    def run_one(key, thunk):
        try:
            return key, thunk(), None
        except Exception as exc:  # pragma: no cover - defensive per-tile guard
            return key, None, f"{key}: {exc}"

    if jobs <= 1:
        iterator = (run_one(k, t) for k, t in work)
    else:
        pool = ThreadPoolExecutor(max_workers=jobs)
        iterator = pool.map(lambda kt: run_one(*kt), work)
    for key, value, err in iterator:
        if err is None:
            results[key] = value
        else:
            print(err, file=sys.stderr)
            failures.append(err)
            if fail_fast:
                break
    if jobs > 1:
        pool.shutdown()
    return results, failures


def _pair_dirs(gt_dir, pred_dir, allow_missing):
    gt = {p.stem: p for p in sorted(Path(gt_dir).glob("*.png"))}
    pred = {p.stem: p for p in sorted(Path(pred_dir).glob("*.png"))}
    missing = sorted(set(gt) ^ set(pred))
    if missing and not allow_missing:
        raise HistokitError(
            f"unmatched tiles between {gt_dir} and {pred_dir}: {', '.join(missing)}"
        )
    common = sorted(set(gt) & set(pred))
    if not common:
        raise HistokitError(f"no tile pairs found between {gt_dir} and {pred_dir}")
    return [(stem, gt[stem], pred[stem]) for stem in common], missing


# ---------------------------------------------------------------------------
# subcommands


def _cmd_normalize(args):
    target = StainStats.from_json(args.target)
    image = load_rgb(args.input)
    save_rgb(args.output, reinhard_normalize(image, target))
    _write_report(
        args.output + ".run.json",
        "normalize",
        {"input": args.input, "target": args.target, "output": args.output},
        {"height": image.shape[0], "width": image.shape[1]},
    )
    return 0


def _cmd_segment(args):
    cfg = SegmentationConfig(
        mpp=args.mpp,
        border_dilation_kernel=args.kernel,
        min_area_um2=args.min_area_um2,
        watershed_smoothing=args.smoothing,
    )
    report = {}
    blob = load_binary_mask(args.blob)
    border = load_binary_mask(args.border)
    labels = segment_instances(blob, border, cfg, report=report)
    save_labeled_mask(args.output, labels)
    _write_report(
        args.report or args.output + ".run.json",
        "segment",
        {
            "blob": args.blob,
            "border": args.border,
            "output": args.output,
            "mpp": args.mpp,
            "min_area_um2": args.min_area_um2,
        },
        report,
    )
    return 0


def _cmd_eval_seg(args):
    pairs, missing = _pair_dirs(args.gt_dir, args.pred_dir, args.allow_missing)

    def score(gt_path, pred_path):
        tile = score_tile(load_labeled_mask(gt_path), load_labeled_mask(pred_path))
        return tile.dice1, tile.dice2, tile.average

    results, failures = _run_tiles(
        [(stem, lambda g=gt, p=pred: score(g, p)) for stem, gt, pred in pairs],
        args.jobs,
        args.fail_fast,
    )
    rows = [(stem, *results[stem]) for stem, _, _ in pairs if stem in results]
    summary = {}
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tile", "dice1", "dice2", "average"])
        for stem, d1, d2, avg in rows:
            writer.writerow([stem, repr(d1), repr(d2), repr(avg)])
        if rows:
            mean1 = float(np.mean([r[1] for r in rows]))
            mean2 = float(np.mean([r[2] for r in rows]))
            dataset = float(np.mean([r[3] for r in rows]))
            writer.writerow(["dataset_mean", repr(mean1), repr(mean2), repr(dataset)])
            summary = {"tiles": len(rows), "dataset_score": dataset, "skipped": missing}
    _write_report(
        args.out + ".run.json",
        "eval-seg",
        {"gt_dir": args.gt_dir, "pred_dir": args.pred_dir, "out": args.out},
        summary,
        failures,
    )
    return 1 if failures else 0


def _cmd_gen_patches(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs, _ = _pair_dirs(args.tiles, args.masks, allow_missing=False)

    def generate(tile_index, stem, tile_path, mask_path):
        tile = load_rgb(tile_path)
        mask = load_labeled_mask(mask_path)
        if args.dataset == "nbd":
            patches = gen_nbd(tile, mask)
        else:
            nbl = gen_nbl(tile, mask, seed=derive_seed(int(args.seed), tile_index))
            patches = nbl if args.dataset == "nbl" else gen_sn(nbl)
        manifest = []
        for idx, patch in enumerate(patches):
            patch_id = f"{stem}_{args.dataset}_{idx:04d}"
            save_rgb(out_dir / f"{patch_id}.png", patch.image)
            save_labeled_mask(out_dir / f"{patch_id}_mask.png", patch.mask)
            manifest.append(
                [patch_id, stem, patch.origin[0], patch.origin[1], args.dataset]
            )
        return manifest

    work = [
        (stem, lambda i=i, s=stem, t=tile, m=mask: generate(i, s, t, m))
        for i, (stem, tile, mask) in enumerate(pairs)
    ]
    results, failures = _run_tiles(work, args.jobs, args.fail_fast)
    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patch_id", "source_tile", "origin_row", "origin_col", "dataset"])
        for stem, *_ in pairs:
            for row in results.get(stem, []):
                writer.writerow(row)
    _write_report(
        out_dir / "run_report.json",
        "gen-patches",
        {"tiles": args.tiles, "masks": args.masks, "out": args.out, "dataset": args.dataset},
        {"tiles": len(pairs), "patches": sum(len(v) for v in results.values())},
        failures,
        seed=int(args.seed),
    )
    return 1 if failures else 0


def _collect_probmaps(paths):
    found = []
    for p in paths:
        path = Path(p)
        if path.is_dir():
            found.extend(sorted(path.glob("*.probmap.json")))
        else:
            found.append(path)
    return found


def _cmd_extract_features(args):
    labels = {}
    if args.labels:
        with open(args.labels, newline="") as fh:
            for row in csv.DictReader(fh):
                labels[row["slide_id"]] = row["label"]

    def one(path):
        pmap = load_probmap(path)
        return pmap.slide_id, labels.get(pmap.slide_id), extract_features(pmap)

    probmaps = _collect_probmaps(args.probmaps)
    results, failures = _run_tiles(
        [(str(p), lambda p=p: one(p)) for p in probmaps], args.jobs, args.fail_fast
    )
    rows = sorted(results.values(), key=lambda r: r[0])
    write_features_csv(args.out, rows)
    _write_report(
        args.out + ".run.json",
        "extract-features",
        {"probmaps": [str(p) for p in probmaps], "labels": args.labels, "out": args.out},
        {"slides": len(rows), "features": len(FEATURE_NAMES)},
        failures,
    )
    return 1 if failures else 0


def _cmd_train_rf(args):
    ids, labels, x = read_features_csv(args.input)
    if any(l is None for l in labels):
        raise HistokitError("training features must carry labels for every slide")
    model = fit_classifier(
        x, labels, seed=int(args.seed), k=args.k, n_trees=args.trees, min_leaf=args.min_leaf
    )
    save_model(model, args.out)
    scores = [predict_score(model, row) for row in x]
    preds = ["LUSC" if s >= model.decision_threshold else "LUAD" for s in scores]
    _write_report(
        args.out + ".run.json",
        "train-rf",
        {"input": args.input, "out": args.out, "k": args.k, "trees": args.trees},
        {
            "slides": len(ids),
            "decision_threshold": model.decision_threshold,
            "training_accuracy": classification_accuracy(preds, labels),
        },
        seed=int(args.seed),
    )
    return 0


def _cmd_classify(args):
    model = load_model(args.model)
    rows = []
    for path in _collect_probmaps(args.probmap):
        pmap = load_probmap(path)
        rows.append((pmap.slide_id, classify_wsi(model, pmap)))
    rows.sort()
    for slide_id, label in rows:
        print(f"{slide_id},{label}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slide_id", "label"])
            writer.writerows(rows)
        _write_report(
            args.out + ".run.json",
            "classify",
            {"model": args.model, "probmaps": [str(p) for p in args.probmap]},
            {"slides": len(rows)},
        )
    return 0


def _read_label_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if "slide_id" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise HistokitError(f"{path}: expected slide_id,label columns")
        return {row["slide_id"]: row["label"] for row in reader}


def _cmd_eval_cls(args):
    pred = _read_label_csv(args.pred)
    truth = _read_label_csv(args.truth)
    if set(pred) != set(truth):
        raise HistokitError("prediction and truth files name different slides")
    ids = sorted(truth)
    acc = classification_accuracy([pred[i] for i in ids], [truth[i] for i in ids])
    print(f"accuracy {acc}")
    _write_report(
        args.pred + ".eval.run.json",
        "eval-cls",
        {"pred": args.pred, "truth": args.truth},
        {"cases": len(ids), "accuracy": acc},
    )
    return 0


def _cmd_synth(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "tile":
        spec = SynthTileSpec.from_json(args.spec) if args.spec else SynthTileSpec()
        if args.seed is not None:
            spec = replace(spec, seed=int(args.seed))
        rgb, labels, blob, border = gen_synthetic_tile(spec)
        save_rgb(out_dir / "image.png", rgb)
        save_labeled_mask(out_dir / "labels.png", labels)
        save_binary_mask(out_dir / "blob.png", blob)
        save_binary_mask(out_dir / "border.png", border)
        summary = {"nuclei": int(labels.max()), "tile_size": spec.tile_size}
        seed = spec.seed
    else:
        spec = SynthSlideSpec.from_json(args.spec) if args.spec else SynthSlideSpec()
        if args.seed is not None:
            spec = replace(spec, seed=int(args.seed))
        true_class = args.true_class
        if args.spec:
            with open(args.spec) as fh:
                true_class = json.load(fh).get("true_class", true_class)
        slide_id = f"synth-{spec.seed:04d}"
        pmap = gen_synthetic_probmap(spec, true_class, slide_id=slide_id)
        save_probmap(pmap, out_dir / slide_id)
        summary = {"slide_id": slide_id, "true_class": true_class}
        seed = spec.seed
    _write_report(
        out_dir / "run_report.json",
        "synth",
        {"kind": args.kind, "spec": args.spec, "out": args.out},
        summary,
        seed=seed,
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="histokit",
        description="nucleus segmentation post-processing, scoring, stain "
        "normalization, patch datasets and WSI classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="Reinhard stain normalization")
    p.add_argument("--target", required=True, help="target stats JSON")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("segment", help="blob/border masks -> instance labels")
    p.add_argument("--blob", required=True)
    p.add_argument("--border", required=True)
    p.add_argument("--mpp", type=float, required=True)
    p.add_argument("--min-area-um2", type=float, default=13.0)
    p.add_argument("--kernel", type=int, default=3, help="border dilation kernel")
    p.add_argument("--smoothing", type=int, default=1, help="distance-map smoothing radius")
    p.add_argument("--report", default=None, help="run-report path override")
    p.add_argument("output")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("eval-seg", help="score prediction masks against ground truth")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--out", required=True, help="scores CSV")
    p.add_argument("--allow-missing", action="store_true")
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(func=_cmd_eval_seg)

    p = sub.add_parser("gen-patches", help="generate nbl/nbd/sn training patches")
    p.add_argument("--tiles", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", required=True, choices=("nbl", "nbd", "sn"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(func=_cmd_gen_patches)

    p = sub.add_parser("extract-features", help="probability maps -> feature CSV")
    p.add_argument("--probmaps", nargs="+", required=True, help="files or directories")
    p.add_argument("--labels", default=None, help="slide_id,label CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--fail-fast", action="store_true")
    p.set_defaults(func=_cmd_extract_features)

    p = sub.add_parser("train-rf", help="train the bagged regression forest")
    p.add_argument("--in", dest="input", required=True, help="features CSV")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=25, help="features to select")
    p.add_argument("--trees", type=int, default=10)
    p.add_argument("--min-leaf", type=int, default=5)
    p.set_defaults(func=_cmd_train_rf)

    p = sub.add_parser("classify", help="classify probability maps with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--probmap", nargs="+", required=True)
    p.add_argument("--out", default=None, help="optional predictions CSV")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("eval-cls", help="classification accuracy of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=_cmd_eval_cls)

    p = sub.add_parser("synth", help="generate synthetic fixtures")
    p.add_argument("kind", choices=("tile", "probmap"))
    p.add_argument("--spec", default=None, help="spec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the spec seed")
    p.add_argument("--true-class", default="LUAD", choices=("LUAD", "LUSC"))
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HistokitError, OSError, ValueError, KeyError) as exc:
        print(f"histokit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
