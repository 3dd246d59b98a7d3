"""Command-line surface: corpus generation, benchmark synthesis,
harmonization, evaluation and the editing service.

Every command echoes its resolved configuration and seed; identical
invocations produce byte-identical output trees (reports carry no
timestamps).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import corpus, metrics, perturb, retouch, solver
from .errors import NoForeground, OmharmonyError
from .imagecore import ColorSpace, ImageBuf, load_image, quantize_to_8bit, resize_bilinear, save_image

DEFAULT_RESOLUTION = 256


def _echo_config(args_dict: dict) -> str:
    return "config " + json.dumps(args_dict, sort_keys=True)


MIN_RESOLUTION = 32


def cmd_gencorpus(args) -> int:
    if args.size < MIN_RESOLUTION:
        print(f"error: --size must be >= {MIN_RESOLUTION}", file=sys.stderr)
        return 2
    out = Path(args.out)
    sources = corpus.gen_procedural_corpus(args.count, (args.size, args.size), args.seed)
    manifest_path = corpus.write_source_corpus(sources, out, args.seed)
    print(_echo_config({"count": args.count, "size": args.size, "seed": args.seed, "out": str(out)}))
    print(f"wrote {len(sources)} sources; manifest at {manifest_path}")
    return 0


def cmd_synth(args) -> int:
    if args.size and args.size < MIN_RESOLUTION:
        print(f"error: --size must be >= {MIN_RESOLUTION} (or 0 for native)", file=sys.stderr)
        return 2
    manifest = corpus.load_manifest(args.manifest)
    pairs = [e for e in manifest.entries if e.kind == "pair"]
    if not pairs:
        print("error: manifest has no pair entries to synthesize", file=sys.stderr)
        return 2

    if args.config:
        cfg = perturb.load_perturb_config(args.config)
    elif manifest.perturb_config not in (None, "default"):
        cfg = perturb.load_perturb_config(manifest.root / manifest.perturb_config)
    else:
        cfg = perturb.default_config()
    seed = args.seed if args.seed is not None else (manifest.seed or 0)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    # the persisted report omits its own location so reruns into different
    # directories stay byte-identical
    report_lines = [
        "omh-synth-report v1",
        _echo_config({"manifest": str(args.manifest), "seed": seed,
                      "resolution": args.size, "perturb": cfg.echo()}),
    ]
    print(_echo_config({"manifest": str(args.manifest), "seed": seed, "out": str(out),
                        "resolution": args.size, "perturb": cfg.echo()}))

    bench = corpus.Manifest(root=out, seed=seed, perturb_config="default")
    ok = 0
    for index, entry in enumerate(pairs):
        sample_id = Path(entry.image_path).stem
        try:
            image = load_image(manifest.root / entry.image_path)
            labels = corpus.decode_label_png(manifest.root / entry.label_path)
            if args.size and (image.width, image.height) != (args.size, args.size):
                image = resize_bilinear(image, args.size, args.size)
                labels = _resize_labels(labels, args.size, args.size)
            sample = perturb.make_composite(
                image, labels, cfg, perturb.combine_seed(seed, index), sample_id
            )
            corpus.persist_sample(sample, out)
            bench.entries.append(corpus.ManifestEntry("sample", entry.split, sample_id=sample_id))
            report_lines.append(f"ok\t{sample_id}\tregions={len(sample.records)}")
            ok += 1
        except NoForeground:
            report_lines.append(f"skip\t{sample_id}\tno-foreground")
        except (OmharmonyError, OSError) as exc:
            report_lines.append(f"fail\t{sample_id}\t{exc}")

    report_lines.append(f"done\tsynthesized={ok}\ttotal={len(pairs)}")
    corpus.save_manifest(bench, out / "manifest.txt")
    (out / "synthesis_report.txt").write_text("\n".join(report_lines) + "\n")
    print("\n".join(report_lines))
    return 0 if ok > 0 else 1


def _resize_labels(labels: perturb.LabelMap, width: int, height: int) -> perturb.LabelMap:
    # nearest-neighbor keeps ids exact
    src = labels.labels
    ys = np.clip(np.round((np.arange(height) + 0.5) * src.shape[0] / height - 0.5).astype(int), 0, src.shape[0] - 1)
    xs = np.clip(np.round((np.arange(width) + 0.5) * src.shape[1] / width - 0.5).astype(int), 0, src.shape[1] - 1)
    return perturb.LabelMap(src[ys[:, None], xs[None, :]])


def _space_from_flag(flag: str) -> ColorSpace:
    return ColorSpace.LAB if flag == "lab" else ColorSpace.HLS


def cmd_harmonize(args) -> int:
    space = _space_from_flag(args.space)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.sample_root:
        root = Path(args.sample_root)
        ids = [args.id] if args.id else sorted(
            p.stem for p in (root / "composite").glob("*.png")
        )
        if not ids:
            print("error: no samples found", file=sys.stderr)
            return 2
        rows = []
        for sid in ids:
            sample = corpus.load_sample(root, sid)
            masks = [sample.labels.mask(r.region_label) for r in sample.records]
            result = solver.harmonize(
                sample.composite, masks, args.mode, target=sample.real, space=space
            )
            save_image(result.image, out / f"{sid}.png")
            retouch.save_omsk(result.masks, out / f"{sid}.omsk")
            p_before = metrics.psnr(quantize_to_8bit(sample.composite), quantize_to_8bit(sample.real))
            p_after = metrics.psnr(quantize_to_8bit(result.image), quantize_to_8bit(sample.real))
            rows.append((sid, p_before, p_after))
            print(f"{sid}\tpsnr {p_before:.2f} -> {p_after:.2f} dB")
        print(_echo_config({"mode": args.mode, "space": args.space, "out": str(out)}))
        return 0

    if not (args.image and args.labels):
        print("error: need --sample-root or both --image and --labels", file=sys.stderr)
        return 2
    if args.mode != "blind":
        print("error: without a ground-truth sample only blind mode works", file=sys.stderr)
        return 2
    image = load_image(args.image)
    labels = corpus.decode_label_png(args.labels)
    masks = [labels.mask(c) for c in labels.class_ids()]
    if not masks:
        print("error: label map has no foreground", file=sys.stderr)
        return 2
    result = solver.harmonize(image, masks, "blind", space=space)
    sid = Path(args.image).stem
    save_image(result.image, out / f"{sid}.png")
    retouch.save_omsk(result.masks, out / f"{sid}.omsk")
    print(_echo_config({"mode": args.mode, "space": args.space, "out": str(out)}))
    return 0


def _pair_files(pred_dir: Path, gt_images: dict) -> list[tuple[str, Path, Path]]:
    pairs = []
    for pred in sorted(pred_dir.glob("*.png")):
        if pred.stem not in gt_images:
            raise FileNotFoundError(f"no ground truth for {pred.name}")
        pairs.append((pred.stem, pred, gt_images[pred.stem]))
    return pairs


def _true_region_mask(root: Path, sid: str) -> np.ndarray | None:
    rec_path = root / "records" / f"{sid}.json"
    lab_path = root / "labels" / f"{sid}.png"
    if not (rec_path.exists() and lab_path.exists()):
        return None
    doc = json.loads(rec_path.read_text())
    labels = corpus.decode_label_png(lab_path)
    union = np.zeros((labels.height, labels.width), bool)
    for rd in doc["records"]:
        union |= labels.mask(int(rd["region_label"]))
    return union


def _fmt(x: float, digits: int = 4) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.{digits}f}"


def cmd_eval(args) -> int:
    pred_dir = Path(args.pred)
    gt = Path(args.gt)
    bench_root = gt if (gt / "real").is_dir() else None
    gt_dir = (gt / "real") if bench_root else gt
    gt_images = {p.stem: p for p in gt_dir.glob("*.png")}
    if not gt_images:
        print("error: no ground-truth images found", file=sys.stderr)
        return 2

    try:
        pairs = _pair_files(pred_dir, gt_images)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not pairs:
        print("error: no prediction images found", file=sys.stderr)
        return 2

    composite_dir = Path(args.composite) if args.composite else (
        bench_root / "composite" if bench_root else None
    )

    lines = ["omh-eval-report v1",
             _echo_config({"pred": str(pred_dir), "gt": str(args.gt),
                           "composite": str(composite_dir) if composite_dir else None})]
    header = "id\tmse\tpsnr\tssim" + ("\tiou" if bench_root else "")
    lines.append(header)

    rows = []
    comp_rows = []
    for sid, pred_path, gt_path in pairs:
        pred = quantize_to_8bit(load_image(pred_path))
        truth = quantize_to_8bit(load_image(gt_path))
        row = {
            "mse": metrics.mse(pred, truth),
            "psnr": metrics.psnr(pred, truth),
            "ssim": metrics.ssim(pred, truth),
            "lpips": metrics.perceptual_distance(pred, truth),
        }
        iou_txt = ""
        if bench_root:
            truth_mask = _true_region_mask(bench_root, sid)
            omsk_path = pred_dir / f"{sid}.omsk"
            if truth_mask is not None and omsk_path.exists():
                oms = retouch.load_omsk(omsk_path)
                row["iou"] = retouch.mask_iou(retouch.binarize_add(oms), truth_mask)
                iou_txt = "\t" + _fmt(row["iou"])
        rows.append(row)
        lines.append(
            f"{sid}\t{_fmt(row['mse'])}\t{_fmt(row['psnr'], 2)}\t{_fmt(row['ssim'])}" + iou_txt
        )
        if composite_dir is not None:
            comp_path = composite_dir / f"{sid}.png"
            if comp_path.exists():
                comp = quantize_to_8bit(load_image(comp_path))
                comp_rows.append({
                    "mse": metrics.mse(comp, truth),
                    "psnr": metrics.psnr(comp, truth),
                    "ssim": metrics.ssim(comp, truth),
                    "lpips": metrics.perceptual_distance(comp, truth),
                })

    def agg(rs, key):
        return float(np.mean([r[key] for r in rs]))

    ious = [r["iou"] for r in rows if "iou" in r]
    agg_line = (
        f"aggregate\t{_fmt(agg(rows, 'mse'))}\t{_fmt(agg(rows, 'psnr'), 2)}\t"
        f"{_fmt(agg(rows, 'ssim'))}"
    )
    if ious:
        agg_line += "\t" + _fmt(float(np.mean(ious)))
    lines.append(agg_line)

    # comparison table; the perceptual column uses the bundled trivial
    # backend, which is not a learned metric
    lines.append("")
    lines.append(f"{'Method':<12}{'MSE':>10}{'PSNR':>8}{'SSIM':>7}{'LPIPS*':>8}")
    if comp_rows:
        lines.append(
            f"{'Composite':<12}{_fmt(agg(comp_rows, 'mse'), 2):>10}"
            f"{_fmt(agg(comp_rows, 'psnr'), 2):>8}{_fmt(agg(comp_rows, 'ssim'), 2):>7}"
            f"{_fmt(agg(comp_rows, 'lpips'), 3):>8}"
        )
    lines.append(
        f"{'Harmonized':<12}{_fmt(agg(rows, 'mse'), 2):>10}"
        f"{_fmt(agg(rows, 'psnr'), 2):>8}{_fmt(agg(rows, 'ssim'), 2):>7}"
        f"{_fmt(agg(rows, 'lpips'), 3):>8}"
    )
    lines.append("LPIPS*: trivial downsampled-luma backend, not a learned perceptual metric")

    text = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    print(text, end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ui = Path(args.ui) if args.ui else None
    app = create_app(Path(args.root), ui_dir=ui)
    print(_echo_config({"root": str(args.root), "port": args.port,
                        "ui": str(ui) if ui else None}))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omharmony",
        description="Multi-region benchmark synthesis and operator-mask harmonization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gencorpus", help="generate a procedural source corpus")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--size", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gencorpus)

    p = sub.add_parser("synth", help="synthesize a benchmark from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="perturbation config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int, default=0, help="resize sources (0 keeps native size)")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("harmonize", help="predict operator masks and retouch")
    p.add_argument("--sample-root", help="benchmark root with real/composite/labels/records")
    p.add_argument("--id", help="single sample id (default: all)")
    p.add_argument("--image", help="composite image (blind mode)")
    p.add_argument("--labels", help="label raster for --image")
    p.add_argument("--mode", choices=("supervised", "blind", "descent"), default="supervised")
    p.add_argument("--space", choices=("lab", "hls"), default="lab")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_harmonize)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True, help="image dir or benchmark root")
    p.add_argument("--composite", help="composite dir for the baseline row")
    p.add_argument("--report", help="write the report to this file")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="serve the mask-editing HTTP API")
    p.add_argument("--root", required=True, help="session root directory")
    p.add_argument("--port", type=int, default=8601)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="built editor bundle to serve at /ui")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OmharmonyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
