"""Command-line entry point: ``segfuse {synth,fuse,eval,tune,occlude}``.

Exit codes: 0 success, 2 unparseable input, 3 invariant violation,
4 scorer failure, 1 other errors. Every run writes one JSON manifest
listing resolved settings, inputs and output digests.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, plotting
from .dataset_io import (
    DetectionDataset,
    ImageInfo,
    emit_report,
    file_digest,
    fmt_num,
    load_detection_file,
    save_detection_file,
    save_score_map,
    score_map_path,
    write_csv,
    write_heatmap_csv,
    write_sweep_csv,
)
from .errors import InvalidConfig, SegfuseError
from .fusion import DEFAULT_THRESHOLD, FusionConfig
from .metrics import DEFAULT_IOU
from .occlusion import OcclusionConfig, ScorerBinding, occlusion_heatmap
from .pipeline import evaluate_pair, fuse_all, load_eval_inputs, load_maps
from .synth import SceneConfig, expected_metrics, generate_benchmark
from .tuning import SelectionPolicy, default_grid, select_threshold, sweep_thresholds


def _default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _color(text, code, stream=sys.stdout):
    if os.environ.get("SEGFUSE_NO_COLOR") or not getattr(stream, "isatty", lambda: False)():
        return text
    return f"\033[{code}m{text}\033[0m"


def _parse_id(text):
    try:
        return int(text)
    except ValueError:
        return text


def _write_manifest(args, path, inputs, outputs, config, extra=None):
    manifest = {
        "command": args.command,
        "version": __version__,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": [{"path": str(p), "sha256": file_digest(p)} for p in inputs if p and Path(p).is_file()],
        "outputs": [{"path": str(p), "sha256": file_digest(p)} for p in outputs],
    }
    if extra:
        manifest.update(extra)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _summary_line(label, report):
    return (
        f"{label:<8} FP {report.fp:>6}  FN {report.fn:>6}  precision {fmt_num(report.precision)}"
        f"  recall {fmt_num(report.recall)}  AP {fmt_num(report.ap)}  AR {fmt_num(report.ar)}"
    )


# ---------------------------------------------------------------- subcommands


def cmd_synth(args):
    cfg = SceneConfig(
        image_width=args.width,
        image_height=args.height,
        true_count=args.true_count,
        reflection_count=args.reflection_count,
        semantic_score_true=args.score_true,
        semantic_score_reflection=args.score_reflection,
        semantic_noise=args.noise,
        seed=args.seed,
    )
    out = Path(args.out)
    bundles = generate_benchmark(cfg, args.scenes, args.threshold)
    preds = DetectionDataset()
    gts = DetectionDataset()
    outputs = []
    for b in bundles:
        info = ImageInfo(b.image_id, b.width, b.height)
        preds.images.append(info)
        gts.images.append(info)
        preds.predictions[b.image_id] = b.predictions
        gts.ground_truths[b.image_id] = b.ground_truths
        path = score_map_path(out / "maps", b.image_id)
        save_score_map(b.score_map, path)
        outputs.append(path)
    save_detection_file(preds, out / "predictions.json")
    save_detection_file(gts, out / "ground_truth.json")
    outputs = [out / "predictions.json", out / "ground_truth.json"] + outputs

    rows = []
    try:
        exp = expected_metrics(cfg, args.threshold, scenes=args.scenes)
        for stage, counts in (("pre_fusion", exp.pre_fusion), ("post_fusion", exp.post_fusion)):
            rows.append((stage, counts.tp, counts.fp, counts.fn, counts.precision, counts.recall))
    except SegfuseError as exc:
        print(f"warning: no analytic expectation: {exc}", file=sys.stderr)
    write_csv(out / "expected_metrics.csv", ("stage", "tp", "fp", "fn", "precision", "recall"), rows)
    outputs.append(out / "expected_metrics.csv")

    config = {k: v for k, v in vars(cfg).items()}
    config.update(scenes=args.scenes, threshold=args.threshold)
    manifest = args.manifest_out or out / "manifest.json"
    _write_manifest(args, manifest, [], outputs, config)
    print(f"wrote {args.scenes} scenes to {out}")
    for row in rows:
        print(f"expected {row[0]}: tp={row[1]} fp={row[2]} fn={row[3]}")
    return 0


def cmd_fuse(args):
    cfg = FusionConfig(args.threshold, args.empty_mask_policy)
    dataset = load_detection_file(args.pred)
    images = dataset.images
    maps = load_maps(images, args.maps, args.jobs)
    results = fuse_all([dataset.preds_for(i.id) for i in images], maps, cfg, args.jobs)
    fused = DetectionDataset(list(images), {}, dict(dataset.ground_truths))
    n_acc = n_rej = 0
    for info, res in zip(images, results):
        if res.accepted:
            fused.predictions[info.id] = res.accepted
        n_acc += len(res.accepted)
        n_rej += len(res.rejected)
    save_detection_file(fused, args.out)
    outputs = [args.out]
    if args.rejected_csv:
        rows = [
            (str(info.id), str(inst.instance_id), score)
            for info, res in zip(images, results)
            for inst, score in res.rejected
        ]
        write_csv(args.rejected_csv, ("image_id", "instance_id", "mean_score"), rows)
        outputs.append(args.rejected_csv)
    manifest = args.manifest_out or f"{args.out}.manifest.json"
    config = {"threshold": args.threshold, "empty_mask_policy": args.empty_mask_policy}
    _write_manifest(args, manifest, [args.pred], outputs, config)
    print(f"accepted {n_acc}, rejected {n_rej} at c={args.threshold:g}")
    return 0


def cmd_eval(args):
    inputs = load_eval_inputs(args.pred, args.gt, args.maps, args.jobs)
    pre, post = evaluate_pair(inputs, args.threshold, args.iou, args.jobs)
    prefix = args.out_prefix
    outputs = emit_report(pre, f"{prefix}_pre", "Instance only")
    outputs += emit_report(post, f"{prefix}_post", "Joint")
    plotting.save_pr_curves({"Instance only": pre.pr_curve, "Joint": post.pr_curve}, f"{prefix}_compare_pr.svg")
    plotting.save_mr_fppi_curves(
        {"Instance only": pre.mr_fppi_curve, "Joint": post.mr_fppi_curve}, f"{prefix}_compare_mr_fppi.svg"
    )
    outputs += [f"{prefix}_compare_pr.svg", f"{prefix}_compare_mr_fppi.svg"]
    manifest = args.manifest_out or f"{prefix}_manifest.json"
    config = {"threshold": args.threshold, "iou": args.iou, "images": len(inputs.images)}
    _write_manifest(args, manifest, [args.pred, args.gt], outputs, config)
    print(_summary_line("instance", pre))
    print(_color(_summary_line("joint", post), "32"))
    return 0


def cmd_tune(args):
    inputs = load_eval_inputs(args.pred, args.gt, args.maps, args.jobs)
    grid = default_grid(args.c_min, args.c_max, args.c_step)
    table = sweep_thresholds(inputs.preds, inputs.gts, inputs.maps, grid, args.iou)
    selected = select_threshold(table, SelectionPolicy(args.max_recall_drop))
    prefix = args.out_prefix
    write_sweep_csv(table, f"{prefix}_sweep.csv")
    plotting.save_sweep_plots(table, f"{prefix}_sweep.svg", selected)
    outputs = [f"{prefix}_sweep.csv", f"{prefix}_sweep.svg"]
    manifest = args.manifest_out or f"{prefix}_manifest.json"
    config = {
        "c_min": args.c_min, "c_max": args.c_max, "c_step": args.c_step,
        "iou": args.iou, "max_recall_drop": args.max_recall_drop,
    }
    _write_manifest(args, manifest, [args.pred, args.gt], outputs, config, {"selected_c": selected})
    print(_color(f"selected c = {selected:g}", "32"))
    return 0


def cmd_occlude(args):
    cfg = OcclusionConfig(args.window_width, args.window_height, args.stride, args.fill)
    dataset = load_detection_file(args.gt)
    image_id = _parse_id(args.image_id)
    gt_id = _parse_id(args.gt_id)
    matches = [g for g in dataset.gts_for(image_id) if g.gt_id == gt_id]
    if not matches:
        raise InvalidConfig(f"no ground truth {gt_id!r} in image {image_id!r} of {args.gt}")
    if bool(args.maps_dir) == bool(args.command_template):
        raise InvalidConfig("give exactly one of --maps-dir or --scorer-command")
    if args.maps_dir:
        binding = ScorerBinding("precomputed_maps", args.maps_dir)
    else:
        binding = ScorerBinding("external_command", args.command_template, args.reentrant, args.image, args.fill)
    heatmap = occlusion_heatmap(matches[0].mask, binding, cfg, args.jobs)
    prefix = args.out_prefix
    write_heatmap_csv(heatmap, f"{prefix}_heatmap.csv")
    plotting.save_heatmap(heatmap, f"{prefix}_heatmap.svg")
    outputs = [f"{prefix}_heatmap.csv", f"{prefix}_heatmap.svg"]
    manifest = args.manifest_out or f"{prefix}_manifest.json"
    config = {
        "window_width": cfg.window_width, "window_height": cfg.window_height,
        "stride": cfg.stride, "fill_value": cfg.fill_value,
        "scorer_mode": binding.mode, "scorer": binding.location,
        "image_id": image_id, "gt_id": gt_id,
    }
    _write_manifest(args, manifest, [args.gt, args.image], outputs, config)
    print(f"heatmap {heatmap.grid_width}x{heatmap.grid_height} written to {prefix}_heatmap.csv")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=_default_jobs(),
                        help="worker threads for per-image work (default: available CPUs)")
    common.add_argument("--manifest-out", default=None, help="where to write the run manifest")

    thr = argparse.ArgumentParser(add_help=False)
    thr.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                     help="fusion threshold c on the mean in-mask score (default: %(default)s)")

    iou = argparse.ArgumentParser(add_help=False)
    iou.add_argument("--iou", type=float, default=DEFAULT_IOU,
                     help="mask IoU needed to match a ground truth (default: %(default)s)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--pred", required=True, help="detection file with predictions")
    data.add_argument("--gt", required=True, help="detection file with ground truth")
    data.add_argument("--maps", required=True, help="directory of <image_id>.pgm score maps")

    parser = argparse.ArgumentParser(
        prog="segfuse",
        description="Suppress reflection false positives by fusing instance masks with semantic scores.",
        epilog="Exit codes: 0 ok, 2 unparseable input, 3 invariant violation, 4 scorer failure, "
               "1 other. Set SEGFUSE_NO_COLOR to disable terminal colors.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common, thr], help="write a synthetic mirror benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scenes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--true-count", type=int, default=5)
    p.add_argument("--reflection-count", type=int, default=5)
    p.add_argument("--width", type=int, default=SceneConfig.image_width)
    p.add_argument("--height", type=int, default=SceneConfig.image_height)
    p.add_argument("--score-true", type=float, default=SceneConfig.semantic_score_true)
    p.add_argument("--score-reflection", type=float, default=SceneConfig.semantic_score_reflection)
    p.add_argument("--noise", type=float, default=SceneConfig.semantic_noise)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fuse", parents=[common, thr], help="filter predictions, write a fused detection file")
    p.add_argument("--pred", required=True, help="detection file with predictions")
    p.add_argument("--maps", required=True, help="directory of <image_id>.pgm score maps")
    p.add_argument("--out", required=True, help="fused detection file to write")
    p.add_argument("--empty-mask-policy", choices=("reject", "error"), default="reject")
    p.add_argument("--rejected-csv", default=None, help="optional CSV of rejected instances")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", parents=[common, thr, iou, data], help="metrics before and after fusion")
    p.add_argument("--out-prefix", required=True, help="prefix for CSV/SVG outputs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tune", parents=[common, iou, data], help="sweep c and select an operating point")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--c-min", type=float, default=0.0)
    p.add_argument("--c-max", type=float, default=0.20)
    p.add_argument("--c-step", type=float, default=0.005)
    p.add_argument("--max-recall-drop", type=float, default=0.01)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("occlude", parents=[common], help="occlusion sensitivity heatmap for one ground truth")
    p.add_argument("--gt", required=True, help="detection file holding the ground-truth mask")
    p.add_argument("--image-id", required=True)
    p.add_argument("--gt-id", required=True)
    p.add_argument("--maps-dir", default=None,
                   help="precomputed maps: baseline.pgm plus x{X}_y{Y}.pgm per window")
    p.add_argument("--scorer-command", dest="command_template", default=None,
                   help="command template with {image} {x} {y} {w} {h} {fill} {output}")
    p.add_argument("--image", default=None, help="image path passed to the scorer command")
    p.add_argument("--reentrant", action="store_true", help="scorer command may run concurrently")
    p.add_argument("--window-width", type=int, default=96)
    p.add_argument("--window-height", type=int, default=54)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--fill", type=float, default=0.5, help="grey level of the occluder")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_occlude)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SegfuseError as exc:
        print(_color(f"error: {exc}", "31", sys.stderr), file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
