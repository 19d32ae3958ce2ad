"""Dataset-level workflows shared by the CLI and library users."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dataset_io import (
    DetectionDataset,
    ImageInfo,
    load_detection_file,
    load_score_map,
    score_map_path,
)
from .errors import DimensionMismatch, MissingScoreMap
from .fusion import FusionConfig, FusionResult, fuse_instances
from .metrics import DEFAULT_IOU, MetricsReport, evaluate


@dataclass
class EvalInputs:
    images: list[ImageInfo]
    preds: list[list]
    gts: list[list]
    maps: list


def merge_images(*datasets: DetectionDataset) -> list[ImageInfo]:
    """Union of image lists in first-seen order; sizes must agree."""
    seen = {}
    for ds in datasets:
        for info in ds.images:
            prior = seen.get(info.id)
            if prior is None:
                seen[info.id] = info
            elif (prior.width, prior.height) != (info.width, info.height):
                raise DimensionMismatch(
                    f"image {info.id!r} is {prior.width}x{prior.height} in one file "
                    f"and {info.width}x{info.height} in another"
                )
    return list(seen.values())


def load_maps(images, maps_dir, jobs=None):
    def one(info):
        path = score_map_path(maps_dir, info.id)
        if not path.is_file():
            raise MissingScoreMap(f"no score map for image {info.id!r} (expected {path})")
        score_map = load_score_map(path)
        if score_map.shape != (info.height, info.width):
            raise DimensionMismatch(
                f"score map for image {info.id!r} is {score_map.width}x{score_map.height}, "
                f"image is {info.width}x{info.height}"
            )
        return score_map

    return _map(one, images, jobs)


def _map(fn, items, jobs):
    items = list(items)
    if jobs and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def load_eval_inputs(pred_path, gt_path, maps_dir, jobs=None) -> EvalInputs:
    pred_ds = load_detection_file(pred_path)
    gt_ds = load_detection_file(gt_path) if gt_path is not None else pred_ds
    images = merge_images(gt_ds, pred_ds)
    preds = [pred_ds.preds_for(i.id) for i in images]
    gts = [gt_ds.gts_for(i.id) for i in images]
    maps = load_maps(images, maps_dir, jobs)
    return EvalInputs(images, preds, gts, maps)


def fuse_all(preds_per_image, maps, cfg: FusionConfig, jobs=None) -> list[FusionResult]:
    return _map(lambda pair: fuse_instances(pair[0], pair[1], cfg), zip(preds_per_image, maps), jobs)


def run_eval_pipeline(
    pred_path,
    gt_path,
    maps_dir,
    c: float = 0.04,
    iou: float = DEFAULT_IOU,
    jobs=None,
) -> tuple[MetricsReport, MetricsReport]:
    """Metrics for the raw predictions and for the fused predictions."""
    inputs = load_eval_inputs(pred_path, gt_path, maps_dir, jobs)
    return evaluate_pair(inputs, c, iou, jobs)


def evaluate_pair(inputs: EvalInputs, c: float, iou: float = DEFAULT_IOU, jobs=None):
    fused = fuse_all(inputs.preds, inputs.maps, FusionConfig(c), jobs)
    image_count = max(len(inputs.images), 1)
    pre = evaluate(inputs.preds, inputs.gts, iou, image_count, jobs)
    post = evaluate([f.accepted for f in fused], inputs.gts, iou, image_count, jobs)
    return pre, post
