"""File formats: detection JSON, 16-bit PGM score maps, CSV reports.

Loaders validate everything and raise on the first problem; nothing is
repaired. Writers are byte-stable for identical inputs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable

import numpy as np

from .errors import (
    BadMagic,
    DanglingImageRef,
    DimensionMismatch,
    InvalidRle,
    InvariantViolation,
    IoFailure,
    LengthMismatch,
    MaxvalUnsupported,
    ParseError,
    RleLengthMismatch,
    TruncatedData,
)
from .fusion import InstancePrediction
from .masks import BinaryMask, ScoreMap
from .metrics import GroundTruthInstance, MetricsReport

PGM_MAXVAL = 65535


@dataclass(frozen=True)
class ImageInfo:
    id: Hashable
    width: int
    height: int


@dataclass
class DetectionDataset:
    images: list[ImageInfo] = field(default_factory=list)
    predictions: dict = field(default_factory=dict)
    ground_truths: dict = field(default_factory=dict)

    def image(self, image_id) -> ImageInfo:
        for info in self.images:
            if info.id == image_id:
                return info
        raise DanglingImageRef(f"unknown image id {image_id!r}")

    def preds_for(self, image_id) -> list[InstancePrediction]:
        return self.predictions.get(image_id, [])

    def gts_for(self, image_id) -> list[GroundTruthInstance]:
        return self.ground_truths.get(image_id, [])


# ---------------------------------------------------------------- detections


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _require(cond, message, path):
    if not cond:
        raise ParseError(message, path=path)


def parse_detection_dict(doc, path=None) -> DetectionDataset:
    _require(isinstance(doc, dict), "top level must be an object", path)
    _require(isinstance(doc.get("images"), list), "'images' must be a list", path)
    _require(isinstance(doc.get("annotations"), list), "'annotations' must be a list", path)

    dataset = DetectionDataset()
    by_id = {}
    for k, img in enumerate(doc["images"]):
        where = f"images[{k}]"
        _require(isinstance(img, dict), f"{where} must be an object", path)
        for key in ("id", "width", "height"):
            _require(key in img, f"{where} lacks '{key}'", path)
        _require(_is_int(img["id"]) or isinstance(img["id"], str), f"{where}.id must be int or string", path)
        _require(_is_int(img["width"]) and img["width"] >= 1, f"{where}.width must be a positive int", path)
        _require(_is_int(img["height"]) and img["height"] >= 1, f"{where}.height must be a positive int", path)
        if img["id"] in by_id:
            raise InvariantViolation(f"{path}: duplicate image id {img['id']!r}")
        info = ImageInfo(img["id"], img["width"], img["height"])
        by_id[info.id] = info
        dataset.images.append(info)

    for k, ann in enumerate(doc["annotations"]):
        where = f"annotations[{k}]"
        _require(isinstance(ann, dict), f"{where} must be an object", path)
        for key in ("image_id", "instance_id", "category_id", "segmentation"):
            _require(key in ann, f"{where} lacks '{key}'", path)
        image_id = ann["image_id"]
        if image_id not in by_id:
            raise DanglingImageRef(f"{path}: {where} references unknown image {image_id!r}")
        info = by_id[image_id]
        _require(_is_int(ann["category_id"]), f"{where}.category_id must be an int", path)
        iid = ann["instance_id"]
        _require(_is_int(iid) or isinstance(iid, str), f"{where}.instance_id must be int or string", path)
        seg = ann["segmentation"]
        _require(isinstance(seg, dict) and "counts" in seg and "size" in seg,
                 f"{where}.segmentation needs 'counts' and 'size'", path)
        counts, size = seg["counts"], seg["size"]
        _require(isinstance(counts, list) and all(_is_int(c) for c in counts),
                 f"{where}.segmentation.counts must be a list of ints", path)
        _require(isinstance(size, list) and len(size) == 2 and all(_is_int(s) for s in size),
                 f"{where}.segmentation.size must be [height, width]", path)
        if size != [info.height, info.width]:
            raise DimensionMismatch(
                f"{path}: {where} size {size} does not match image {image_id!r} "
                f"[{info.height}, {info.width}]"
            )
        try:
            mask = BinaryMask(info.width, info.height, tuple(counts))
        except LengthMismatch as exc:
            raise RleLengthMismatch(f"{path}: {where}: {exc}") from exc
        except InvalidRle as exc:
            raise type(exc)(f"{path}: {where}: {exc}") from exc

        if "confidence" in ann:
            conf = ann["confidence"]
            _require(_is_number(conf), f"{where}.confidence must be a number", path)
            if not 0.0 <= conf <= 1.0:
                raise InvariantViolation(f"{path}: {where}.confidence {conf} outside [0, 1]")
            pred = InstancePrediction(iid, conf, mask, ann["category_id"])
            dataset.predictions.setdefault(image_id, []).append(pred)
        else:
            if mask.area == 0:
                raise InvariantViolation(f"{path}: {where} ground truth has an empty mask")
            gt = GroundTruthInstance(iid, mask, image_id, ann["category_id"])
            dataset.ground_truths.setdefault(image_id, []).append(gt)
    return dataset


def load_detection_file(path) -> DetectionDataset:
    """Read a detection file; annotations with ``confidence`` are predictions, the rest ground truth."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", path=path, offset=exc.start) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.colno) from exc
    return parse_detection_dict(doc, path)


def _annotation(image_id, inst_id, category_id, mask: BinaryMask, confidence=None) -> dict:
    ann = {"image_id": image_id, "instance_id": inst_id, "category_id": category_id}
    if confidence is not None:
        ann["confidence"] = confidence
    ann["segmentation"] = {"counts": list(mask.runs), "size": [mask.height, mask.width]}
    return ann


def detection_dict(dataset: DetectionDataset) -> dict:
    annotations = []
    for info in dataset.images:
        for p in dataset.preds_for(info.id):
            annotations.append(_annotation(info.id, p.instance_id, p.category_id, p.mask, p.confidence))
        for g in dataset.gts_for(info.id):
            annotations.append(_annotation(info.id, g.gt_id, g.category_id, g.mask))
    images = [{"id": i.id, "width": i.width, "height": i.height} for i in dataset.images]
    return {"images": images, "annotations": annotations}


def save_detection_file(dataset: DetectionDataset, path) -> None:
    """Write one image or annotation object per line."""
    doc = detection_dict(dataset)
    lines = ["{", '"images": [']
    lines.append(",\n".join(json.dumps(i) for i in doc["images"]))
    lines.append("],")
    lines.append('"annotations": [')
    lines.append(",\n".join(json.dumps(a) for a in doc["annotations"]))
    lines.append("]")
    lines.append("}")
    _write_text(path, "\n".join(line for line in lines if line) + "\n")


# ---------------------------------------------------------------- score maps


def quantize(values: np.ndarray) -> np.ndarray:
    return np.rint(np.asarray(values, dtype=np.float64) * PGM_MAXVAL).astype(">u2")


def encode_score_map(score_map: ScoreMap) -> bytes:
    header = f"P5\n{score_map.width} {score_map.height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + quantize(score_map.values).tobytes()


def save_score_map(score_map: ScoreMap, path) -> None:
    _write_bytes(path, encode_score_map(score_map))


def decode_score_map(data: bytes, path=None) -> ScoreMap:
    """Parse binary PGM: ``P5``, width, height, maxval 65535, big-endian samples."""
    if data[:2] != b"P5":
        raise BadMagic(f"expected magic 'P5', got {data[:2]!r}", path=path, offset=0)
    pos = 2
    fields = []
    while len(fields) < 3:
        start = pos
        # whitespace and comments between header tokens
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch == b"#":
                while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif ch.isspace():
                pos += 1
            else:
                break
        if pos >= len(data):
            raise TruncatedData("header ends early", path=path, offset=pos)
        if pos == start:
            raise ParseError("missing whitespace in header", path=path, offset=pos)
        tok_start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if pos == tok_start:
            raise ParseError(f"bad header byte {data[pos:pos + 1]!r}", path=path, offset=pos)
        fields.append(int(data[tok_start:pos]))
    width, height, maxval = fields
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise TruncatedData("missing whitespace after maxval", path=path, offset=pos)
    pos += 1
    if maxval != PGM_MAXVAL:
        raise MaxvalUnsupported(f"maxval {maxval} unsupported; only {PGM_MAXVAL}", path=path)
    if width < 1 or height < 1:
        raise ParseError(f"bad dimensions {width}x{height}", path=path)
    expected = 2 * width * height
    body = data[pos:]
    if len(body) < expected:
        raise TruncatedData(f"{len(body)} sample bytes, expected {expected}", path=path, offset=pos)
    if len(body) > expected:
        raise ParseError(f"{len(body) - expected} trailing bytes after samples", path=path, offset=pos + expected)
    samples = np.frombuffer(body, dtype=">u2").reshape(height, width)
    return ScoreMap(samples.astype(np.float64) / PGM_MAXVAL)


def load_score_map(path) -> ScoreMap:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode_score_map(data, path)


def score_map_path(maps_dir, image_id) -> Path:
    return Path(maps_dir) / f"{image_id}.pgm"


# ---------------------------------------------------------------- CSV reports


def fmt_num(v) -> str:
    """Six significant digits, fixed-point; integers print as integers."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0.0:
        return "0.00000"
    decimals = max(0, 5 - math.floor(math.log10(abs(v))))
    return f"{v:.{decimals}f}"


def _write_text(path, text: str) -> None:
    _write_bytes(path, text.encode("utf-8"))


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([fmt_num(v) if not isinstance(v, str) else v for v in row])
    _write_text(path, buf.getvalue())


SUMMARY_HEADER = ("fp", "fn", "precision", "recall", "ap", "ar")
PR_HEADER = ("threshold", "recall", "precision")
MR_HEADER = ("threshold", "fppi", "miss_rate")
SWEEP_HEADER = ("c", "precision", "recall", "fp", "fn")


def emit_report(report: MetricsReport, path_prefix, title: str | None = None) -> list[str]:
    """Write ``<prefix>_summary.csv``, the two curve CSVs and their SVG plots."""
    from . import plotting

    prefix = str(path_prefix)
    paths = {
        "summary": f"{prefix}_summary.csv",
        "pr": f"{prefix}_pr.csv",
        "mr": f"{prefix}_mr_fppi.csv",
        "pr_svg": f"{prefix}_pr.svg",
        "mr_svg": f"{prefix}_mr_fppi.svg",
    }
    write_csv(paths["summary"], SUMMARY_HEADER,
              [(report.fp, report.fn, report.precision, report.recall, report.ap, report.ar)])
    write_csv(paths["pr"], PR_HEADER, [(p.threshold, p.x, p.y) for p in report.pr_curve])
    write_csv(paths["mr"], MR_HEADER, [(p.threshold, p.x, p.y) for p in report.mr_fppi_curve])
    plotting.save_pr_curves({title or "": report.pr_curve}, paths["pr_svg"])
    plotting.save_mr_fppi_curves({title or "": report.mr_fppi_curve}, paths["mr_svg"])
    return list(paths.values())


def write_sweep_csv(table, path) -> None:
    write_csv(path, SWEEP_HEADER, [(r.c, r.precision, r.recall, r.fp, r.fn) for r in table.rows])


def write_heatmap_csv(heatmap, path) -> None:
    """One grid row per line, no header; absent positions are empty fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in heatmap.values:
        writer.writerow([fmt_num(v) for v in row])
    _write_text(path, buf.getvalue())


def read_heatmap_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) if v else np.nan for v in row] for row in csv.reader(fh)]
    return np.array(rows, dtype=np.float64)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def ensure_dir(path) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {path}: {exc}") from exc
