"""Occlusion sensitivity: slide a grey patch, re-score, and map the change.

For every window position the heatmap holds the mean score over the
ground-truth pixels the window leaves visible, taken from the occluded
score map, minus the same mean taken from the unoccluded baseline map.
Positions whose window hides the whole mask are absent (NaN).
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import (
    EmptyVisibleMask,
    InvalidConfig,
    ParseError,
    ScorerFailure,
    WindowLargerThanImage,
)
from .masks import BinaryMask, ScoreMap

Window = tuple[int, int, int, int]  # x, y, width, height
Scorer = Callable[[Optional[Window]], ScoreMap]


@dataclass(frozen=True)
class OcclusionConfig:
    window_width: int = 96
    window_height: int = 54
    stride: int = 5
    fill_value: float = 0.5

    def __post_init__(self):
        if self.window_width < 1 or self.window_height < 1:
            raise InvalidConfig("window dimensions must be positive")
        if self.stride < 1:
            raise InvalidConfig(f"stride must be >= 1, got {self.stride}")
        if not 0.0 <= self.fill_value <= 1.0:
            raise InvalidConfig(f"fill_value {self.fill_value} outside [0, 1]")


@dataclass
class Heatmap:
    grid_width: int
    grid_height: int
    origins: list[tuple[int, int]]
    values: np.ndarray = field(repr=False)  # (grid_height, grid_width), NaN = absent

    def value_at(self, x: int, y: int, cfg: OcclusionConfig) -> float:
        return float(self.values[y // cfg.stride, x // cfg.stride])


def grid_shape(image_width: int, image_height: int, cfg: OcclusionConfig) -> tuple[int, int]:
    if cfg.window_width > image_width or cfg.window_height > image_height:
        raise WindowLargerThanImage(
            f"{cfg.window_width}x{cfg.window_height} window does not fit a "
            f"{image_width}x{image_height} image"
        )
    return (
        (image_width - cfg.window_width) // cfg.stride + 1,
        (image_height - cfg.window_height) // cfg.stride + 1,
    )


def occlusion_grid(image_width: int, image_height: int, cfg: OcclusionConfig) -> list[tuple[int, int]]:
    """Window origins ``(x, y)`` in row-major order."""
    gw, gh = grid_shape(image_width, image_height, cfg)
    return [(i * cfg.stride, j * cfg.stride) for j in range(gh) for i in range(gw)]


def occlude_image(image: np.ndarray, window: Window, fill_value: float = 0.5) -> np.ndarray:
    """Copy of ``image`` with the window painted ``fill_value`` (for float images in [0, 1])."""
    x, y, w, h = window
    out = np.array(image, copy=True)
    out[y:y + h, x:x + w, ...] = fill_value
    return out


@dataclass(frozen=True)
class ScorerBinding:
    """Where occluded score maps come from.

    ``precomputed_maps``: ``location`` is a directory holding
    ``baseline.pgm`` and one ``x{X}_y{Y}.pgm`` per window origin.

    ``external_command``: ``location`` is a command template. Each call
    substitutes ``{image}``, ``{x}``, ``{y}``, ``{w}``, ``{h}``, ``{fill}``
    and ``{output}``; the command must write a score-map PGM to
    ``{output}`` and exit 0. The baseline call passes a zero-sized window
    at the origin.
    """

    mode: str
    location: str
    reentrant: bool = False
    image_path: Optional[str] = None
    fill_value: float = 0.5

    def __post_init__(self):
        if self.mode not in ("precomputed_maps", "external_command"):
            raise InvalidConfig(f"unknown scorer mode {self.mode!r}")

    @property
    def parallel_safe(self) -> bool:
        return self.mode == "precomputed_maps" or self.reentrant

    def __call__(self, window: Optional[Window]) -> ScoreMap:
        if self.mode == "precomputed_maps":
            return self._precomputed(window)
        return self._external(window)

    def _load(self, path):
        from .dataset_io import load_score_map

        try:
            return load_score_map(path)
        except (ParseError, OSError) as exc:
            raise ScorerFailure(f"scorer produced an unreadable map {path}: {exc}") from exc

    def _precomputed(self, window):
        root = Path(self.location)
        name = "baseline.pgm" if window is None else f"x{window[0]}_y{window[1]}.pgm"
        path = root / name
        if not path.is_file():
            raise ScorerFailure(f"precomputed score map missing: {path}")
        return self._load(path)

    def _external(self, window):
        x, y, w, h = window if window is not None else (0, 0, 0, 0)
        with tempfile.TemporaryDirectory(prefix="segfuse-occl-") as tmp:
            output = os.path.join(tmp, "score.pgm")
            values = {
                "image": self.image_path or "",
                "x": x, "y": y, "w": w, "h": h,
                "fill": self.fill_value,
                "output": output,
            }
            try:
                argv = [token.format(**values) for token in shlex.split(self.location)]
            except (KeyError, IndexError, ValueError) as exc:
                raise InvalidConfig(f"bad scorer command template: {exc}") from exc
            try:
                proc = subprocess.run(argv, capture_output=True, text=True)
            except OSError as exc:
                raise ScorerFailure(f"could not start scorer {argv[0]!r}: {exc}") from exc
            if proc.returncode != 0:
                raise ScorerFailure(
                    f"scorer exited with status {proc.returncode} for window {window}: "
                    f"{proc.stderr.strip()[-500:]}"
                )
            if not os.path.isfile(output):
                raise ScorerFailure(f"scorer wrote no map for window {window}")
            return self._load(output)


def _checked(score_map, shape, window):
    if not isinstance(score_map, ScoreMap):
        raise ScorerFailure(f"scorer returned {type(score_map).__name__}, not a ScoreMap")
    if score_map.shape != shape:
        raise ScorerFailure(
            f"scorer map for window {window} is {score_map.width}x{score_map.height}, "
            f"expected {shape[1]}x{shape[0]}"
        )
    return score_map


def occlusion_heatmap(
    gt_mask: BinaryMask,
    scorer: Scorer,
    cfg: OcclusionConfig | None = None,
    jobs: int | None = None,
) -> Heatmap:
    """Baseline-relative change of the visible-mask mean score per window position.

    ``scorer`` is called with ``None`` for the baseline and with
    ``(x, y, width, height)`` for each occluded variant. Calls run in
    parallel only when the scorer declares itself safe for it
    (``parallel_safe``) and ``jobs > 1``.
    """
    cfg = cfg or OcclusionConfig()
    if gt_mask.area == 0:
        raise EmptyVisibleMask("ground-truth mask is empty")
    gw, gh = grid_shape(gt_mask.width, gt_mask.height, cfg)
    origins = occlusion_grid(gt_mask.width, gt_mask.height, cfg)
    ys, xs = np.nonzero(gt_mask.array)
    baseline = _checked(scorer(None), gt_mask.shape, None)
    base_vals = baseline.values[ys, xs]
    w, h = cfg.window_width, cfg.window_height

    def one(origin):
        x0, y0 = origin
        covered = (xs >= x0) & (xs < x0 + w) & (ys >= y0) & (ys < y0 + h)
        visible = ~covered
        n = int(np.count_nonzero(visible))
        if n == 0:
            return np.nan
        window = (x0, y0, w, h)
        occluded = _checked(scorer(window), gt_mask.shape, window)
        occl_vals = occluded.values[ys, xs][visible]
        return float(occl_vals.sum()) / n - float(base_vals[visible].sum()) / n

    if jobs and jobs > 1 and getattr(scorer, "parallel_safe", False):
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(one, origins))
    else:
        flat = [one(o) for o in origins]
    values = np.array(flat, dtype=np.float64).reshape(gh, gw)
    return Heatmap(gw, gh, origins, values)
