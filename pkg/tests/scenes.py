"""Constructed occlusion scenes with known responses."""

import numpy as np

from segfuse.masks import BinaryMask, ScoreMap
from segfuse.occlusion import OcclusionConfig

W, H = 160, 120
OUTER = (30, 20, 130, 100)  # mirror frame, outer edge
RING = 6
PERSON = (55, 40, 105, 80)  # reflected person inside the frame
CFG = OcclusionConfig(16, 12, 4, 0.5)


def person_mask():
    return BinaryMask.from_rect(W, H, *PERSON)


def frame_pixels():
    ring = np.zeros((H, W), bool)
    x0, y0, x1, y1 = OUTER
    ring[y0:y1, x0:x1] = True
    ring[y0 + RING:y1 - RING, x0 + RING:x1 - RING] = False
    return ring


def _base():
    values = np.full((H, W), 0.05)
    x0, y0, x1, y1 = PERSON
    values[y0:y1, x0:x1] = 0.3
    return values


def _hits(window, pixels):
    if window is None:
        return False
    x, y, w, h = window
    return bool(pixels[y:y + h, x:x + w].any())


class FlatScorer:
    parallel_safe = True

    def __call__(self, window):
        return ScoreMap(_base())


class FrameScorer:
    """In-mask scores rise by ``boost`` whenever the window touches the frame."""

    parallel_safe = True

    def __init__(self, boost=0.2):
        self.boost = boost
        self.frame = frame_pixels()
        self.person = person_mask().array

    def __call__(self, window):
        values = _base()
        if _hits(window, self.frame):
            values[self.person] += self.boost
        return ScoreMap(values)


class PersonScorer:
    """Covering any part of the person halves every in-mask score and zeroes the covered ones."""

    parallel_safe = True

    def __init__(self):
        self.person = person_mask().array

    def __call__(self, window):
        values = _base()
        if _hits(window, self.person):
            values[self.person] *= 0.5
            x, y, w, h = window
            values[y:y + h, x:x + w] = 0.0
        return ScoreMap(values)


def direct_heatmap(mask, scorer, cfg):
    """Per-position recomputation with plain loops over pixel lists."""
    pts = [(int(x), int(y)) for y, x in zip(*np.nonzero(mask.array))]
    base = scorer(None).values
    gw = (mask.width - cfg.window_width) // cfg.stride + 1
    gh = (mask.height - cfg.window_height) // cfg.stride + 1
    out = []
    for j in range(gh):
        row = []
        for i in range(gw):
            x0, y0 = i * cfg.stride, j * cfg.stride
            vis = [(x, y) for x, y in pts
                   if not (x0 <= x < x0 + cfg.window_width and y0 <= y < y0 + cfg.window_height)]
            if not vis:
                row.append(float("nan"))
                continue
            occl = scorer((x0, y0, cfg.window_width, cfg.window_height)).values
            row.append(sum(occl[y, x] for x, y in vis) / len(vis) - sum(base[y, x] for x, y in vis) / len(vis))
        out.append(row)
    return np.array(out)
