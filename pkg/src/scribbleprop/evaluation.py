"""Scoring, scribble-degradation protocol, and the synthetic dataset generator.

The generator draws axis-aligned rectangles and ellipses over a background
color, adds Gaussian pixel noise, and places one scribble per region strictly
inside it along the major axis of its bounding box, at a configurable length
fraction of the longer side (default 0.7).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .core import LabelMap, RgbImage, Scribble, ScribbleSet, UNKNOWN, polyline_chain


@dataclass
class IoUReport:
    per_class: dict   # class id -> IoU, or None when absent from both maps
    mean: float


def miou(pred, gt, num_classes):
    """Mean intersection-over-union over classes present in either map.

    Ground-truth pixels with the UNKNOWN sentinel are excluded from every
    count; classes absent from both maps report None and do not enter the
    mean.
    """
    if pred.labels.shape != gt.labels.shape:
        raise errors.DimensionMismatch(
            f"prediction {pred.labels.shape} vs ground truth {gt.labels.shape}")
    valid = gt.labels != UNKNOWN
    p = pred.labels[valid]
    g = gt.labels[valid]
    per_class = {}
    total, count = 0.0, 0
    for c in range(num_classes):
        pc = p == c
        gc = g == c
        union = int(np.logical_or(pc, gc).sum())
        if union == 0:
            per_class[c] = None
            continue
        inter = int(np.logical_and(pc, gc).sum())
        iou = inter / union
        per_class[c] = iou
        total += iou
        count += 1
    return IoUReport(per_class, total / count if count else 0.0)


def _chain_steps(chain):
    """Per-step arc length along a pixel chain (1 for axial, sqrt(2) diagonal)."""
    steps = []
    for (x0, y0), (x1, y1) in zip(chain, chain[1:]):
        steps.append(math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2))
    return steps


def shorten_scribbles(sset, ratio, seed=0):
    """Reduce every scribble to ``ratio`` of its arc length.

    One endpoint is drawn uniformly per scribble (seeded); the kept portion
    follows the rasterized polyline from that endpoint.  Ratio 0 leaves a
    single-vertex spot; ratio 1 returns the set unchanged.
    """
    if not 0.0 <= ratio <= 1.0:
        raise errors.InvalidParameter(f"ratio must be in [0, 1], got {ratio}")
    rng = np.random.default_rng(seed)
    out = []
    for s in sset.scribbles:
        start_from_end = bool(rng.integers(2))
        if ratio >= 1.0:
            out.append(Scribble(s.category, list(s.polyline), s.brush_radius))
            continue
        chain = polyline_chain(s.polyline)
        if start_from_end:
            chain = chain[::-1]
        steps = _chain_steps(chain)
        target = ratio * sum(steps)
        kept = [chain[0]]
        walked = 0.0
        for pixel, step in zip(chain[1:], steps):
            if walked + step > target + 1e-9:
                break
            kept.append(pixel)
            walked += step
        out.append(Scribble(s.category, kept, s.brush_radius))
    return ScribbleSet(sset.image_ref, sset.width, sset.height, out)


# ---------------------------------------------------------------------------
# synthetic data

DEFAULT_PALETTE = [
    (32, 32, 32),      # 0: background
    (230, 40, 40),     # 1
    (40, 200, 60),     # 2
    (50, 80, 235),     # 3
    (235, 220, 50),    # 4
    (200, 50, 220),    # 5
    (40, 210, 220),    # 6
    (245, 140, 30),    # 7
]


@dataclass
class SynthSpec:
    width: int = 96
    height: int = 96
    min_regions: int = 3          # total regions, background included
    max_regions: int = 5
    palette: list = field(default_factory=lambda: list(DEFAULT_PALETTE))
    noise_std: float = 0.0
    scribble_fraction: float = 0.7
    seed: int = 0

    def validate(self):
        if self.width < 32 or self.height < 32:
            raise errors.InvalidSpec("image must be at least 32x32")
        if self.min_regions < 2 or self.max_regions < self.min_regions:
            raise errors.InvalidSpec("need at least background plus one object region")
        if not 0.0 <= self.scribble_fraction <= 1.0:
            raise errors.InvalidSpec("scribble_fraction must be in [0, 1]")
        if self.max_regions > len(self.palette):
            raise errors.InvalidSpec(
                f"palette has {len(self.palette)} colors for up to {self.max_regions} regions")
        if self.noise_std < 0:
            raise errors.InvalidSpec("noise_std must be >= 0")


BORDER = 4  # min distance between a region bbox and the image border / other regions


def _place_regions(spec, rng):
    """Non-overlapping region bboxes: (category, shape, x0, y0, bw, bh)."""
    n_regions = int(rng.integers(spec.min_regions, spec.max_regions + 1))
    n_objects = n_regions - 1
    cats = sorted(int(c) for c in
                  rng.choice(np.arange(1, len(spec.palette)), size=n_objects, replace=False))
    lo = max(12, min(spec.width, spec.height) // 5)
    hi = max(lo + 1, int(min(spec.width, spec.height) / 2.6))
    placed = []
    for cat in cats:
        for _ in range(200):
            bw = int(rng.integers(lo, hi))
            bh = int(rng.integers(lo, hi))
            x0 = int(rng.integers(BORDER, spec.width - BORDER - bw))
            y0 = int(rng.integers(BORDER, spec.height - BORDER - bh))
            # reject if the BORDER-dilated bbox intersects an earlier region
            overlaps = any(
                x0 - BORDER < px + pbw and px - BORDER < x0 + bw and
                y0 - BORDER < py + pbh and py - BORDER < y0 + bh
                for _, _, px, py, pbw, pbh in placed)
            if not overlaps:
                shape = "ellipse" if rng.integers(2) else "rect"
                placed.append((cat, shape, x0, y0, bw, bh))
                break
    return placed


def _paint(spec, placed):
    gt = np.zeros((spec.height, spec.width), dtype=np.uint8)
    img = np.empty((spec.height, spec.width, 3), dtype=np.float64)
    img[:, :] = spec.palette[0]
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    for cat, shape, x0, y0, bw, bh in placed:
        if shape == "rect":
            inside = (xs >= x0) & (xs < x0 + bw) & (ys >= y0) & (ys < y0 + bh)
        else:
            cx, cy = x0 + (bw - 1) / 2.0, y0 + (bh - 1) / 2.0
            inside = (((xs - cx) / (bw / 2.0)) ** 2 + ((ys - cy) / (bh / 2.0)) ** 2) <= 1.0
        gt[inside] = cat
        img[inside] = spec.palette[cat]
    return img, gt


def _region_scribble(spec, cat, shape, x0, y0, bw, bh):
    """Axis-aligned stroke through the region center along its major axis.

    Clamped so every stroke pixel stays >= 3 px inside the region (for
    ellipses the across-axis clearance shrinks toward the tips, so the
    usable extent is reduced accordingly).
    """
    horizontal = bw >= bh
    length = int(round(spec.scribble_fraction * max(bw, bh)))
    cx = x0 + (bw - 1) // 2
    cy = y0 + (bh - 1) // 2
    along = (bw if horizontal else bh) / 2.0
    across = (bh if horizontal else bw) / 2.0
    room = along - 3.0
    if shape == "ellipse" and across > 3.0:
        room = min(room, along * math.sqrt(max(0.0, 1.0 - (3.0 / across) ** 2)))
    half_max = int(room)
    left = min(length // 2, half_max)
    right = min(length - 1 - length // 2, half_max)
    if length <= 1 or left + right <= 0:
        return Scribble(cat, [(cx, cy)])
    if horizontal:
        return Scribble(cat, [(cx - left, cy), (cx + right, cy)])
    return Scribble(cat, [(cx, cy - left), (cx, cy + right)])


def generate_synthetic(spec):
    """Deterministic synthetic (image, ground truth, scribbles) triple."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    placed = _place_regions(spec, rng)
    img, gt = _paint(spec, placed)
    if spec.noise_std > 0:
        img = img + rng.normal(0.0, spec.noise_std, img.shape)
    pixels = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    scribbles = []
    # background stroke along the top border band, which regions never reach
    bg_len = max(1, min(int(round(spec.scribble_fraction * max(spec.width, spec.height))),
                        spec.width - 4))
    bg_x0 = (spec.width - bg_len) // 2
    if bg_len <= 1:
        scribbles.append(Scribble(0, [(spec.width // 2, 2)]))
    else:
        scribbles.append(Scribble(0, [(bg_x0, 2), (bg_x0 + bg_len - 1, 2)]))
    for cat, shape, x0, y0, bw, bh in placed:
        scribbles.append(_region_scribble(spec, cat, shape, x0, y0, bw, bh))

    image = RgbImage(pixels)
    sset = ScribbleSet("synthetic", spec.width, spec.height, scribbles)
    sset.validate()
    return image, LabelMap(gt), sset
