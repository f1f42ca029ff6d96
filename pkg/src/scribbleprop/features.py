"""Color/texture histograms per superpixel and the appearance-similarity weight.

Color: 25 bins per RGB channel (75 total).  Texture: signed central-difference
luma gradients at the horizontal and vertical orientations, 10 bins each over
[-255, 255] (20 total).  Bins are concatenated and L1-normalized by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors

COLOR_BINS = 25          # per channel
TEXTURE_BINS = 10        # per orientation
FEATURE_DIM = 3 * COLOR_BINS + 2 * TEXTURE_BINS  # 95


@dataclass
class PairwiseParams:
    """Similarity kernel bandwidths and the global pairwise scale."""

    delta_c: float = 5.0
    delta_t: float = 10.0
    lambda_: float = 1.0

    def validate(self):
        if self.delta_c <= 0 or self.delta_t <= 0:
            raise errors.InvalidParameter("delta_c and delta_t must be > 0")
        if self.lambda_ < 0:
            raise errors.InvalidParameter("lambda must be >= 0")


def _normalize(bins, norm, blocks):
    bins = bins.astype(np.float64)
    if norm == "l1":
        total = bins.sum()
        return bins / total if total > 0 else bins
    if norm == "l2":
        n = math.sqrt((bins ** 2).sum())
        return bins / n if n > 0 else bins
    if norm == "per_channel":
        out = bins.copy()
        for lo, hi in blocks:
            s = out[lo:hi].sum()
            if s > 0:
                out[lo:hi] /= s * len(blocks)
        return out
    raise errors.InvalidParameter(f"unknown normalization '{norm}'")


def _pixel_arrays(pixels):
    if len(pixels) == 0:
        raise errors.EmptyPixelSet("histogram of an empty pixel set")
    arr = np.asarray(sorted(pixels), dtype=np.int64)
    return arr[:, 0], arr[:, 1]


def color_hist(image, pixels, norm="l1"):
    """75-bin RGB histogram of the given pixel set."""
    xs, ys = _pixel_arrays(pixels)
    vals = image.pixels[ys, xs].astype(np.int64)  # (n, 3)
    parts = [np.bincount(vals[:, c] * COLOR_BINS // 256, minlength=COLOR_BINS)
             for c in range(3)]
    bins = np.concatenate(parts)
    return _normalize(bins, norm, [(0, 25), (25, 50), (50, 75)])


def luma(image):
    """Integer luma plane, round(0.299 R + 0.587 G + 0.114 B)."""
    p = image.pixels.astype(np.float64)
    return np.rint(0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]).astype(np.int64)


def gradient_planes(image):
    """Signed central-difference luma gradients (horizontal, vertical).

    Borders replicate; values are clipped to [-255, 255].
    """
    lum = luma(image)
    right = np.concatenate([lum[:, 1:], lum[:, -1:]], axis=1)
    left = np.concatenate([lum[:, :1], lum[:, :-1]], axis=1)
    down = np.concatenate([lum[1:, :], lum[-1:, :]], axis=0)
    up = np.concatenate([lum[:1, :], lum[:-1, :]], axis=0)
    gx = np.clip(right - left, -255, 255)
    gy = np.clip(down - up, -255, 255)
    return gx, gy


def _grad_bin(g):
    # 10 uniform bins over [-255, 255]; bin 5 contains 0
    return np.minimum((g + 255) * TEXTURE_BINS // 510, TEXTURE_BINS - 1)


def texture_hist(image, pixels, norm="l1"):
    """20-bin gradient-orientation histogram of the given pixel set."""
    xs, ys = _pixel_arrays(pixels)
    gx, gy = gradient_planes(image)
    bins = np.concatenate([
        np.bincount(_grad_bin(gx[ys, xs]), minlength=TEXTURE_BINS),
        np.bincount(_grad_bin(gy[ys, xs]), minlength=TEXTURE_BINS),
    ])
    return _normalize(bins, norm, [(0, 10), (10, 20)])


def superpixel_features(image, spmap, norm="l1"):
    """(S, 95) feature matrix: color then texture histograms per superpixel.

    Matches color_hist/texture_hist exactly; computed in one vectorized pass.
    """
    ids = spmap.ids.ravel().astype(np.int64)
    s = spmap.count
    flat = image.pixels.reshape(-1, 3).astype(np.int64)
    color = np.empty((s, 3 * COLOR_BINS), dtype=np.float64)
    for c in range(3):
        b = flat[:, c] * COLOR_BINS // 256
        counts = np.bincount(ids * COLOR_BINS + b, minlength=s * COLOR_BINS)
        color[:, c * COLOR_BINS:(c + 1) * COLOR_BINS] = counts.reshape(s, COLOR_BINS)
    gx, gy = gradient_planes(image)
    tex = np.empty((s, 2 * TEXTURE_BINS), dtype=np.float64)
    for c, g in enumerate((gx, gy)):
        b = _grad_bin(g.ravel())
        counts = np.bincount(ids * TEXTURE_BINS + b, minlength=s * TEXTURE_BINS)
        tex[:, c * TEXTURE_BINS:(c + 1) * TEXTURE_BINS] = counts.reshape(s, TEXTURE_BINS)

    feats = np.empty((s, FEATURE_DIM), dtype=np.float64)
    for row in range(s):
        feats[row, :75] = _normalize(color[row], norm, [(0, 25), (25, 50), (50, 75)])
        feats[row, 75:] = _normalize(tex[row], norm, [(0, 10), (10, 20)])
    return feats


def pairwise_weight(hc_i, hc_j, ht_i, ht_j, params):
    """Appearance-similarity weight between two adjacent superpixels.

    lambda * exp(-||dhc||^2 / delta_c^2 - ||dht||^2 / delta_t^2); the
    label-disagreement indicator is applied by the energy model, not here.
    """
    dc = np.asarray(hc_i) - np.asarray(hc_j)
    dt = np.asarray(ht_i) - np.asarray(ht_j)
    expo = -(dc ** 2).sum() / params.delta_c ** 2 - (dt ** 2).sum() / params.delta_t ** 2
    return params.lambda_ * math.exp(expo)


def edge_weights(feats, edges, params):
    """Pairwise weight per adjacency edge, from the (S, 95) feature matrix."""
    params.validate()
    out = np.empty(len(edges), dtype=np.float64)
    for e, (i, j) in enumerate(edges):
        out[e] = pairwise_weight(feats[i, :75], feats[j, :75],
                                 feats[i, 75:], feats[j, 75:], params)
    return out
