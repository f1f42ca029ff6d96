"""Graph-based superpixel segmentation and superpixel-graph adjacency.

The segmentation follows the classic union-find region-growing scheme on an
8-connected pixel grid: edges are sorted by RGB distance and two components
merge when the connecting edge is no heavier than the internal variation of
either side plus a size-dependent slack k/|component|.  A final pass absorbs
components smaller than ``min_size`` into their nearest-weight neighbor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from PIL import Image
from scipy import ndimage

from . import errors
from .core import RgbImage, rasterize


@dataclass
class SuperpixelMap:
    """Per-pixel superpixel ids, contiguous in [0, count)."""

    ids: np.ndarray  # (h, w) int32
    count: int

    @property
    def width(self):
        return self.ids.shape[1]

    @property
    def height(self):
        return self.ids.shape[0]

    def sizes(self):
        """Pixel count per superpixel."""
        return np.bincount(self.ids.ravel(), minlength=self.count)


@njit(cache=True)
def _find_root(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]  # path halving
        a = parent[a]
    return a


@njit(cache=True)
def _merge_pass(order, ea, eb, w, parent, size, thr, k):
    for t in range(order.shape[0]):
        idx = order[t]
        a = _find_root(parent, ea[idx])
        b = _find_root(parent, eb[idx])
        if a == b:
            continue
        ww = w[idx]
        if ww <= thr[a] and ww <= thr[b]:
            parent[b] = a
            size[a] += size[b]
            thr[a] = ww + k / size[a]


@njit(cache=True)
def _min_size_pass(order, ea, eb, parent, size, min_size):
    for t in range(order.shape[0]):
        idx = order[t]
        a = _find_root(parent, ea[idx])
        b = _find_root(parent, eb[idx])
        if a != b and (size[a] < min_size or size[b] < min_size):
            parent[b] = a
            size[a] += size[b]


@njit(cache=True)
def _roots(parent):
    out = np.empty(parent.shape[0], dtype=np.int64)
    for i in range(parent.shape[0]):
        out[i] = _find_root(parent, i)
    return out


def _grid_edges(img):
    """8-connected grid edges (a < b pixel indices) with RGB Euclidean weights."""
    h, w = img.shape[:2]
    idx = np.arange(h * w).reshape(h, w)
    pairs = []
    if w > 1:
        pairs.append((idx[:, :-1], idx[:, 1:]))          # east
    if h > 1:
        pairs.append((idx[:-1, :], idx[1:, :]))          # south
    if h > 1 and w > 1:
        pairs.append((idx[:-1, :-1], idx[1:, 1:]))       # south-east
        pairs.append((idx[:-1, 1:], idx[1:, :-1]))       # south-west
    if not pairs:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
    # every pair above has a < b (the second pixel is on a later row or column)
    ea = np.concatenate([p[0].ravel() for p in pairs]).astype(np.int64)
    eb = np.concatenate([p[1].ravel() for p in pairs]).astype(np.int64)
    flat = img.reshape(-1, 3).astype(np.float64)
    weights = np.sqrt(((flat[ea] - flat[eb]) ** 2).sum(axis=1))
    return ea, eb, weights


def segment_fh(image, k=100.0, sigma=0.5, min_size=50):
    """Segment an image into superpixels.

    k scales the merge threshold relative to component size, sigma is the
    std of an optional per-channel Gaussian pre-smoothing, and min_size is
    enforced by a final merge pass.  Fully deterministic: edges sort by
    (weight, smaller pixel index, larger pixel index).
    """
    if k <= 0:
        raise errors.InvalidParameter(f"k must be > 0, got {k}")
    if sigma < 0:
        raise errors.InvalidParameter(f"sigma must be >= 0, got {sigma}")
    if min_size < 1:
        raise errors.InvalidParameter(f"min_size must be >= 1, got {min_size}")

    pixels = image.pixels.astype(np.float64)
    if sigma > 0:
        pixels = np.stack(
            [ndimage.gaussian_filter(pixels[:, :, c], sigma, mode="nearest")
             for c in range(3)], axis=2)
    h, w = pixels.shape[:2]
    n = h * w

    ea, eb, weights = _grid_edges(pixels)
    order = np.lexsort((eb, ea, weights))

    parent = np.arange(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    thr = np.full(n, float(k), dtype=np.float64)
    _merge_pass(order, ea, eb, weights, parent, size, thr, float(k))
    if min_size > 1:
        _min_size_pass(order, ea, eb, parent, size, int(min_size))

    roots = _roots(parent)
    # relabel roots to contiguous ids in row-major first-occurrence order
    uniq, first, inv = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq))
    ids = rank[inv].reshape(h, w).astype(np.int32)
    return SuperpixelMap(ids, int(len(uniq)))


def adjacency(spmap):
    """Unordered superpixel pairs sharing a 4-neighbor pixel boundary.

    Returns a duplicate-free list of (i, j) with i < j, sorted by (i, j).
    """
    ids = spmap.ids
    pairs = []
    if ids.shape[1] > 1:
        pairs.append(np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1))
    if ids.shape[0] > 1:
        pairs.append(np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1))
    if not pairs:
        return []
    p = np.concatenate(pairs, axis=0)
    p = p[p[:, 0] != p[:, 1]]
    if len(p) == 0:
        return []
    p = np.sort(p, axis=1)
    p = np.unique(p, axis=0)
    return [(int(i), int(j)) for i, j in p]


def scribble_overlap(spmap, sset):
    """Per-superpixel set of scribble categories whose raster intersects it."""
    if (sset.width, sset.height) != (spmap.width, spmap.height):
        raise errors.DimensionMismatch(
            f"scribbles are {sset.width}x{sset.height}, map is {spmap.width}x{spmap.height}")
    overlaps = [set() for _ in range(spmap.count)]
    for s in sset.scribbles:
        for x, y in rasterize(s, sset.width, sset.height):
            overlaps[spmap.ids[y, x]].add(s.category)
    return overlaps


# ---------------------------------------------------------------------------
# debug exports

def save_id_map(spmap, path):
    """Superpixel ids as a 16-bit grayscale PNG."""
    if spmap.count > 65536:
        raise errors.ValueOutOfRange(f"{spmap.count} superpixels exceed 16-bit range")
    Image.fromarray(spmap.ids.astype(np.uint16)).save(path, format="PNG")


def boundary_overlay(image, spmap, color=(255, 255, 0)):
    """Copy of the image with superpixel boundaries painted in ``color``."""
    ids = spmap.ids
    mask = np.zeros(ids.shape, dtype=bool)
    mask[:, :-1] |= ids[:, :-1] != ids[:, 1:]
    mask[:-1, :] |= ids[:-1, :] != ids[1:, :]
    out = image.pixels.copy()
    out[mask] = np.array(color, dtype=np.uint8)
    return RgbImage(out)
