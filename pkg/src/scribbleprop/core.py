"""Domain types, raster/annotation file I/O, and dataset indexing.

On-disk formats:
  - images: 8-bit PNG or binary PPM (P6)
  - label maps: 8-bit single-channel PNG, pixel value = category id, 255 = unknown
  - scribbles: JSON, see ``scribbleset_to_json``
  - dataset index: JSON list of {"image": path, "scribbles": path|null, "mask": path|null}
"""

from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import errors

UNKNOWN = 255  # "ignore" sentinel in label maps


@dataclass
class RgbImage:
    """An 8-bit RGB raster, stored as a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise errors.DimensionMismatch(f"expected (h, w, 3) array, got {self.pixels.shape}")
        if self.pixels.shape[0] < 1 or self.pixels.shape[1] < 1:
            raise errors.DimensionMismatch("image must be at least 1x1")

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]


@dataclass
class Scribble:
    """One annotated stroke: a polyline of (x, y) vertices carrying a category."""

    category: int
    polyline: list  # [(x, y), ...] in pixel coordinates
    brush_radius: int = 0

    def validate(self, width, height):
        if self.category < 0:
            raise errors.SchemaViolation(f"negative category {self.category}")
        if self.brush_radius < 0:
            raise errors.SchemaViolation(f"negative brush_radius {self.brush_radius}")
        if len(self.polyline) == 0:
            raise errors.EmptyPolyline("scribble polyline is empty")
        for x, y in self.polyline:
            if not (0 <= x < width and 0 <= y < height):
                raise errors.OutOfBoundsCoordinate(
                    f"vertex ({x}, {y}) outside {width}x{height} image")


@dataclass
class ScribbleSet:
    """All scribbles for one image; the only supervision signal."""

    image_ref: str
    width: int
    height: int
    scribbles: list = field(default_factory=list)

    def validate(self):
        for s in self.scribbles:
            s.validate(self.width, self.height)

    def categories(self):
        """Distinct annotated categories, sorted ascending."""
        return sorted({s.category for s in self.scribbles})


@dataclass
class LabelMap:
    """Per-pixel category ids (uint8); 255 marks unknown pixels."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise errors.DimensionMismatch(f"expected (h, w) array, got {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise errors.ValueOutOfRange(
                    f"label values outside [0, 255]: min={arr.min()}, max={arr.max()}")
            arr = arr.astype(np.uint8)
        self.labels = arr

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]


@dataclass
class DatasetEntry:
    image: str
    scribbles: str | None = None
    mask: str | None = None


@dataclass
class DatasetIndex:
    entries: list


# ---------------------------------------------------------------------------
# raster I/O

def _head_bytes(source):
    if hasattr(source, "seek"):
        source.seek(0)
        head = source.read(8)
        source.seek(0)
        return head
    try:
        with open(source, "rb") as f:
            return f.read(8)
    except OSError:
        return b""


def _decode_image(source, label):
    try:
        with Image.open(source) as im:
            if im.format not in ("PNG", "PPM"):
                raise errors.UnsupportedFormat(f"{label}: format {im.format} not supported")
            if im.mode == "L":
                im = im.convert("RGB")
            if im.mode != "RGB":
                raise errors.UnsupportedFormat(f"{label}: mode {im.mode} not supported")
            pixels = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as e:
        # a recognizable magic number that still fails to parse is truncation
        if _head_bytes(source).startswith((b"\x89PNG", b"P6")):
            raise errors.CorruptData(f"{label}: truncated or damaged image") from e
        raise errors.UnsupportedFormat(f"{label}: not a recognized image file") from e
    except OSError as e:
        raise errors.CorruptData(f"{label}: {e}") from e
    except SyntaxError as e:  # Pillow's PPM parser raises this on truncation
        raise errors.CorruptData(f"{label}: {e}") from e
    return RgbImage(pixels)


def load_image(path):
    """Decode an 8-bit PNG or binary PPM file into an RgbImage."""
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    return _decode_image(path, str(path))


def decode_image_bytes(data, label="<upload>"):
    """Decode in-memory PNG/PPM bytes into an RgbImage."""
    return _decode_image(io.BytesIO(data), label)


def save_image(image, path):
    """Write an RgbImage as PNG."""
    try:
        Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")
    except OSError as e:
        raise errors.IoFailure(f"{path}: {e}") from e


def load_labelmap(path):
    """Read an 8-bit single-channel PNG label map."""
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise errors.UnsupportedFormat(f"{path}: format {im.format} not supported")
            if im.mode != "L":
                raise errors.UnsupportedFormat(f"{path}: expected 8-bit grayscale, got {im.mode}")
            labels = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as e:
        raise errors.UnsupportedFormat(f"{path}: not a recognized image file") from e
    except OSError as e:
        raise errors.CorruptData(f"{path}: {e}") from e
    return LabelMap(labels)


def labelmap_png_bytes(labelmap):
    """Encode a LabelMap as 8-bit grayscale PNG bytes (deterministic)."""
    arr = np.asarray(labelmap.labels)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise errors.ValueOutOfRange(
            f"label values outside [0, 255]: min={arr.min()}, max={arr.max()}")
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_labelmap(labelmap, path):
    """Write a LabelMap as an 8-bit grayscale PNG; round-trips bit-exactly."""
    data = labelmap_png_bytes(labelmap)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise errors.IoFailure(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# scribble JSON

def _require(cond, msg):
    if not cond:
        raise errors.SchemaViolation(msg)


def scribbleset_from_dict(obj):
    """Build a validated ScribbleSet from a parsed scribble-JSON dict."""
    _require(isinstance(obj, dict), "top level must be an object")
    for key in ("image", "width", "height", "scribbles"):
        _require(key in obj, f"missing field '{key}'")
    _require(isinstance(obj["image"], str), "'image' must be a string")
    _require(isinstance(obj["width"], int) and isinstance(obj["height"], int),
             "'width'/'height' must be integers")
    _require(isinstance(obj["scribbles"], list), "'scribbles' must be a list")
    scribbles = []
    for i, s in enumerate(obj["scribbles"]):
        _require(isinstance(s, dict), f"scribble {i} must be an object")
        for key in ("category", "polyline", "brush_radius"):
            _require(key in s, f"scribble {i} missing field '{key}'")
        _require(isinstance(s["category"], int), f"scribble {i}: category must be an integer")
        _require(isinstance(s["brush_radius"], int), f"scribble {i}: brush_radius must be an integer")
        _require(isinstance(s["polyline"], list), f"scribble {i}: polyline must be a list")
        poly = []
        for v in s["polyline"]:
            _require(isinstance(v, list) and len(v) == 2
                     and all(isinstance(c, int) for c in v),
                     f"scribble {i}: polyline vertices must be [int, int] pairs")
            poly.append((v[0], v[1]))
        scribbles.append(Scribble(s["category"], poly, s["brush_radius"]))
    sset = ScribbleSet(obj["image"], obj["width"], obj["height"], scribbles)
    sset.validate()
    return sset


def scribbleset_to_dict(sset):
    """Canonical dict form (fixed field order) of a ScribbleSet."""
    return {
        "image": sset.image_ref,
        "width": int(sset.width),
        "height": int(sset.height),
        "scribbles": [
            {
                "category": int(s.category),
                "polyline": [[int(x), int(y)] for x, y in s.polyline],
                "brush_radius": int(s.brush_radius),
            }
            for s in sset.scribbles
        ],
    }


def scribbleset_to_json(sset):
    """Canonical JSON serialization; byte-stable for identical sets."""
    return json.dumps(scribbleset_to_dict(sset), indent=2) + "\n"


def load_scribbles(path):
    """Read and validate a scribble JSON file."""
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise errors.SchemaViolation(f"{path}: invalid JSON: {e}") from e
    return scribbleset_from_dict(obj)


def save_scribbles(sset, path):
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(scribbleset_to_json(sset))
    except OSError as e:
        raise errors.IoFailure(f"{path}: {e}") from e


# ---------------------------------------------------------------------------
# rasterization

def _bresenham(x0, y0, x1, y1):
    """Integer line pixels from (x0, y0) to (x1, y1), endpoints included."""
    points = []
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        points.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return points


def _segment_pixels(p0, p1):
    """Line pixels from p0 to p1, rasterized direction-independently.

    Bresenham tie-breaking depends on direction, so each segment is traced
    in canonical (lexicographic) orientation and flipped back if needed;
    the pixel SET of a polyline is then invariant under vertex reversal.
    """
    if p1 < p0:
        return _bresenham(*p1, *p0)[::-1]
    return _bresenham(*p0, *p1)


def polyline_chain(polyline):
    """Ordered pixel chain along a polyline (consecutive pixels 8-adjacent)."""
    chain = []
    for i in range(len(polyline) - 1):
        seg = _segment_pixels(tuple(polyline[i]), tuple(polyline[i + 1]))
        if chain:
            seg = seg[1:]  # segment start repeats previous end
        chain.extend(seg)
    if not chain:
        chain = [tuple(polyline[0])]
    return chain


_DISK_CACHE = {}


def _disk_offsets(radius):
    if radius not in _DISK_CACHE:
        r = int(radius)
        offs = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
                if dx * dx + dy * dy <= r * r]
        _DISK_CACHE[radius] = offs
    return _DISK_CACHE[radius]


def rasterize(scribble, width, height):
    """Pixels covered by a scribble: Bresenham chain dilated by a disk.

    Deterministic; the result is clipped to the image rectangle.
    """
    scribble.validate(width, height)
    chain = polyline_chain(scribble.polyline)
    if scribble.brush_radius == 0:
        return set(chain)
    pixels = set()
    for x, y in chain:
        for dx, dy in _disk_offsets(scribble.brush_radius):
            px, py = x + dx, y + dy
            if 0 <= px < width and 0 <= py < height:
                pixels.add((px, py))
    return pixels


def rasterize_set(sset):
    """[(category, pixel set)] for every scribble in the set."""
    return [(s.category, rasterize(s, sset.width, sset.height)) for s in sset.scribbles]


# ---------------------------------------------------------------------------
# dataset index

def load_dataset_index(path):
    """Read a dataset index; relative paths resolve against the index location."""
    if not os.path.isfile(path):
        raise errors.MissingFile(str(path))
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "r", encoding="utf-8") as f:
            items = json.load(f)
    except json.JSONDecodeError as e:
        raise errors.SchemaViolation(f"{path}: invalid JSON: {e}") from e
    _require(isinstance(items, list), "dataset index must be a JSON list")

    def resolve(p):
        if p is None:
            return None
        full = p if os.path.isabs(p) else os.path.join(base, p)
        if not os.path.isfile(full):
            raise errors.MissingFile(full)
        return full

    entries = []
    for i, item in enumerate(items):
        _require(isinstance(item, dict) and "image" in item, f"entry {i} must have 'image'")
        scr = item.get("scribbles")
        mask = item.get("mask")
        _require(scr is not None or mask is not None,
                 f"entry {i} needs at least one of 'scribbles'/'mask'")
        entries.append(DatasetEntry(resolve(item["image"]), resolve(scr), resolve(mask)))
    return DatasetIndex(entries)
