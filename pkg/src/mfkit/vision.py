"""Grayscale preprocessing and silhouette-based face detection.

Detection works purely in 2D: a binary Sobel edge map is correlated against
an elliptical-annulus head-outline template (height:width 1.3, ring 2 px
thick at 64 px width, scaled proportionally). The score of a placement is
the fraction of template pixels that land on edge pixels, so scores are
exact rationals and the fast FFT path agrees bit-for-bit with a naive scan.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .errors import BoxOutOfBounds, ImageTooSmall
from .imageio import ImageBuffer

CHIP_SIZE = 64

# Rec. 601 luma weights for RGB -> gray.
_LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class GrayImage:
    """Single-channel image, float64 samples in [0, 1], frozen array."""

    pixels: np.ndarray  # shape (height, width)

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("GrayImage needs a 2-D array")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("GrayImage samples must lie in [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, order=True)
class FaceBox:
    """Detected head-outline box; (x, y) is the top-left pixel."""

    x: int
    y: int
    w: int
    h: int
    score: float

    def __post_init__(self):
        if self.w < 16 or self.h < 16:
            raise ValueError("face boxes must be at least 16 px on each side")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("score must lie in [0, 1]")

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class FaceChip:
    """Canonical 64x64 face crop.

    ``zero_mean_unit_norm`` records whether the samples were standardized;
    raw chips keep samples in [0, 1].
    """

    pixels: np.ndarray  # shape (64, 64)
    zero_mean_unit_norm: bool = False

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.shape != (CHIP_SIZE, CHIP_SIZE):
            raise ValueError(f"face chips are {CHIP_SIZE}x{CHIP_SIZE}")
        if not self.zero_mean_unit_norm and arr.size:
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError("raw chip samples must lie in [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def vector(self) -> np.ndarray:
        return self.pixels.reshape(-1)


@dataclass(frozen=True)
class DetectorParams:
    scales: tuple[int, ...] = tuple(range(24, 68, 4))
    edge_percentile: float = 88.0
    score_threshold: float = 0.28
    nms_overlap: float = 0.3

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        if not scales:
            raise ValueError("scales must be non-empty")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be strictly ascending")
        if scales[0] < 16:
            raise ValueError("scales below 16 px violate the face box minimum")
        if not 0.0 < self.edge_percentile <= 100.0:
            raise ValueError("edge_percentile must lie in (0, 100]")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must lie in [0, 1]")
        if not 0.0 <= self.nms_overlap <= 1.0:
            raise ValueError("nms_overlap must lie in [0, 1]")
        object.__setattr__(self, "scales", scales)


def luminance(image: ImageBuffer) -> GrayImage:
    """Convert to gray in [0, 1]; RGB uses the 0.299/0.587/0.114 weights."""
    arr = np.frombuffer(image.pixels, dtype=np.uint8).astype(np.float64) / 255.0
    if image.channels == 1:
        gray = arr.reshape(image.height, image.width)
    else:
        rgb = arr.reshape(image.height, image.width, 3)
        gray = rgb[..., 0] * _LUMA[0] + rgb[..., 1] * _LUMA[1] + rgb[..., 2] * _LUMA[2]
    return GrayImage(np.clip(gray, 0.0, 1.0))


def equalize(gray: GrayImage) -> GrayImage:
    """Histogram-equalize over 256 bins with the cumulative-count mapping.

    Each sample maps to cdf(bin)/n where bins are round(v*255). An image
    that occupies a single bin maps to that bin's normalized value instead
    (the cdf would send everything to 1.0).
    """
    bins = np.rint(gray.pixels * 255.0).astype(np.int64)
    counts = np.bincount(bins.reshape(-1), minlength=256)
    occupied = np.flatnonzero(counts)
    if occupied.size <= 1:
        level = float(occupied[0]) / 255.0 if occupied.size else 0.0
        return GrayImage(np.full_like(gray.pixels, level))
    cdf = np.cumsum(counts) / bins.size
    return GrayImage(cdf[bins])


def preprocess(image: ImageBuffer) -> GrayImage:
    """Luma conversion followed by histogram equalization."""
    return equalize(luminance(image))


def sobel_magnitude(gray: GrayImage) -> np.ndarray:
    """Sobel gradient magnitude; border pixels (no full 3x3 support) are 0."""
    if gray.height < 3 or gray.width < 3:
        raise ImageTooSmall(f"need at least 3x3, got {gray.width}x{gray.height}")
    p = gray.pixels
    gx = (
        (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2])
    )
    gy = (
        (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:])
        - (p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:])
    )
    mag = np.zeros_like(p)
    mag[1:-1, 1:-1] = np.hypot(gx, gy)
    return mag


def edge_map(gray: GrayImage, edge_percentile: float) -> GrayImage:
    """Binary edge map: magnitude strictly above the given percentile of the
    nonzero magnitudes. Percentile 100 therefore yields an empty map."""
    mag = sobel_magnitude(gray)
    nonzero = mag[mag > 0.0]
    if nonzero.size == 0:
        return GrayImage(np.zeros_like(mag))
    threshold = np.percentile(nonzero, edge_percentile)
    return GrayImage((mag > threshold).astype(np.float64))


@lru_cache(maxsize=64)
def head_template(width: int) -> np.ndarray:
    """Boolean elliptical-annulus mask for a head outline of the given width.

    Height is round(1.3 * width); the ring is width/32 px thick (2 px at the
    canonical 64 px width).
    """
    height = int(round(1.3 * width))
    thickness = width / 32.0
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    rx, ry = (width - 1) / 2.0, (height - 1) / 2.0
    rxi, ryi = max(rx - thickness, 0.5), max(ry - thickness, 0.5)
    ys, xs = np.mgrid[0:height, 0:width]
    outer = ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0
    inner = ((xs - cx) / rxi) ** 2 + ((ys - cy) / ryi) ** 2 <= 1.0
    mask = outer & ~inner
    mask.flags.writeable = False
    return mask


def template_height(width: int) -> int:
    return int(round(1.3 * width))


def _box_iou(a: FaceBox, b: FaceBox) -> float:
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def greedy_nms(boxes: list[FaceBox], overlap: float) -> list[FaceBox]:
    """Keep boxes in (score desc, y, x, w) order, dropping any box whose IoU
    with an already-kept box exceeds ``overlap``."""
    ordered = sorted(boxes, key=lambda b: (-b.score, b.y, b.x, b.w))
    kept: list[FaceBox] = []
    for box in ordered:
        if all(_box_iou(box, k) <= overlap for k in kept):
            kept.append(box)
    return kept


def detect_faces(gray: GrayImage, params: DetectorParams | None = None) -> list[FaceBox]:
    """Scan the edge map with the head-outline template at every scale.

    Candidate placements score >= score_threshold; greedy NMS then removes
    overlaps. Result is sorted by (score desc, y, x, w).
    """
    params = params or DetectorParams()
    min_w = params.scales[0]
    if gray.width < min_w or gray.height < template_height(min_w):
        raise ImageTooSmall(
            f"{gray.width}x{gray.height} image cannot fit the smallest "
            f"{min_w}x{template_height(min_w)} template"
        )
    edges = edge_map(gray, params.edge_percentile).pixels
    candidates: list[FaceBox] = []
    for w in params.scales:
        h = template_height(w)
        if w > gray.width or h > gray.height:
            continue
        mask = head_template(w)
        n_template = int(mask.sum())
        # Correlation via FFT; counts are small integers so rounding the
        # float result recovers them exactly.
        hits = fftconvolve(edges, mask[::-1, ::-1].astype(np.float64), mode="valid")
        hits = np.rint(hits).astype(np.int64)
        np.clip(hits, 0, n_template, out=hits)
        scores = hits / n_template
        ys, xs = np.nonzero(scores >= params.score_threshold)
        for y, x in zip(ys.tolist(), xs.tolist()):
            candidates.append(FaceBox(x, y, w, h, float(scores[y, x])))
    return greedy_nms(candidates, params.nms_overlap)


def bilinear_sample(gray: GrayImage, x: float, y: float) -> float:
    """Bilinear interpolation at a (possibly fractional) pixel coordinate."""
    p = gray.pixels
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    x0 = min(max(x0, 0), gray.width - 1)
    y0 = min(max(y0, 0), gray.height - 1)
    x1 = min(x0 + 1, gray.width - 1)
    y1 = min(y0 + 1, gray.height - 1)
    fx = x - x0
    fy = y - y0
    top = p[y0, x0] * (1.0 - fx) + p[y0, x1] * fx
    bot = p[y1, x0] * (1.0 - fx) + p[y1, x1] * fx
    return float(top * (1.0 - fy) + bot * fy)


def crop_normalize(gray: GrayImage, box: FaceBox) -> FaceChip:
    """Bilinearly resample the box to the canonical 64x64 chip.

    The sampling grid is corner-aligned, so a 64x64 box copies exactly.
    """
    if box.x < 0 or box.y < 0 or box.x + box.w > gray.width or box.y + box.h > gray.height:
        raise BoxOutOfBounds(
            f"box {box.x},{box.y},{box.w}x{box.h} exceeds "
            f"{gray.width}x{gray.height} image"
        )
    n = CHIP_SIZE
    xs = box.x + np.arange(n) * (box.w - 1) / (n - 1)
    ys = box.y + np.arange(n) * (box.h - 1) / (n - 1)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.clip(x0, 0, gray.width - 2) if gray.width > 1 else np.zeros_like(x0)
    y0 = np.clip(y0, 0, gray.height - 2) if gray.height > 1 else np.zeros_like(y0)
    fx = xs - x0
    fy = ys - y0
    p = gray.pixels
    top = p[np.ix_(y0, x0)] * (1 - fx) + p[np.ix_(y0, np.minimum(x0 + 1, gray.width - 1))] * fx
    bot = p[np.ix_(np.minimum(y0 + 1, gray.height - 1), x0)] * (1 - fx) \
        + p[np.ix_(np.minimum(y0 + 1, gray.height - 1), np.minimum(x0 + 1, gray.width - 1))] * fx
    chip = top * (1 - fy)[:, None] + bot * fy[:, None]
    return FaceChip(np.clip(chip, 0.0, 1.0))


def largest_box(boxes: list[FaceBox]) -> FaceBox | None:
    """Pick the probe face when several are present: largest area, then the
    detector's (score desc, y, x) order."""
    if not boxes:
        return None
    return max(boxes, key=lambda b: (b.area, b.score, -b.y, -b.x))
