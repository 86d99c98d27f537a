"""Breast-region extraction: enhance, binarize, orient, separate, label, select."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .errors import DegenerateInputError
from .raster import BinaryMask, GrayImage, LabelMap

log = logging.getLogger(__name__)

Point = Tuple[int, int]


class Orientation(enum.Enum):
    LEFT_TO_RIGHT = "left-to-right"
    RIGHT_TO_LEFT = "right-to-left"


@dataclass(frozen=True)
class EnhanceParams:
    s_min: int
    s_max: int
    c: float

    @classmethod
    def from_image(cls, img: GrayImage) -> "EnhanceParams":
        s_min, s_max = int(img.data.min()), int(img.data.max())
        if s_max <= s_min:
            raise DegenerateInputError("constant image: enhancement factor undefined")
        return cls(s_min, s_max, -2.0 / math.log(s_max - s_min + 1))


def log_enhance(img: GrayImage, params: Optional[EnhanceParams] = None) -> np.ndarray:
    """G = c*log(I - s_min + 1) + 1 with c = -2/log(s_max - s_min + 1).

    Decreasing in I, spanning [-1, 1]: s_min maps to 1, s_max to -1.
    """
    if params is None:
        params = EnhanceParams.from_image(img)
    return params.c * np.log(img.data - params.s_min + 1.0) + 1.0


def rescale_enhanced(enhanced: np.ndarray, max_value: int) -> np.ndarray:
    """Affine map of [-1, 1] onto [0, max_value] (real valued)."""
    return (np.asarray(enhanced, dtype=np.float64) + 1.0) * (0.5 * max_value)


def enhanced_raster(img: GrayImage) -> GrayImage:
    """Enhanced image rounded back onto the integer gray scale of ``img``."""
    scaled = rescale_enhanced(log_enhance(img), img.max_value)
    return GrayImage(np.clip(np.rint(scaled), 0, img.max_value).astype(np.int64), img.max_value)


# --------------------------------------------------------------------------
# thresholding
#
# A threshold t splits the histogram into background {v <= t} and
# foreground {v > t}; candidates are 0 .. max_value-1.  Each method scores
# every candidate with both classes non-empty and returns the smallest
# maximiser (scores within a relative 1e-12 count as tied).

_TIE = 1e-12


def _histogram(img: GrayImage) -> np.ndarray:
    hist = np.bincount(img.data.ravel(), minlength=img.max_value + 1).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateInputError("thresholding needs at least two distinct gray values")
    return hist


def _pick(scores: np.ndarray, valid: np.ndarray) -> int:
    scores = np.where(valid, scores, -np.inf)
    best = scores.max()
    tol = _TIE * max(abs(best), 1.0)
    return int(np.flatnonzero(scores >= best - tol)[0])


def _split_stats(hist):
    levels = np.arange(hist.size, dtype=np.float64)
    n0 = np.cumsum(hist)[:-1]
    total = hist.sum()
    n1 = total - n0
    valid = (n0 > 0) & (n1 > 0)
    return levels, n0, n1, total, valid


def otsu_scores(hist: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Between-class variance for every candidate threshold."""
    levels, n0, n1, total, valid = _split_stats(hist)
    s0 = np.cumsum(levels * hist)[:-1]
    s_all = float((levels * hist).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        score = (total * s0 - n0 * s_all) ** 2 / (n0 * n1 * total * total)
    return np.where(valid, score, 0.0), valid


def max_entropy_scores(hist: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sum of background and foreground Shannon entropies (Kapur)."""
    _, n0, n1, total, valid = _split_stats(hist)
    p = hist / total
    with np.errstate(invalid="ignore", divide="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
        e0 = np.cumsum(plogp)[:-1]
        e_all = plogp.sum()
        p0, p1 = n0 / total, n1 / total
        h0 = np.log(p0) - e0 / p0
        h1 = np.log(p1) - (e_all - e0) / p1
        score = h0 + h1
    return np.where(valid, score, -np.inf), valid


def max_correlation_scores(hist: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Yen's criterion -log(Q_bg * Q_fg) + 2 log(P_bg * P_fg), Q = sum p^2."""
    _, n0, n1, total, valid = _split_stats(hist)
    p = hist / total
    q0 = np.cumsum(p * p)[:-1]
    q1 = (p * p).sum() - q0
    with np.errstate(invalid="ignore", divide="ignore"):
        score = -np.log(q0 * q1) + 2.0 * np.log((n0 / total) * (n1 / total))
    return np.where(valid, score, -np.inf), valid


def threshold_otsu(img: GrayImage) -> int:
    return _pick(*otsu_scores(_histogram(img)))


def threshold_max_entropy(img: GrayImage) -> int:
    return _pick(*max_entropy_scores(_histogram(img)))


def threshold_max_correlation(img: GrayImage) -> int:
    return _pick(*max_correlation_scores(_histogram(img)))


THRESHOLDS = {
    "otsu": threshold_otsu,
    "max-entropy": threshold_max_entropy,
    "max-correlation": threshold_max_correlation,
}


# --------------------------------------------------------------------------
# orientation / separation


def detect_orientation(mask: BinaryMask) -> Orientation:
    bits = mask.bits
    if not bits.any():
        raise DegenerateInputError("orientation of an empty mask is undefined")
    half = bits.shape[1] // 2
    left = int(bits[:, :half].sum())
    right = int(bits[:, half:].sum())
    return Orientation.RIGHT_TO_LEFT if right > left else Orientation.LEFT_TO_RIGHT


def draw_line(p0: Point, p1: Point) -> np.ndarray:
    """Integer midpoint (Bresenham) rasterisation, both endpoints included.

    Returns an ``(n, 2)`` array of ``(x, y)`` pixels.
    """
    x0, y0 = p0
    x1, y1 = p1
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pts = []
    while True:
        pts.append((x0, y0))
        if x0 == x1 and y0 == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy
    return np.array(pts, dtype=np.int64)


@dataclass(frozen=True)
class Separation:
    mask: BinaryMask
    point_a: Optional[Point]
    point_b: Optional[Point]
    skipped: bool


def _first_background(bits, columns, rows) -> Optional[Point]:
    for x in columns:
        col = bits[rows, x]
        hits = np.flatnonzero(~col)
        if hits.size:
            return int(x), int(rows[hits[0]])
    return None


def separate_background(mask: BinaryMask, orient: Orientation) -> Separation:
    """Cut the breast loose from tape artefacts along the top and bottom.

    Inside the top strip (height ceil(h/12)) columns are walked from the
    chest-wall side, each scanned top to bottom; the first background
    pixel is A.  B is found the same way in the bottom strip, scanning
    bottom-up.  Each point is joined to the chest-wall border on its own
    row and the line is cleared.
    """
    bits = mask.bits
    if not bits.any():
        raise DegenerateInputError("cannot separate an empty mask")
    h, w = bits.shape
    strip = max(1, math.ceil(h / 12))
    if orient is Orientation.LEFT_TO_RIGHT:
        columns, wall = range(w), 0
    else:
        columns, wall = range(w - 1, -1, -1), w - 1
    a = _first_background(bits, columns, np.arange(0, strip))
    b = _first_background(bits, columns, np.arange(h - 1, h - 1 - strip, -1))
    if a is None or b is None:
        log.warning("separation skipped: no background pixel in %s strip",
                    "top" if a is None else "bottom")
        return Separation(mask, a, b, True)
    out = bits.copy()
    for p in (a, b):
        line = draw_line((wall, p[1]), p)
        out[line[:, 1], line[:, 0]] = False
    return Separation(BinaryMask(out), a, b, False)


# --------------------------------------------------------------------------
# labeling / selection


def label_components(mask: BinaryMask) -> LabelMap:
    """8-connected components, numbered by first pixel in row-major order."""
    labels, count = kernels.label8(mask.bits)
    return LabelMap(labels, count)


@dataclass(frozen=True)
class BreastRegion:
    mask: BinaryMask
    masked_image: GrayImage
    anchor_points: Tuple[Optional[Point], Optional[Point]] = (None, None)


def select_breast(labels: LabelMap, original: GrayImage,
                  anchors: Tuple[Optional[Point], Optional[Point]] = (None, None)) -> BreastRegion:
    if labels.label_count < 1:
        raise DegenerateInputError("no labelled component to select")
    sizes = labels.sizes()
    best = int(np.argmax(sizes[1:])) + 1
    keep = labels.labels == best
    masked = np.where(keep, original.data, 0)
    return BreastRegion(BinaryMask(keep), GrayImage(masked, original.max_value), anchors)


@dataclass(frozen=True)
class Extraction:
    """Every intermediate of the extraction, kept for overlays and tests."""

    binarized_input: GrayImage
    threshold: int
    binary: BinaryMask
    orientation: Orientation
    separation: Separation
    labels: LabelMap
    region: BreastRegion


def extract_breast(img: GrayImage, method: str = "otsu", enhance: bool = True) -> Extraction:
    try:
        thresholder = THRESHOLDS[method]
    except KeyError:
        raise ValueError(f"unknown thresholding method {method!r}") from None
    work = enhanced_raster(img) if enhance else img
    t = thresholder(work)
    # enhancement reverses the gray order, so the breast falls below t
    bits = work.data <= t if enhance else work.data > t
    binary = BinaryMask(bits)
    orient = detect_orientation(binary)
    sep = separate_background(binary, orient)
    labels = label_components(sep.mask)
    region = select_breast(labels, img, (sep.point_a, sep.point_b))
    return Extraction(work, t, binary, orient, sep, labels, region)
