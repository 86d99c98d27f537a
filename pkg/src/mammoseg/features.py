"""ROI bounding and gray-level co-occurrence texture features."""
from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from typing import Dict, Tuple

import numpy as np

from . import kernels
from .errors import DegenerateInputError
from .raster import GrayImage, LabelMap

# unit displacements (dx, dy) with y pointing down the rows
ORIENTATIONS: Dict[int, Tuple[int, int]] = {
    0: (1, 0),
    45: (1, -1),
    90: (0, -1),
    135: (-1, -1),
}

FEATURE_NAMES = ("moy", "variance", "energy", "contrast", "entropy", "homogeneity")


@dataclass(frozen=True)
class RoiBox:
    """Axis-aligned box given by its corners p1 = (x_min, y_max), p2 = (x_max, y_min)."""

    p1: Tuple[int, int]
    p2: Tuple[int, int]

    def __post_init__(self):
        if self.p1[0] > self.p2[0] or self.p2[1] > self.p1[1]:
            raise ValueError(f"inverted box {self.p1}, {self.p2}")

    @classmethod
    def from_extent(cls, x_min, y_min, x_max, y_max) -> "RoiBox":
        return cls((int(x_min), int(y_max)), (int(x_max), int(y_min)))

    @property
    def x_min(self):
        return self.p1[0]

    @property
    def x_max(self):
        return self.p2[0]

    @property
    def y_min(self):
        return self.p2[1]

    @property
    def y_max(self):
        return self.p1[1]

    @property
    def extent(self):
        return self.x_min, self.y_min, self.x_max, self.y_max

    def crop(self, data: np.ndarray) -> np.ndarray:
        return data[self.y_min:self.y_max + 1, self.x_min:self.x_max + 1]


def roi_bounding_box(regions) -> RoiBox:
    """Tight box around every region pixel (accepts DetectedRegions or LabelMap)."""
    labels = regions.regions if hasattr(regions, "regions") else regions
    if isinstance(labels, LabelMap):
        fg = labels.labels > 0
    else:
        fg = np.asarray(labels, dtype=bool)
    ys, xs = np.nonzero(fg)
    if xs.size == 0:
        raise DegenerateInputError("no detected region to bound")
    return RoiBox.from_extent(xs.min(), ys.min(), xs.max(), ys.max())


@dataclass(frozen=True)
class Glcm:
    levels: int
    matrix: np.ndarray
    offset: Tuple[int, int]


def quantize(values: np.ndarray, levels: int) -> np.ndarray:
    """Linear binning of ``values`` over their own min..max into ``levels`` bins."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros(values.shape, dtype=np.int64)
    q = np.floor((values - lo) / (hi - lo) * levels).astype(np.int64)
    return np.minimum(q, levels - 1)


def _check_box(img: GrayImage, box: RoiBox):
    if box.x_min < 0 or box.y_min < 0 or box.x_max >= img.width or box.y_max >= img.height:
        raise ValueError(f"box {box.extent} outside {img.width}x{img.height} image")


def glcm_from_levels(q: np.ndarray, levels: int, offset: Tuple[int, int]) -> Glcm:
    counts = kernels.glcm_counts(q, offset[0], offset[1], levels)
    total = counts.sum()
    if total == 0:
        raise DegenerateInputError(f"no pixel pair at offset {offset} inside the box")
    return Glcm(levels, counts / total, tuple(offset))


def compute_glcm(img: GrayImage, box: RoiBox, levels: int = 16,
                 offset: Tuple[int, int] = (1, 0)) -> Glcm:
    """Normalised, non-symmetric co-occurrence matrix of the box contents.

    Counts (q(p), q(p + offset)) for every pair with both pixels in the box.
    """
    if levels < 2:
        raise ValueError("need at least two gray levels")
    _check_box(img, box)
    q = quantize(box.crop(img.data), levels)
    return glcm_from_levels(q, levels, offset)


@dataclass(frozen=True)
class FeatureVector:
    moy: float
    variance: float
    energy: float
    contrast: float
    entropy: float
    homogeneity: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "FeatureVector":
        return cls(*(float(v) for v in arr))

    @staticmethod
    def names():
        return tuple(f.name for f in fields(FeatureVector))


def glcm_features(glcm: Glcm, literal_mean: bool = False) -> FeatureVector:
    """The six statistics of one normalised GLCM.

    ``moy`` is the row-index mean sum_xy x*p(x, y) and ``variance`` the
    spread of the row index around it.  With ``literal_mean`` the mean is
    instead (1/L) * sum p, which for a normalised matrix is just 1/L.
    Entropy uses log base 2.
    """
    p = np.asarray(glcm.matrix, dtype=np.float64)
    if p.min() < 0 or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("GLCM is not normalised")
    L = p.shape[0]
    i, j = np.indices(p.shape, dtype=np.float64)
    moy = p.sum() / L if literal_mean else float((i * p).sum())
    variance = float(((i - moy) ** 2 * p).sum())
    energy = float((p * p).sum())
    contrast = float(((i - j) ** 2 * p).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum()) + 0.0
    homogeneity = float((p / (1.0 + (i - j) ** 2)).sum())
    return FeatureVector(float(moy), variance, energy, contrast, entropy, homogeneity)


def orientation_features(img: GrayImage, box: RoiBox, levels: int = 16,
                         literal_mean: bool = False) -> Dict[int, FeatureVector]:
    _check_box(img, box)
    q = quantize(box.crop(img.data), levels)
    return {
        angle: glcm_features(glcm_from_levels(q, levels, off), literal_mean)
        for angle, off in ORIENTATIONS.items()
    }


def feature_vector(img: GrayImage, box: RoiBox, levels: int = 16,
                   literal_mean: bool = False) -> FeatureVector:
    """Each statistic averaged over the 0, 45, 90 and 135 degree GLCMs."""
    per = orientation_features(img, box, levels, literal_mean)
    stacked = np.stack([fv.as_array() for fv in per.values()])
    return FeatureVector.from_array(stacked.mean(axis=0))
