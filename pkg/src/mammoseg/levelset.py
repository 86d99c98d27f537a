"""Narrow-band level-set detection of bright regions.

The contour is the zero set of ``phi`` (negative inside).  Evolution
follows the edge + region speed

    phi_t = eps*g*|grad phi|*div(grad phi/|grad phi|)
            -/+ beta*grad g . grad phi - beta*Moy/Max
            -/+ nu*g*|grad phi|
            - theta*SkewNormal

with g = 1/(1 + |grad I|), Moy the clamped 3x3 mean, Max the image
maximum and SkewNormal the windowed third central moment scaled by its
largest magnitude.  The edge term defaults to pulling the front onto
edges and the nu term to shrinking it; both signs are configurable.
The initial contour comes from a fast-marching front
started at the brightest pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .breast import label_components
from .errors import ConfigurationError, DegenerateInputError
from .raster import BinaryMask, GrayImage, LabelMap

INFLATE = "inflate"
DEFLATE = "deflate"
ATTRACT = "attract"
REPEL = "repel"
GRADIENT_SCALES = ("max", "raw")


@dataclass(frozen=True)
class SpeedParams:
    epsilon: float = 0.4
    beta: float = 0.3
    nu: float = 0.2
    theta: float = 0.1
    alpha: float = 1.0
    # floor for the fast-marching denominator epsilon - alpha*|grad I|
    fm_floor: float = 1e-3
    nu_direction: str = DEFLATE
    edge_direction: str = ATTRACT
    skew_power: int = 3
    # "max" differentiates I / Max(I), matching the scale of the region terms;
    # "raw" differentiates gray levels directly
    gradient_scale: str = "max"

    def __post_init__(self):
        for name in ("epsilon", "beta", "nu", "theta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name}={v} outside [0, 1]")
        if self.fm_floor <= 0:
            raise ConfigurationError("fm_floor must be positive")
        if self.nu_direction not in (INFLATE, DEFLATE):
            raise ConfigurationError(f"nu_direction must be {INFLATE!r} or {DEFLATE!r}")
        if self.edge_direction not in (ATTRACT, REPEL):
            raise ConfigurationError(f"edge_direction must be {ATTRACT!r} or {REPEL!r}")
        if self.gradient_scale not in GRADIENT_SCALES:
            raise ConfigurationError(f"gradient_scale must be one of {GRADIENT_SCALES}")
        if self.skew_power not in (1, 3):
            raise ConfigurationError("skew_power must be 1 or 3")


@dataclass(frozen=True)
class Schedule:
    max_iterations: int = 600
    reinit_period: int = 10
    # fraction of band cells allowed to change sign over one reinit period
    convergence: float = 1e-3
    band_width: float = 6.0
    time_step: Optional[float] = None
    seed_fraction: float = 0.05
    t0_quantile: float = 0.0

    def __post_init__(self):
        if self.band_width < 3:
            raise ConfigurationError("band_width must be at least 3 cells")
        if self.reinit_period < 1 or self.max_iterations < 1:
            raise ConfigurationError("iteration counts must be positive")
        if not 0.0 <= self.seed_fraction <= 1.0:
            raise ConfigurationError("seed_fraction must lie in [0, 1]")
        if not 0.0 <= self.t0_quantile <= 1.0:
            raise ConfigurationError("t0_quantile must lie in [0, 1]")


# --------------------------------------------------------------------------
# image terms


def image_gradient(img):
    """Central differences inside, one-sided at the borders. Returns (gx, gy)."""
    data = np.asarray(img.data if isinstance(img, GrayImage) else img, dtype=np.float64)
    gy, gx = np.gradient(data) if min(data.shape) > 1 else _gradient_thin(data)
    return gx, gy


def _gradient_thin(data):
    gy = np.gradient(data, axis=0) if data.shape[0] > 1 else np.zeros_like(data)
    gx = np.gradient(data, axis=1) if data.shape[1] > 1 else np.zeros_like(data)
    return gy, gx


def scaled_intensity(img: GrayImage, scale: str = "max") -> np.ndarray:
    data = img.data.astype(np.float64)
    if scale == "max":
        top = data.max()
        return data / top if top > 0 else data
    return data


def edge_stop_field(img: GrayImage, scale: str = "max") -> np.ndarray:
    gx, gy = image_gradient(scaled_intensity(img, scale))
    return 1.0 / (1.0 + np.hypot(gx, gy))


def edge_stop(img: GrayImage, at, scale: str = "max") -> float:
    """g = 1/(1 + |grad I|) at pixel ``at = (x, y)``."""
    x, y = at
    return float(edge_stop_field(img, scale)[y, x])


def skew_centred_field(img: GrayImage, power: int = 3) -> np.ndarray:
    """Unnormalised windowed centred moment for every pixel."""
    _, moment = kernels.window_moments(img.data.astype(np.float64), power)
    return moment


def skew_centred_normal_field(img: GrayImage, power: int = 3) -> np.ndarray:
    skew = skew_centred_field(img, power)
    peak = np.abs(skew).max()
    if peak == 0:
        return np.zeros_like(skew)
    return skew / peak


def skew_centred_normal(img: GrayImage, at, power: int = 3) -> float:
    x, y = at
    return float(skew_centred_normal_field(img, power)[y, x])


def local_mean_field(img: GrayImage) -> np.ndarray:
    mean, _ = kernels.window_moments(img.data.astype(np.float64), 1)
    return mean


@dataclass(frozen=True)
class SpeedTerms:
    """Image-dependent pieces of the evolution speed, built once per image."""

    g: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    speed: np.ndarray
    source: np.ndarray
    grad_g_max: float
    params: SpeedParams

    @classmethod
    def build(cls, img: GrayImage, params: SpeedParams) -> "SpeedTerms":
        g = edge_stop_field(img, params.gradient_scale)
        ggx, ggy = image_gradient(g)
        top = float(img.data.max())
        ratio = local_mean_field(img) / top if top > 0 else np.zeros(img.shape)
        skew = skew_centred_normal_field(img, params.skew_power)
        sign = 1.0 if params.nu_direction == INFLATE else -1.0
        # phi_t = -/+ beta * grad g . grad phi is advection with velocity
        # +/- beta*grad g; with phi negative inside the minus sign pushes the
        # front away from edges, the plus sign pulls it onto them
        edge = -1.0 if params.edge_direction == ATTRACT else 1.0
        return cls(
            g=g,
            ux=edge * params.beta * ggx,
            uy=edge * params.beta * ggy,
            speed=sign * params.nu * g,
            source=-params.beta * ratio - params.theta * skew,
            grad_g_max=float(np.hypot(ggx, ggy).max()),
            params=params,
        )


def stability_bound(params: SpeedParams, grad_g_max: float) -> float:
    """Largest explicit time step: 0.5 / (4 eps + nu + beta max|grad g| + theta)."""
    den = 4 * params.epsilon + params.nu + params.beta * grad_g_max + params.theta
    return math.inf if den == 0 else 0.5 / den


# --------------------------------------------------------------------------
# seeds and fast marching


def seed_mask(img: GrayImage, top_fraction: float) -> np.ndarray:
    data = img.data
    peak = data.max()
    return data >= (1.0 - top_fraction) * peak


def seed_points(img: GrayImage, top_fraction: float) -> np.ndarray:
    """Pixels in the brightest stratum, as ``(x, y)`` rows in scan order.

    Keeps every pixel with intensity >= (1 - top_fraction) * max, so a
    fraction of 0 yields exactly the argmax set.
    """
    ys, xs = np.nonzero(seed_mask(img, top_fraction))
    return np.stack([xs, ys], axis=1)


@dataclass(frozen=True)
class ArrivalField:
    T: np.ndarray
    accepted: np.ndarray = field(repr=False)

    @property
    def width(self):
        return self.T.shape[1]

    @property
    def height(self):
        return self.T.shape[0]


def march_speed(img: GrayImage, params: SpeedParams) -> np.ndarray:
    gx, gy = image_gradient(scaled_intensity(img, params.gradient_scale))
    den = params.epsilon - params.alpha * np.hypot(gx, gy)
    return 1.0 / np.maximum(params.fm_floor, den)


def march_from(speed: np.ndarray, seeds: np.ndarray, stop: float = math.inf) -> ArrivalField:
    """Solve |grad T| F = 1 with T = 0 on the boolean ``seeds`` mask."""
    seeds = np.asarray(seeds, dtype=bool)
    if not seeds.any():
        raise DegenerateInputError("fast marching needs at least one seed")
    T0 = np.where(seeds, 0.0, np.inf)
    T, order = kernels.march(speed, T0, seeds, stop)
    return ArrivalField(T, order)


def _as_seed_mask(seeds, shape):
    arr = np.asarray(seeds)
    if arr.dtype == bool and arr.shape == shape:
        return arr
    mask = np.zeros(shape, dtype=bool)
    pts = arr.reshape(-1, 2)
    if pts.size:
        mask[pts[:, 1], pts[:, 0]] = True
    return mask


def fast_march(img: GrayImage, seeds, params: SpeedParams) -> ArrivalField:
    """Arrival times from ``seeds`` (an (n, 2) array of (x, y) or a mask)."""
    return march_from(march_speed(img, params), _as_seed_mask(seeds, img.shape))


def arrival_level(arrival: ArrivalField, quantile: float) -> float:
    """Quantile of the arrival times beyond the seeds (T > 0).

    Falls back to 0 when every reached cell is a seed.
    """
    T = arrival.T
    finite = T[np.isfinite(T)]
    if finite.size == 0:
        raise DegenerateInputError("arrival field is nowhere finite")
    beyond = finite[finite > 0]
    if beyond.size == 0:
        return 0.0
    return float(np.quantile(beyond, quantile))


# --------------------------------------------------------------------------
# level-set field


# keeps cells lying exactly on the level strictly on their side
_NUDGE = 1e-3


@dataclass(frozen=True)
class LevelSetField:
    phi: np.ndarray
    band_width: float = 6.0
    time_step: float = 0.1

    @property
    def band(self) -> np.ndarray:
        return np.abs(self.phi) <= self.band_width

    @property
    def inside(self) -> np.ndarray:
        return self.phi < 0


def _interface_distances(phi):
    """Sub-cell distance to the zero set for cells touching a sign change.

    |phi| / |grad phi| (central differences), capped by the nearest
    crossing found by linear interpolation along either axis.
    """
    neg = phi < 0
    h, w = phi.shape
    d = np.full((h, w), np.inf)
    for axis in (0, 1):
        for shift in (1, -1):
            nb = np.roll(phi, shift, axis=axis)
            nneg = np.roll(neg, shift, axis=axis)
            valid = np.ones((h, w), dtype=bool)
            idx = [slice(None), slice(None)]
            idx[axis] = 0 if shift == 1 else -1
            valid[tuple(idx)] = False
            cross = valid & (neg != nneg)
            a, b = np.abs(phi), np.abs(nb)
            with np.errstate(invalid="ignore", divide="ignore"):
                theta = np.where(a + b > 0, a / (a + b), 0.0)
            d = np.where(cross, np.minimum(d, theta), d)
    gx, gy = image_gradient(phi)
    g = np.hypot(gx, gy)
    with np.errstate(invalid="ignore", divide="ignore"):
        normal = np.where(g > 1e-12, np.abs(phi) / g, np.inf)
    return np.where(np.isfinite(d), np.minimum(d, normal), d)


def redistance(phi: np.ndarray, reach: float) -> np.ndarray:
    """Signed distance to the zero set of ``phi``, exact up to ``reach``.

    Cells farther than ``reach`` from the interface are clamped to
    +/-``reach``.  Signs never change.
    """
    neg = phi < 0
    if neg.all() or not neg.any():
        raise DegenerateInputError("phi has no sign change to redistance from")
    d0 = _interface_distances(phi)
    frozen = np.isfinite(d0)
    T, _ = kernels.march(np.ones_like(phi), np.where(frozen, d0, np.inf), frozen, reach)
    T = np.minimum(T, reach)
    return np.where(neg, -T, T)


def reinitialize(fld: LevelSetField) -> LevelSetField:
    return replace(fld, phi=redistance(fld.phi, fld.band_width + 1.0))


def init_phi(arrival: ArrivalField, band_radius: float, t0: float = 0.0,
             time_step: float = 0.1) -> LevelSetField:
    """Initial field whose zero set is the arrival level T = t0.

    phi0 = T - t0 places the interface between cells by linear
    interpolation of T; cells with T == t0 are nudged just inside so the
    interior is exactly {T <= t0}.  phi0 is then redistanced.  If nothing
    lies outside the level, phi is a constant -(band_radius + 1).
    """
    T = arrival.T
    if not np.isfinite(T).any():
        raise DegenerateInputError("arrival field is nowhere finite")
    inside = T <= t0
    reach = band_radius + 1.0
    if inside.all():
        return LevelSetField(np.full(T.shape, -reach), band_radius, time_step)
    with np.errstate(invalid="ignore"):
        phi0 = np.where(np.isfinite(T), T - t0, reach)
    phi0 = np.where(inside, np.minimum(phi0, -_NUDGE), np.maximum(phi0, _NUDGE))
    return LevelSetField(redistance(phi0, reach), band_radius, time_step)


def evolve_step(fld: LevelSetField, img: GrayImage, params: SpeedParams,
                terms: Optional[SpeedTerms] = None) -> LevelSetField:
    """One explicit Euler update on band cells; off-band cells are untouched."""
    if terms is None or terms.params != params:
        terms = SpeedTerms.build(img, params)
    bound = stability_bound(params, terms.grad_g_max)
    if fld.time_step > bound * (1 + 1e-12):
        raise ConfigurationError(
            f"time step {fld.time_step:g} exceeds stability bound {bound:g}")
    band = fld.band
    rate = kernels.levelset_rate(fld.phi, band, terms.g, terms.ux, terms.uy,
                                 terms.speed, terms.source, params.epsilon)
    phi = np.where(band, fld.phi + fld.time_step * rate, fld.phi)
    return replace(fld, phi=phi)


def curvature(phi: np.ndarray) -> np.ndarray:
    """div(grad phi / |grad phi|) with central differences (edge-replicated)."""
    p = np.pad(phi, 1, mode="edge")
    c = p[1:-1, 1:-1]
    left, right = p[1:-1, :-2], p[1:-1, 2:]
    up, down = p[:-2, 1:-1], p[2:, 1:-1]
    px, py = 0.5 * (right - left), 0.5 * (down - up)
    pxx, pyy = right - 2 * c + left, down - 2 * c + up
    pxy = 0.25 * (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2])
    den = (px * px + py * py) ** 1.5
    num = pxx * py * py - 2 * px * py * pxy + pyy * px * px
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 1e-18, num / den, 0.0)


def contour_cells(inside: np.ndarray) -> np.ndarray:
    """Inside cells with at least one 4-neighbour outside."""
    p = np.pad(inside, 1, mode="edge")
    outside_nb = ~p[:-2, 1:-1] | ~p[2:, 1:-1] | ~p[1:-1, :-2] | ~p[1:-1, 2:]
    return inside & outside_nb


def contour_curvature(phi: np.ndarray) -> np.ndarray:
    """Curvature at contour cells, projected onto the zero set.

    For a signed distance function the level set through a cell sits at
    offset phi from the interface, so its radius of curvature is off by
    phi; k / (1 - phi*k) undoes that.  One value per contour cell.
    """
    k = curvature(phi)
    cells = contour_cells(phi < 0)
    kc, pc = k[cells], phi[cells]
    return kc / (1.0 - pc * kc)


# --------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class DetectedRegions:
    regions: LabelMap
    contour: np.ndarray  # (n, 2) rows of (x, y)
    converged: bool = True
    degenerate: bool = False
    iterations: int = 0
    seeds: Optional[BinaryMask] = None

    @property
    def region_count(self) -> int:
        return self.regions.label_count


def _regions_from(inside: np.ndarray):
    labels = label_components(BinaryMask(inside))
    ys, xs = np.nonzero(contour_cells(inside))
    return labels, np.stack([xs, ys], axis=1)


def detect(img: GrayImage, params: SpeedParams = SpeedParams(),
           schedule: Schedule = Schedule()) -> DetectedRegions:
    """Seed, march, evolve to convergence and report interior regions.

    A uniform image seeds every pixel; that case is returned flagged
    ``degenerate``.  Running out of iterations sets ``converged=False``.
    """
    seeds = seed_mask(img, schedule.seed_fraction)
    seed_bm = BinaryMask(seeds)
    if seeds.all():
        labels, contour = _regions_from(seeds)
        return DetectedRegions(labels, contour, False, True, 0, seed_bm)

    terms = SpeedTerms.build(img, params)
    dt = schedule.time_step
    if dt is None:
        dt = stability_bound(params, terms.grad_g_max)
        dt = 1.0 if math.isinf(dt) else dt

    arrival = march_from(march_speed(img, params), seeds)
    t0 = arrival_level(arrival, schedule.t0_quantile)
    fld = init_phi(arrival, schedule.band_width, t0, dt)
    if not (fld.phi >= 0).any():
        labels, contour = _regions_from(fld.inside)
        return DetectedRegions(labels, contour, False, True, 0, seed_bm)

    converged = False
    steps = 0
    while steps < schedule.max_iterations:
        before = fld.inside
        band_count = int(fld.band.sum())
        for _ in range(schedule.reinit_period):
            fld = evolve_step(fld, img, params, terms)
            steps += 1
        inside = fld.inside
        if not inside.any() or inside.all():
            # the front vanished or swallowed the image
            break
        fld = reinitialize(fld)
        flipped = int((fld.inside != before).sum())
        if flipped < schedule.convergence * max(band_count, 1):
            converged = True
            break
    labels, contour = _regions_from(fld.inside)
    return DetectedRegions(labels, contour, converged, False, steps, seed_bm)
