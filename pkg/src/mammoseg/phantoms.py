"""Synthetic mammogram-like phantoms with known geometry.

Each ACR class is mimicked by calcification morphology drawn inside a
smooth half-ellipse breast:

    ACR1  no calcifications
    ACR2  one or two large, high-contrast macro-calcifications
    ACR3  a few small round punctate spots in one loose cluster
    ACR4  many tiny faint pulverulent specks in a tight cluster
    ACR5  several bright elongated (vermicular) segments, grouped
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .classifiers import AcrLabel
from .raster import GrayImage, ensure_dir, write_pgm


@dataclass(frozen=True)
class BreastPhantom:
    image: GrayImage
    breast: np.ndarray  # ground-truth breast mask
    artefact: np.ndarray  # ground-truth label square


def _half_ellipse(h, w, right=False, rx=0.62, ry=0.42):
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    cx = (w - 1) if right else 0.0
    cy = (h - 1) / 2.0
    return ((xx - cx) / (rx * w)) ** 2 + ((yy - cy) / (ry * h)) ** 2 <= 1.0


def breast_phantom(size: int = 128, right: bool = False, level: int = 150,
                   label_level: int = 230, noise: float = 3.0, seed: int = 0) -> BreastPhantom:
    """Bright half-ellipse on black plus a small bright square in the far corner."""
    rng = np.random.default_rng(seed)
    h = w = size
    breast = _half_ellipse(h, w, right)
    art = np.zeros((h, w), dtype=bool)
    s = max(3, size // 14)
    m = max(2, size // 32)
    if right:
        art[h - m - s:h - m, m:m + s] = True
    else:
        art[h - m - s:h - m, w - m - s:w - m] = True
    img = np.zeros((h, w))
    img[breast] = level
    img[art] = label_level
    img += rng.normal(0.0, noise, img.shape)
    data = np.clip(np.rint(img), 0, 255).astype(np.int64)
    return BreastPhantom(GrayImage(data, 255), breast, art)


def disk_phantom(size: int = 128, centers=None, radius: float = 25.0, inside: int = 200,
                 outside: int = 20, noise: float = 0.0, seed: int = 0) -> GrayImage:
    if centers is None:
        centers = [((size - 1) / 2.0, (size - 1) / 2.0)]
    yy, xx = np.mgrid[:size, :size]
    img = np.full((size, size), float(outside))
    for cx, cy in centers:
        img[(xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius] = inside
    if noise:
        img += np.random.default_rng(seed).normal(0.0, noise, img.shape)
    return GrayImage(np.clip(np.rint(img), 0, 255).astype(np.int64), 255)


def _smooth_noise(rng, shape, scale):
    """Cheap low-frequency texture: bilinear upsampling of coarse noise."""
    h, w = shape
    ch, cw = max(2, h // scale), max(2, w // scale)
    coarse = rng.normal(0.0, 1.0, (ch, cw))
    yi = np.linspace(0, ch - 1, h)
    xi = np.linspace(0, cw - 1, w)
    y0 = np.floor(yi).astype(int).clip(0, ch - 2)
    x0 = np.floor(xi).astype(int).clip(0, cw - 2)
    fy = (yi - y0)[:, None]
    fx = (xi - x0)[None, :]
    a = coarse[y0][:, x0]
    b = coarse[y0][:, x0 + 1]
    c = coarse[y0 + 1][:, x0]
    d = coarse[y0 + 1][:, x0 + 1]
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d)


def _stamp_disk(img, cx, cy, r, value):
    h, w = img.shape
    yy, xx = np.mgrid[:h, :w]
    sel = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    img[sel] = np.maximum(img[sel], value)
    return sel


def _stamp_segment(img, x0, y0, x1, y1, value, width=0.8):
    h, w = img.shape
    yy, xx = np.mgrid[:h, :w].astype(np.float64)
    dx, dy = x1 - x0, y1 - y0
    L2 = dx * dx + dy * dy or 1.0
    t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / L2, 0.0, 1.0)
    d = np.hypot(xx - (x0 + t * dx), yy - (y0 + t * dy))
    sel = d <= width
    img[sel] = np.maximum(img[sel], value)
    return sel


def _cluster_center(rng, breast, margin):
    ys, xs = np.nonzero(breast)
    cx0 = xs.mean()
    ok = (xs > margin) & (xs < xs.max() - margin) & (ys > ys.min() + margin) & (ys < ys.max() - margin)
    ok &= np.abs(xs - cx0) < breast.shape[1] // 3
    idx = rng.choice(np.flatnonzero(ok))
    return float(xs[idx]), float(ys[idx])


def calcification_phantom(acr: AcrLabel, rng: np.random.Generator, size: int = 64,
                          right: Optional[bool] = None) -> Tuple[GrayImage, np.ndarray]:
    """Mammogram-like phantom of the given class and its calcification mask."""
    acr = AcrLabel.parse(acr)
    if right is None:
        right = bool(rng.integers(2))
    h = w = size
    breast = _half_ellipse(h, w, right, rx=0.8, ry=0.46)
    tissue = 95.0 + 10.0 * _smooth_noise(rng, (h, w), 8) + rng.normal(0.0, 2.0, (h, w))
    img = np.where(breast, tissue, 0.0)
    calc = np.zeros((h, w), dtype=bool)
    u = size / 64.0
    if acr is AcrLabel.ACR2:
        cx, cy = _cluster_center(rng, breast, 10 * u)
        for _ in range(int(rng.integers(1, 3))):
            r = rng.uniform(3.5, 5.0) * u
            calc |= _stamp_disk(img, cx + rng.normal(0, 4 * u), cy + rng.normal(0, 4 * u),
                                r, rng.uniform(215, 235))
    elif acr is AcrLabel.ACR3:
        cx, cy = _cluster_center(rng, breast, 12 * u)
        for _ in range(int(rng.integers(3, 6))):
            calc |= _stamp_disk(img, cx + rng.uniform(-9, 9) * u, cy + rng.uniform(-9, 9) * u,
                                1.6 * u, rng.uniform(185, 205))
    elif acr is AcrLabel.ACR4:
        cx, cy = _cluster_center(rng, breast, 8 * u)
        for _ in range(int(rng.integers(14, 22))):
            x, y = cx + rng.normal(0, 2.5 * u), cy + rng.normal(0, 2.5 * u)
            calc |= _stamp_disk(img, x, y, 0.7, rng.uniform(140, 160))
    elif acr is AcrLabel.ACR5:
        cx, cy = _cluster_center(rng, breast, 12 * u)
        for _ in range(int(rng.integers(4, 7))):
            x0, y0 = cx + rng.uniform(-7, 7) * u, cy + rng.uniform(-7, 7) * u
            ang = rng.uniform(0, np.pi)
            ln = rng.uniform(4, 8) * u
            calc |= _stamp_segment(img, x0, y0, x0 + ln * np.cos(ang), y0 + ln * np.sin(ang),
                                   rng.uniform(235, 255))
    calc &= breast
    img = np.where(breast, img, 0.0)
    data = np.clip(np.rint(img), 0, 255).astype(np.int64)
    return GrayImage(data, 255), calc


def write_dataset(out_dir, n_train: int = 100, n_test: int = 50, size: int = 64,
                  seed: int = 0) -> str:
    """Write a balanced phantom dataset and its ``manifest.csv``; returns the manifest path."""
    ensure_dir(out_dir)
    img_dir = ensure_dir(os.path.join(out_dir, "images"))
    rng = np.random.default_rng(seed)
    rows: List[Tuple[str, str, str]] = []
    for split, n in (("train", n_train), ("test", n_test)):
        for acr in AcrLabel:
            for k in range(n):
                img, _ = calcification_phantom(acr, rng, size)
                name = f"{split}_{acr.name}_{k:03d}.pgm"
                write_pgm(img, os.path.join(img_dir, name))
                rows.append((os.path.join("images", name), acr.name, split))
    manifest = os.path.join(out_dir, "manifest.csv")
    with open(manifest, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path", "label", "split"])
        wr.writerows(rows)
    return manifest
