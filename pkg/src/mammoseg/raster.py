"""Raster containers and netpbm I/O.

Coordinates follow image convention everywhere: ``x`` is the column,
``y`` the row, origin at the top-left, arrays stored row-major with shape
``(height, width)``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .errors import PgmFormatError, PgmTruncatedError, PgmValueError

CONTOUR_COLOR = "contour"
BOX_COLOR = "box"


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GrayImage:
    data: np.ndarray
    max_value: int = 255

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D array, got shape {data.shape}")
        if not 1 <= int(self.max_value) <= 65535:
            raise ValueError(f"max_value {self.max_value} outside [1, 65535]")
        if data.dtype.kind == "f":
            if not np.all(np.isfinite(data)) or np.any(data != np.round(data)):
                raise ValueError("gray values must be integers")
        if data.min() < 0 or data.max() > self.max_value:
            raise ValueError(f"gray values must lie in [0, {self.max_value}]")
        object.__setattr__(self, "data", _frozen(data, np.int64))
        object.__setattr__(self, "max_value", int(self.max_value))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.max_value == other.max_value and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError("mask must be 2-D")
        object.__setattr__(self, "bits", _frozen(bits, bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None


@dataclass(frozen=True)
class LabelMap:
    labels: np.ndarray
    label_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("label map must be 2-D")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        present = np.unique(labels[labels > 0])
        if not np.array_equal(present, np.arange(1, int(self.label_count) + 1)):
            raise ValueError(f"foreground labels must be exactly 1..{self.label_count}")
        object.__setattr__(self, "labels", _frozen(labels, np.int32))
        object.__setattr__(self, "label_count", int(self.label_count))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def sizes(self) -> np.ndarray:
        """Pixel count per label, index 0 is the background."""
        return np.bincount(self.labels.ravel(), minlength=self.label_count + 1)

    def foreground(self) -> BinaryMask:
        return BinaryMask(self.labels > 0)


@dataclass(frozen=True)
class OverlayImage:
    rgb: np.ndarray
    max_value: int = 255

    def __post_init__(self):
        rgb = np.asarray(self.rgb)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError("overlay must have shape (height, width, 3)")
        object.__setattr__(self, "rgb", _frozen(rgb, np.int64))

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]


# --------------------------------------------------------------------------
# netpbm


def _tokens(buf: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PgmFormatError("header ended prematurely")
        if buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        out.append(buf[start:pos])
    return out, pos


def _header_ints(raw, names):
    vals = []
    for tok, name in zip(raw, names):
        try:
            v = int(tok)
        except ValueError:
            raise PgmFormatError(f"non-integer {name} {tok!r}") from None
        vals.append(v)
    return vals


def _parse_netpbm(buf: bytes, magic_ok: Tuple[bytes, ...], channels: int):
    magic = buf[:2]
    if magic not in magic_ok:
        raise PgmFormatError(f"unsupported magic {magic!r}")
    raw, pos = _tokens(buf, 3, 2)
    width, height, maxval = _header_ints(raw, ("width", "height", "max_value"))
    if width < 1 or height < 1:
        raise PgmFormatError(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= 65535:
        raise PgmFormatError(f"bad max_value {maxval}")
    n = width * height * channels
    plain = magic in (b"P2", b"P3")
    if plain:
        body = b"\n".join(line.split(b"#", 1)[0] for line in buf[pos:].splitlines())
        toks = body.split()
        if len(toks) < n:
            raise PgmTruncatedError(f"expected {n} samples, found {len(toks)}")
        try:
            values = np.array([int(t) for t in toks[:n]], dtype=np.int64)
        except ValueError:
            raise PgmFormatError("non-integer sample in plain payload") from None
    else:
        # exactly one whitespace byte separates the header from the payload
        if pos >= len(buf) or not buf[pos : pos + 1].isspace():
            raise PgmTruncatedError("missing payload")
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        payload = buf[pos : pos + need]
        if len(payload) < need:
            raise PgmTruncatedError(f"expected {need} payload bytes, found {len(payload)}")
        values = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if values.size and values.max() > maxval:
        raise PgmValueError(f"sample {values.max()} exceeds max_value {maxval}")
    shape = (height, width) if channels == 1 else (height, width, channels)
    return values.reshape(shape), maxval


def read_pgm(path) -> GrayImage:
    """Read a plain (P2) or binary (P5) portable graymap."""
    with open(path, "rb") as fh:
        buf = fh.read()
    data, maxval = _parse_netpbm(buf, (b"P2", b"P5"), 1)
    return GrayImage(data, maxval)


def _encode(magic_plain, magic_raw, arr, maxval, plain):
    h, w = arr.shape[:2]
    header = b"%s\n%d %d\n%d\n" % (magic_plain if plain else magic_raw, w, h, maxval)
    if plain:
        rows = arr.reshape(h, -1)
        body = "\n".join(" ".join(str(int(v)) for v in row) for row in rows)
        return header + body.encode("ascii") + b"\n"
    dtype = ">u2" if maxval > 255 else "u1"
    return header + np.ascontiguousarray(arr, dtype=dtype).tobytes()


def _write(path, payload):
    with open(path, "wb") as fh:
        fh.write(payload)


def write_pgm(img: GrayImage, path, plain: bool = False) -> None:
    _write(path, _encode(b"P2", b"P5", img.data, img.max_value, plain))


def read_ppm(path) -> OverlayImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    data, maxval = _parse_netpbm(buf, (b"P3", b"P6"), 3)
    return OverlayImage(data, maxval)


def write_ppm(img: OverlayImage, path, plain: bool = False) -> None:
    _write(path, _encode(b"P3", b"P6", img.rgb, img.max_value, plain))


# --------------------------------------------------------------------------
# overlays


def highlight_colors(max_value: int):
    """Fixed overlay colours: contour red, box green."""
    return {
        CONTOUR_COLOR: (max_value, 0, 0),
        BOX_COLOR: (0, max_value, 0),
    }


def box_perimeter(x_min: int, y_min: int, x_max: int, y_max: int) -> np.ndarray:
    """Pixels on the boundary of an inclusive rectangle, as (x, y) rows."""
    xs = np.arange(x_min, x_max + 1)
    ys = np.arange(y_min, y_max + 1)
    pts = np.concatenate(
        [
            np.stack([xs, np.full_like(xs, y_min)], axis=1),
            np.stack([xs, np.full_like(xs, y_max)], axis=1),
            np.stack([np.full_like(ys, x_min), ys], axis=1),
            np.stack([np.full_like(ys, x_max), ys], axis=1),
        ]
    )
    return np.unique(pts, axis=0)


def render_overlay(
    img: GrayImage,
    contour: Iterable[Tuple[int, int]] = (),
    box: Optional[Tuple[int, int, int, int]] = None,
) -> OverlayImage:
    """Replicate gray to RGB, then paint contour pixels and a box outline.

    ``box`` is ``(x_min, y_min, x_max, y_max)``, inclusive.  The box is
    drawn after the contour, so it wins where the two overlap.
    """
    colors = highlight_colors(img.max_value)
    rgb = np.repeat(img.data[:, :, None], 3, axis=2)
    pts = np.asarray(list(contour) if not isinstance(contour, np.ndarray) else contour,
                     dtype=np.int64).reshape(-1, 2)
    if box is not None:
        x0, y0, x1, y1 = box
        if x0 > x1 or y0 > y1:
            raise ValueError(f"malformed box {box}")
        perim = box_perimeter(x0, y0, x1, y1)
    else:
        perim = np.empty((0, 2), dtype=np.int64)
    for arr in (pts, perim):
        if arr.size and (
            arr[:, 0].min() < 0 or arr[:, 1].min() < 0
            or arr[:, 0].max() >= img.width or arr[:, 1].max() >= img.height
        ):
            raise IndexError("overlay coordinate outside the image")
    if pts.size:
        rgb[pts[:, 1], pts[:, 0]] = colors[CONTOUR_COLOR]
    if perim.size:
        rgb[perim[:, 1], perim[:, 0]] = colors[BOX_COLOR]
    return OverlayImage(rgb, img.max_value)


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
