"""Reference backend: numpy where the work vectorizes, plain python otherwise."""
import heapq
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

_FAR, _TRIAL, _DONE = 0, 1, 2


def _upwind_solve(T, state, i, j, inv_f):
    h, w = T.shape
    a = math.inf
    if j > 0 and state[i, j - 1] == _DONE:
        a = T[i, j - 1]
    if j + 1 < w and state[i, j + 1] == _DONE and T[i, j + 1] < a:
        a = T[i, j + 1]
    b = math.inf
    if i > 0 and state[i - 1, j] == _DONE:
        b = T[i - 1, j]
    if i + 1 < h and state[i + 1, j] == _DONE and T[i + 1, j] < b:
        b = T[i + 1, j]
    if a == math.inf:
        return b + inv_f
    if b == math.inf:
        return a + inv_f
    if abs(a - b) >= inv_f:
        return min(a, b) + inv_f
    return 0.5 * (a + b + math.sqrt(2.0 * inv_f * inv_f - (a - b) * (a - b)))


def march(speed, T0, frozen, stop=math.inf):
    """First-order fast marching from the ``frozen`` cells of ``T0``.

    Returns the arrival field and the flat indices of accepted cells in
    acceptance order.  Marching halts once the smallest trial value
    exceeds ``stop``; cells beyond keep their trial value (or ``inf``).
    """
    T = np.array(T0, dtype=np.float64)
    h, w = T.shape
    state = np.zeros((h, w), dtype=np.uint8)
    order = np.empty(h * w, dtype=np.int64)
    n_done = 0
    heap = []
    for idx in np.flatnonzero(frozen):
        i, j = divmod(int(idx), w)
        state[i, j] = _TRIAL
        heap.append((float(T[i, j]), int(idx)))
    heapq.heapify(heap)
    while heap:
        t, idx = heapq.heappop(heap)
        i, j = divmod(idx, w)
        if state[i, j] == _DONE or t > T[i, j]:
            continue
        if t > stop:
            break
        state[i, j] = _DONE
        order[n_done] = idx
        n_done += 1
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if ni < 0 or nj < 0 or ni >= h or nj >= w:
                continue
            if state[ni, nj] == _DONE or frozen[ni, nj]:
                continue
            cand = _upwind_solve(T, state, ni, nj, 1.0 / speed[ni, nj])
            if cand < T[ni, nj]:
                T[ni, nj] = cand
                state[ni, nj] = _TRIAL
                heapq.heappush(heap, (cand, ni * w + nj))
    return T, order[:n_done]


def label8(mask):
    """8-connected labeling, labels numbered by first row-major encounter."""
    raw, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        return raw.astype(np.int32), 0
    flat = raw.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids > 0
    ids, first = ids[keep], first[keep]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[ids[np.argsort(first, kind="stable")]] = np.arange(1, count + 1, dtype=np.int32)
    return remap[raw], int(count)


def glcm_counts(q, dx, dy, levels):
    h, w = q.shape
    # source rows/cols such that the displaced pixel stays in bounds
    r0, r1 = max(0, -dy), h - max(0, dy)
    c0, c1 = max(0, -dx), w - max(0, dx)
    counts = np.zeros((levels, levels), dtype=np.float64)
    if r1 <= r0 or c1 <= c0:
        return counts
    a = q[r0:r1, c0:c1].ravel()
    b = q[r0 + dy:r1 + dy, c0 + dx:c1 + dx].ravel()
    flat = np.bincount(a * levels + b, minlength=levels * levels)
    return flat.reshape(levels, levels).astype(np.float64)


def window_moments(img, power=3):
    """Clamped 3x3 window mean and centred moment of order ``power``.

    The moment is taken around the window mean of the centre pixel and
    divided by the number of valid pixels in the window.
    """
    img = np.asarray(img, dtype=np.float64)
    padded = np.pad(img, 1, mode="constant", constant_values=np.nan)
    win = sliding_window_view(padded, (3, 3))
    valid = ~np.isnan(win)
    n = valid.sum(axis=(2, 3))
    total = np.where(valid, win, 0.0).sum(axis=(2, 3))
    mean = total / n
    dev = np.where(valid, win - mean[..., None, None], 0.0)
    moment = (dev**power).sum(axis=(2, 3)) / n
    return mean, moment


def levelset_rate(phi, band, g, ux, uy, speed, source, eps):
    """Right-hand side of the level-set update on band cells.

    rate = eps*g*|grad phi|*curvature - u . grad phi (upwind)
           - speed*|grad phi| (Godunov) + source
    with ``speed > 0`` moving the front outward.  Zero off the band.
    """
    p = np.pad(phi, 1, mode="edge")
    c = p[1:-1, 1:-1]
    left, right = p[1:-1, :-2], p[1:-1, 2:]
    up, down = p[:-2, 1:-1], p[2:, 1:-1]

    dmx, dpx = c - left, right - c
    dmy, dpy = c - up, down - c

    px = 0.5 * (right - left)
    py = 0.5 * (down - up)
    pxx = right - 2.0 * c + left
    pyy = down - 2.0 * c + up
    pxy = 0.25 * (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2])
    den = px * px + py * py
    num = pxx * py * py - 2.0 * px * py * pxy + pyy * px * px
    with np.errstate(invalid="ignore", divide="ignore"):
        curv = np.where(den > 1e-12, num / den, 0.0)

    rate = eps * g * curv

    fx = np.where(ux > 0, dmx, dpx)
    fy = np.where(uy > 0, dmy, dpy)
    rate = rate - (ux * fx + uy * fy)

    grad_out = np.sqrt(
        np.maximum(dmx, 0.0) ** 2 + np.minimum(dpx, 0.0) ** 2
        + np.maximum(dmy, 0.0) ** 2 + np.minimum(dpy, 0.0) ** 2
    )
    grad_in = np.sqrt(
        np.minimum(dmx, 0.0) ** 2 + np.maximum(dpx, 0.0) ** 2
        + np.minimum(dmy, 0.0) ** 2 + np.maximum(dpy, 0.0) ** 2
    )
    rate = rate - np.where(speed > 0, speed * grad_out, speed * grad_in)
    rate = rate + source
    return np.where(band, rate, 0.0)
