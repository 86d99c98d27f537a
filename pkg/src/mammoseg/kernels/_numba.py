"""numba backend. Mirrors ``_numpy`` function for function."""
import heapq
import math

import numba as nb
import numpy as np

_FAR, _TRIAL, _DONE = 0, 1, 2


@nb.njit(cache=True)
def _upwind_solve(T, state, i, j, inv_f):
    h, w = T.shape
    a = np.inf
    if j > 0 and state[i, j - 1] == _DONE:
        a = T[i, j - 1]
    if j + 1 < w and state[i, j + 1] == _DONE and T[i, j + 1] < a:
        a = T[i, j + 1]
    b = np.inf
    if i > 0 and state[i - 1, j] == _DONE:
        b = T[i - 1, j]
    if i + 1 < h and state[i + 1, j] == _DONE and T[i + 1, j] < b:
        b = T[i + 1, j]
    if a == np.inf:
        return b + inv_f
    if b == np.inf:
        return a + inv_f
    if abs(a - b) >= inv_f:
        return min(a, b) + inv_f
    return 0.5 * (a + b + math.sqrt(2.0 * inv_f * inv_f - (a - b) * (a - b)))


@nb.njit(cache=True)
def _march(speed, T, frozen, stop):
    h, w = T.shape
    state = np.zeros((h, w), dtype=np.uint8)
    order = np.empty(h * w, dtype=np.int64)
    n_done = 0
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for i in range(h):
        for j in range(w):
            if frozen[i, j]:
                state[i, j] = _TRIAL
                heap.append((T[i, j], np.int64(i * w + j)))
    heapq.heapify(heap)
    di = (-1, 1, 0, 0)
    dj = (0, 0, -1, 1)
    while len(heap) > 0:
        t, idx = heapq.heappop(heap)
        i = idx // w
        j = idx - i * w
        if state[i, j] == _DONE or t > T[i, j]:
            continue
        if t > stop:
            break
        state[i, j] = _DONE
        order[n_done] = idx
        n_done += 1
        for k in range(4):
            ni = i + di[k]
            nj = j + dj[k]
            if ni < 0 or nj < 0 or ni >= h or nj >= w:
                continue
            if state[ni, nj] == _DONE or frozen[ni, nj]:
                continue
            cand = _upwind_solve(T, state, ni, nj, 1.0 / speed[ni, nj])
            if cand < T[ni, nj]:
                T[ni, nj] = cand
                state[ni, nj] = _TRIAL
                heapq.heappush(heap, (cand, np.int64(ni * w + nj)))
    return order[:n_done]


def march(speed, T0, frozen, stop=math.inf):
    T = np.array(T0, dtype=np.float64)
    order = _march(
        np.ascontiguousarray(speed, dtype=np.float64),
        T,
        np.ascontiguousarray(frozen, dtype=np.bool_),
        float(stop),
    )
    return T, order


@nb.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@nb.njit(cache=True)
def _label8(mask):
    h, w = mask.shape
    prov = np.zeros((h, w), dtype=np.int32)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int32)
    n = 0
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            best = 0
            # already-visited 8-neighbours: W, NW, N, NE
            for k in range(4):
                if k == 0:
                    ni, nj = i, j - 1
                elif k == 1:
                    ni, nj = i - 1, j - 1
                elif k == 2:
                    ni, nj = i - 1, j
                else:
                    ni, nj = i - 1, j + 1
                if ni < 0 or nj < 0 or nj >= w:
                    continue
                lab = prov[ni, nj]
                if lab == 0:
                    continue
                r = _find(parent, lab)
                if best == 0:
                    best = r
                elif r != best:
                    if r < best:
                        parent[best] = r
                        best = r
                    else:
                        parent[r] = best
            if best == 0:
                n += 1
                parent[n] = n
                best = n
            prov[i, j] = best
    # provisional ids grow in scan order, so resolving roots in id order
    # numbers components by their first row-major pixel
    final = np.zeros(n + 1, dtype=np.int32)
    count = 0
    for lab in range(1, n + 1):
        r = _find(parent, lab)
        if r == lab:
            count += 1
            final[lab] = count
    for lab in range(1, n + 1):
        final[lab] = final[_find(parent, lab)]
    out = np.zeros((h, w), dtype=np.int32)
    for i in range(h):
        for j in range(w):
            out[i, j] = final[prov[i, j]]
    return out, count


def label8(mask):
    out, count = _label8(np.ascontiguousarray(mask, dtype=np.bool_))
    return out, int(count)


@nb.njit(cache=True)
def _glcm_counts(q, dx, dy, levels):
    h, w = q.shape
    counts = np.zeros((levels, levels), dtype=np.float64)
    for i in range(max(0, -dy), h - max(0, dy)):
        for j in range(max(0, -dx), w - max(0, dx)):
            counts[q[i, j], q[i + dy, j + dx]] += 1.0
    return counts


def glcm_counts(q, dx, dy, levels):
    return _glcm_counts(np.ascontiguousarray(q, dtype=np.int64), int(dx), int(dy), int(levels))


@nb.njit(cache=True)
def _window_moments(img, power):
    h, w = img.shape
    mean = np.empty((h, w), dtype=np.float64)
    moment = np.empty((h, w), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            s = 0.0
            n = 0
            for a in range(max(0, i - 1), min(h, i + 2)):
                for b in range(max(0, j - 1), min(w, j + 2)):
                    s += img[a, b]
                    n += 1
            m = s / n
            acc = 0.0
            for a in range(max(0, i - 1), min(h, i + 2)):
                for b in range(max(0, j - 1), min(w, j + 2)):
                    d = img[a, b] - m
                    acc += d**power
            mean[i, j] = m
            moment[i, j] = acc / n
    return mean, moment


def window_moments(img, power=3):
    return _window_moments(np.ascontiguousarray(img, dtype=np.float64), int(power))


@nb.njit(cache=True)
def _levelset_rate(phi, band, g, ux, uy, speed, source, eps):
    h, w = phi.shape
    rate = np.zeros((h, w), dtype=np.float64)
    for i in range(h):
        im = max(i - 1, 0)
        ip = min(i + 1, h - 1)
        for j in range(w):
            if not band[i, j]:
                continue
            jm = max(j - 1, 0)
            jp = min(j + 1, w - 1)
            c = phi[i, j]
            left = phi[i, jm]
            right = phi[i, jp]
            up = phi[im, j]
            down = phi[ip, j]
            dmx = c - left
            dpx = right - c
            dmy = c - up
            dpy = down - c
            px = 0.5 * (right - left)
            py = 0.5 * (down - up)
            pxx = right - 2.0 * c + left
            pyy = down - 2.0 * c + up
            pxy = 0.25 * (phi[ip, jp] - phi[ip, jm] - phi[im, jp] + phi[im, jm])
            den = px * px + py * py
            curv = 0.0
            if den > 1e-12:
                curv = (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / den
            r = eps * g[i, j] * curv

            fx = dmx if ux[i, j] > 0 else dpx
            fy = dmy if uy[i, j] > 0 else dpy
            r = r - (ux[i, j] * fx + uy[i, j] * fy)

            s = speed[i, j]
            if s > 0:
                grad = math.sqrt(
                    max(dmx, 0.0) ** 2 + min(dpx, 0.0) ** 2
                    + max(dmy, 0.0) ** 2 + min(dpy, 0.0) ** 2
                )
            else:
                grad = math.sqrt(
                    min(dmx, 0.0) ** 2 + max(dpx, 0.0) ** 2
                    + min(dmy, 0.0) ** 2 + max(dpy, 0.0) ** 2
                )
            r = r - s * grad
            rate[i, j] = r + source[i, j]
    return rate


def levelset_rate(phi, band, g, ux, uy, speed, source, eps):
    f = lambda a: np.ascontiguousarray(a, dtype=np.float64)  # noqa: E731
    return _levelset_rate(
        f(phi), np.ascontiguousarray(band, dtype=np.bool_), f(g), f(ux), f(uy),
        f(speed), f(source), float(eps),
    )
