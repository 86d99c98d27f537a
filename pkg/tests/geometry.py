"""Analytic shapes and distance measures shared by level-set tests."""
import numpy as np


def circle_sdf(n, r, c=None):
    c = (n - 1) / 2.0 if c is None else c
    yy, xx = np.mgrid[:n, :n].astype(np.float64)
    return np.hypot(xx - c, yy - c) - r


def zero_crossings(phi):
    """Linearly interpolated zero-crossing points along grid edges, as (x, y)."""
    pts = []
    for axis in (0, 1):
        a = phi[:-1, :] if axis == 0 else phi[:, :-1]
        b = phi[1:, :] if axis == 0 else phi[:, 1:]
        ys, xs = np.nonzero((a < 0) != (b < 0))
        t = a[ys, xs] / (a[ys, xs] - b[ys, xs])
        if axis == 0:
            pts.append(np.stack([xs, ys + t], axis=1))
        else:
            pts.append(np.stack([xs + t, ys], axis=1))
    return np.concatenate(pts)


def hausdorff_to_circle(points, c, r, samples=2000):
    pts = np.asarray(points, dtype=np.float64)
    d1 = np.abs(np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]) - r).max()
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    ring = np.stack([c[0] + r * np.cos(th), c[1] + r * np.sin(th)], axis=1)
    d2 = np.sqrt(((ring[:, None, :] - pts[None]) ** 2).sum(-1)).min(axis=1).max()
    return float(max(d1, d2))
