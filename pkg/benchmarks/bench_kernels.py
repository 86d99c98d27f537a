"""Time each hot kernel under the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--size 128] [--repeat 5]

Both backend modules are imported directly, so the env flag is not needed
here.  The numba timings exclude the first (compiling) call.  The last
column checks that the two backends return the same answer.
"""
import argparse
import math
import subprocess
import sys
import time

import numpy as np

from mammoseg.kernels import _numba, _numpy


def _best(fn, args, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-12, equal_nan=True)


def cases(n, rng):
    seeds = np.zeros((n, n), dtype=bool)
    seeds[n // 2, n // 3] = seeds[n // 4, 2 * n // 3] = True
    speed = rng.uniform(0.2, 2.0, (n, n))
    T0 = np.where(seeds, 0.0, np.inf)
    mask = rng.random((n, n)) < 0.45
    q = rng.integers(0, 16, (n, n))
    img = rng.integers(0, 256, (n, n)).astype(np.float64)
    yy, xx = np.mgrid[:n, :n]
    phi = np.hypot(xx - n / 2, yy - n / 2) - n / 4
    band = np.abs(phi) < 6
    fields = [rng.normal(0, 1, (n, n)) for _ in range(4)]
    return {
        "march": (speed, T0, seeds, math.inf),
        "label8": (mask,),
        "glcm_counts": (q, 1, -1, 16),
        "window_moments": (img, 3),
        "levelset_rate": (phi, band, *fields, rng.normal(0, 0.1, (n, n)), 0.4),
    }


def end_to_end(size):
    code = (
        "import time; from mammoseg.phantoms import disk_phantom; from mammoseg.levelset import detect;"
        f"img = disk_phantom({size}, radius={size / 5}); detect(img); t = time.perf_counter();"
        "detect(img); print(time.perf_counter() - t)"
    )
    out = {}
    for name, flag in (("numba", "0"), ("numpy", "1")):
        res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                             env={**__import__("os").environ, "MAMMOSEG_NO_NUMBA": flag}, check=True)
        out[name] = float(res.stdout.strip())
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    print(f"grid {args.size}x{args.size}, best of {args.repeat}")
    print(f"{'kernel':<16}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  same")
    for name, kargs in cases(args.size, rng).items():
        getattr(_numba, name)(*kargs)  # compile
        tn, a = _best(getattr(_numba, name), kargs, args.repeat)
        tp, b = _best(getattr(_numpy, name), kargs, args.repeat)
        print(f"{name:<16}{1e3 * tn:>12.3f}{1e3 * tp:>12.3f}{tp / tn:>9.1f}x  {_same(a, b)}")

    e2e = end_to_end(args.size)
    print(f"{'detect (e2e)':<16}{1e3 * e2e['numba']:>12.1f}{1e3 * e2e['numpy']:>12.1f}"
          f"{e2e['numpy'] / e2e['numba']:>9.1f}x")


if __name__ == "__main__":
    main()
