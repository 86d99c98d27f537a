import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mammoseg.errors import ConfigurationError, DegenerateInputError
from mammoseg.levelset import (
    INFLATE, ArrivalField, LevelSetField, Schedule, SpeedParams, contour_cells,
    contour_curvature, detect, edge_stop, evolve_step, fast_march, init_phi, march_from,
    reinitialize, seed_points, skew_centred_field, skew_centred_normal, stability_bound,
)
from mammoseg.phantoms import disk_phantom
from mammoseg.raster import GrayImage

from geometry import circle_sdf, hausdorff_to_circle, zero_crossings

ZERO = SpeedParams(epsilon=0, beta=0, nu=0, theta=0)


def gray(a):
    return GrayImage(np.asarray(a, dtype=np.int64), 255)


def unit_march(n, seed_xy):
    seeds = np.zeros((n, n), dtype=bool)
    seeds[seed_xy[1], seed_xy[0]] = True
    return march_from(np.ones((n, n)), seeds)


# seeds and image terms

def test_seed_points():
    assert len(seed_points(gray(np.full((3, 4), 9)), 0.3)) == 12
    img = np.zeros((10, 10), dtype=np.int64)
    img[2, 7] = 50
    assert seed_points(gray(img), 0.0).tolist() == [[7, 2]]
    img[8, 1] = 50
    assert seed_points(gray(img), 0.0).tolist() == [[7, 2], [1, 8]]


@pytest.mark.parametrize("slope,expected", [(0, 1.0), (1, 0.5), (3, 0.25)])
def test_edge_stop_on_ramps(slope, expected):
    ramp = np.tile(np.arange(8) * slope, (5, 1))
    assert edge_stop(gray(ramp), (4, 2), scale="raw") == pytest.approx(expected)


def test_edge_stop_relative_scale():
    # gradients are taken on I / max(I), so the same ramp at any gain stops alike
    for gain in (1, 3, 30):
        ramp = np.tile(np.arange(8) * gain, (5, 1))
        assert edge_stop(gray(ramp), (4, 2)) == pytest.approx(1 / (1 + 1 / 7))
    assert edge_stop(gray([[0, 255]]), (0, 0)) == pytest.approx(0.5)


def test_skew_worked_window():
    win = np.zeros((3, 3), dtype=np.int64)
    win[1, 1] = 9
    # mean 1, (1/9) * (8 * (-1)^3 + 8^3) = 56
    assert skew_centred_field(gray(win))[1, 1] == pytest.approx(56.0)
    assert -1.0 <= skew_centred_normal(gray(win), (1, 1)) <= 1.0


def test_skew_flat_and_symmetric():
    assert skew_centred_field(gray(np.full((3, 3), 40)))[1, 1] == 0
    sym = np.array([[10, 20, 30], [40, 50, 60], [70, 80, 90]])
    assert skew_centred_field(gray(sym))[1, 1] == pytest.approx(0.0, abs=1e-9)


# fast marching

def test_march_first_ring():
    T = unit_march(9, (4, 4)).T
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        assert T[4 + dy, 4 + dx] == pytest.approx(1.0)
    assert T[5, 5] == pytest.approx(1.0 + 1.0 / math.sqrt(2.0), abs=1e-12)


def test_march_matches_euclidean():
    T = unit_march(64, (32, 32)).T
    yy, xx = np.mgrid[:64, :64]
    d = np.hypot(xx - 32, yy - 32)
    near = d <= 20
    assert np.abs(T - d)[near].max() <= 1.0


@given(arrays(np.float64, (12, 12), elements=st.floats(0.1, 10.0)),
       st.integers(0, 11), st.integers(0, 11))
def test_march_accepts_in_order(speed, sx, sy):
    seeds = np.zeros(speed.shape, dtype=bool)
    seeds[sy, sx] = True
    arr = march_from(speed, seeds)
    vals = arr.T.ravel()[arr.accepted]
    assert np.all(np.diff(vals) >= 0)
    assert len(arr.accepted) == speed.size


def test_fast_march_from_points():
    img = gray(np.zeros((8, 8)))
    arr = fast_march(img, np.array([[2, 3]]), SpeedParams())
    assert arr.T[3, 2] == 0 and np.isfinite(arr.T).all()


def test_march_without_seed():
    with pytest.raises(DegenerateInputError):
        march_from(np.ones((3, 3)), np.zeros((3, 3), dtype=bool))


# initial field

def test_init_phi_single_seed():
    fld = init_phi(unit_march(11, (5, 5)), 4)
    neg = fld.phi < 0
    assert neg.sum() == 1 and neg[5, 5]


def test_init_phi_everything_reached():
    arr = unit_march(9, (0, 0))
    fld = init_phi(arr, 4, t0=float(arr.T.max()))
    assert np.all(fld.phi <= 0)


@pytest.mark.parametrize("r", [6.0, 10.0, 15.0])
def test_init_phi_circle(r):
    n = 48
    arr = unit_march(n, (24, 24))
    fld = init_phi(arr, 6, t0=r)
    pts = zero_crossings(fld.phi)
    dist = np.abs(np.hypot(pts[:, 0] - 24, pts[:, 1] - 24) - r)
    assert dist.max() <= 1.0


# evolution

def test_zero_weights_freeze_phi():
    phi = circle_sdf(32, 8)
    fld = LevelSetField(phi, 6, 0.5)
    out = evolve_step(fld, gray(np.zeros((32, 32))), ZERO)
    assert np.array_equal(out.phi, phi)


def test_balloon_expands_at_unit_speed():
    n, r0, dt, steps = 64, 10.0, 0.25, 16
    params = SpeedParams(epsilon=0, beta=0, nu=1.0, theta=0, nu_direction=INFLATE)
    img = gray(np.zeros((n, n)))
    fld = LevelSetField(circle_sdf(n, r0), 6, dt)
    for i in range(steps):
        fld = evolve_step(fld, img, params)
        if i % 4 == 3:
            fld = reinitialize(fld)
    pts = zero_crossings(fld.phi)
    radius = np.hypot(pts[:, 0] - (n - 1) / 2, pts[:, 1] - (n - 1) / 2)
    assert np.abs(radius - (r0 + steps * dt)).max() <= 1.0


@pytest.mark.parametrize("r", [5, 10, 20])
def test_curvature_rate_on_circle(r):
    n = 64
    phi = circle_sdf(n, r)
    dt = 0.1
    params = SpeedParams(epsilon=1.0, beta=0, nu=0, theta=0)
    out = evolve_step(LevelSetField(phi, 6, dt), gray(np.zeros((n, n))), params)
    rate = (out.phi - phi) / dt
    cells = contour_cells(phi < 0)
    k, p = rate[cells], phi[cells]
    # shift the cell-centre value onto the zero level
    k0 = k / (1.0 - p * k)
    assert np.abs(k0 * r - 1.0).max() <= 0.10


@given(arrays(np.float64, (16, 16), elements=st.floats(-12, 12)))
def test_evolve_is_local_to_band(phi):
    img = gray(np.tile(np.arange(16) * 10, (16, 1)))
    fld = LevelSetField(phi, 3, 0.05)
    out = evolve_step(fld, img, SpeedParams())
    off = np.abs(phi) > 3
    assert np.array_equal(out.phi[off], phi[off])


def test_time_step_bound_enforced():
    params = SpeedParams()
    img = gray(np.zeros((8, 8)))
    bound = stability_bound(params, 0.0)
    with pytest.raises(ConfigurationError):
        evolve_step(LevelSetField(circle_sdf(8, 2), 6, bound * 1.5), img, params)


@pytest.mark.parametrize("field", [dict(epsilon=1.5), dict(nu=-0.1), dict(theta=2)])
def test_weights_validated(field):
    with pytest.raises(ConfigurationError):
        SpeedParams(**field)


# reinitialization

def test_reinit_fixed_point():
    phi = circle_sdf(48, 12.3)
    out = reinitialize(LevelSetField(phi, 6)).phi
    near = np.abs(phi) <= 1
    assert np.abs(out - phi)[near].max() <= 0.05
    assert np.abs(out - phi)[np.abs(phi) <= 5].max() <= 0.2


def test_reinit_undoes_scaling():
    phi = circle_sdf(48, 12.3)
    out = reinitialize(LevelSetField(3.0 * phi, 6)).phi
    assert np.array_equal(out < 0, phi < 0)
    assert np.abs(out - phi)[np.abs(phi) <= 5].max() <= 0.2


def _grad_norm(phi):
    gy, gx = np.gradient(phi)
    return np.hypot(gx, gy)


@pytest.mark.parametrize("r", [8.0, 14.5])
def test_reinit_gradient_norm(r):
    n = 48
    yy, xx = np.mgrid[:n, :n].astype(np.float64)
    c = (n - 1) / 2
    phi = ((xx - c) ** 2 + (yy - c) ** 2 - r * r) / 7.0  # circular zero set, far from a distance
    out = reinitialize(LevelSetField(phi, 6)).phi
    band = np.abs(out) <= 5
    g = _grad_norm(out)[band]
    assert g.min() >= 0.9 and g.max() <= 1.1


@given(st.floats(0.05, 50.0), st.integers(0, 10**6))
def test_reinit_keeps_sign_pattern(scale, seed):
    rng = np.random.default_rng(seed)
    phi = circle_sdf(24, 6) + rng.normal(0, 0.5, (24, 24))
    out = reinitialize(LevelSetField(scale * phi, 4)).phi
    assert np.array_equal(out < 0, phi < 0)


# curvature and detection

@pytest.mark.parametrize("r", [5, 10, 20])
def test_contour_curvature_on_circle(r):
    k = contour_curvature(circle_sdf(64, r))
    assert np.abs(k * r - 1.0).max() <= 0.10


def test_detect_disk():
    img = disk_phantom(128, radius=25)
    found = detect(img)
    assert found.region_count == 1 and found.converged
    assert hausdorff_to_circle(found.contour, (63.5, 63.5), 25) <= 2.0


@pytest.mark.parametrize("noise,scale", [(2, "max"), (5, "raw")])
def test_detect_noisy_disk(noise, scale):
    img = disk_phantom(128, radius=25, noise=noise, seed=2)
    found = detect(img, SpeedParams(gradient_scale=scale))
    assert found.region_count == 1
    assert hausdorff_to_circle(found.contour, (63.5, 63.5), 25) <= 2.5


def test_detect_two_disks():
    img = disk_phantom(128, centers=[(35, 64), (93, 64)], radius=20)
    assert detect(img).region_count == 2


def test_detect_uniform_is_degenerate():
    found = detect(gray(np.full((16, 16), 77)))
    assert found.degenerate and not found.converged


def test_contour_has_opposite_neighbour():
    found = detect(disk_phantom(64, radius=12))
    inside = found.regions.labels > 0
    for x, y in found.contour:
        nbrs = [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        assert any(0 <= a < 64 and 0 <= b < 64 and not inside[b, a] for a, b in nbrs)


def test_schedule_validation():
    with pytest.raises(ConfigurationError):
        Schedule(band_width=1)
    with pytest.raises(ConfigurationError):
        Schedule(seed_fraction=1.5)
