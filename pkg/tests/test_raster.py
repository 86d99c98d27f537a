import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mammoseg.errors import PgmFormatError, PgmTruncatedError, PgmValueError
from mammoseg.raster import (
    BinaryMask, GrayImage, LabelMap, OverlayImage, box_perimeter, read_pgm, read_ppm,
    render_overlay, write_pgm, write_ppm,
)


def _write(tmp_path, name, payload: bytes):
    p = tmp_path / name
    p.write_bytes(payload)
    return p


def test_plain_2x2(tmp_path):
    img = read_pgm(_write(tmp_path, "a.pgm", b"P2\n2 2\n3\n0 1\n2 3\n"))
    assert (img.width, img.height, img.max_value) == (2, 2, 3)
    assert img.data.ravel().tolist() == [0, 1, 2, 3]


def test_binary_payload(tmp_path):
    img = read_pgm(_write(tmp_path, "b.pgm", b"P5\n2 2\n255\n" + bytes([10, 20, 30, 40])))
    assert img.data.ravel().tolist() == [10, 20, 30, 40]


def test_comments_are_skipped(tmp_path):
    img = read_pgm(_write(tmp_path, "c.pgm", b"P2\n# made by hand\n2 1 # size\n9\n4 # x\n 5\n"))
    assert img.data.tolist() == [[4, 5]]


@pytest.mark.parametrize("payload", [b"P2\n2 2\n255\n1 2 3\n", b"P5\n2 2\n255\n\x01\x02\x03"])
def test_truncated(tmp_path, payload):
    with pytest.raises(PgmTruncatedError):
        read_pgm(_write(tmp_path, "t.pgm", payload))


def test_value_above_max(tmp_path):
    with pytest.raises(PgmValueError):
        read_pgm(_write(tmp_path, "v.pgm", b"P2\n1 1\n3\n7\n"))


@pytest.mark.parametrize("payload", [b"P3\n1 1\n255\n0 0 0\n", b"P2\n0 1\n255\n", b"junk"])
def test_bad_header(tmp_path, payload):
    with pytest.raises(PgmFormatError):
        read_pgm(_write(tmp_path, "h.pgm", payload))


def test_minimal_image(tmp_path):
    p = tmp_path / "m.pgm"
    write_pgm(GrayImage(np.zeros((1, 1), dtype=np.int64), 255), p)
    assert read_pgm(p) == GrayImage(np.zeros((1, 1), dtype=np.int64), 255)


def test_sixteen_bit_uses_two_bytes(tmp_path):
    data = np.array([[0, 65535], [256, 1]])
    p = tmp_path / "w.pgm"
    write_pgm(GrayImage(data, 65535), p)
    raw = p.read_bytes()
    assert raw.endswith(bytes([0, 0, 255, 255, 1, 0, 0, 1]))
    assert read_pgm(p).data.tolist() == data.tolist()


@st.composite
def gray_images(draw):
    maxval = draw(st.sampled_from([1, 255, 1000, 65535]))
    h = draw(st.integers(1, 9))
    w = draw(st.integers(1, 9))
    data = draw(arrays(np.int64, (h, w), elements=st.integers(0, maxval)))
    return GrayImage(data, maxval)


@given(img=gray_images(), plain=st.booleans())
def test_pgm_round_trip(tmp_path_factory, img, plain):
    p = tmp_path_factory.mktemp("rt") / "x.pgm"
    write_pgm(img, p, plain=plain)
    back = read_pgm(p)
    assert back == img and back.max_value == img.max_value


def test_ppm_round_trip(tmp_path):
    rgb = np.arange(2 * 3 * 3).reshape(2, 3, 3) * 9
    for plain in (False, True):
        p = tmp_path / f"o{plain}.ppm"
        write_ppm(OverlayImage(rgb, 255), p, plain=plain)
        assert np.array_equal(read_ppm(p).rgb, rgb)


def test_gray_image_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage(np.array([[300]]), 255)
    with pytest.raises(ValueError):
        GrayImage(np.zeros((0, 3), dtype=np.int64), 255)


def test_label_map_contiguity():
    LabelMap(np.array([[0, 1], [2, 2]]), 2)
    with pytest.raises(ValueError):
        LabelMap(np.array([[0, 1], [3, 3]]), 2)


def test_identity_overlay():
    img = GrayImage(np.array([[1, 2], [3, 4]]), 255)
    ov = render_overlay(img)
    assert all(np.array_equal(ov.rgb[:, :, c], img.data) for c in range(3))


def test_single_contour_pixel():
    img = GrayImage(np.full((4, 5), 7), 255)
    ov = render_overlay(img, [(0, 0)])
    changed = np.any(ov.rgb != 7, axis=2)
    assert changed.sum() == 1 and changed[0, 0]
    assert tuple(ov.rgb[0, 0]) == (255, 0, 0)


@pytest.mark.parametrize("w,h", [(1, 1), (2, 2), (5, 3), (8, 8), (1, 6)])
def test_full_box_perimeter_count(w, h):
    # oracle: walk the rectangle boundary one pixel at a time
    walked = {(x, y) for x in range(w) for y in range(h) if x in (0, w - 1) or y in (0, h - 1)}
    pts = {tuple(p) for p in box_perimeter(0, 0, w - 1, h - 1)}
    assert pts == walked
    if w >= 2 and h >= 2:
        assert len(pts) == 2 * (w + h) - 4
    img = GrayImage(np.zeros((h, w), dtype=np.int64), 255)
    ov = render_overlay(img, box=(0, 0, w - 1, h - 1))
    assert np.any(ov.rgb != 0, axis=2).sum() == len(walked)


@given(
    data=arrays(np.int64, (6, 7), elements=st.integers(0, 200)),
    contour=st.lists(st.tuples(st.integers(0, 6), st.integers(0, 5)), max_size=10),
    box=st.one_of(st.none(), st.tuples(st.integers(0, 3), st.integers(0, 2),
                                       st.integers(3, 6), st.integers(2, 5))),
)
def test_overlay_touches_only_marked_pixels(data, contour, box):
    img = GrayImage(data, 255)
    ov = render_overlay(img, contour, box)
    marked = np.zeros(data.shape, dtype=bool)
    for x, y in contour:
        marked[y, x] = True
    if box is not None:
        for x, y in box_perimeter(*box):
            marked[y, x] = True
    untouched = ~marked
    for c in range(3):
        assert np.array_equal(ov.rgb[:, :, c][untouched], data[untouched])


def test_overlay_out_of_bounds():
    img = GrayImage(np.zeros((3, 3), dtype=np.int64), 255)
    with pytest.raises(IndexError):
        render_overlay(img, [(3, 0)])


def test_arrays_are_read_only():
    img = GrayImage(np.zeros((2, 2), dtype=np.int64), 255)
    with pytest.raises(ValueError):
        img.data[0, 0] = 1
    m = BinaryMask(np.ones((2, 2), dtype=bool))
    assert m.count() == 4
