import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from rodscope.components import label_components
from rodscope.imaging import (
    DIFF_A_ONLY,
    DIFF_B_ONLY,
    DIFF_BOTH,
    GrayImage,
    ImageReadError,
    compose_fluor_input,
    crop_to,
    load_image,
    pad_to_multiple,
    render_diff,
    render_labels,
    save_mask,
    to_8bit,
)


def test_load_16bit_tiff_keeps_dims(tmp_path):
    arr = (np.arange(1022 * 1024, dtype=np.uint32) % 65536).astype(np.uint16).reshape(1022, 1024)
    path = tmp_path / "frame.tif"
    Image.fromarray(arr).save(path)
    img = load_image(path)
    assert (img.height, img.width, img.bit_depth) == (1022, 1024, 16)
    np.testing.assert_array_equal(img.pixels, arr)


def test_load_blank_png_as_mask(tmp_path):
    path = tmp_path / "blank.png"
    Image.fromarray(np.zeros((5, 7), dtype=np.uint8)).save(path)
    mask = load_image(path, kind="mask")
    assert mask.shape == (5, 7) and mask.dtype == bool and not mask.any()


def test_load_plain_pgm(tmp_path):
    path = tmp_path / "a.pgm"
    path.write_text("P2\n3 2\n255\n0 7 255\n1 0 3\n")
    img = load_image(path)
    assert img.bit_depth == 8
    np.testing.assert_array_equal(img.pixels, [[0, 7, 255], [1, 0, 3]])
    np.testing.assert_array_equal(load_image(path, kind="mask"), [[0, 1, 1], [1, 0, 1]])


def test_truncated_file_is_unreadable(tmp_path):
    good = tmp_path / "good.png"
    Image.fromarray(np.full((64, 64), 9, dtype=np.uint8)).save(good)
    bad = tmp_path / "bad.png"
    bad.write_bytes(good.read_bytes()[:40])
    with pytest.raises(ImageReadError, match="unreadable"):
        load_image(bad)


def test_multichannel_rejected(tmp_path):
    path = tmp_path / "rgb.png"
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8)).save(path)
    with pytest.raises(ImageReadError, match="single-channel"):
        load_image(path)


def test_mask_roundtrip_uses_0_255(tmp_path):
    mask = np.eye(4, dtype=bool)
    path = tmp_path / "m.png"
    save_mask(mask, path)
    assert set(np.unique(np.array(Image.open(path)))) == {0, 255}
    np.testing.assert_array_equal(load_image(path, kind="mask"), mask)


def test_gray_image_invariants():
    with pytest.raises(ValueError):
        GrayImage(np.array([[256]]), bit_depth=8)
    with pytest.raises(ValueError):
        GrayImage(np.zeros((2, 2)), pixel_size_um=0)


@pytest.mark.parametrize(
    "values, expected",
    [
        ([0, 65535], [0, 255]),
        ([500, 500, 500], [0, 0, 0]),
        ([100, 200, 300], [0, 128, 255]),
    ],
)
def test_to_8bit(values, expected):
    out = to_8bit(GrayImage(np.array([values], dtype=np.uint16), bit_depth=16))
    assert out.bit_depth == 8
    assert out.pixels.tolist() == [expected]


def test_to_8bit_round_half_up():
    # (v - 0) * 255 / 510 = 127.5 for v = 255 -> 128
    out = to_8bit(GrayImage(np.array([[0, 255, 510]], dtype=np.uint16), bit_depth=16))
    assert out.pixels.tolist() == [[0, 128, 255]]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 65535), min_size=2, max_size=50))
def test_to_8bit_monotone(values):
    v = np.array([sorted(values)], dtype=np.uint16)
    out = to_8bit(GrayImage(v, bit_depth=16)).pixels[0].astype(int)
    assert np.all(np.diff(out) >= 0)


@pytest.mark.parametrize(
    "shape, expected",
    [((1022, 1024), (1024, 1024)), ((32, 32), (32, 32)), ((33, 1), (64, 32))],
)
def test_pad_to_multiple(shape, expected):
    img = GrayImage(np.ones(shape, dtype=np.uint8))
    padded = pad_to_multiple(img, 32)
    assert padded.shape == expected
    assert padded.original_shape == shape
    assert padded.pixels[: shape[0], : shape[1]].all()
    assert padded.pixels.sum() == shape[0] * shape[1]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 70), st.integers(1, 70), st.integers(1, 40))
def test_pad_then_crop_is_identity(h, w, m):
    rng = np.random.default_rng(h * 1000 + w)
    mask = rng.random((h, w)) < 0.5
    padded = pad_to_multiple(mask, m)
    assert padded.shape[0] % m == 0 and padded.shape[1] % m == 0
    np.testing.assert_array_equal(crop_to(padded, mask.shape), mask)


def test_compose_fluor_input(rng):
    cells = GrayImage(rng.integers(0, 256, (10, 12), dtype=np.uint8))
    fluor = GrayImage(rng.integers(0, 256, (10, 12), dtype=np.uint8))
    rgb = compose_fluor_input(cells, fluor)
    np.testing.assert_array_equal(rgb[..., 0], cells.pixels)
    np.testing.assert_array_equal(rgb[..., 1], fluor.pixels)
    np.testing.assert_array_equal(rgb[..., 2], fluor.pixels)

    zero = compose_fluor_input(cells, GrayImage(np.zeros((10, 12), dtype=np.uint8)))
    assert not zero[..., 1:].any()
    np.testing.assert_array_equal(zero[..., 0], cells.pixels)


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        compose_fluor_input(GrayImage(np.zeros((10, 10))), GrayImage(np.zeros((11, 10))))


def test_render_labels_empty_is_black():
    out = render_labels(label_components(np.zeros((8, 9), dtype=bool)))
    assert out.shape == (8, 9, 3) and not out.any()


def test_render_labels_deterministic_and_distinct(rng):
    mask = rng.random((64, 64)) < 0.35
    comps = label_components(mask)
    assert len(comps) > 100
    a, b = render_labels(comps, seed=7), render_labels(comps, seed=7)
    np.testing.assert_array_equal(a, b)
    colors = {tuple(a[c.coords[0][0], c.coords[0][1]]) for c in comps}
    assert len(colors) == len(comps)
    assert not a[~mask].any()
    assert (a[mask].max(axis=-1) > 0).all()


def test_render_labels_corner_touching_components_differ():
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    out = render_labels(label_components(mask), seed=0)
    assert tuple(out[0, 0]) != tuple(out[1, 1])


def test_render_diff_classes(rng):
    a = rng.random((30, 40)) < 0.5
    b = rng.random((30, 40)) < 0.5
    out = render_diff(a, b)
    for r in range(30):
        for c in range(40):
            if a[r, c] and b[r, c]:
                expected = DIFF_BOTH
            elif a[r, c]:
                expected = DIFF_A_ONLY
            elif b[r, c]:
                expected = DIFF_B_ONLY
            else:
                expected = (0, 0, 0)
            assert tuple(out[r, c]) == expected


def test_render_diff_special_cases():
    m = np.ones((3, 3), dtype=bool)
    same = render_diff(m, m)
    assert (same == 255).all()
    only_a = render_diff(m, ~m)
    assert (only_a.reshape(-1, 3) == DIFF_A_ONLY).all()
    with pytest.raises(ValueError):
        render_diff(m, np.ones((3, 4), dtype=bool))


def test_renders_do_not_mutate_inputs(rng):
    a = rng.random((10, 10)) < 0.5
    b = rng.random((10, 10)) < 0.5
    a0, b0 = a.copy(), b.copy()
    render_diff(a, b)
    render_labels(label_components(a))
    np.testing.assert_array_equal(a, a0)
    np.testing.assert_array_equal(b, b0)
