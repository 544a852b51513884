import colorsys
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from partmatch.features import (
    N_BINS,
    Descriptor,
    EmptyRegionError,
    MissingFeatureError,
    Raster,
    bhattacharyya,
    hsv_bin_index,
    hsv_histogram,
    part_distance,
    read_pbm,
    read_ppm,
    rgb_to_hsv,
    rgb_to_hsv_array,
    vector_aux_metric,
    write_pbm,
    write_ppm,
)
from partmatch.geometry import OrientedRect


def test_rgb_to_hsv_examples():
    assert rgb_to_hsv(255, 0, 0) == (0.0, 1.0, 1.0)
    assert rgb_to_hsv(128, 128, 128) == (0.0, 0.0, pytest.approx(128 / 255))
    h, s, v = rgb_to_hsv(0, 128, 255)
    assert h == pytest.approx(209.88, abs=0.01)
    assert (s, v) == (1.0, 1.0)


channels = st.integers(0, 255)


@settings(max_examples=300, deadline=None)
@given(channels, channels, channels)
def test_rgb_to_hsv_matches_colorsys(r, g, b):
    h, s, v = rgb_to_hsv(r, g, b)
    rh, rs, rv = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
    assert (s, v) == pytest.approx((rs, rv), abs=1e-12)
    assert 0.0 <= h < 360.0
    if s > 0:
        assert math.cos(math.radians(h - rh * 360)) == pytest.approx(1.0, abs=1e-9)
    vec = rgb_to_hsv_array(np.array([[r, g, b]], dtype=np.uint8))[0]
    assert tuple(vec) == pytest.approx((h, s, v), abs=1e-9)


def _image(colors):
    return Raster(np.array(colors, dtype=np.uint8))


def test_histogram_uniform_red():
    img = _image(np.full((6, 8, 3), (255, 0, 0)))
    d = hsv_histogram(img, OrientedRect.from_center(4, 3, 0, 8, 6))
    assert np.count_nonzero(d.hsv_hist) == 1 and d.hsv_hist.max() == 1.0


def test_histogram_half_red_half_green():
    px = np.zeros((4, 8, 3), dtype=np.uint8)
    px[:, :4] = (255, 0, 0)
    px[:, 4:] = (0, 255, 0)
    d = hsv_histogram(_image(px), OrientedRect.from_center(4, 2, 0, 8, 4))
    nz = np.flatnonzero(d.hsv_hist)
    assert len(nz) == 2 and d.hsv_hist[nz].tolist() == [0.5, 0.5]


def test_histogram_empty_mask_and_outside():
    img = _image(np.full((4, 4, 3), 200))
    d = hsv_histogram(img, OrientedRect.from_center(2, 2, 0, 4, 4), mask=np.zeros((4, 4), bool))
    assert d.empty and d.hsv_hist.sum() == 0 and d.hsv_hist.size == N_BINS
    with pytest.raises(EmptyRegionError):
        hsv_histogram(img, OrientedRect.from_center(50, 50, 0, 4, 4))


def test_histogram_bin_layout_configurable():
    img = _image(np.full((2, 2, 3), (0, 0, 255)))
    d = hsv_histogram(img, OrientedRect.from_center(1, 1, 0, 2, 2), bins=(8, 2, 2))
    assert d.hsv_hist.size == 32 and d.hsv_hist.sum() == 1.0


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, (5, 7, 3)), st.randoms(use_true_random=False))
def test_histogram_permutation_stable(px, rnd):
    region = OrientedRect.from_center(3.5, 2.5, 0, 7, 5)
    flat = px.reshape(-1, 3).copy()
    order = list(range(len(flat)))
    rnd.shuffle(order)
    shuffled = flat[order].reshape(px.shape)
    a = hsv_histogram(Raster(px), region).hsv_hist
    b = hsv_histogram(Raster(shuffled), region).hsv_hist
    assert np.array_equal(a, b)
    # independent count: every pixel falls in the full-frame region
    counts = np.bincount(hsv_bin_index(rgb_to_hsv_array(flat)), minlength=N_BINS)
    assert np.allclose(a, counts / counts.sum())


def test_bhattacharyya_examples():
    assert bhattacharyya([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert bhattacharyya([1, 0], [0, 1]) == 1.0
    assert bhattacharyya([1, 0], [0.5, 0.5]) == pytest.approx(math.sqrt(1 - math.sqrt(0.5)), abs=1e-12)
    assert bhattacharyya([1, 0], [0.5, 0.5]) == pytest.approx(0.54120, abs=1e-5)


def test_bhattacharyya_rejects_unnormalized():
    with pytest.raises(ValueError):
        bhattacharyya([1, 1], [0.5, 0.5])
    with pytest.raises(ValueError):
        Descriptor(np.array([0.7, 0.7]))


def test_part_distance_examples():
    a, b = Descriptor(np.array([1.0, 0.0])), Descriptor(np.array([0.5, 0.5]))
    assert part_distance(a, a) == 0.0
    assert part_distance(a, Descriptor(np.array([0.0, 1.0]))) == 1.0
    assert part_distance(a, b, lambda x, y: 0.2) == pytest.approx(0.74120, abs=1e-5)
    with pytest.raises(MissingFeatureError):
        part_distance(a, None)


def test_vector_aux_metric():
    m = vector_aux_metric(2.0)
    assert m((0.0, 0.0), (0.0, 1.0)) == pytest.approx(2.0 * math.sqrt(0.5))
    assert m(None, (1.0,)) == 0.0
    with pytest.raises(ValueError):
        m((0.0,), (0.0, 1.0))


hists = arrays(np.float64, 16, elements=st.floats(0, 10)).filter(lambda h: h.sum() > 1e-3).map(lambda h: h / h.sum())


@settings(max_examples=300, deadline=None)
@given(hists, hists)
def test_bhattacharyya_properties(h1, h2):
    d = bhattacharyya(h1, h2)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(bhattacharyya(h2, h1), abs=1e-12)
    assert bhattacharyya(h1, h1) == pytest.approx(0.0, abs=1e-6)
    if d < 1e-9:
        assert np.allclose(h1, h2, atol=1e-6)
    metric = vector_aux_metric()
    a, b = Descriptor(h1, aux=tuple(h1[:3])), Descriptor(h2, aux=tuple(h2[:3]))
    assert part_distance(a, b, metric) == pytest.approx(part_distance(b, a, metric), abs=1e-12)


def test_ppm_pbm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = Raster(rng.integers(0, 256, (5, 9, 3), dtype=np.uint8))
    write_ppm(tmp_path / "a.ppm", img)
    assert np.array_equal(read_ppm(tmp_path / "a.ppm").pixels, img.pixels)
    mask = rng.random((7, 13)) < 0.5
    write_pbm(tmp_path / "m.pbm", mask)
    assert np.array_equal(read_pbm(tmp_path / "m.pbm"), mask)
    (tmp_path / "p1.pbm").write_text("P1\n# comment\n3 2\n1 0 1\n0 1 0\n")
    assert read_pbm(tmp_path / "p1.pbm").tolist() == [[True, False, True], [False, True, False]]
