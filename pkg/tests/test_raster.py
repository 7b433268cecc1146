import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lesionbench import raster
from lesionbench.raster import EdgeKind, MorphOp

from . import oracles

PATTERN_5X5 = np.array(
    [
        [0.0, 0.1, 0.2, 0.3, 0.4],
        [0.9, 0.8, 0.7, 0.6, 0.5],
        [0.0, 1.0, 0.0, 1.0, 0.0],
        [0.25, 0.5, 0.75, 1.0, 0.75],
        [0.3, 0.3, 0.9, 0.1, 0.6],
    ]
)

binary_images = arrays(bool, st.tuples(st.integers(1, 24), st.integers(1, 24)))


# -- gaussian_blur -------------------------------------------------------------

def test_blur_constant_preserved(backend):
    img = np.full((12, 9), 0.3)
    np.testing.assert_allclose(raster.gaussian_blur(img, 2.0), 0.3, rtol=0, atol=1e-15)


def test_blur_impulse(backend):
    img = np.zeros((17, 17))
    img[8, 8] = 1.0
    out = raster.gaussian_blur(img, 2.0)
    assert abs(out.sum() - 1.0) < 1e-9
    assert np.unravel_index(out.argmax(), out.shape) == (8, 8)
    np.testing.assert_allclose(out, np.rot90(out), rtol=0, atol=1e-15)


@pytest.mark.parametrize("radius", [0.75, 2.0])
def test_blur_matches_dense_convolution(backend, radius):
    expected = oracles.dense_gaussian_blur(PATTERN_5X5, radius)
    np.testing.assert_allclose(raster.gaussian_blur(PATTERN_5X5, radius), expected, rtol=0, atol=1e-7)


def test_blur_transpose_invariant(backend, rs):
    img = rs.random((13, 21))
    a = raster.gaussian_blur(img.T, 2.0)
    b = raster.gaussian_blur(img, 2.0).T
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_blur_preserves_interior_mass(backend, rs):
    img = np.zeros((40, 40))
    img[15:25, 12:27] = rs.random((10, 15))
    assert abs(raster.gaussian_blur(img, 2.0).sum() - img.sum()) < 1e-9


@pytest.mark.parametrize("radius", [0.0, -1.0])
def test_blur_rejects_nonpositive_radius(radius):
    with pytest.raises(ValueError):
        raster.gaussian_blur(np.zeros((4, 4)), radius)


def test_gaussian_kernel_half_width():
    assert len(raster.gaussian_kernel(2.0)) == 13
    assert len(raster.gaussian_kernel(0.75)) == 7
    assert raster.gaussian_kernel(0.75).sum() == pytest.approx(1.0, abs=1e-15)


# -- otsu_threshold --------------------------------------------------------------

def test_otsu_bimodal():
    img = np.full((8, 8), 0.2)
    img[:, 4:] = 0.8
    t, b = raster.otsu_threshold(img)
    assert not b[:, :4].any() and b[:, 4:].all()
    assert 51 <= t < 204


def test_otsu_constant_is_all_false():
    t, b = raster.otsu_threshold(np.full((6, 6), 0.5))
    assert t == 255 and not b.any()


def test_otsu_matches_exhaustive_search(rs):
    for _ in range(10):
        img = rs.random((16, 16))
        t, b = raster.otsu_threshold(img)
        assert t == oracles.exhaustive_otsu(img)
        assert np.array_equal(b, raster.quantize(img) > t)


def test_quantize_bins():
    q = raster.quantize(np.array([[0.0, 1 / 255, 0.5, 0.999, 1.0]]))
    assert q.tolist() == [[0, 1, 127, 254, 255]]


# -- morphology ----------------------------------------------------------------

def test_erode_strips_border():
    out = raster.morphology(np.ones((10, 10), bool), MorphOp.ERODE, raster.structuring_element(3))
    expected = np.zeros((10, 10), bool)
    expected[1:9, 1:9] = True
    assert np.array_equal(out, expected)


def test_open_keeps_element_sized_blob():
    img = np.zeros((7, 7), bool)
    img[2:5, 2:5] = True
    assert np.array_equal(raster.morphology(img, "open"), img)


def test_open_matches_set_definition(rs):
    se = raster.structuring_element(3)
    for _ in range(10):
        img = rs.random((20, 20)) < 0.6
        assert np.array_equal(raster.opening(img, se), oracles.set_opening(img, se))


def test_erode_matches_set_definition_cross(rs):
    cross = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], bool)
    img = rs.random((15, 15)) < 0.7
    assert np.array_equal(raster.erode(img, cross), oracles.set_erosion(img, cross))
    assert np.array_equal(raster.opening(img, cross), oracles.set_opening(img, cross))


@given(binary_images)
@settings(max_examples=60, deadline=None)
def test_opening_idempotent(img):
    once = raster.opening(img)
    assert np.array_equal(raster.opening(once), once)
    e = raster.erode(img)
    assert np.array_equal(raster.erode(raster.dilate(e)), e)


@pytest.mark.parametrize("shape", [(2, 3), (3, 4), (2, 2)])
def test_even_element_rejected(shape):
    with pytest.raises(ValueError):
        raster.erode(np.ones((5, 5), bool), np.ones(shape, bool))
    with pytest.raises(ValueError):
        raster.structuring_element(4)


# -- connected_components ------------------------------------------------------

def test_cc_empty(backend):
    assert raster.connected_components(np.zeros((5, 5), bool)).count == 0


def test_cc_diagonal_pair(backend):
    img = np.array([[1, 0], [0, 1]], bool)
    assert raster.connected_components(img, 8).count == 1
    assert raster.connected_components(img, 4).count == 2


def test_cc_matches_flood_fill(backend, rs):
    for _ in range(10):
        img = rs.random((32, 32)) < 0.5
        for conn in (4, 8):
            lm = raster.connected_components(img, conn)
            part = oracles.flood_fill_partition(img, conn)
            assert oracles.labels_to_partition(lm.labels) == part
            assert lm.count == len(part)


def test_cc_first_encounter_order(backend):
    img = np.array(
        [
            [0, 0, 0, 1],
            [1, 0, 0, 1],
            [1, 0, 1, 0],
            [0, 0, 0, 0],
        ],
        bool,
    )
    lm = raster.connected_components(img, 4)
    assert lm.labels.tolist() == [[0, 0, 0, 1], [2, 0, 0, 1], [2, 0, 3, 0], [0, 0, 0, 0]]
    lm8 = raster.connected_components(img, 8)
    assert lm8.count == 2 and lm8.labels[2, 2] == 1


def test_cc_u_shape_merges(backend):
    # both arms get provisional labels before the base joins them
    img = np.array([[1, 0, 1], [1, 0, 1], [1, 1, 1]], bool)
    lm = raster.connected_components(img, 4)
    assert lm.count == 1 and set(np.unique(lm.labels)) == {0, 1}


@given(binary_images)
@settings(max_examples=80, deadline=None)
def test_cc_partition_properties(img):
    lm8 = raster.connected_components(img, 8)
    lm4 = raster.connected_components(img, 4)
    assert lm8.count <= lm4.count
    assert set(np.unique(lm8.labels)) - {0} == set(range(1, lm8.count + 1))
    # visiting in transposed order gives the same partition
    lt = raster.connected_components(img.T, 8).labels.T
    assert oracles.labels_to_partition(lt) == oracles.labels_to_partition(lm8.labels)


def test_cc_bad_connectivity():
    with pytest.raises(ValueError):
        raster.connected_components(np.zeros((3, 3)), 6)


# -- component_stats -----------------------------------------------------------

def test_stats_square(backend):
    img = np.zeros((11, 11), bool)
    img[2:9, 2:9] = True
    (s,) = raster.component_stats(raster.connected_components(img))
    assert (s.area, s.perimeter, s.bbox) == (49, 24.0, (2, 2, 8, 8))
    assert abs(s.compactness - 4 * math.pi * 49 / 576) < 1e-9
    assert abs(s.compactness - 1.069) < 1e-3


def test_stats_line(backend):
    img = np.zeros((3, 12), bool)
    img[1, 1:11] = True
    s = raster.shape_stats(img)
    assert (s.area, s.perimeter) == (10, 18.0)
    assert abs(s.compactness - 4 * math.pi * 10 / 324) < 1e-12
    assert abs(s.compactness - 0.388) < 1e-3


def test_stats_disk(backend):
    # Hand trace of x^2 + y^2 <= 16: each quadrant is 3 diagonal + 2 straight steps.
    s = raster.shape_stats(oracles.disk(16))
    assert s.area == 49
    expected_p = 8 + 12 * math.sqrt(2)
    assert abs(s.perimeter - expected_p) < 1e-12
    assert abs(s.compactness - 4 * math.pi * 49 / expected_p**2) < 1e-12
    assert s.compactness > 0.8


def test_stats_single_pixel(backend):
    img = np.zeros((3, 3), bool)
    img[1, 1] = True
    s = raster.shape_stats(img)
    assert s.perimeter == 4.0 and s.compactness == pytest.approx(math.pi / 4)


def test_stats_shapes_touching_border(backend):
    img = np.ones((4, 6), bool)
    s = raster.shape_stats(img)
    assert s.perimeter == 2 * (3 + 5)


def test_stats_l_shape_hand_trace(backend):
    # L-tromino: (0,0),(1,0),(1,1): steps S, E, NW back to start -> 2 + sqrt(2)
    img = np.array([[1, 0], [1, 1]], bool)
    s = raster.shape_stats(img)
    assert s.perimeter == pytest.approx(2 + math.sqrt(2), abs=1e-12)


def test_stats_ignores_holes_and_neighbours(backend):
    ring = np.ones((7, 7), bool)
    ring[2:5, 2:5] = False
    img = np.zeros((9, 18), bool)
    img[1:8, 1:8] = ring
    img[1:8, 9:16] = True
    stats = raster.component_stats(raster.connected_components(img))
    assert [s.perimeter for s in stats] == [24.0, 24.0]
    assert [s.area for s in stats] == [40, 49]


def test_square_compactness_decreases_to_quarter_pi(backend):
    prev = float("inf")
    for k in range(2, 40, 3):
        img = np.zeros((k + 2, k + 2), bool)
        img[1 : k + 1, 1 : k + 1] = True
        c = raster.shape_stats(img).compactness
        assert math.pi / 4 < c < prev
        prev = c
    assert prev - math.pi / 4 < 0.05


def _random_blob(seed: int, size: int = 14) -> np.ndarray:
    g = np.random.default_rng(seed)
    img = g.random((size, size)) < 0.55
    lm = raster.connected_components(img, 8)
    if lm.count == 0:
        img[size // 2, size // 2] = True
        return img
    biggest = np.bincount(lm.labels.ravel())[1:].argmax() + 1
    return lm.labels == biggest


@given(st.integers(0, 10**6))
@settings(max_examples=150, deadline=None)
def test_perimeter_rotation_and_mirror_invariant(seed):
    blob = _random_blob(seed)
    s = raster.shape_stats(blob)
    assert s.compactness > 0
    for variant in (np.rot90(blob), np.rot90(blob, 2), np.fliplr(blob), blob.T):
        assert raster.shape_stats(variant).perimeter == pytest.approx(s.perimeter, abs=1e-9)


@given(st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_bbox_tight(seed):
    blob = _random_blob(seed)
    s = raster.shape_stats(blob)
    rows, cols = np.nonzero(blob)
    assert s.bbox == (rows.min(), cols.min(), rows.max(), cols.max())
    assert s.area == blob.sum()


# -- edge_filter ---------------------------------------------------------------

@pytest.mark.parametrize("kind", list(EdgeKind))
def test_edge_constant_is_zero(kind):
    assert not raster.edge_filter(np.full((6, 7), 0.4), kind).any()


def test_sobel_step_edge():
    img = np.zeros((9, 10))
    img[:, 5:] = 1.0
    out = raster.edge_filter(img, "sobel")
    col_max = out.max(axis=0)
    assert np.all(out[:, 4] == col_max.max()) and np.all(out[:, 5] == col_max.max())
    assert not out[:, :4].any() and not out[:, 6:].any()


@pytest.mark.parametrize("kind,kernels", [
    ("sobel", (raster.SOBEL_X, raster.SOBEL_Y)),
    ("laplace", (raster.LAPLACE_4,)),
])
def test_edge_matches_direct_convolution(kind, kernels):
    responses = [oracles.direct_correlate3(PATTERN_5X5, k.tolist()) for k in kernels]
    if kind == "sobel":
        expected = np.sqrt(responses[0] ** 2 + responses[1] ** 2)
    else:
        expected = np.abs(responses[0])
    np.testing.assert_allclose(raster.edge_filter(PATTERN_5X5, kind), expected, rtol=0, atol=1e-12)


def test_edge_hand_value():
    # centre pixel of the pattern: Gx = (0.6+2*1+1.0)-(0.8+2*1+0.5) = 0.3,
    # Gy = (0.5+2*0.75+1)-(0.8+2*0.7+0.6) = 0.2 ; Laplacian = 0.7+0.75+1+1-0 = 3.45
    sob = raster.edge_filter(PATTERN_5X5, "sobel")[2, 2]
    lap = raster.edge_filter(PATTERN_5X5, "laplace")[2, 2]
    assert sob == pytest.approx(math.hypot(0.3, 0.2), abs=1e-12)
    assert lap == pytest.approx(3.45, abs=1e-12)


def test_edge_deterministic(rs):
    img = rs.random((20, 20))
    for kind in EdgeKind:
        assert raster.edge_filter(img, kind).tobytes() == raster.edge_filter(img.copy(), kind).tobytes()


def test_edge_too_small():
    with pytest.raises(ValueError):
        raster.edge_filter(np.zeros((2, 5)), "sobel")


# -- center_fit ----------------------------------------------------------------

def test_center_fit_hcp_shape():
    img = np.arange(260 * 311, dtype=np.float64).reshape(260, 311) + 1.0
    out = raster.center_fit(img, 270)
    assert out.shape == (270, 270)
    assert not out[:5].any() and not out[-5:].any()
    assert np.array_equal(out[5:265], img[:, 20:290])


def test_center_fit_identity():
    img = np.random.default_rng(1).random((270, 270))
    assert np.array_equal(raster.center_fit(img), img)


def test_center_fit_mixed():
    img = np.ones((272, 268))
    img[0] = 2.0
    img[-1] = 3.0
    out = raster.center_fit(img, 270)
    assert out.shape == (270, 270)
    assert not out[:, 0].any() and not out[:, -1].any()
    assert np.all(out[:, 1:-1] == 1.0)


def test_center_fit_odd_pad_goes_bottom_right():
    out = raster.center_fit(np.ones((2, 2)), 5)
    assert out[1:3, 1:3].all() and out.sum() == 4


@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 30))
@settings(max_examples=60, deadline=None)
def test_center_fit_idempotent(h, w, t):
    img = np.random.default_rng(h * 100 + w).random((h, w))
    once = raster.center_fit(img, t)
    assert np.array_equal(raster.center_fit(once, t), once)
