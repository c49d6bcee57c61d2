import math

import numpy as np
import pytest

from attnmem.errors import (
    AllBelowThreshold,
    NoParticipants,
    NotNormalized,
    OutOfBoundsFixation,
)
from attnmem.fixation import (
    BinaryFixationMap,
    SaliencyMap,
    ScreenGeometry,
    binarize,
    blur_sigma,
    build_density_map,
    minmax_normalize,
    pixels_per_degree,
)
from attnmem.io import FixationEvent
from attnmem import kernels

PAPER_GEOM = ScreenGeometry(distance_in=13.77, screen_h_in=23.5, screen_res_y=768)


def _event(x, y, vid="v1", frame=0, pid="p1", dur=100.0):
    return FixationEvent(pid, vid, frame, x, y, dur)


# --- PPD / sigma ------------------------------------------------------------

def test_ppd_paper_constants():
    assert pixels_per_degree(PAPER_GEOM) == pytest.approx(7.854, abs=0.01)


def test_ppd_linear_in_resolution_and_vanishing_angle():
    doubled = ScreenGeometry(13.77, 23.5, 1536)
    assert pixels_per_degree(doubled) == pytest.approx(
        2 * pixels_per_degree(PAPER_GEOM), rel=1e-12
    )
    tiny = ScreenGeometry(13.77, 23.5, 768, visual_angle_deg=1e-12)
    assert pixels_per_degree(tiny) == pytest.approx(0.0, abs=1e-9)


def test_blur_sigma_values():
    assert blur_sigma(PAPER_GEOM) == pytest.approx(3.335, abs=0.01)
    # distance tuned so PPD = 2.355 exactly -> sigma = 1
    d = 2.355 * 23.5 / (2 * math.tan(math.radians(0.5)) * 768)
    assert blur_sigma(ScreenGeometry(d, 23.5, 768)) == pytest.approx(1.0, rel=1e-12)
    # sigma scales linearly with viewer distance
    near = ScreenGeometry(13.77 * 2, 23.5, 768)
    assert blur_sigma(near) == pytest.approx(2 * blur_sigma(PAPER_GEOM), rel=1e-9)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ScreenGeometry(0, 23.5, 768)


# --- density maps --------------------------------------------------------------

def test_single_center_fixation_peaks_at_center():
    events = {"p1": [_event(160, 120)]}
    smap = build_density_map(events, (320, 240), PAPER_GEOM)
    assert smap.normalized
    assert smap.grid.shape == (224, 224)
    y, x = np.unravel_index(smap.grid.argmax(), smap.grid.shape)
    # (160, 120) of a 320x240 raster lands at (112, 112) of 224x224
    assert abs(x - 112) <= 1 and abs(y - 112) <= 1
    # radially monotone nearby
    assert smap.grid[y, x] > smap.grid[y, x + 5] > smap.grid[y, x + 10]


def test_identical_participants_average_to_same_map():
    events = [_event(50, 60), _event(100, 90)]
    one = build_density_map({"p1": events}, (320, 240), PAPER_GEOM)
    two = build_density_map({"p1": events, "p2": list(events)}, (320, 240), PAPER_GEOM)
    np.testing.assert_allclose(one.grid, two.grid, atol=1e-12)


def test_participant_order_invariance():
    a = {"p1": [_event(30, 40)], "p2": [_event(200, 100)]}
    b = {"p2": [_event(200, 100)], "p1": [_event(30, 40)]}
    np.testing.assert_array_equal(
        build_density_map(a, (320, 240), PAPER_GEOM).grid,
        build_density_map(b, (320, 240), PAPER_GEOM).grid,
    )


def test_two_fixations_match_dense_gaussian_sum_oracle():
    """Small sigma, no resize (224 raster in, 224 out), unnormalized oracle."""
    geom = ScreenGeometry(13.77, 23.5, 180)  # sigma ~ 0.78
    sigma = blur_sigma(geom)
    pts = [(60, 60), (170, 150)]
    events = {"p1": [_event(x, y) for x, y in pts]}
    got = build_density_map(events, (224, 224), geom)

    radius = math.ceil(3 * sigma)
    oracle = np.zeros((224, 224))
    for px, py in pts:
        ys, xs = np.mgrid[0:224, 0:224]
        bump = np.exp(-((xs - px) ** 2 + (ys - py) ** 2) / (2 * sigma ** 2))
        bump[np.maximum(np.abs(xs - px), np.abs(ys - py)) > radius] = 0.0
        k1 = kernels.gaussian_kernel1d(sigma)
        norm = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2).sum()
        oracle += bump / norm ** 2
    oracle = minmax_normalize(oracle)
    np.testing.assert_allclose(got.grid, oracle, atol=1e-9)
    # two local maxima at the fixation points
    for px, py in pts:
        patch = got.grid[py - 2 : py + 3, px - 2 : px + 3]
        assert patch.max() == got.grid[py, px]


def test_duration_weighting_changes_relative_mass():
    events = {"p1": [_event(60, 60, dur=500.0), _event(170, 150, dur=50.0)]}
    flat = build_density_map(events, (224, 224), PAPER_GEOM)
    weighted = build_density_map(events, (224, 224), PAPER_GEOM,
                                 duration_weighted=True)
    assert flat.grid[60, 60] == pytest.approx(flat.grid[150, 170], abs=1e-6)
    assert weighted.grid[60, 60] > weighted.grid[150, 170]


def test_density_map_errors():
    with pytest.raises(NoParticipants):
        build_density_map({}, (320, 240), PAPER_GEOM)
    with pytest.raises(OutOfBoundsFixation):
        build_density_map({"p1": [_event(320, 10)]}, (320, 240), PAPER_GEOM)


def test_constant_map_normalizes_to_zeros():
    assert minmax_normalize(np.full((5, 5), 2.0)).tolist() == np.zeros((5, 5)).tolist()


# --- binarize -------------------------------------------------------------------

def test_binarize_against_elementwise_oracle():
    rng = np.random.default_rng(0)
    grid = minmax_normalize(rng.random((32, 32)))
    got = binarize(SaliencyMap("v", 0, grid, True))
    np.testing.assert_array_equal(got.grid, grid >= 0.5)
    assert isinstance(got, BinaryFixationMap)


def test_binarize_requires_normalized_and_nonempty():
    with pytest.raises(NotNormalized):
        binarize(SaliencyMap("v", 0, np.ones((4, 4)), False))
    with pytest.raises(AllBelowThreshold):
        binarize(SaliencyMap("v", 0, np.zeros((4, 4)), True))


def test_binarize_argmax_always_true():
    rng = np.random.default_rng(1)
    grid = minmax_normalize(rng.random((16, 16)))
    got = binarize(SaliencyMap("v", 0, grid, True))
    assert got.grid[np.unravel_index(grid.argmax(), grid.shape)]


def test_resize_then_normalize_constant_is_zero():
    out = minmax_normalize(kernels.bilinear_resize(np.full((30, 40), 5.5), 224, 224))
    assert out.shape == (224, 224)
    assert not out.any()
