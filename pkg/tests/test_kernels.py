import numpy as np
import pytest

from attnmem import _kernels_py as pure
from attnmem import kernels

try:
    from attnmem import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(
    compiled is None, reason="compiled extension not built"
)


@needs_compiled
@pytest.mark.parametrize("reflect", [False, True])
def test_lanes_agree_sep_correlate(reflect):
    rng = np.random.default_rng(0)
    img = rng.normal(size=(41, 59))
    k = kernels.gaussian_kernel1d(2.7)
    a = compiled.sep_correlate2d(img, k, reflect)
    b = pure.sep_correlate2d(img, k, reflect)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_compiled
def test_lanes_agree_resize_and_auc():
    rng = np.random.default_rng(1)
    img = rng.normal(size=(17, 23))
    np.testing.assert_allclose(
        compiled.bilinear_resize(img, 224, 224),
        pure.bilinear_resize(img, 224, 224),
        rtol=0, atol=1e-13,
    )
    scores = rng.normal(size=500)
    scores[::9] = scores[3]  # inject ties
    positive = rng.random(500) < 0.25
    assert compiled.auc_from_scores(scores, positive) == pure.auc_from_scores(
        scores, positive
    )


def test_gaussian_kernel_normalized():
    for sigma in (0.4, 1.0, 3.335):
        k = kernels.gaussian_kernel1d(sigma)
        assert k.size == 2 * max(1, int(np.ceil(3 * sigma))) + 1
        assert abs(k.sum() - 1.0) < 1e-12


def test_blur_conserves_interior_mass():
    sigma = 2.0
    mat = np.zeros((40, 40))
    mat[20, 20] = 1.0
    mat[15, 24] = 1.0
    out = kernels.gaussian_blur(mat, sigma)
    assert abs(out.sum() - 2.0) < 1e-9


def test_blur_loses_edge_mass():
    mat = np.zeros((20, 20))
    mat[0, 0] = 1.0
    out = kernels.gaussian_blur(mat, 2.0)
    assert out.sum() < 1.0 - 1e-3


def test_bilinear_identity_and_constant():
    rng = np.random.default_rng(2)
    img = rng.normal(size=(13, 9))
    np.testing.assert_array_equal(kernels.bilinear_resize(img, 13, 9), img)
    const = np.full((5, 7), 3.3)
    out = kernels.bilinear_resize(const, 31, 17)
    np.testing.assert_allclose(out, 3.3, rtol=0, atol=1e-12)


def test_pyramid_expand_constant_and_shape():
    out = kernels.pyramid_expand_to(np.full((7, 7), 0.4))
    assert out.shape == (224, 224)
    np.testing.assert_allclose(out, 0.4, rtol=0, atol=1e-12)
    # peak stays in the right quadrant after upscaling
    img = np.zeros((7, 7))
    img[1, 5] = 1.0
    out = kernels.pyramid_expand_to(img)
    y, x = np.unravel_index(out.argmax(), out.shape)
    assert y < 112 and x > 112


def test_auc_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(20):
        values = rng.integers(0, 12, size=60).astype(float)  # many ties
        positive = rng.random(60) < 0.3
        if positive.all() or not positive.any():
            continue
        pos = values[positive]
        neg = values[~positive]
        wins = sum((p > q) for p in pos for q in neg)
        ties = sum((p == q) for p in pos for q in neg)
        want = (wins + 0.5 * ties) / (len(pos) * len(neg))
        assert abs(kernels.auc_from_scores(values, positive) - want) < 1e-12


def test_auc_rejects_degenerate():
    with pytest.raises(ValueError):
        kernels.auc_from_scores(np.ones(4), np.ones(4, dtype=bool))


@needs_compiled
@pytest.mark.parametrize("reflect", [False, True])
def test_lanes_agree_when_kernel_exceeds_dims(reflect):
    img = np.random.default_rng(4).normal(size=(3, 4))
    k = kernels.gaussian_kernel1d(5.0)  # radius 15 >> both dims
    np.testing.assert_allclose(
        compiled.sep_correlate2d(img, k, reflect),
        pure.sep_correlate2d(img, k, reflect),
        rtol=0, atol=1e-12,
    )
