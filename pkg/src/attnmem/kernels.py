"""Pixel-kernel facade: picks the compiled core or the numpy fallback.

Set ATTNMEM_PURE=1 to force the numpy lane (used by the lane-agreement
tests and the benchmark).
"""

import math
import os

import numpy as np

if os.environ.get("ATTNMEM_PURE"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND

sep_correlate2d = _impl.sep_correlate2d
bilinear_resize = _impl.bilinear_resize
auc_from_scores = _impl.auc_from_scores

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def gaussian_kernel1d(sigma):
    """Gaussian taps truncated at ceil(3*sigma), renormalized to sum 1."""
    radius = max(1, math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img, sigma):
    """Truncated, renormalized Gaussian blur with zero padding.

    Zero padding means mass is conserved for sources further than the
    truncation radius from every border.
    """
    if sigma <= 0:
        return np.asarray(img, dtype=np.float64).copy()
    return sep_correlate2d(img, gaussian_kernel1d(sigma), False)


def upsample2x(img):
    img = np.asarray(img, dtype=np.float64)
    return np.repeat(np.repeat(img, 2, axis=0), 2, axis=1)


def pyramid_expand_to(img, out_h=224, out_w=224):
    """Repeated 2x upsample + 5-tap binomial smoothing, then bilinear resize.

    Each doubling is followed by the separable [1,4,6,4,1]/16 filter with
    symmetric padding (constants stay constant); doubling stops once both
    dims reach the target, then an exact bilinear resize lands on it.
    """
    img = np.asarray(img, dtype=np.float64)
    while img.shape[0] < out_h or img.shape[1] < out_w:
        img = sep_correlate2d(upsample2x(img), BINOMIAL5, True)
    if img.shape != (out_h, out_w):
        img = bilinear_resize(img, out_h, out_w)
    return img
