"""Numpy implementations of the hot pixel kernels.

Fallback lane for environments without the compiled extension; signatures
and numerics mirror attnmem._kernels.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND = "numpy"


def sep_correlate2d(img, k1d, reflect):
    """Separable 2D correlation with a 1D kernel along rows then columns.

    reflect=True pads symmetrically (edge value included), otherwise zero.
    """
    img = np.asarray(img, dtype=np.float64)
    k1d = np.asarray(k1d, dtype=np.float64)
    r = k1d.size // 2
    mode = "symmetric" if reflect else "constant"

    padded = np.pad(img, ((0, 0), (r, r)), mode=mode)
    tmp = sliding_window_view(padded, k1d.size, axis=1) @ k1d
    padded = np.pad(tmp, ((r, r), (0, 0)), mode=mode)
    return np.ascontiguousarray(sliding_window_view(padded, k1d.size, axis=0) @ k1d)


def bilinear_resize(img, out_h, out_w):
    """Resize with half-pixel-center sampling and edge clamping."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    sy = np.clip(sy, 0.0, h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    y0 = np.floor(sy).astype(np.intp)
    x0 = np.floor(sx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1.0 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1.0 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def auc_from_scores(scores, positive):
    """ROC area of `scores` separating positive from negative entries.

    Equals P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg),
    computed from tie-averaged ranks.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    positive = np.asarray(positive, dtype=bool).ravel()
    n_pos = int(positive.sum())
    n_neg = scores.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative score")
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    boundaries = np.flatnonzero(np.diff(s)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [s.size]))
    # 1-based average rank of a tie group spanning sorted slots [a, b)
    group_rank = 0.5 * (starts + 1 + ends)
    ranks = np.repeat(group_rank, ends - starts)
    rank_sum_pos = float(ranks[positive[order]].sum())
    u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1)
    return u / (n_pos * n_neg)
