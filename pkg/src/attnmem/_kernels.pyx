# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels: separable correlation, bilinear resize, ROC area.

Numerics match attnmem._kernels_py; that module is the import-time fallback.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


cdef inline Py_ssize_t _reflect(Py_ssize_t idx, Py_ssize_t n) nogil:
    # symmetric reflection with the edge value included: -1 -> 0, n -> n-1
    while idx < 0 or idx >= n:
        if idx < 0:
            idx = -idx - 1
        if idx >= n:
            idx = 2 * n - idx - 1
    return idx


cdef inline double _edge_tap_row(double[:, ::1] a, double[::1] k,
                                 Py_ssize_t i, Py_ssize_t j, Py_ssize_t w,
                                 Py_ssize_t r, bint reflect) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t t, src
    for t in range(2 * r + 1):
        src = j - r + t
        if reflect:
            acc += a[i, _reflect(src, w)] * k[t]
        elif 0 <= src < w:
            acc += a[i, src] * k[t]
    return acc


cdef inline double _edge_tap_col(double[:, ::1] a, double[::1] k,
                                 Py_ssize_t i, Py_ssize_t j, Py_ssize_t h,
                                 Py_ssize_t r, bint reflect) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t t, src
    for t in range(2 * r + 1):
        src = i - r + t
        if reflect:
            acc += a[_reflect(src, h), j] * k[t]
        elif 0 <= src < h:
            acc += a[src, j] * k[t]
    return acc


def sep_correlate2d(img, k1d, bint reflect):
    """Separable 2D correlation with a 1D kernel along rows then columns.

    reflect=True pads symmetrically (edge value included), otherwise zero.
    """
    tmp_arr = np.empty_like(np.ascontiguousarray(img, dtype=np.float64))
    out_arr = np.empty_like(tmp_arr)
    cdef double[:, ::1] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[::1] k = np.ascontiguousarray(k1d, dtype=np.float64)
    cdef double[:, ::1] tmp = tmp_arr
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t r = k.shape[0] // 2
    cdef Py_ssize_t i, j, t, src
    cdef double acc

    cdef Py_ssize_t interior_lo = r
    cdef Py_ssize_t interior_hi = w - r if w > r else 0

    for i in range(h):
        for j in range(interior_lo, interior_hi):  # branch-free interior
            acc = 0.0
            for t in range(2 * r + 1):
                acc += a[i, j - r + t] * k[t]
            tmp[i, j] = acc
        for j in range(min(interior_lo, w)):
            tmp[i, j] = _edge_tap_row(a, k, i, j, w, r, reflect)
        for j in range(max(interior_hi, 0), w):
            tmp[i, j] = _edge_tap_row(a, k, i, j, w, r, reflect)

    interior_hi = h - r if h > r else 0
    for i in range(interior_lo, interior_hi):
        for j in range(w):
            acc = 0.0
            for t in range(2 * r + 1):
                acc += tmp[i - r + t, j] * k[t]
            out[i, j] = acc
    for i in range(min(interior_lo, h)):
        for j in range(w):
            out[i, j] = _edge_tap_col(tmp, k, i, j, h, r, reflect)
    for i in range(max(interior_hi, 0), h):
        for j in range(w):
            out[i, j] = _edge_tap_col(tmp, k, i, j, h, r, reflect)
    return out_arr


def bilinear_resize(img, Py_ssize_t out_h, Py_ssize_t out_w):
    """Resize with half-pixel-center sampling and edge clamping."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((out_h, out_w), dtype=np.float64)
    cdef double scale_y = h / <double> out_h
    cdef double scale_x = w / <double> out_w
    cdef Py_ssize_t i, j, y0, x0, y1, x1
    cdef double sy, sx, fy, fx, top, bot

    for i in range(out_h):
        sy = (i + 0.5) * scale_y - 0.5
        if sy < 0.0:
            sy = 0.0
        if sy > h - 1.0:
            sy = h - 1.0
        y0 = <Py_ssize_t> sy
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        fy = sy - y0
        for j in range(out_w):
            sx = (j + 0.5) * scale_x - 0.5
            if sx < 0.0:
                sx = 0.0
            if sx > w - 1.0:
                sx = w - 1.0
            x0 = <Py_ssize_t> sx
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            fx = sx - x0
            top = a[y0, x0] * (1.0 - fx) + a[y0, x1] * fx
            bot = a[y1, x0] * (1.0 - fx) + a[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out


def auc_from_scores(scores, positive):
    """ROC area of `scores` separating positive from negative entries.

    Equals P(score_pos > score_neg) + 0.5 * P(score_pos = score_neg),
    computed from tie-averaged ranks.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s = np.ascontiguousarray(
        np.asarray(scores, dtype=np.float64).ravel())
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] pos = np.ascontiguousarray(
        np.asarray(positive, dtype=bool).ravel()).view(np.uint8)
    cdef Py_ssize_t n = s.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(s, kind="stable")
    cdef Py_ssize_t n_pos = 0, i, a, b
    cdef double rank_sum_pos = 0.0, group_rank
    cdef Py_ssize_t group_pos

    for i in range(n):
        n_pos += pos[i]
    if n_pos == 0 or n_pos == n:
        raise ValueError("need at least one positive and one negative score")

    a = 0
    while a < n:
        b = a + 1
        group_pos = pos[order[a]]
        while b < n and s[order[b]] == s[order[a]]:
            group_pos += pos[order[b]]
            b += 1
        group_rank = 0.5 * (a + 1 + b)
        rank_sum_pos += group_rank * group_pos
        a = b

    cdef double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1)
    return u / (<double> n_pos * <double> (n - n_pos))
