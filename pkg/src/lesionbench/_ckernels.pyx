# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels; mirrors ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef int DR[8]
cdef int DC[8]
DR[:] = [0, -1, -1, -1, 0, 1, 1, 1]
DC[:] = [-1, -1, 0, 1, 1, 1, 0, -1]


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


cdef inline Py_ssize_t _union(Py_ssize_t[::1] parent, Py_ssize_t a, Py_ssize_t b) nogil:
    cdef Py_ssize_t ra = _find(parent, a), rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
        return ra
    parent[ra] = rb
    return rb


def label(binary, int connectivity):
    """Two-pass union-find labeling; labels numbered by first raster encounter."""
    cdef cnp.uint8_t[:, ::1] img = np.ascontiguousarray(binary, dtype=np.uint8)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    parent_arr = np.zeros(h * w + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t nxt = 1, cur, n, r, c, root
    cdef int count = 0
    with nogil:
        for r in range(h):
            for c in range(w):
                if not img[r, c]:
                    continue
                cur = 0
                if connectivity == 8:
                    if r > 0 and c > 0:
                        n = out[r - 1, c - 1]
                        if n:
                            cur = n if cur == 0 else _union(parent, cur, n)
                    if r > 0:
                        n = out[r - 1, c]
                        if n:
                            cur = n if cur == 0 else _union(parent, cur, n)
                    if r > 0 and c + 1 < w:
                        n = out[r - 1, c + 1]
                        if n:
                            cur = n if cur == 0 else _union(parent, cur, n)
                else:
                    if r > 0:
                        n = out[r - 1, c]
                        if n:
                            cur = n
                if c > 0:
                    n = out[r, c - 1]
                    if n:
                        cur = n if cur == 0 else _union(parent, cur, n)
                if cur == 0:
                    cur = nxt
                    parent[cur] = cur
                    nxt += 1
                out[r, c] = <cnp.int32_t>cur

    final_arr = np.zeros(nxt, dtype=np.int32)
    cdef cnp.int32_t[::1] final = final_arr
    with nogil:
        for r in range(h):
            for c in range(w):
                if out[r, c]:
                    root = _find(parent, out[r, c])
                    if final[root] == 0:
                        count += 1
                        final[root] = count
                    out[r, c] = final[root]
    return out_arr, count


cdef double _trace(const cnp.int32_t[:, ::1] labels, int lab, Py_ssize_t r0,
                   Py_ssize_t c0, Py_ssize_t area) nogil except -1.0:
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1]
    cdef Py_ssize_t r = r0, c = c0, rr, cc, fr = -1, fc = -1, step
    cdef int back = 0, found, k, idx, ffound = -1
    cdef double perim = 0.0
    cdef double sqrt2 = sqrt(2.0)
    for step in range(16 * area + 64):
        found = -1
        for k in range(1, 9):
            idx = (back + k) & 7
            rr = r + DR[idx]
            cc = c + DC[idx]
            if 0 <= rr < h and 0 <= cc < w and labels[rr, cc] == lab:
                found = idx
                break
        if found < 0:
            return 4.0
        if ffound < 0:
            fr = r
            fc = c
            ffound = found
        elif r == fr and c == fc and found == ffound:
            return perim
        perim += sqrt2 if found & 1 else 1.0
        r += DR[found]
        c += DC[found]
        back = ((found >> 1) * 2 + 6) & 7
    with gil:
        raise RuntimeError(f"contour trace for label {lab} did not close")


def trace_perimeter(labels, int lab, Py_ssize_t r0, Py_ssize_t c0, Py_ssize_t area):
    """Length of the outer Moore-neighbour contour of component ``lab``."""
    cdef const cnp.int32_t[:, ::1] lv = np.ascontiguousarray(labels, dtype=np.int32)
    return _trace(lv, lab, r0, c0, area)


def component_table(labels, int count):
    """Per-label area, bbox (r0, c0, r1, c1 inclusive) and contour length."""
    cdef const cnp.int32_t[:, ::1] lv = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lv.shape[0], w = lv.shape[1], r, c, i
    area_arr = np.zeros(count, dtype=np.int64)
    bbox_arr = np.zeros((count, 4), dtype=np.int64)
    perim_arr = np.zeros(count, dtype=np.float64)
    start_arr = np.full((count, 2), -1, dtype=np.int64)
    cdef cnp.int64_t[::1] area = area_arr
    cdef cnp.int64_t[:, ::1] bbox = bbox_arr
    cdef cnp.int64_t[:, ::1] start = start_arr
    cdef double[::1] perim = perim_arr
    cdef int lab
    if count == 0:
        return area_arr, bbox_arr, perim_arr
    with nogil:
        for i in range(count):
            bbox[i, 0] = h
            bbox[i, 1] = w
            bbox[i, 2] = -1
            bbox[i, 3] = -1
        for r in range(h):
            for c in range(w):
                lab = lv[r, c]
                if lab:
                    i = lab - 1
                    area[i] += 1
                    if start[i, 0] < 0:
                        start[i, 0] = r
                        start[i, 1] = c
                    if r < bbox[i, 0]:
                        bbox[i, 0] = r
                    if c < bbox[i, 1]:
                        bbox[i, 1] = c
                    if r > bbox[i, 2]:
                        bbox[i, 2] = r
                    if c > bbox[i, 3]:
                        bbox[i, 3] = c
        for i in range(count):
            perim[i] = _trace(lv, i + 1, start[i, 0], start[i, 1], area[i])
    return area_arr, bbox_arr, perim_arr


def correlate_rows(padded, k, Py_ssize_t width):
    """``out[r, c] = sum_i k[i] * padded[r, c + i]``, summed in tap order."""
    cdef const double[:, ::1] p = np.ascontiguousarray(padded, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(k, dtype=np.float64)
    cdef Py_ssize_t h = p.shape[0], n = kv.shape[0], r, c, i
    out_arr = np.zeros((h, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double acc
    with nogil:
        for r in range(h):
            for c in range(width):
                acc = 0.0
                for i in range(n):
                    acc = acc + kv[i] * p[r, c + i]
                out[r, c] = acc
    return out_arr
