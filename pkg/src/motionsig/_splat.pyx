# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled splatting kernel.

Single pass z-buffer; output-identical to the sorted painter's algorithm in
``_splat_py`` (nearer wins, equal depth goes to the larger index).
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def splat_winners(const cnp.int64_t[::1] u, const cnp.int64_t[::1] v,
                  const double[::1] z, on_screen, int height, int width, int k):
    cdef const cnp.uint8_t[::1] ok = np.ascontiguousarray(on_screen, dtype=np.uint8)
    winners_arr = np.full((height, width), -1, dtype=np.int64)
    zbuf_arr = np.empty((height, width), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] win = winners_arr
    cdef double[:, ::1] zbuf = zbuf_arr
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i, r, c, r0, r1, c0, c1
    cdef int half = k // 2
    cdef double zi
    with nogil:
        for i in range(n):
            if not ok[i]:
                continue
            zi = z[i]
            r0 = v[i] - half
            r1 = v[i] + half
            c0 = u[i] - half
            c1 = u[i] + half
            if r0 < 0:
                r0 = 0
            if c0 < 0:
                c0 = 0
            if r1 >= height:
                r1 = height - 1
            if c1 >= width:
                c1 = width - 1
            for r in range(r0, r1 + 1):
                for c in range(c0, c1 + 1):
                    # ascending index order: "<=" hands ties to the later point
                    if win[r, c] < 0 or zi <= zbuf[r, c]:
                        win[r, c] = i
                        zbuf[r, c] = zi
    return winners_arr
