# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-pixel hot loops.

Arithmetic mirrors _fallback.py expression for expression so results are
bit-identical across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()


def segment_distance_field(Py_ssize_t h, Py_ssize_t w,
                           double ax, double ay, double bx, double by):
    """Euclidean distance from every pixel center to the segment (a, b)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] d = out
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double l2 = dx * dx + dy * dy
    cdef double px, py, t, rx, ry
    cdef Py_ssize_t i, j
    for i in range(h):
        py = i + 0.5
        for j in range(w):
            px = j + 0.5
            if l2 == 0.0:
                rx = px - ax
                ry = py - ay
            else:
                t = ((px - ax) * dx + (py - ay) * dy) / l2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                rx = px - (ax + t * dx)
                ry = py - (ay + t * dy)
            d[i, j] = sqrt(rx * rx + ry * ry)
    return out


def disc_owner_map(Py_ssize_t h, Py_ssize_t w, cx, cy, r, z):
    """Index of the nearest-depth disc covering each pixel, -1 for background.

    Ties on z go to the lowest disc index.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cxa = np.ascontiguousarray(cx, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cya = np.ascontiguousarray(cy, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ra = np.ascontiguousarray(r, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] za = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=2] out = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] owner = out
    cdef double[::1] cxv = cxa, cyv = cya, rv = ra, zv = za
    cdef Py_ssize_t n = cxa.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double px, py, ddx, ddy, best
    for i in range(h):
        py = i + 0.5
        for j in range(w):
            px = j + 0.5
            best = INFINITY
            for k in range(n):
                ddx = px - cxv[k]
                ddy = py - cyv[k]
                if ddx * ddx + ddy * ddy <= rv[k] * rv[k] and zv[k] < best:
                    owner[i, j] = <int>k
                    best = zv[k]
    return out
