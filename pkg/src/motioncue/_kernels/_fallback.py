"""Pure-NumPy kernels, arithmetically identical to the compiled core.

Both backends evaluate the same per-pixel expressions in the same order so
their outputs agree bit-for-bit; the parity test enforces this.
"""

import numpy as np


def _pixel_centers(h, w):
    ys, xs = np.mgrid[0:h, 0:w]
    return xs + 0.5, ys + 0.5


def segment_distance_field(h, w, ax, ay, bx, by):
    """Euclidean distance from every pixel center to the segment (a, b)."""
    px, py = _pixel_centers(h, w)
    dx = bx - ax
    dy = by - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        rx = px - ax
        ry = py - ay
        return np.sqrt(rx * rx + ry * ry)
    t = ((px - ax) * dx + (py - ay) * dy) / l2
    t = np.clip(t, 0.0, 1.0)
    rx = px - (ax + t * dx)
    ry = py - (ay + t * dy)
    return np.sqrt(rx * rx + ry * ry)


def disc_owner_map(h, w, cx, cy, r, z):
    """Index of the nearest-depth disc covering each pixel, -1 for background.

    Ties on z go to the lowest disc index.
    """
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    px, py = _pixel_centers(h, w)
    owner = np.full((h, w), -1, dtype=np.int32)
    best = np.full((h, w), np.inf)
    for k in range(cx.shape[0]):
        ddx = px - cx[k]
        ddy = py - cy[k]
        inside = ddx * ddx + ddy * ddy <= r[k] * r[k]
        take = inside & (z[k] < best)
        owner[take] = k
        best[take] = z[k]
    return owner
