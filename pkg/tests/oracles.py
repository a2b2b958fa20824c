"""Independent reference implementations used only by tests.

These deliberately take a different route from the library code: per-pixel
ray casting instead of scanline spans, plain DP tables instead of the library
metrics, brute-force scans instead of ray marching.
"""

from __future__ import annotations

import numpy as np


def point_in_polygon_oracle(vertices, width, height):
    """Per-pixel even-odd test with explicit on-edge inclusion (closed polygon)."""
    v = np.asarray(vertices, dtype=float)
    ys, xs = np.mgrid[0:height, 0:width]
    px = xs.ravel().astype(float)
    py = ys.ravel().astype(float)
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    n = len(v)
    j = n - 1
    for i in range(n):
        xi, yi = v[i]
        xj, yj = v[j]
        straddle = (yi > py) != (yj > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (py - yi) / (yj - yi) + xi
        inside ^= straddle & (px < x_cross)
        cross = (xj - xi) * (py - yi) - (yj - yi) * (px - xi)
        seg_len = np.hypot(xj - xi, yj - yi)
        tol = 1e-7 * max(seg_len, 1.0)
        within = ((px >= min(xi, xj) - 1e-9) & (px <= max(xi, xj) + 1e-9)
                  & (py >= min(yi, yj) - 1e-9) & (py <= max(yi, yj) + 1e-9))
        on_edge |= within & (np.abs(cross) <= tol)
        j = i
    return (inside | on_edge).reshape(height, width)


def region_masks_oracle(polygons, width, height, depth_values=None, cutoff=None):
    """Same tie-break as the library (path wins, then left), via the per-pixel oracle."""
    path = point_in_polygon_oracle(polygons.path, width, height)
    left = point_in_polygon_oracle(polygons.left, width, height) & ~path
    right = point_in_polygon_oracle(polygons.right, width, height) & ~path & ~left
    if depth_values is not None:
        keep = np.isfinite(depth_values) & (depth_values > 0) & (depth_values <= cutoff)
        path, left, right = path & keep, left & keep, right & keep
    return left, right, path


def lcs_table(a, b):
    t = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                t[i][j] = t[i - 1][j - 1] + 1
            else:
                t[i][j] = max(t[i - 1][j], t[i][j - 1])
    return t[len(a)][len(b)]


def first_row_reaching(depth_values, column, target):
    """Scan a column upward from the bottom; first row whose depth >= target."""
    h = depth_values.shape[0]
    for r in range(h - 1, -1, -1):
        d = depth_values[r, column]
        if np.isfinite(d) and d > 0 and d >= target:
            return r
    return None


def pixel_count_fraction(bbox, mask):
    """Fraction of pixel centres inside a normalized bbox that are set, by explicit loops."""
    h, w = mask.shape
    x1, y1, x2, y2 = bbox
    total = hit = 0
    for r in range(h):
        yn = r / (h - 1)
        if not (y1 - 1e-12 <= yn <= y2 + 1e-12):
            continue
        for c in range(w):
            xn = c / (w - 1)
            if x1 - 1e-12 <= xn <= x2 + 1e-12:
                total += 1
                hit += bool(mask[r, c])
    return hit / total
