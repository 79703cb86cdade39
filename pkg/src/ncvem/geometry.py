"""Planar polygon utilities.

Polygons are ``(n, 2)`` float arrays of vertices in counter-clockwise order,
without repeating the first vertex at the end.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import linprog


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def area(poly: np.ndarray) -> float:
    return abs(signed_area(poly))


def centroid(poly: np.ndarray) -> np.ndarray:
    """Area centroid of a simple polygon (shoelace formula)."""
    x, y = poly[:, 0], poly[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def diameter(poly: np.ndarray) -> float:
    d = poly[:, None, :] - poly[None, :, :]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def edge_lengths(poly: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.roll(poly, -1, axis=0) - poly, axis=1)


def outward_normals(poly: np.ndarray) -> np.ndarray:
    """Unit outward normals of the edges ``(v_i, v_{i+1})`` of a CCW polygon."""
    t = np.roll(poly, -1, axis=0) - poly
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1)[:, None]


def interior_angles(poly: np.ndarray) -> np.ndarray:
    """Interior angle at every vertex, in ``(0, 2*pi)``."""
    prev = np.roll(poly, 1, axis=0) - poly
    nxt = np.roll(poly, -1, axis=0) - poly
    # angle swept CCW from the outgoing edge to the incoming edge
    a_in = np.arctan2(prev[:, 1], prev[:, 0])
    a_out = np.arctan2(nxt[:, 1], nxt[:, 0])
    return np.mod(a_in - a_out, 2 * np.pi)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2, tol):
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True

    def on_seg(a, b, c):
        return (
            abs(_cross(a, b, c)) <= tol
            and min(a[0], b[0]) - tol <= c[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= c[1] <= max(a[1], b[1]) + tol
        )

    return (
        on_seg(q1, q2, p1) or on_seg(q1, q2, p2) or on_seg(p1, p2, q1) or on_seg(p1, p2, q2)
    )


def is_simple(poly: np.ndarray, tol: float = 1e-12) -> bool:
    """True if no two non-adjacent edges touch. O(n^2)."""
    n = len(poly)
    if n < 3:
        return False
    scale = max(diameter(poly), 1e-300)
    t = tol * scale * scale
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n], t):
                return False
    return True


def clip_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Clip a convex polygon to ``{x : normal . x <= offset}`` (Sutherland-Hodgman)."""
    if len(poly) == 0:
        return poly
    s = poly @ normal - offset
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        a, b, sa, sb = poly[i], poly[j], s[i], s[j]
        if sa <= 0:
            out.append(a)
        if (sa < 0 < sb) or (sb < 0 < sa):
            t = sa / (sa - sb)
            out.append(a + t * (b - a))
    if len(out) < 3:
        return np.zeros((0, 2))
    return np.array(out)


def kernel(poly: np.ndarray) -> np.ndarray:
    """Kernel of a simple polygon by half-plane intersection.

    The kernel is the set of points from which the whole polygon is visible;
    an empty ``(0, 2)`` array means the polygon is not star-shaped.
    """
    lo, hi = poly.min(0), poly.max(0)
    pad = hi - lo
    box = np.array([[lo[0] - pad[0], lo[1] - pad[1]], [hi[0] + pad[0], lo[1] - pad[1]],
                    [hi[0] + pad[0], hi[1] + pad[1]], [lo[0] - pad[0], hi[1] + pad[1]]])
    normals = outward_normals(poly)
    ker = box
    for v, n in zip(poly, normals):
        ker = clip_halfplane(ker, n, float(n @ v))
        if len(ker) == 0:
            break
    if len(ker) and area(ker) <= 1e-14 * diameter(poly) ** 2:
        return np.zeros((0, 2))
    return ker


def kernel_inradius(poly: np.ndarray) -> tuple[float, np.ndarray]:
    """Radius and center of the largest ball w.r.t. which ``poly`` is star-shaped.

    A polygon is star-shaped w.r.t. a ball iff the ball lies in its kernel, so
    this is the Chebyshev ball of the edge half-planes (a small LP).
    """
    normals = outward_normals(poly)
    b = np.einsum("ij,ij->i", normals, poly)
    a_ub = np.hstack([normals, np.ones((len(poly), 1))])
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=a_ub, b_ub=b,
                  bounds=[(None, None), (None, None), (0.0, None)], method="highs")
    if not res.success:
        return 0.0, centroid(poly)
    return float(max(res.x[2], 0.0)), res.x[:2]


def point_in_kernel(poly: np.ndarray, point: np.ndarray, tol: float = 1e-12) -> bool:
    """True if ``point`` sees every edge of ``poly`` strictly from the inside."""
    h = diameter(poly)
    nxt = np.roll(poly, -1, axis=0)
    cross = (nxt[:, 0] - poly[:, 0]) * (point[1] - poly[:, 1]) - \
        (nxt[:, 1] - poly[:, 1]) * (point[0] - poly[:, 0])
    return bool(np.all(cross > tol * h * h))


def _in_triangle(p, a, b, c, tol):
    return _cross(a, b, p) >= -tol and _cross(b, c, p) >= -tol and _cross(c, a, p) >= -tol


def ear_clip(poly: np.ndarray, tol: float = 1e-12) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon by ear clipping; returns index triples.

    Degenerate (collinear) vertices are never used as ear tips unless nothing
    else is left, so hanging nodes on straight edges are handled.
    """
    h = diameter(poly)
    t = tol * h * h
    idx = list(range(len(poly)))
    tris: list[tuple[int, int, int]] = []
    while len(idx) > 3:
        m = len(idx)
        found = False
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = poly[i0], poly[i1], poly[i2]
            if _cross(a, b, c) <= t:
                continue
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                q = poly[j]
                if np.allclose(q, a) or np.allclose(q, b) or np.allclose(q, c):
                    continue
                if _in_triangle(q, a, b, c, t):
                    blocked = True
                    break
            if not blocked:
                tris.append((i0, i1, i2))
                idx.pop(k)
                found = True
                break
        if not found:
            # only flat vertices remain as candidates: drop one (zero-area ear)
            for k in range(m):
                i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
                if abs(_cross(poly[i0], poly[i1], poly[i2])) <= t:
                    idx.pop(k)
                    found = True
                    break
            if not found:
                raise ValueError("ear clipping failed: polygon is not simple")
    if abs(_cross(*(poly[i] for i in idx))) > t:
        tris.append(tuple(idx))
    return tris


def sub_triangulate(poly: np.ndarray) -> np.ndarray:
    """Split a simple polygon into triangles, shape ``(m, 3, 2)``.

    Uses the centroid fan when the polygon is star-shaped with respect to its
    centroid and ear clipping otherwise.
    """
    c = centroid(poly)
    if point_in_kernel(poly, c):
        nxt = np.roll(poly, -1, axis=0)
        return np.stack([np.broadcast_to(c, poly.shape), poly, nxt], axis=1)
    return np.array([[poly[i], poly[j], poly[k]] for i, j, k in ear_clip(poly)])


def point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float) -> float | None:
    """Parameter ``t`` in (0, 1) if ``p`` lies strictly inside segment ``ab``."""
    d = b - a
    L2 = float(d @ d)
    t = float((p - a) @ d) / L2
    if t <= 0 or t >= 1:
        return None
    dist = np.linalg.norm(a + t * d - p)
    if dist > tol * np.sqrt(L2):
        return None
    # reject points numerically equal to an endpoint
    if t * np.sqrt(L2) <= tol * np.sqrt(L2) or (1 - t) * np.sqrt(L2) <= tol * np.sqrt(L2):
        return None
    return t
