"""Polygonal meshes: data structure, generators, regularity checks and JSON I/O."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import json
import logging
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo

log = logging.getLogger(__name__)

GEOM_TOL = 1e-10


class MeshError(ValueError):
    """Structurally invalid mesh (non-simple element, broken conformity, ...)."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming polygonal decomposition of a 2D domain.

    ``elements`` are CCW vertex loops. Edges, their adjacency and boundary flags
    are derived on demand; edges are stored with ``edges[e, 0] < edges[e, 1]``,
    which also fixes the edge orientation used by the edge Legendre bases.
    """

    vertices: np.ndarray
    elements: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", tuple(tuple(int(i) for i in el) for el in self.elements))

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def polygon(self, k: int) -> np.ndarray:
        return self.vertices[list(self.elements[k])]

    @cached_property
    def _topology(self):
        index: dict[tuple[int, int], int] = {}
        keys: list[tuple[int, int]] = []
        for el in self.elements:
            for a, b in zip(el, el[1:] + el[:1]):
                key = (a, b) if a < b else (b, a)
                if key not in index:
                    index[key] = -1
                    keys.append(key)
        keys.sort()
        for e, key in enumerate(keys):
            index[key] = e
        adj: list[list[int]] = [[] for _ in keys]
        el_edges = []
        el_signs = []
        for k, el in enumerate(self.elements):
            ids, signs = [], []
            for a, b in zip(el, el[1:] + el[:1]):
                key = (a, b) if a < b else (b, a)
                e = index[key]
                adj[e].append(k)
                ids.append(e)
                signs.append(1 if a < b else -1)
            el_edges.append(np.array(ids, dtype=int))
            el_signs.append(np.array(signs, dtype=int))
        return np.array(keys, dtype=int).reshape(-1, 2), [tuple(a) for a in adj], el_edges, el_signs

    @property
    def edges(self) -> np.ndarray:
        return self._topology[0]

    @property
    def edge_elements(self) -> list[tuple[int, ...]]:
        return self._topology[1]

    @property
    def element_edges(self) -> list[np.ndarray]:
        """Global edge index of every local edge ``(v_i, v_{i+1})``."""
        return self._topology[2]

    @property
    def element_edge_signs(self) -> list[np.ndarray]:
        """+1 if the local edge runs along the global edge orientation."""
        return self._topology[3]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        return np.array([len(a) == 1 for a in self.edge_elements], dtype=bool)

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([geo.signed_area(self.polygon(k)) for k in range(self.n_elements)])

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.array([geo.diameter(self.polygon(k)) for k in range(self.n_elements)])

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def vertex_elements(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(len(self.vertices))]
        for k, el in enumerate(self.elements):
            for i in el:
                out[i].append(k)
        return out

    def check(self) -> None:
        """Raise :class:`MeshError` unless the mesh is structurally valid."""
        for k in range(self.n_elements):
            poly = self.polygon(k)
            if len(set(self.elements[k])) != len(self.elements[k]):
                raise MeshError(f"element {k} repeats a vertex")
            if self.areas[k] <= 0:
                raise MeshError(f"element {k} is not counter-clockwise or has zero area")
            if not geo.is_simple(poly):
                raise MeshError(f"element {k} is not simple")
        for e, adj in enumerate(self.edge_elements):
            if len(adj) > 2:
                raise MeshError(f"edge {e} is shared by {len(adj)} elements")
            if len(adj) == 2 and adj[0] == adj[1]:
                raise MeshError(f"edge {e} appears twice in element {adj[0]}")
        for e, adj in enumerate(self.edge_elements):
            if len(adj) == 2:
                k0, k1 = adj
                s0 = self.element_edge_signs[k0][list(self.element_edges[k0]).index(e)]
                s1 = self.element_edge_signs[k1][list(self.element_edges[k1]).index(e)]
                if s0 == s1:
                    raise MeshError(f"edge {e} has inconsistent orientation")

    # ------------------------------------------------------------------ I/O
    def to_json(self) -> str:
        return json.dumps({"vertices": self.vertices.tolist(),
                           "elements": [list(el) for el in self.elements]})

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        data = json.loads(text)
        try:
            verts = np.asarray(data["vertices"], dtype=float).reshape(-1, 2)
            elements = [list(map(int, el)) for el in data["elements"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MeshError(f"malformed mesh data: {exc}") from exc
        fixed = []
        for el in elements:
            if geo.signed_area(verts[el]) < 0:
                el = el[::-1]
            fixed.append(el)
        mesh = cls(verts, tuple(tuple(el) for el in fixed))
        mesh.check()
        return mesh

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "Mesh":
        return cls.from_json(Path(path).read_text())


# ---------------------------------------------------------------- geometry

@dataclass(frozen=True)
class ElementGeometry:
    h_K: float
    x_K: np.ndarray
    edge_lengths: np.ndarray
    lambda_K: float  # smallest exterior angle / pi
    omega_K: float  # largest interior angle / pi
    star_radius_lb: float


def element_geometry(mesh: Mesh, k: int) -> ElementGeometry:
    poly = mesh.polygon(k)
    ang = geo.interior_angles(poly)
    r, _ = geo.kernel_inradius(poly)
    return ElementGeometry(
        h_K=float(mesh.diameters[k]),
        x_K=geo.centroid(poly),
        edge_lengths=geo.edge_lengths(poly),
        lambda_K=float((2 * np.pi - ang).min() / np.pi),
        omega_K=float(ang.max() / np.pi),
        star_radius_lb=r,
    )


# ------------------------------------------------------- mesh construction

def merge_vertices(points: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``tol``; returns unique points and the old->new map.

    The representative of a cluster is its lowest-index member, so the result
    is deterministic.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in sorted(cKDTree(points).query_pairs(tol)):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    uniq, inverse = np.unique(roots, return_inverse=True)
    return points[uniq], inverse


def absorb_hanging_nodes(vertices: np.ndarray, elements, tol: float = GEOM_TOL):
    """Insert every mesh vertex lying inside an element edge into that element's loop.

    This turns meshes with hanging nodes into conforming polygonal meshes:
    the coarse neighbour simply gets extra (collinear) vertices.
    """
    tree = cKDTree(vertices)
    out = []
    for el in elements:
        new = []
        for a, b in zip(el, el[1:] + el[:1]):
            new.append(a)
            pa, pb = vertices[a], vertices[b]
            mid = 0.5 * (pa + pb)
            rad = 0.5 * np.linalg.norm(pb - pa) * (1 + 1e-9)
            hits = []
            for j in tree.query_ball_point(mid, rad):
                if j in (a, b):
                    continue
                t = geo.point_on_segment(vertices[j], pa, pb, tol)
                if t is not None:
                    hits.append((t, j))
            new.extend(j for _, j in sorted(hits))
        out.append(tuple(new))
    return out


def _drop_repeats(el):
    out = []
    for i in el:
        if not out or out[-1] != i:
            out.append(i)
    while len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return tuple(out)


def build_mesh(polygons, tol: float = GEOM_TOL) -> Mesh:
    """Assemble a conforming :class:`Mesh` from a list of polygon coordinate arrays.

    Shared vertices are merged (relative tolerance ``tol``), hanging nodes are
    absorbed and loops are oriented CCW.
    """
    polys = [np.asarray(p, dtype=float) for p in polygons]
    pts = np.vstack(polys)
    scale = float(np.ptp(pts, axis=0).max()) or 1.0
    verts, inv = merge_vertices(pts, tol * scale)
    elements, start = [], 0
    for p in polys:
        el = _drop_repeats(inv[start:start + len(p)].tolist())
        start += len(p)
        if geo.signed_area(verts[list(el)]) < 0:
            el = el[::-1]
        elements.append(el)
    elements = absorb_hanging_nodes(verts, elements, tol)
    mesh = Mesh(verts, tuple(elements))
    mesh.check()
    return mesh


# --------------------------------------------------------------- generators

def generate_cartesian(n: int, domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """``n x n`` squares tiling the rectangle ``(x0, x1, y0, y1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel()], axis=1)
    elements = []
    for j in range(n):
        for i in range(n):
            v0 = j * (n + 1) + i
            elements.append((v0, v0 + 1, v0 + n + 2, v0 + n + 1))
    return Mesh(verts, tuple(elements))


UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def voronoi_cell(seeds: np.ndarray, i: int, domain: np.ndarray) -> np.ndarray:
    """Voronoi cell of seed ``i`` clipped to a convex domain, by half-plane intersection.

    Seeds are visited by increasing distance; once a seed is farther than twice
    the cell's current radius it cannot cut the cell any more.
    """
    s = seeds[i]
    d = np.linalg.norm(seeds - s, axis=1)
    cell = domain.copy()
    for j in np.argsort(d, kind="stable"):
        if j == i:
            continue
        radius = np.linalg.norm(cell - s, axis=1).max()
        if d[j] > 2 * radius:
            break
        n = seeds[j] - s
        cell = geo.clip_halfplane(cell, n, float(n @ (0.5 * (seeds[j] + s))))
    return cell


def _separate_seeds(seeds, rng, tol):
    while True:
        _, inv = merge_vertices(seeds, tol)
        counts = np.bincount(inv)
        dup = counts[inv] > 1
        if not dup.any():
            return seeds
        log.warning("perturbing %d coincident Voronoi seeds", int(dup.sum()))
        seeds = seeds.copy()
        seeds[dup] += rng.normal(scale=100 * tol, size=(int(dup.sum()), 2))


def lloyd_iterations(seeds: np.ndarray, domain: np.ndarray, iters: int):
    """Run Lloyd relaxation; returns final seeds, cells and the per-iteration
    mean centroid-seed distance."""
    history = []
    for _ in range(iters + 1):
        cells = [voronoi_cell(seeds, i, domain) for i in range(len(seeds))]
        cents = np.array([geo.centroid(c) for c in cells])
        history.append(float(np.linalg.norm(cents - seeds, axis=1).mean()))
        if len(history) > iters:
            break
        seeds = cents
    return seeds, cells, history


def generate_voronoi_lloyd(n_seeds: int, domain: np.ndarray | None = None, lloyd_iters: int = 10,
                           rng_seed: int = 0) -> Mesh:
    """Voronoi mesh of ``n_seeds`` uniformly random seeds, relaxed by Lloyd's algorithm."""
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    domain = UNIT_SQUARE if domain is None else np.asarray(domain, dtype=float)
    if geo.signed_area(domain) < 0:
        domain = domain[::-1]
    rng = np.random.default_rng(rng_seed)
    lo, hi = domain.min(0), domain.max(0)
    seeds = []
    while len(seeds) < n_seeds:
        pt = lo + rng.random(2) * (hi - lo)
        if geo.point_in_kernel(domain, pt, tol=0.0):
            seeds.append(pt)
    seeds = _separate_seeds(np.array(seeds), rng, 1e-12 * float((hi - lo).max()))
    _, cells, _ = lloyd_iterations(seeds, domain, lloyd_iters)
    return build_mesh(cells)


@dataclass(frozen=True)
class LayerDecomposition:
    layer_of_element: np.ndarray

    @property
    def n_layers(self) -> int:
        return int(self.layer_of_element.max()) + 1


def layers_from_corner(mesh: Mesh, corner=(0.0, 0.0), tol: float = GEOM_TOL) -> LayerDecomposition:
    """Layers by breadth-first search over vertex-sharing neighbours.

    Layer 0 holds the elements touching ``corner``; layer ``l`` those touching
    layer ``l - 1`` and not in an earlier layer.
    """
    corner = np.asarray(corner, dtype=float)
    dist = np.linalg.norm(mesh.vertices - corner, axis=1)
    cv = int(np.argmin(dist))
    if dist[cv] > tol * max(mesh.h, 1.0):
        raise MeshError("corner is not a mesh vertex")
    layer = np.full(mesh.n_elements, -1, dtype=int)
    frontier = sorted(set(mesh.vertex_elements[cv]))
    layer[frontier] = 0
    ell = 0
    while frontier:
        nxt = set()
        for k in frontier:
            for v in mesh.elements[k]:
                for k2 in mesh.vertex_elements[v]:
                    if layer[k2] < 0:
                        nxt.add(k2)
        ell += 1
        frontier = sorted(nxt)
        layer[frontier] = ell
    return LayerDecomposition(layer)


def _lshape_quadrant_maps():
    # (a, b) in [0,1]^2 with the corner at the origin, mapped to quadrants I, II, IV
    return [lambda a, b: (a, b), lambda a, b: (-a, b), lambda a, b: (a, -b)]


def _graded_a(n, sigma):
    polys, layers = [], []
    for f in _lshape_quadrant_maps():
        def rect(a0, a1, b0, b1):
            return np.array([f(a0, b0), f(a1, b0), f(a1, b1), f(a0, b1)], dtype=float)
        for k in range(n):
            s0, s1 = sigma ** k, sigma ** (k + 1)
            for r in (rect(s1, s0, s1, s0), rect(0.0, s1, s1, s0), rect(s1, s0, 0.0, s1)):
                polys.append(r)
                layers.append(n - k)
        t = sigma ** n
        polys.append(rect(0.0, t, 0.0, t))
        layers.append(0)
    return polys, layers


def _c_ring(T, t):
    return np.array([(0, -T), (T, -T), (T, T), (-T, T), (-T, 0),
                     (-t, 0), (-t, t), (t, t), (t, -t), (0, -t)], dtype=float)


def _l_piece(t):
    return np.array([(0, 0), (0, -t), (t, -t), (t, t), (-t, t), (-t, 0)], dtype=float)


def _graded_c(n, sigma):
    polys, layers = [], []
    for k in range(n):
        polys.append(_c_ring(sigma ** k, sigma ** (k + 1)))
        layers.append(n - k)
    polys.append(_l_piece(sigma ** n))
    layers.append(0)
    return polys, layers


def _graded_b(n, sigma):
    polys, layers = [], []
    for k in range(n):
        T, t = sigma ** k, sigma ** (k + 1)
        polys.append(np.array([(0, -T), (T, -T), (T, T), (t, t), (t, -t), (0, -t)], dtype=float))
        polys.append(np.array([(T, T), (-T, T), (-T, 0), (-t, 0), (-t, t), (t, t)], dtype=float))
        layers += [n - k, n - k]
    t = sigma ** n
    polys.append(np.array([(0, 0), (0, -t), (t, -t), (t, t)], dtype=float))
    polys.append(np.array([(0, 0), (t, t), (-t, t), (-t, 0)], dtype=float))
    layers += [0, 0]
    return polys, layers


LSHAPE = np.array([(0, 0), (0, -1), (1, -1), (1, 1), (-1, 1), (-1, 0)], dtype=float)


def generate_graded_lshape(n_layers: int, sigma: float, family: str = "a") -> tuple[Mesh, LayerDecomposition]:
    """Geometrically graded mesh of ``(-1,1)^2 \\ (-1,0)^2`` refined toward the origin.

    ``family`` selects the layout: ``"a"`` tensor rectangles (hanging nodes
    absorbed), ``"b"`` nested L-shaped rings split along the diagonal,
    ``"c"`` nested non-convex rings without the split.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("grading parameter sigma must lie in (0, 1)")
    if n_layers < 0:
        raise ValueError("n_layers must be >= 0")
    family = family.lower().removeprefix("graded-")
    builders = {"a": _graded_a, "b": _graded_b, "c": _graded_c}
    if family not in builders:
        raise ValueError(f"unknown graded family {family!r}")
    polys, layers = builders[family](n_layers, sigma)
    mesh = build_mesh(polys)
    return mesh, LayerDecomposition(np.array(layers, dtype=int))


def nonconvex_demo_mesh() -> Mesh:
    """Unit square split into four L-shaped (non-convex) elements in a pinwheel."""
    piece = np.array([(0, 0), (0.75, 0), (0.75, 0.5), (0.5, 0.5), (0.5, 0.25), (0, 0.25)])
    polys = [piece]
    for _ in range(3):
        x, y = polys[-1][:, 0], polys[-1][:, 1]
        polys.append(np.stack([1 - y, x], axis=1))
    return build_mesh(polys)


# --------------------------------------------------------------- validation

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    worst_element: int | None = None


@dataclass
class RegularityReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def format(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            worst = "" if c.worst_element is None else f" (worst element {c.worst_element})"
            lines.append(f"{c.name}: {status} measured={c.measured:.6g} threshold={c.threshold:.6g}{worst}")
        return "\n".join(lines)


def validate_regularity(mesh: Mesh, rho1: float = 0.1, rho2: float = 0.05, Lambda: int = 12,
                        check_quasi_uniform: bool = False, rho3: float = 10.0) -> RegularityReport:
    """Check the mesh regularity assumptions D1-D3 (and D4 on request).

    D1: every edge length ``h_e >= rho1 * h_K``.
    D2: each element is star-shaped w.r.t. a ball of radius ``>= rho2 * h_K``;
        the radius is the inradius of the polygon kernel.
    D3: at most ``Lambda`` edges per element.
    D4: ``max h_K <= rho3 * min h_K``.
    """
    ratios_e, ratios_r, n_edges = [], [], []
    for k in range(mesh.n_elements):
        poly = mesh.polygon(k)
        hK = mesh.diameters[k]
        ratios_e.append(geo.edge_lengths(poly).min() / hK)
        ratios_r.append(geo.kernel_inradius(poly)[0] / hK)
        n_edges.append(len(poly))
    ratios_e, ratios_r, n_edges = map(np.asarray, (ratios_e, ratios_r, n_edges))
    rep = RegularityReport()
    k1 = int(np.argmin(ratios_e))
    rep.checks.append(CheckResult("D1", bool(ratios_e[k1] >= rho1), float(ratios_e[k1]), rho1, k1))
    k2 = int(np.argmin(ratios_r))
    rep.checks.append(CheckResult("D2", bool(ratios_r[k2] >= rho2), float(ratios_r[k2]), rho2, k2))
    k3 = int(np.argmax(n_edges))
    rep.checks.append(CheckResult("D3", bool(n_edges[k3] <= Lambda), float(n_edges[k3]), float(Lambda), k3))
    if check_quasi_uniform:
        d = mesh.diameters
        ratio = float(d.max() / d.min())
        rep.checks.append(CheckResult("D4", bool(ratio <= rho3), ratio, rho3, int(np.argmin(d))))
    return rep


def sub_triangulate(mesh: Mesh, k: int) -> np.ndarray:
    return geo.sub_triangulate(mesh.polygon(k))


def domain_area(mesh: Mesh) -> float:
    return float(mesh.areas.sum())


__all__ = [
    "Mesh", "MeshError", "ElementGeometry", "LayerDecomposition", "RegularityReport",
    "element_geometry", "build_mesh", "generate_cartesian", "generate_voronoi_lloyd",
    "generate_graded_lshape", "layers_from_corner", "validate_regularity", "nonconvex_demo_mesh",
    "sub_triangulate", "lloyd_iterations", "voronoi_cell",
]
