"""Element-level matrices of the non-conforming harmonic VEM.

Local DOFs are scaled edge moments ``(1/h_e) int_e v m_r^e`` against the edge
Legendre basis, ordered edge by edge (``offset[j] + r``). All integrals over
the element are reduced to boundary integrals using harmonicity, so no bulk
quadrature is needed here.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import warnings

import numpy as np
import scipy.linalg as sla

from . import geometry as geo
from .basis import HarmonicBasis, EdgeLegendreBasis, edge_quadrature, legendre_table

G_COND_WARN = 1e12


class AssemblyError(RuntimeError):
    """Local matrices cannot be built (degenerate element, singular G)."""


@dataclass(frozen=True, eq=False)
class LocalElementSpace:
    """Local VE space on one polygon.

    ``edge_degrees[j]`` is the number of moments on local edge ``j`` (the
    normal traces are in ``P_{p_e - 1}``); ``bulk_degree`` is the degree of
    the harmonic polynomial space the projector maps into. ``edge_signs[j]``
    is +1 when the global orientation of edge ``j`` follows the CCW loop.
    """

    polygon: np.ndarray
    edge_degrees: np.ndarray
    bulk_degree: int
    edge_signs: np.ndarray

    @classmethod
    def from_polygon(cls, polygon, p=None, edge_degrees=None, edge_signs=None, bulk_degree=None):
        poly = np.asarray(polygon, dtype=float)
        n = len(poly)
        if edge_degrees is None:
            edge_degrees = np.full(n, int(p))
        edge_degrees = np.asarray(edge_degrees, dtype=int)
        if bulk_degree is None:
            bulk_degree = int(edge_degrees.min())
        if bulk_degree > edge_degrees.min():
            raise ValueError("bulk degree cannot exceed the smallest edge degree")
        if edge_signs is None:
            edge_signs = np.ones(n, dtype=int)
        return cls(poly, edge_degrees, int(bulk_degree), np.asarray(edge_signs, dtype=int))

    @property
    def n_edges(self) -> int:
        return len(self.polygon)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.edge_degrees)])

    @property
    def ndofs(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def centroid(self) -> np.ndarray:
        x0 = self.polygon[0]
        return x0 + geo.centroid(self.polygon - x0)

    @cached_property
    def diameter(self) -> float:
        return geo.diameter(self.polygon)

    @cached_property
    def harmonic(self) -> HarmonicBasis:
        return HarmonicBasis(self.centroid, self.diameter, self.bulk_degree)

    @cached_property
    def scaled_polygon(self) -> np.ndarray:
        """Vertices in the element frame ``(x - x_K) / h_K``."""
        return (self.polygon - self.centroid) / self.diameter

    @cached_property
    def _scaled_harmonic(self) -> HarmonicBasis:
        return HarmonicBasis(np.zeros(2), 1.0, self.bulk_degree)

    @cached_property
    def normals(self) -> np.ndarray:
        return geo.outward_normals(self.scaled_polygon)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return geo.edge_lengths(self.polygon)

    def edge_basis(self, j: int, scaled: bool = False) -> EdgeLegendreBasis:
        poly = self.scaled_polygon if scaled else self.polygon
        a = poly[j]
        b = poly[(j + 1) % self.n_edges]
        if self.edge_signs[j] < 0:
            a, b = b, a
        return EdgeLegendreBasis(a, b, int(self.edge_degrees[j]))

    def edge_rule(self, exactness: int | None = None):
        if exactness is None:
            exactness = 2 * max(self.bulk_degree, int(self.edge_degrees.max()))
        return edge_quadrature(exactness)

    @cached_property
    def _edge_data(self):
        """Per edge: (reference nodes t, weights, harmonic values, normal derivatives).

        Everything is evaluated in the scaled element frame, which keeps the
        local matrices invariant under translation and scaling of the element.
        """
        rule = self.edge_rule()
        out = []
        for j in range(self.n_edges):
            eb = self.edge_basis(j, scaled=True)
            pts = eb.to_edge(rule.nodes)
            val, grad = self._scaled_harmonic.values_and_gradients(pts)
            dn = grad @ self.normals[j]
            out.append((rule.nodes, rule.weights, val, dn))
        return out

    def constant_dofs(self, c: float = 1.0) -> np.ndarray:
        d = np.zeros(self.ndofs)
        d[self.offsets[:-1]] = c
        return d

    def dofs_of(self, f, exactness: int | None = None) -> np.ndarray:
        """DOF vector of a function given as a callable on points ``(n, 2)``."""
        rule = self.edge_rule(exactness)
        d = np.zeros(self.ndofs)
        for j in range(self.n_edges):
            pe = int(self.edge_degrees[j])
            eb = self.edge_basis(j)
            vals = f(eb.to_edge(rule.nodes))
            L = legendre_table(rule.nodes, pe - 1)
            d[self.offsets[j]:self.offsets[j + 1]] = 0.5 * L @ (rule.weights * vals)
        return d


def compute_D(space: LocalElementSpace) -> np.ndarray:
    """``D[(j, s), alpha] = (1/h_e) int_e q_alpha m_s ds``."""
    D = np.zeros((space.ndofs, space.harmonic.dim))
    for j, (t, w, val, _) in enumerate(space._edge_data):
        L = legendre_table(t, int(space.edge_degrees[j]) - 1)
        D[space.offsets[j]:space.offsets[j + 1]] = 0.5 * (L * w) @ val.T
    return D


def compute_G(space: LocalElementSpace) -> np.ndarray:
    """First row ``(q_alpha, 1)_{dK}``, remaining rows ``(grad q_alpha, grad q_beta)_K``.

    The stiffness block uses ``(grad q_a, grad q_b)_K = int_{dK} (d_n q_a) q_b``
    and is symmetrized.
    """
    n = space.harmonic.dim
    first = np.zeros(n)
    K = np.zeros((n, n))
    lengths = space.edge_lengths / space.diameter
    for j, (t, w, val, dn) in enumerate(space._edge_data):
        half = 0.5 * lengths[j]
        first += half * val @ w
        K += half * (val * w) @ dn.T
    K = 0.5 * (K + K.T)
    G = K.copy()
    G[0] = first * space.diameter
    return G


def compute_B(space: LocalElementSpace) -> np.ndarray:
    """Right-hand sides of the projector systems, one column per canonical basis function.

    ``(phi_{j,r}, 1)_{dK} = h_j delta_{r0}``; ``(grad phi_{j,r}, grad q_b)_K =
    h_j c_r``, with ``c_r`` the Legendre coefficients of ``d_n q_b`` on edge j.
    """
    n = space.harmonic.dim
    B = np.zeros((n, space.ndofs))
    lengths = space.edge_lengths / space.diameter
    for j, (t, w, val, dn) in enumerate(space._edge_data):
        pe = int(space.edge_degrees[j])
        L = legendre_table(t, pe - 1)
        r = np.arange(pe)
        coeff = 0.5 * (2 * r + 1)[:, None] * (L * w) @ dn.T  # (pe, n): c_r of d_n q_b
        sl = slice(space.offsets[j], space.offsets[j + 1])
        B[1:, sl] = lengths[j] * coeff[:, 1:].T
        B[0, space.offsets[j]] = space.edge_lengths[j]
    return B


STAB_WEIGHTS = ("edge", "bulk")


def compute_S(space: LocalElementSpace, weight: str = "edge") -> np.ndarray:
    """Diagonal stabilization matrix, entry ``p (2r + 1)`` for moment r on edge e.

    ``p`` is the edge degree ``p_e`` (``weight="edge"``) or the element bulk
    degree (``weight="bulk"``); both agree for uniform degrees.
    """
    if weight not in STAB_WEIGHTS:
        raise ValueError(f"unknown stabilization weight {weight!r}")
    diag = np.concatenate([(pe if weight == "edge" else space.bulk_degree) * (2 * np.arange(pe) + 1.0)
                           for pe in space.edge_degrees])
    return np.diag(diag)


@dataclass(frozen=True)
class ProjectionMatrices:
    G: np.ndarray
    B: np.ndarray
    D: np.ndarray
    PiStar: np.ndarray
    Pi: np.ndarray
    S: np.ndarray
    G_tilde: np.ndarray
    A_local: np.ndarray
    G_cond: float


def projections(space: LocalElementSpace, stab_weight: str = "edge") -> ProjectionMatrices:
    G = compute_G(space)
    B = compute_B(space)
    D = compute_D(space)
    S = compute_S(space, stab_weight)
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond):
        raise AssemblyError("singular projector matrix G (degenerate element?)")
    if cond > G_COND_WARN:
        warnings.warn(f"ill-conditioned local G (cond = {cond:.3e})", RuntimeWarning, stacklevel=2)
    PiStar = sla.lu_solve(sla.lu_factor(G), B)
    Pi = D @ PiStar
    Gt = G.copy()
    Gt[0] = 0.0
    I_Pi = np.eye(space.ndofs) - Pi
    A = PiStar.T @ Gt @ PiStar + I_Pi.T @ S @ I_Pi
    A = 0.5 * (A + A.T)
    return ProjectionMatrices(G, B, D, PiStar, Pi, S, Gt, A, cond)


def local_stiffness(space: LocalElementSpace) -> np.ndarray:
    return projections(space).A_local


def edge_l2_project(space: LocalElementSpace, j: int, f, exactness: int | None = None) -> np.ndarray:
    """Legendre coefficients ``c_r = (2r+1)/h_e int_e f m_r`` of the L2 projection
    of ``f`` onto ``P_{p_e - 1}`` on local edge ``j``."""
    pe = int(space.edge_degrees[j])
    rule = space.edge_rule(exactness)
    eb = space.edge_basis(j)
    vals = f(eb.to_edge(rule.nodes))
    L = legendre_table(rule.nodes, pe - 1)
    r = np.arange(pe)
    return 0.5 * (2 * r + 1) * (L @ (rule.weights * vals))
