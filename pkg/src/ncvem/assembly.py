"""Global DOF numbering, Dirichlet moments, assembly, solve and conditioning."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import partial
import logging
import math
import os

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import edge_quadrature, gauss_lobatto_nodes, legendre_table
from .local import LocalElementSpace, projections
from .mesh import Mesh, LayerDecomposition

log = logging.getLogger(__name__)

DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    """The interior stiffness block is singular or not positive definite."""


@dataclass(frozen=True)
class DegreeVector:
    p_elem: np.ndarray
    p_edge: np.ndarray

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.p_edge == self.p_edge[0]) and np.all(self.p_elem == self.p_edge[0]))


def graded_degrees(layers: LayerDecomposition, mu: float) -> np.ndarray:
    """1 on layer 0 and ``max(1, ceil(mu (l + 1)))`` on layer l."""
    ell = np.asarray(layers.layer_of_element)
    p = np.maximum(1, np.ceil(mu * (ell + 1) - 1e-12)).astype(int)
    p[ell == 0] = 1
    return p


def build_degree_vector(mesh: Mesh, layers: LayerDecomposition | None = None,
                        p_uniform: int | None = None, mu: float | None = None) -> DegreeVector:
    """Element and edge degrees; edge degrees follow the maximum rule."""
    if (p_uniform is None) == (layers is None or mu is None):
        raise ValueError("give either p_uniform or (layers, mu)")
    if p_uniform is not None:
        if p_uniform < 1:
            raise ValueError("p must be >= 1")
        p_elem = np.full(mesh.n_elements, int(p_uniform))
    else:
        if mu <= 0:
            raise ValueError("mu must be positive")
        p_elem = graded_degrees(layers, mu)
    p_edge = np.array([max(p_elem[k] for k in adj) for adj in mesh.edge_elements], dtype=int)
    return DegreeVector(p_elem, p_edge)


def local_space(mesh: Mesh, k: int, dv: DegreeVector) -> LocalElementSpace:
    """Local space of element k.

    The bulk degree is the smallest degree among the element's edges, the
    largest one for which the projector is computable from the edge moments.
    """
    edges = mesh.element_edges[k]
    pe = dv.p_edge[edges]
    return LocalElementSpace(mesh.polygon(k), pe, int(pe.min()), mesh.element_edge_signs[k])


@dataclass(frozen=True, eq=False)
class DofMap:
    offsets: np.ndarray  # per edge, length n_edges + 1

    @property
    def ndofs(self) -> int:
        return int(self.offsets[-1])

    def element_dofs(self, mesh: Mesh, k: int) -> np.ndarray:
        return np.concatenate([np.arange(self.offsets[e], self.offsets[e + 1]) for e in mesh.element_edges[k]])

    def boundary_mask(self, mesh: Mesh) -> np.ndarray:
        mask = np.zeros(self.ndofs, dtype=bool)
        for e in np.flatnonzero(mesh.boundary_flags):
            mask[self.offsets[e]:self.offsets[e + 1]] = True
        return mask


def dof_map(mesh: Mesh, dv: DegreeVector) -> DofMap:
    return DofMap(np.concatenate([[0], np.cumsum(dv.p_edge)]))


# ------------------------------------------------------------------ Dirichlet

def _edge_moments(f, a, b, p, rule, singular_point=None, levels=0):
    """Scaled moments ``(1/h) int_e f m_r``, r < p, on the segment a -> b."""
    segs = [(-1.0, 1.0)]
    if singular_point is not None and levels > 0:
        sp_ = np.asarray(singular_point)
        if np.allclose(a, sp_, atol=1e-14):
            segs = _graded_segments(-1.0, 1.0, levels, at_start=True)
        elif np.allclose(b, sp_, atol=1e-14):
            segs = _graded_segments(-1.0, 1.0, levels, at_start=False)
    mom = np.zeros(p)
    for lo, hi in segs:
        t = 0.5 * (hi + lo) + 0.5 * (hi - lo) * rule.nodes
        w = 0.5 * (hi - lo) * rule.weights
        x = 0.5 * (a + b) + t[:, None] * 0.5 * (b - a)
        mom += 0.5 * legendre_table(t, p - 1) @ (w * f(x))
    return mom


def _graded_segments(lo, hi, levels, at_start, ratio=0.15):
    # geometric subdivision of [lo, hi] toward one end
    cuts = [ratio ** k for k in range(levels + 1)] + [0.0]
    pts = [lo + (hi - lo) * c for c in cuts] if at_start else [hi - (hi - lo) * c for c in cuts]
    segs = [tuple(sorted((pts[i], pts[i + 1]))) for i in range(len(pts) - 1)]
    return segs


def impose_dirichlet(mesh: Mesh, dv: DegreeVector, g, mode: str = "exact_moments",
                     singular_point=None, grading_levels: int = 8) -> np.ndarray:
    """Boundary DOF values ``(1/h_e) int_e g m_r`` for every boundary edge.

    ``g`` is a callable on points ``(n, 2)``. Mode ``exact_moments`` integrates
    ``g`` with an exactness ``2p + 6`` Gauss rule (geometrically graded toward
    ``singular_point`` if it is an edge endpoint); mode ``gauss_lobatto_interp``
    first replaces ``g`` by its interpolant at the ``p + 1`` Gauss-Lobatto nodes.
    Returns a full-length DOF vector that is zero on interior DOFs.
    """
    dm = dof_map(mesh, dv)
    out = np.zeros(dm.ndofs)
    for e in np.flatnonzero(mesh.boundary_flags):
        a, b = mesh.vertices[mesh.edges[e]]
        p = int(dv.p_edge[e])
        sl = slice(dm.offsets[e], dm.offsets[e + 1])
        if mode == "exact_moments":
            rule = edge_quadrature(2 * p + 6)
            out[sl] = _edge_moments(g, a, b, p, rule, singular_point, grading_levels)
        elif mode == "gauss_lobatto_interp":
            nodes = gauss_lobatto_nodes(p)
            vals = g(0.5 * (a + b) + nodes[:, None] * 0.5 * (b - a))
            # Legendre coefficients of the degree-p interpolant; its moments
            # against m_r are (2/(2r+1)) c_r * (1/2)
            V = legendre_table(nodes, p).T
            c = np.linalg.solve(V, vals)
            r = np.arange(p)
            out[sl] = c[:p] / (2 * r + 1)
        else:
            raise ValueError(f"unknown Dirichlet mode {mode!r}")
    return out


# ------------------------------------------------------------------- assembly

@dataclass(frozen=True, eq=False)
class GlobalSystem:
    mesh: Mesh
    degrees: DegreeVector
    dofs: DofMap
    A: sp.csr_matrix
    boundary: np.ndarray  # bool mask over DOFs
    boundary_values: np.ndarray  # full-length vector, zero on interior DOFs
    rhs: np.ndarray  # interior right-hand side
    spaces: tuple
    PiStars: tuple

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def A_interior(self) -> sp.csr_matrix:
        idx = np.flatnonzero(self.interior)
        return self.A[idx][:, idx]


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get("NCVEM_THREADS", "1")))
    except ValueError:
        return 1


def assemble(mesh: Mesh, dv: DegreeVector, g=None, mode: str = "exact_moments",
             singular_point=None, boundary_values: np.ndarray | None = None,
             stab_weight: str = "edge") -> GlobalSystem:
    """Assemble the global stiffness matrix and the Dirichlet-lifted right-hand side.

    Local matrices may be computed on ``NCVEM_THREADS`` threads; they are
    scattered in element order, so the result does not depend on threading.
    """
    dm = dof_map(mesh, dv)
    spaces = [local_space(mesh, k, dv) for k in range(mesh.n_elements)]
    workers = _n_threads()
    local = partial(projections, stab_weight=stab_weight)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            mats = list(ex.map(local, spaces))
    else:
        mats = [local(s) for s in spaces]
    rows, cols, vals = [], [], []
    for k, m in enumerate(mats):
        idx = dm.element_dofs(mesh, k)
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(m.A_local.ravel())
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dm.ndofs, dm.ndofs)).tocsr()
    A.sum_duplicates()
    A = (0.5 * (A + A.T)).tocsr()
    bmask = dm.boundary_mask(mesh)
    if boundary_values is None:
        boundary_values = np.zeros(dm.ndofs) if g is None else impose_dirichlet(mesh, dv, g, mode, singular_point)
    ii = np.flatnonzero(~bmask)
    bb = np.flatnonzero(bmask)
    rhs = -(A[ii][:, bb] @ boundary_values[bb])
    return GlobalSystem(mesh, dv, dm, A, bmask, boundary_values, rhs, tuple(spaces),
                        tuple(m.PiStar for m in mats))


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Global DOF vector plus per-element projector coefficients.

    ``coefficients[k]`` are the coefficients of ``Pi^nabla u_n`` on element
    k in the harmonic basis ``bases[k]``.
    """

    dofs: np.ndarray
    coefficients: tuple
    bases: tuple
    residual: float

    def evaluate(self, k: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        val, grad = self.bases[k].values_and_gradients(x)
        c = self.coefficients[k]
        return c @ val, np.einsum("a,apd->pd", c, grad)


def solve(system: GlobalSystem) -> DiscreteSolution:
    """Solve for the interior DOFs (dense Cholesky when small, sparse LU otherwise)."""
    ii = np.flatnonzero(system.interior)
    x = system.boundary_values.copy()
    if len(ii):
        Aii = system.A_interior
        b = system.rhs
        if len(ii) <= DENSE_LIMIT:
            try:
                c = sla.cho_factor(Aii.toarray(), lower=True)
            except np.linalg.LinAlgError as exc:
                raise SolverError(f"interior block is not positive definite: {exc}") from exc
            xi = sla.cho_solve(c, b)
        else:
            try:
                xi = spla.splu(Aii.tocsc()).solve(b)
            except RuntimeError as exc:
                raise SolverError(f"interior block is singular: {exc}") from exc
        x[ii] = xi
        bn = np.linalg.norm(b)
        res = float(np.linalg.norm(Aii @ xi - b) / bn) if bn > 0 else float(np.linalg.norm(Aii @ xi))
        if not np.isfinite(res):
            raise SolverError("non-finite solution")
    else:
        res = 0.0
    mesh = system.mesh
    coeffs, bases = [], []
    for k in range(mesh.n_elements):
        loc = x[system.dofs.element_dofs(mesh, k)]
        coeffs.append(system.PiStars[k] @ loc)
        bases.append(system.spaces[k].harmonic)
    return DiscreteSolution(x, tuple(coeffs), tuple(bases), res)


# ------------------------------------------------------------- conditioning

@dataclass(frozen=True)
class ConditionReport:
    full: float  # lambda_max / smallest non-kernel eigenvalue of the full matrix
    interior: float  # 2-norm condition of the interior block
    method: str


def _cond_dense_full(A):
    w = np.linalg.eigvalsh(A)
    lmax = w[-1]
    nz = w[w > 1e-11 * lmax]
    return lmax / nz[0]


def condition_estimate(system_or_matrix, kernel_tol: float = 1e-11) -> ConditionReport:
    """2-norm condition numbers of the global stiffness matrix.

    For the full matrix the (constant) kernel is skipped; the interior block
    is SPD after Dirichlet elimination. Dense eigendecomposition up to
    ``DENSE_LIMIT`` unknowns, Lanczos (``eigsh``) with shift-invert above.
    """
    if isinstance(system_or_matrix, GlobalSystem):
        A = system_or_matrix.A
        Ai = system_or_matrix.A_interior
    else:
        A = sp.csr_matrix(system_or_matrix)
        Ai = A
    n = A.shape[0]
    if n <= DENSE_LIMIT:
        full = _cond_dense_full(A.toarray())
        wi = np.linalg.eigvalsh(Ai.toarray()) if Ai.shape[0] else np.array([1.0])
        interior = wi[-1] / wi[0]
        return ConditionReport(float(full), float(interior), "dense")
    lmax = spla.eigsh(A, k=1, which="LA", return_eigenvectors=False, tol=1e-8)[0]
    shift = -1e-6 * lmax
    low = np.sort(spla.eigsh(A, k=2, sigma=shift, which="LM", return_eigenvectors=False, tol=1e-8))
    nz = low[low > kernel_tol * lmax]
    full = lmax / nz[0] if len(nz) else math.inf
    limax = spla.eigsh(Ai, k=1, which="LA", return_eigenvectors=False, tol=1e-8)[0]
    limin = spla.eigsh(Ai, k=1, sigma=0.0, which="LM", return_eigenvectors=False, tol=1e-8)[0]
    return ConditionReport(float(full), float(limax / limin), "lanczos")

