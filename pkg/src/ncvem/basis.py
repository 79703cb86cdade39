"""Edge Legendre bases, harmonic polynomial bases and quadrature rules."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np


# ---------------------------------------------------------------- quadrature

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on a reference domain.

    For 1D rules the reference domain is ``[-1, 1]`` and ``nodes`` has shape
    ``(n,)``; for triangle rules it is the unit triangle with vertices
    ``(0, 0), (1, 0), (0, 1)`` and ``nodes`` has shape ``(n, 2)``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    exactness: int


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def edge_quadrature(exactness: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1] exact up to the given polynomial degree."""
    if exactness < 0:
        raise ValueError("exactness must be non-negative")
    n = max(1, math.ceil((exactness + 1) / 2))
    x, w = _gauss(n)
    return QuadratureRule(x, w, 2 * n - 1)


@lru_cache(maxsize=None)
def _collapsed(exactness: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = max(1, math.ceil((exactness + 2) / 2))
    x, w = _gauss(n)
    g = 0.5 * (x + 1.0)
    gw = 0.5 * w
    # (u, v) in [0,1]^2, point = u * ((1 - v) e1 + v e2), jacobian u
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(gw, gw, indexing="ij")
    u, v = u.ravel(), v.ravel()
    weights = (wu * wv).ravel() * u
    return u, v, weights


def triangle_quadrature(exactness: int) -> QuadratureRule:
    """Collapsed (Duffy) tensor Gauss rule on the unit triangle.

    The rule is collapsed at the vertex ``(0, 0)``, which makes it usable for
    integrands with a point singularity there as well.
    """
    if exactness < 0:
        raise ValueError("exactness must be non-negative")
    u, v, w = _collapsed(exactness)
    nodes = np.stack([u * (1 - v), u * v], axis=1)
    return QuadratureRule(nodes, w, exactness)


def map_triangles(tris: np.ndarray, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
    """Map a reference triangle rule to physical triangles.

    ``tris`` has shape ``(m, 3, 2)``; the collapsed vertex of the rule goes to
    ``tris[:, 0]``. Returns points ``(m * q, 2)`` and weights ``(m * q,)``.
    """
    a = tris[:, 0, :]
    e1 = tris[:, 1, :] - a
    e2 = tris[:, 2, :] - a
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    s, t = rule.nodes[:, 0], rule.nodes[:, 1]
    pts = a[:, None, :] + s[None, :, None] * e1[:, None, :] + t[None, :, None] * e2[:, None, :]
    w = det[:, None] * rule.weights[None, :]
    return pts.reshape(-1, 2), w.ravel()


def gauss_lobatto_nodes(p: int) -> np.ndarray:
    """The ``p + 1`` Gauss-Lobatto nodes on [-1, 1].

    Interior nodes are the roots of ``L_p'``, i.e. of the Jacobi polynomial
    ``P_{p-1}^{(1,1)}``, computed as eigenvalues of its symmetric tridiagonal
    Jacobi matrix.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    m = p - 1
    if m == 0:
        interior = np.zeros(0)
    else:
        k = np.arange(1, m, dtype=float)
        off = np.sqrt(k * (k + 2) / ((2 * k + 1) * (2 * k + 3)))
        J = np.diag(off, 1) + np.diag(off, -1)
        interior = np.linalg.eigvalsh(J)
        # symmetrize against round-off
        interior = 0.5 * (interior - interior[::-1])
    return np.concatenate([[-1.0], interior, [1.0]])


# ------------------------------------------------------------------- Legendre

def legendre_table(t: np.ndarray, n: int) -> np.ndarray:
    """Values of ``L_0 .. L_n`` at ``t`` via the three-term recurrence; shape ``(n+1, len(t))``."""
    t = np.asarray(t, dtype=float)
    out = np.empty((n + 1,) + t.shape)
    out[0] = 1.0
    if n >= 1:
        out[1] = t
    for r in range(1, n):
        out[r + 1] = ((2 * r + 1) * t * out[r] - r * out[r - 1]) / (r + 1)
    return out


@dataclass(frozen=True)
class EdgeLegendreBasis:
    """Legendre polynomials ``m_r = L_r(phi^{-1}(x))`` on the segment ``start -> end``.

    ``phi`` maps -1 to ``start`` and 1 to ``end``; both elements sharing an edge
    must use the same orientation so that odd moments agree.
    """

    start: np.ndarray
    end: np.ndarray
    p: int

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def to_edge(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        mid = 0.5 * (self.start + self.end)
        half = 0.5 * (self.end - self.start)
        return mid + t[..., None] * half

    def to_reference(self, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = self.end - self.start
        L = self.length
        s = (x - self.start) @ d / (L * L)
        off = np.abs((x[:, 0] - self.start[0]) * d[1] - (x[:, 1] - self.start[1]) * d[0]) / L
        if np.any(off > tol * max(L, 1.0)) or np.any(s < -tol) or np.any(s > 1 + tol):
            raise ValueError("point is not on the edge")
        return 2.0 * s - 1.0

    def eval(self, r: int, x: np.ndarray) -> np.ndarray:
        if not 0 <= r <= self.p:
            raise ValueError(f"Legendre index {r} outside 0..{self.p}")
        t = self.to_reference(x)
        return legendre_table(t, r)[r]


# ------------------------------------------------------------------- harmonic

@dataclass(frozen=True)
class HarmonicBasis:
    """Basis ``q_1 .. q_{2p+1}`` of harmonic polynomials of degree <= p.

    In scaled coordinates ``Z = ((x - x_K) + i (y - y_K)) / h_K`` the basis is
    ``1, Im Z, Re Z, Im Z^2, Re Z^2, ...``, which is the real/imaginary split
    of the binomial expansion of ``Z^l``. Index 0 here is ``q_1``.
    """

    center: np.ndarray
    h: float
    p: int

    @property
    def dim(self) -> int:
        return 2 * self.p + 1

    def _powers(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = ((x[:, 0] - self.center[0]) + 1j * (x[:, 1] - self.center[1])) / self.h
        zp = np.empty((self.p + 1, len(z)), dtype=complex)
        zp[0] = 1.0
        for l in range(1, self.p + 1):
            zp[l] = zp[l - 1] * z
        return zp, z

    def values(self, x: np.ndarray) -> np.ndarray:
        """All basis values, shape ``(2p+1, npts)``."""
        zp, _ = self._powers(x)
        out = np.empty((self.dim, zp.shape[1]))
        out[0] = 1.0
        out[1::2] = zp[1:].imag
        out[2::2] = zp[1:].real
        return out

    def values_and_gradients(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Values ``(2p+1, npts)`` and gradients ``(2p+1, npts, 2)``."""
        zp, _ = self._powers(x)
        npts = zp.shape[1]
        val = np.empty((self.dim, npts))
        grad = np.zeros((self.dim, npts, 2))
        val[0] = 1.0
        val[1::2] = zp[1:].imag
        val[2::2] = zp[1:].real
        # d/dx Z^l = l Z^{l-1} / h,  d/dy Z^l = i l Z^{l-1} / h
        l = np.arange(1, self.p + 1)[:, None]
        dz = l * zp[:-1] / self.h
        grad[1::2, :, 0] = dz.imag
        grad[1::2, :, 1] = dz.real
        grad[2::2, :, 0] = dz.real
        grad[2::2, :, 1] = -dz.imag
        return val, grad

    def eval(self, alpha: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Value and gradient of ``q_alpha`` with the 1-based index ``alpha``."""
        if not 1 <= alpha <= self.dim:
            raise ValueError(f"alpha must be in 1..{self.dim}")
        v, g = self.values_and_gradients(x)
        return v[alpha - 1], g[alpha - 1]
