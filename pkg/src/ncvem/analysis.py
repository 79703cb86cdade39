"""Reference solutions, computable error norms and convergence studies."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict
import io
import math
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .assembly import (DegreeVector, DiscreteSolution, assemble, build_degree_vector,
                       condition_estimate, solve)
from .basis import HarmonicBasis, map_triangles, triangle_quadrature
from .mesh import (Mesh, generate_cartesian, generate_graded_lshape, generate_voronoi_lloyd)

SINGULAR_RATIO = 0.15


# ---------------------------------------------------------------- references

@dataclass(frozen=True)
class ReferenceSolution:
    """Harmonic function ``u = Im f(z)`` with its gradient ``(Im f', Re f')``.

    ``value`` and ``gradient`` take points of shape ``(n, 2)``.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    singular_point: tuple[float, float] | None = None
    regularity: str = "analytic"


def _z(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return x[:, 0] + 1j * x[:, 1]


def _grad_from(fp):
    return np.stack([fp.imag, fp.real], axis=1)


def _u1():
    def value(x):
        return np.exp(_z(x)).imag

    def gradient(x):
        return _grad_from(np.exp(_z(x)))

    return ReferenceSolution("u1", value, gradient)


def _u2():
    # z^2 log z on the unit square, principal branch
    def value(x):
        z = _z(x)
        out = np.zeros(len(z))
        nz = z != 0
        out[nz] = (z[nz] ** 2 * np.log(z[nz])).imag
        return out

    def gradient(x):
        z = _z(x)
        fp = np.zeros(len(z), dtype=complex)
        nz = z != 0
        fp[nz] = 2 * z[nz] * np.log(z[nz]) + z[nz]
        return _grad_from(fp)

    return ReferenceSolution("u2", value, gradient, (0.0, 0.0), "H^{3-eps}")


def _lshape_polar(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.hypot(x[:, 0], x[:, 1])
    th = np.arctan2(x[:, 1], x[:, 0])
    # the L-shape covers theta in [-pi/2, pi]; keep the slit y = 0, x < 0 at +pi
    th = np.where(th < -0.5 * np.pi - 1e-12, th + 2 * np.pi, th)
    return r, th


def _u3():
    a = 2.0 / 3.0
    phase = np.pi / 3

    def value(x):
        r, th = _lshape_polar(x)
        return r ** a * np.sin(a * th + phase)

    def gradient(x):
        r, th = _lshape_polar(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            # f' = a e^{i phase} z^{a-1}
            fp = a * r ** (a - 1) * np.exp(1j * ((a - 1) * th + phase))
        fp = np.where(r == 0, np.nan + 1j * np.nan, fp)
        return _grad_from(fp)

    return ReferenceSolution("u3", value, gradient, (0.0, 0.0), "H^{5/3-eps}")


def harmonic_polynomial(alpha: int, p: int, center=(0.5, 0.5), scale: float = 1.0) -> ReferenceSolution:
    """The basis harmonic polynomial ``q_alpha`` (1-based) centred at ``center``."""
    hb = HarmonicBasis(np.asarray(center, dtype=float), scale, p)

    def value(x):
        return hb.eval(alpha, x)[0]

    def gradient(x):
        return hb.eval(alpha, x)[1]

    return ReferenceSolution(f"q{alpha}", value, gradient, None, "polynomial")


def constant(c: float) -> ReferenceSolution:
    def value(x):
        return np.full(len(np.atleast_2d(x)), float(c))

    def gradient(x):
        return np.zeros((len(np.atleast_2d(x)), 2))

    return ReferenceSolution(f"const:{c}", value, gradient, None, "polynomial")


def reference(u_id: str) -> ReferenceSolution:
    """Look up ``u1``, ``u2``, ``u3`` or ``const:<c>``."""
    if u_id.startswith("const:"):
        return constant(float(u_id.split(":", 1)[1]))
    table = {"u1": _u1, "u2": _u2, "u3": _u3}
    if u_id not in table:
        raise ValueError(f"unknown reference solution {u_id!r}")
    return table[u_id]()


def default_domain(u_id: str) -> str:
    return "lshape" if u_id == "u3" else "unit_square"


# ------------------------------------------------------------------ quadrature

def _graded_collapsed(tris: np.ndarray, exactness: int, levels: int,
                      ratio: float = SINGULAR_RATIO) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed rule on triangles ``(S, A, B)`` graded geometrically toward ``S``.

    In collapsed coordinates ``x = S + u ((1 - v)(A - S) + v (B - S))`` the
    radial variable ``u`` is split at ``ratio^k``; each piece carries a tensor
    Gauss rule, so integrands like ``r^beta g(theta)`` are resolved near ``S``.
    """
    n = max(1, math.ceil((exactness + 2) / 2))
    g, gw = np.polynomial.legendre.leggauss(n)
    g, gw = 0.5 * (g + 1.0), 0.5 * gw
    cuts = np.array([ratio ** k for k in range(levels + 1)] + [0.0])
    lo, hi = cuts[1:], cuts[:-1]
    u = (lo[:, None] + (hi - lo)[:, None] * g[None, :]).ravel()
    wu = ((hi - lo)[:, None] * gw[None, :]).ravel()
    U, V = np.meshgrid(u, g, indexing="ij")
    W = np.outer(wu * u, gw)
    U, V, W = U.ravel(), V.ravel(), W.ravel()
    S = tris[:, 0, :]
    e1 = tris[:, 1, :] - S
    e2 = tris[:, 2, :] - S
    det = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    pts = (S[:, None, :] + (U * (1 - V))[None, :, None] * e1[:, None, :]
           + (U * V)[None, :, None] * e2[:, None, :])
    return pts.reshape(-1, 2), (det[:, None] * W[None, :]).ravel()


def element_quadrature(poly: np.ndarray, exactness: int, singular_point=None,
                       levels: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights integrating over a polygon via its sub-triangulation.

    Triangles with a vertex at ``singular_point`` use the collapsed rule with
    its degenerate vertex there, graded geometrically toward it.
    """
    tris = geo.sub_triangulate(poly)
    rule = triangle_quadrature(exactness)
    if singular_point is None:
        return map_triangles(tris, rule)
    s = np.asarray(singular_point, dtype=float)
    tol = 1e-12 * geo.diameter(poly)
    plain, graded = [], []
    for t in tris:
        hit = np.flatnonzero(np.linalg.norm(t - s, axis=1) <= tol)
        if len(hit):
            graded.append(np.roll(t, -int(hit[0]), axis=0))
        else:
            plain.append(t)
    if not graded:
        return map_triangles(tris, rule)
    x1, w1 = _graded_collapsed(np.array(graded), exactness, levels)
    if not plain:
        return x1, w1
    x0, w0 = map_triangles(np.array(plain), rule)
    return np.concatenate([x0, x1]), np.concatenate([w0, w1])


# ---------------------------------------------------------------------- errors

@dataclass(frozen=True)
class ErrorReport:
    rel_L2: float
    rel_H1: float
    abs_L2: float
    abs_H1: float
    norm_L2: float
    norm_H1: float


def reference_norms(ref: ReferenceSolution, mesh: Mesh, exactness: int = 20,
                    levels: int = 8) -> tuple[float, float]:
    """``(||u||_0, ||u||_1)`` over the meshed domain by composite quadrature."""
    l2 = h1 = 0.0
    for k in range(mesh.n_elements):
        pts, w = element_quadrature(mesh.polygon(k), exactness, ref.singular_point, levels)
        u = ref.value(pts)
        g = ref.gradient(pts)
        l2 += w @ (u * u)
        h1 += w @ (g * g).sum(1)
    return math.sqrt(l2), math.sqrt(l2 + h1)


def compute_errors(solution: DiscreteSolution, ref: ReferenceSolution, mesh: Mesh,
                   extra_exactness: int = 6, norms: tuple[float, float] | None = None,
                   levels: int = 8) -> ErrorReport:
    """Relative errors ``||u - Pi u_n||_0 / ||u||_0`` and ``|u - Pi u_n|_{1,T} / ||u||_1``.

    The broken H1 error is the seminorm; the normalization is the full H1 norm.
    """
    el2 = eh1 = 0.0
    for k in range(mesh.n_elements):
        p = solution.bases[k].p
        pts, w = element_quadrature(mesh.polygon(k), 2 * p + extra_exactness, ref.singular_point, levels)
        uh, guh = solution.evaluate(k, pts)
        du = ref.value(pts) - uh
        dg = ref.gradient(pts) - guh
        el2 += w @ (du * du)
        eh1 += w @ (dg * dg).sum(1)
    if norms is None:
        norms = reference_norms(ref, mesh, levels=levels)
    nl2, nh1 = norms
    el2, eh1 = math.sqrt(el2), math.sqrt(eh1)
    return ErrorReport(el2 / nl2 if nl2 > 0 else el2, eh1 / nh1 if nh1 > 0 else eh1, el2, eh1, nl2, nh1)


def solve_reference(mesh: Mesh, dv: DegreeVector, ref: ReferenceSolution, mode: str = "exact_moments",
                    with_cond: bool = False, stab_weight: str = "edge"):
    """Assemble and solve with ``g = u|_{dOmega}``; returns (system, solution, errors, cond)."""
    system = assemble(mesh, dv, ref.value, mode, ref.singular_point, stab_weight=stab_weight)
    sol = solve(system)
    err = compute_errors(sol, ref, mesh)
    cond = condition_estimate(system) if with_cond else None
    return system, sol, err, cond


# --------------------------------------------------------------------- studies

CSV_COLUMNS = ("kind", "family", "u", "level", "h", "p_max", "dofs", "relL2", "relH1", "cond")


@dataclass
class StudyRow:
    kind: str
    family: str
    u: str
    level: int
    h: float
    p_max: int
    dofs: int
    relL2: float
    relH1: float
    cond: float = float("nan")


@dataclass
class StudyResult:
    rows: list[StudyRow] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS])
        return buf.getvalue()

    def rate(self, x_transform: str, which: str = "relH1", last: int | None = None) -> "RateFit":
        xs = {"log_h": self.column("h"), "p": self.column("p_max"),
              "sqrt_dofs": self.column("dofs")}[x_transform]
        err = self.column(which)
        if last is not None:
            xs, err = xs[-last:], err[-last:]
        return fit_rate(xs, err, x_transform)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    correlation: float
    residual: float  # RMS residual of the linear fit


def fit_rate(x: Sequence[float], err: Sequence[float], x_transform: str = "log_h") -> RateFit:
    """Least-squares line through ``(X, log err)``.

    ``X`` is ``log h`` (slope = algebraic rate), ``p`` or ``sqrt(dofs)``.
    """
    x = np.asarray(x, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 rows to fit a rate")
    if x_transform == "log_h":
        X = np.log(x)
    elif x_transform == "p":
        X = x
    elif x_transform == "sqrt_dofs":
        X = np.sqrt(x)
    else:
        raise ValueError(f"unknown x transform {x_transform!r}")
    Y = np.log(err)
    slope, intercept = np.polyfit(X, Y, 1)
    res = Y - (slope * X + intercept)
    sx, sy = X.std(), Y.std()
    corr = float(np.corrcoef(X, Y)[0, 1]) if sx > 0 and sy > 0 else 0.0
    return RateFit(float(slope), float(intercept), corr, float(np.sqrt(np.mean(res ** 2))))


def make_mesh(family: str, n: int, rng_seed: int = 0, lloyd_iters: int = 20) -> Mesh:
    """Unit-square mesh: ``n x n`` squares or a Voronoi-Lloyd mesh of ``n^2`` cells."""
    if family == "cartesian":
        return generate_cartesian(n)
    if family == "voronoi":
        return generate_voronoi_lloyd(n * n, lloyd_iters=lloyd_iters, rng_seed=rng_seed)
    raise ValueError(f"unknown unit-square family {family!r}")


def _row(kind, family, u, level, mesh, dv, err, cond):
    return StudyRow(kind, family, u, int(level), float(mesh.h), int(dv.p_edge.max()),
                    int(dv.p_edge.sum()), float(err.rel_L2), float(err.rel_H1),
                    float(cond.full) if cond is not None else float("nan"))


def run_h_study(u_id: str, family: str, p: int, levels: Sequence[int] = (4, 8, 16, 32),
                rng_seed: int = 0, lloyd_iters: int = 20, with_cond: bool = False) -> StudyResult:
    ref = reference(u_id)
    out = StudyResult()
    for i, n in enumerate(levels):
        mesh = make_mesh(family, n, rng_seed, lloyd_iters)
        dv = build_degree_vector(mesh, p_uniform=p)
        _, _, err, cond = solve_reference(mesh, dv, ref, with_cond=with_cond)
        out.rows.append(_row("h", family, u_id, i, mesh, dv, err, cond))
    return out


def run_p_study(u_id: str, mesh: Mesh, p_range: Sequence[int], family: str = "custom",
                with_cond: bool = False) -> StudyResult:
    ref = reference(u_id)
    out = StudyResult()
    norms = reference_norms(ref, mesh)
    for i, p in enumerate(p_range):
        dv = build_degree_vector(mesh, p_uniform=p)
        system = assemble(mesh, dv, ref.value, singular_point=ref.singular_point)
        sol = solve(system)
        err = compute_errors(sol, ref, mesh, norms=norms)
        cond = condition_estimate(system) if with_cond else None
        out.rows.append(_row("p", family, u_id, i, mesh, dv, err, cond))
    return out


def run_hp_study(u_id: str, family: str, sigma: float, mu: float, n_range: Sequence[int],
                 with_cond: bool = False, stab_weight: str = "edge") -> StudyResult:
    ref = reference(u_id)
    out = StudyResult()
    for n in n_range:
        mesh, layers = generate_graded_lshape(n, sigma, family)
        dv = build_degree_vector(mesh, layers=layers, mu=mu)
        _, _, err, cond = solve_reference(mesh, dv, ref, with_cond=with_cond, stab_weight=stab_weight)
        out.rows.append(_row("hp", f"graded-{family}", u_id, n, mesh, dv, err, cond))
    return out
