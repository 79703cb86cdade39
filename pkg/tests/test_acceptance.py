"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import math
import sys

import numpy as np
import pytest
import sympy

from conftest import ACCEPTANCE
from polygons import random_polygons
from ncvem import geometry as geo
from ncvem.analysis import (compute_errors, fit_rate, harmonic_polynomial,
                            run_h_study, run_hp_study, run_p_study)
from ncvem.assembly import assemble, build_degree_vector, solve
from ncvem.basis import map_triangles, triangle_quadrature
from ncvem.local import LocalElementSpace, compute_G, compute_S, projections
from ncvem.mesh import generate_cartesian, generate_voronoi_lloyd


def report(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(autouse=True)
def _mark_errors(request):
    n = request.node.get_closest_marker("criterion")
    yield
    if n is not None and n.args[0] not in ACCEPTANCE:
        ACCEPTANCE[n.args[0]] = (False, "raised before reporting")


@pytest.mark.criterion(1)
def test_patch_harmonic_polynomials_reproduced():
    meshes = {"cartesian 2x2": generate_cartesian(2),
              "voronoi 4": generate_voronoi_lloyd(4, lloyd_iters=2, rng_seed=0)}
    worst = 0.0
    for mesh in meshes.values():
        for p in range(1, 6):
            dv = build_degree_vector(mesh, p_uniform=p)
            for alpha in range(1, 2 * p + 2):
                ref = harmonic_polynomial(alpha, p, center=(0.5, 0.5))
                sol = solve(assemble(mesh, dv, ref.value))
                worst = max(worst, compute_errors(sol, ref, mesh).rel_H1)
    report(1, worst <= 1e-9, f"max relH1 = {worst:.3e} (<= 1e-9)")


def _h_slopes(u, p):
    res = run_h_study(u, "cartesian", p, (4, 8, 16, 32))
    return res.rate("log_h", "relH1", last=3).slope, res.rate("log_h", "relL2", last=3).slope


@pytest.mark.criterion(2)
def test_h_rates_analytic():
    lines, ok = [], True
    for p in range(1, 5):
        s1, s0 = _h_slopes("u1", p)
        good = p - 0.2 <= s1 <= p + 0.3 and p + 0.8 <= s0 <= p + 1.3
        ok &= good
        lines.append(f"p={p}: H1 {s1:.3f} L2 {s0:.3f}")
    report(2, ok, "; ".join(lines))


@pytest.mark.criterion(3)
def test_h_rates_singular_square():
    expected = {1: (1.0, 2.0), 2: (2.0, 3.0), 3: (2.0, 3.0)}
    lines, ok = [], True
    for p, (e1, e0) in expected.items():
        s1, s0 = _h_slopes("u2", p)
        ok &= abs(s1 - e1) <= 0.25 and abs(s0 - e0) <= 0.25
        lines.append(f"p={p}: H1 {s1:.3f} (~{e1:g}) L2 {s0:.3f} (~{e0:g})")
    report(3, ok, "; ".join(lines))


@pytest.mark.criterion(4)
def test_p_exponential_decay():
    res = run_p_study("u1", generate_cartesian(2), range(1, 11), "cartesian")
    err = res.column("relH1")
    fit = res.rate("p", "relH1")
    orders = math.log10(err.max() / err.min())
    report(4, fit.correlation <= -0.99 and orders >= 6,
           f"corr = {fit.correlation:.4f} (<= -0.99), decay = {orders:.2f} orders (>= 6)")


@pytest.mark.criterion(5)
def test_hp_graded_lshape():
    fa = run_hp_study("u3", "a", 0.5, 1.0, range(7)).rate("sqrt_dofs", "relH1")
    fc = run_hp_study("u3", "c", 0.5, 1.0, range(7)).rate("sqrt_dofs", "relH1")
    worse = fc.slope > fa.slope or fc.correlation > fa.correlation
    report(5, fa.correlation <= -0.98 and worse,
           f"(a) slope {fa.slope:.4f} corr {fa.correlation:.4f}; (c) slope {fc.slope:.4f} "
           f"corr {fc.correlation:.4f}")


def _stability_double_sum(p: int) -> sympy.Matrix:
    """``p/h_e (Pi^e phi_r, Pi^e phi_s)`` with ``Pi^e phi_r = sum_z t_z m_z``, all exact."""
    t = sympy.symbols("t")
    h = sympy.Symbol("h", positive=True)
    L = [sympy.legendre(k, t) for k in range(p)]
    # mass matrix of m_z on an edge of length h
    M = sympy.Matrix(p, p, lambda a, b: h / 2 * sympy.integrate(L[a] * L[b], (t, -1, 1)))
    out = sympy.zeros(p, p)
    for r in range(p):
        for s in range(p):
            # coefficients of the projection of the canonical function with moments delta_{r.}
            tr = [(2 * z + 1) * sympy.KroneckerDelta(z, r) for z in range(p)]
            ts = [(2 * z + 1) * sympy.KroneckerDelta(z, s) for z in range(p)]
            out[r, s] = sympy.simplify(p / h * sum(tr[z] * ts[w] * M[z, w]
                                                   for z in range(p) for w in range(p)))
    return out


@pytest.mark.criterion(6)
def test_stability_matrix_diagonal():
    ok = True
    for p in range(1, 11):
        sym = _stability_double_sum(p)
        expected = sympy.diag(*[p * (2 * r + 1) for r in range(p)])
        ok &= sym == expected
        space = LocalElementSpace.from_polygon(generate_cartesian(1).polygon(0), p)
        S = compute_S(space)
        blocks = np.kron(np.eye(4), np.array(expected.tolist(), dtype=float))
        ok &= np.array_equal(S, blocks)
    report(6, ok, "S = diag(p(2r+1)) for p = 1..10, double sum checked symbolically")


@pytest.mark.criterion(7)
def test_projector_identities_random_polygons():
    worst_id = worst_pi = 0.0
    for poly in random_polygons(100, seed=7):
        for p in range(1, 7):
            m = projections(LocalElementSpace.from_polygon(poly, p))
            worst_id = max(worst_id, np.abs(m.PiStar @ m.D - np.eye(2 * p + 1)).max())
            worst_pi = max(worst_pi, np.abs(m.Pi @ m.Pi - m.Pi).max())
    report(7, worst_id <= 1e-10 and worst_pi <= 1e-10,
           f"max |Pi*D - I| = {worst_id:.2e}, max |Pi^2 - Pi| = {worst_pi:.2e} (<= 1e-10)")


@pytest.mark.criterion(8)
def test_condition_growth_algebraic():
    res = run_p_study("u1", generate_cartesian(2), range(1, 11), "cartesian", with_cond=True)
    p, cond = res.column("p_max"), res.column("cond")
    loglog = fit_rate(p, cond, "log_h")
    semilog = fit_rate(p, cond, "p")
    ok = loglog.slope > 0 and loglog.correlation >= 0.95 and loglog.residual <= 0.5 * semilog.residual
    report(8, ok, f"log-log slope {loglog.slope:.3f} corr {loglog.correlation:.4f}, residual "
                  f"{loglog.residual:.3f} vs semilog {semilog.residual:.3f} (ratio <= 0.5)")


@pytest.mark.criterion(9)
def test_boundary_reduced_stiffness_matches_bulk():
    rng = np.random.default_rng(9)
    worst = 0.0
    for poly in random_polygons(50, seed=9):
        p = int(rng.integers(1, 7))
        space = LocalElementSpace.from_polygon(poly, p)
        G = compute_G(space)
        x, w = map_triangles(geo.sub_triangulate(poly), triangle_quadrature(2 * p))
        _, g = space.harmonic.values_and_gradients(x)
        bulk = np.einsum("apd,p,bpd->ab", g, w, g)
        worst = max(worst, np.abs(G[1:] - bulk[1:]).max())
    report(9, worst <= 1e-12, f"max entry difference = {worst:.2e} (<= 1e-12)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
