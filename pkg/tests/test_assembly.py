import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ncvem.assembly import (ConditionReport, DegreeVector, SolverError, assemble, build_degree_vector,
                            condition_estimate, dof_map, graded_degrees, impose_dirichlet, solve)
from ncvem.analysis import element_quadrature
from ncvem.assembly import _edge_moments
from ncvem.basis import HarmonicBasis, edge_quadrature
from ncvem.mesh import (LayerDecomposition, generate_cartesian, generate_graded_lshape,
                        generate_voronoi_lloyd, nonconvex_demo_mesh)


def ones(x):
    return np.ones(len(x))


def test_uniform_degrees():
    dv = build_degree_vector(generate_cartesian(2), p_uniform=3)
    assert np.all(dv.p_edge == 3) and dv.is_uniform


def test_graded_degrees_mu_one():
    assert list(graded_degrees(LayerDecomposition(np.array([0, 1, 2])), 1.0)) == [1, 2, 3]
    assert list(graded_degrees(LayerDecomposition(np.array([0, 1, 2, 3])), 0.4)) == [1, 1, 2, 2]


def test_maximum_rule():
    mesh, layers = generate_graded_lshape(2, 0.5, "c")
    dv = build_degree_vector(mesh, layers=layers, mu=1.0)
    for e, adj in enumerate(mesh.edge_elements):
        assert dv.p_edge[e] == max(dv.p_elem[k] for k in adj)
    # the interface between layers 1 and 2 carries degree 3
    shared = [e for e, adj in enumerate(mesh.edge_elements)
              if sorted(layers.layer_of_element[list(adj)]) == [1, 2]]
    assert shared and all(dv.p_edge[e] == 3 for e in shared)


def test_degree_vector_arguments():
    with pytest.raises(ValueError):
        build_degree_vector(generate_cartesian(1))
    with pytest.raises(ValueError):
        build_degree_vector(generate_cartesian(1), p_uniform=0)


def test_dirichlet_constant_and_legendre():
    mesh = generate_cartesian(2)
    dv = build_degree_vector(mesh, p_uniform=3)
    dm = dof_map(mesh, dv)
    g = impose_dirichlet(mesh, dv, ones)
    for e in np.flatnonzero(mesh.boundary_flags):
        assert np.allclose(g[dm.offsets[e]:dm.offsets[e + 1]], [1, 0, 0], atol=1e-14)
    e = int(np.flatnonzero(mesh.boundary_flags)[0])
    a, b = mesh.vertices[mesh.edges[e]]

    def m1(x):
        return 2 * ((x - a) @ (b - a)) / ((b - a) @ (b - a)) - 1

    d = impose_dirichlet(mesh, dv, m1)[dm.offsets[e]:dm.offsets[e + 1]]
    # scaled moments (1/h) int m_1 m_r = delta_{1r} / 3; Legendre coefficients (2r+1) d_r
    assert np.allclose(d, [0, 1 / 3, 0], atol=1e-14)
    assert np.allclose(d * (2 * np.arange(3) + 1), [0, 1, 0], atol=1e-14)


def test_dirichlet_modes_agree_spectrally():
    mesh = generate_cartesian(1)

    def g(x):
        return np.exp(x[:, 0]) * np.sin(x[:, 1] + 0.3)

    diffs = []
    for p in range(1, 11):
        dv = build_degree_vector(mesh, p_uniform=p)
        a = impose_dirichlet(mesh, dv, g, "exact_moments")
        b = impose_dirichlet(mesh, dv, g, "gauss_lobatto_interp")
        diffs.append(np.abs(a - b).max())
    diffs = np.array(diffs)
    assert diffs[-1] < 1e-12
    # a power law p^-k has successive ratios tending to 1; here they stay far below
    ratios = diffs[1:8] / diffs[:7]
    assert ratios.max() < 0.1


def test_single_square_constant():
    mesh = generate_cartesian(1)
    dv = build_degree_vector(mesh, p_uniform=1)
    sol = solve(assemble(mesh, dv, ones))
    assert np.allclose(sol.dofs, 1.0)
    v, g = sol.evaluate(0, np.array([[0.3, 0.6]]))
    assert v[0] == pytest.approx(1.0) and np.allclose(g, 0.0)


def test_interior_block_size():
    mesh = generate_cartesian(2)
    system = assemble(mesh, build_degree_vector(mesh, p_uniform=1))
    assert system.A_interior.shape == (4, 4)
    system3 = assemble(mesh, build_degree_vector(mesh, p_uniform=3))
    assert system3.A_interior.shape == (12, 12)


@pytest.mark.parametrize("p", [1, 3, 5])
def test_global_consistency(p):
    mesh = generate_voronoi_lloyd(9, lloyd_iters=5, rng_seed=1)
    dv = build_degree_vector(mesh, p_uniform=p)
    system = assemble(mesh, dv)
    hb = HarmonicBasis(np.array([0.4, 0.6]), 1.0, p)
    for alpha in (2, 2 * p + 1):
        d = impose_dirichlet_all(mesh, dv, lambda x: hb.eval(alpha, x)[0])
        # sum_K (grad q, grad q)_K = (grad q, grad q)_Omega, by boundary-free bulk quadrature
        exact = 0.0
        for k in range(mesh.n_elements):
            x, w = element_quadrature(mesh.polygon(k), 2 * p)
            g = hb.eval(alpha, x)[1]
            exact += w @ (g * g).sum(1)
        assert d @ (system.A @ d) == pytest.approx(exact, rel=1e-10)


def impose_dirichlet_all(mesh, dv, f):
    """DOFs of f on every edge, interior ones included."""
    dm = dof_map(mesh, dv)
    out = np.zeros(dm.ndofs)
    for e, (i, j) in enumerate(mesh.edges):
        p = int(dv.p_edge[e])
        out[dm.offsets[e]:dm.offsets[e + 1]] = _edge_moments(
            f, mesh.vertices[i], mesh.vertices[j], p, edge_quadrature(2 * p + 6))
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.floats(-5, 5), st.sampled_from(["cartesian", "voronoi", "demo"]))
def test_constant_reproduced_everywhere(p, c, kind):
    mesh = {"cartesian": generate_cartesian(3), "voronoi": generate_voronoi_lloyd(7, lloyd_iters=3),
            "demo": nonconvex_demo_mesh()}[kind]
    sol = solve(assemble(mesh, build_degree_vector(mesh, p_uniform=p), lambda x: np.full(len(x), c)))
    for k in range(mesh.n_elements):
        assert sol.coefficients[k][0] == pytest.approx(c, abs=1e-10)
        assert np.allclose(sol.coefficients[k][1:], 0.0, atol=1e-10)
    assert sol.residual <= 1e-10


def test_assembled_matrix_symmetric_and_spd_interior():
    mesh = nonconvex_demo_mesh()
    system = assemble(mesh, build_degree_vector(mesh, p_uniform=4))
    A = system.A
    assert abs(A - A.T).max() == 0.0
    assert np.linalg.eigvalsh(system.A_interior.toarray()).min() > 0


def test_threaded_assembly_is_identical(monkeypatch):
    mesh = generate_voronoi_lloyd(16, lloyd_iters=3, rng_seed=5)
    dv = build_degree_vector(mesh, p_uniform=3)
    a = assemble(mesh, dv).A
    monkeypatch.setenv("NCVEM_THREADS", "4")
    b = assemble(mesh, dv).A
    assert (a != b).nnz == 0


def test_sparse_path_matches_dense(monkeypatch):
    import ncvem.assembly as asm
    mesh = generate_cartesian(4)
    dv = build_degree_vector(mesh, p_uniform=2)

    def g(x):
        return np.exp(x[:, 0]) * np.sin(x[:, 1])

    dense = solve(assemble(mesh, dv, g))
    monkeypatch.setattr(asm, "DENSE_LIMIT", 1)
    sparse = solve(assemble(mesh, dv, g))
    assert np.allclose(dense.dofs, sparse.dofs, atol=1e-12)


def test_broken_degree_data_raises():
    mesh = generate_cartesian(2)
    dv = build_degree_vector(mesh, p_uniform=2)
    system = assemble(mesh, dv)
    broken = type(system)(system.mesh, system.degrees, system.dofs, -system.A, system.boundary,
                          system.boundary_values, system.rhs, system.spaces, system.PiStars)
    with pytest.raises(SolverError):
        solve(broken)


def test_condition_estimates():
    assert condition_estimate(sp.identity(5, format="csr")).full == pytest.approx(1.0)
    assert condition_estimate(sp.diags([1.0, 10.0]).tocsr()).full == pytest.approx(10.0)
    mesh = generate_cartesian(2)
    rep = condition_estimate(assemble(mesh, build_degree_vector(mesh, p_uniform=2)))
    assert isinstance(rep, ConditionReport) and rep.full > rep.interior > 1


def test_condition_sparse_path(monkeypatch):
    import ncvem.assembly as asm
    mesh = generate_cartesian(3)
    system = assemble(mesh, build_degree_vector(mesh, p_uniform=2))
    dense = condition_estimate(system)
    monkeypatch.setattr(asm, "DENSE_LIMIT", 1)
    sparse = condition_estimate(system)
    assert sparse.method != dense.method
    assert sparse.full == pytest.approx(dense.full, rel=1e-6)
    assert sparse.interior == pytest.approx(dense.interior, rel=1e-6)


def test_degree_vector_type():
    dv = DegreeVector(np.array([1, 2]), np.array([2, 2, 2]))
    assert not dv.is_uniform
