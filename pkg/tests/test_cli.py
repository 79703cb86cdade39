import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncvem import cli
from ncvem.assembly import SolverError
from ncvem.cli import RunConfig, main
from ncvem.mesh import Mesh, build_mesh


def test_mesh_gen_cartesian(tmp_path):
    out = tmp_path / "m.json"
    assert main(["mesh-gen", "--family", "cartesian", "--n", "4", "--out", str(out)]) == 0
    m = Mesh.load(out)
    assert m.n_elements == 16


@pytest.mark.parametrize("family", ["voronoi", "graded-a", "graded-b", "graded-c"])
def test_mesh_gen_families(tmp_path, family):
    out = tmp_path / "m.json"
    assert main(["mesh-gen", "--family", family, "--n", "3", "--out", str(out)]) == 0
    Mesh.load(out).check()


def test_solve_constant(tmp_path):
    mesh = tmp_path / "m.json"
    sol = tmp_path / "s.json"
    main(["mesh-gen", "--family", "cartesian", "--n", "4", "--out", str(mesh)])
    assert main(["solve", "--mesh", str(mesh), "--p", "2", "--g", "const:1", "--out", str(sol)]) == 0
    data = json.loads(sol.read_text())
    dofs = np.array(data["dofs"])
    assert np.allclose(dofs[0::2], 1.0) and np.allclose(dofs[1::2], 0.0, atol=1e-12)
    coeffs = np.array(data["coefficients"])
    assert np.allclose(coeffs[:, 0], 1.0) and np.allclose(coeffs[:, 1:], 0.0, atol=1e-12)


def test_solve_hp_on_graded_mesh(tmp_path):
    mesh = tmp_path / "m.json"
    sol = tmp_path / "s.json"
    main(["mesh-gen", "--family", "graded-a", "--n", "2", "--out", str(mesh)])
    assert main(["solve", "--mesh", str(mesh), "--hp", "--mu", "1", "--g", "u3", "--out", str(sol)]) == 0
    assert max(json.loads(sol.read_text())["p_elem"]) == 3


def test_solve_needs_degree(tmp_path, capsys):
    mesh = tmp_path / "m.json"
    main(["mesh-gen", "--family", "cartesian", "--n", "2", "--out", str(mesh)])
    assert main(["solve", "--mesh", str(mesh), "--g", "u1"]) == 1
    assert main(["solve", "--mesh", str(mesh), "--p", "1", "--g", "u9"]) == 1


def test_study_p_rows(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["study", "--kind", "p", "--u", "u1", "--family", "cartesian", "--n", "2",
                 "--pmax", "10", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "kind,family,u,level,h,p_max,dofs,relL2,relH1,cond"
    assert len(lines) == 11


def test_study_is_byte_identical(tmp_path):
    args = ["study", "--kind", "h", "--u", "u2", "--family", "voronoi", "--p", "2", "--levels", "2",
            "--seed", "5", "--lloyd", "3"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_study_hp_rows(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["study", "--kind", "hp", "--u", "u3", "--family", "graded-b", "--sigma", "0.5",
                 "--mu", "1", "--levels", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4


def test_study_bad_family():
    assert main(["study", "--kind", "hp", "--u", "u3", "--family", "cartesian"]) == 1


def test_validate_pass_and_fail(tmp_path, capsys):
    good = tmp_path / "g.json"
    main(["mesh-gen", "--family", "cartesian", "--n", "2", "--out", str(good)])
    assert main(["validate", str(good)]) == 0
    assert "D1: PASS" in capsys.readouterr().out
    needle = tmp_path / "n.json"
    build_mesh([np.array([(0, 0), (1, 0), (1, 0.01), (0, 0.01)], float)]).save(needle)
    assert main(["validate", str(needle)]) == 1
    assert "D1: FAIL" in capsys.readouterr().out


def test_validate_quasi_uniform_on_graded(tmp_path, capsys):
    mesh = tmp_path / "g.json"
    main(["mesh-gen", "--family", "graded-a", "--n", "6", "--sigma", "0.5", "--out", str(mesh)])
    assert main(["validate", str(mesh), "--check-quasi-uniform"]) == 1
    assert "D4: FAIL" in capsys.readouterr().out


def test_malformed_json_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [[0, 0],\n  [1, 0]')
    assert main(["validate", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["mesh-gen", "--family", "cartesian", "--bogus", "--out", "x"]) == 1
    assert main([]) == 1


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    mesh = tmp_path / "m.json"
    main(["mesh-gen", "--family", "cartesian", "--n", "2", "--out", str(mesh)])

    def boom(system):
        raise SolverError("not positive definite")

    monkeypatch.setattr(cli, "solve", boom)
    assert main(["solve", "--mesh", str(mesh), "--p", "2", "--g", "u1"]) == 2


def test_tolerance_override(tmp_path, monkeypatch):
    mesh = tmp_path / "m.json"
    main(["mesh-gen", "--family", "cartesian", "--n", "3", "--out", str(mesh)])
    assert main(["solve", "--mesh", str(mesh), "--p", "2", "--g", "u1", "--out", str(tmp_path / "s"),
                 "--tolerance", "-1"]) == 2


def test_run_config_from_arguments():
    ns = cli.build_parser().parse_args(["study", "--kind", "p", "--u", "u1", "--family", "cartesian"])
    cfg = RunConfig.from_namespace(ns)
    assert cfg.command == "study" and cfg.pmax == 10
    assert RunConfig.from_json(cfg.to_json()) == cfg


@settings(max_examples=50)
@given(st.builds(RunConfig,
                 command=st.sampled_from(["mesh-gen", "solve", "study", "validate"]),
                 family=st.none() | st.sampled_from(["cartesian", "voronoi", "graded-a"]),
                 n=st.none() | st.integers(0, 64),
                 sigma=st.none() | st.floats(0.01, 0.99),
                 seed=st.integers(0, 2 ** 31),
                 p=st.none() | st.integers(1, 12),
                 hp=st.booleans(),
                 tolerance=st.none() | st.floats(1e-16, 1.0),
                 out=st.none() | st.text(min_size=1, max_size=20)))
def test_run_config_round_trip(cfg):
    assert RunConfig.from_json(cfg.to_json()) == cfg
