"""Command-line front end: ``ncvem {mesh-gen, solve, study, validate}``.

Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical failure.
The thread count used during assembly is read from ``NCVEM_THREADS``.
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass, field, asdict, fields
import json
import logging
from pathlib import Path
import sys

import numpy as np

from .analysis import (make_mesh, reference, run_h_study, run_hp_study, run_p_study)
from .assembly import SolverError, assemble, build_degree_vector, solve
from .local import AssemblyError
from .mesh import (Mesh, MeshError, generate_graded_lshape, generate_voronoi_lloyd, generate_cartesian,
                   layers_from_corner, validate_regularity)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
DEFAULT_RESIDUAL_TOL = 1e-10


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Every option of a CLI invocation; round-trips through JSON."""

    command: str
    family: str | None = None
    n: int | None = None
    sigma: float | None = None
    seed: int = 0
    lloyd: int = 20
    mesh: str | None = None
    p: int | None = None
    hp: bool = False
    mu: float | None = None
    g: str | None = None
    kind: str | None = None
    u: str | None = None
    pmax: int | None = None
    levels: int | None = None
    out: str | None = None
    tolerance: float | None = None
    rho1: float = 0.1
    rho2: float = 0.05
    Lambda: int = 12
    rho3: float = 10.0
    check_quasi_uniform: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    @classmethod
    def from_namespace(cls, ns: argparse.Namespace) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in vars(ns).items() if k in names})


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ncvem", description="Non-conforming harmonic VEM for the Laplace problem.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("mesh-gen", help="generate a mesh file")
    m.add_argument("--family", required=True,
                   choices=["cartesian", "voronoi", "graded-a", "graded-b", "graded-c"])
    m.add_argument("--n", type=int, default=4, help="cells per side, seeds = n^2, or graded layers")
    m.add_argument("--sigma", type=float, default=0.5)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--lloyd", type=int, default=20)
    m.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="solve the Dirichlet problem on a mesh")
    s.add_argument("--mesh", required=True)
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--hp", action="store_true", help="layer-graded degrees from the corner at the origin")
    s.add_argument("--mu", type=float, default=1.0)
    s.add_argument("--g", required=True, help="u1, u2, u3 or const:<c>")
    s.add_argument("--out", default=None)
    s.add_argument("--tolerance", type=float, default=None, help="relative residual tolerance")

    st = sub.add_parser("study", help="run a convergence study and write CSV")
    st.add_argument("--kind", required=True, choices=["h", "p", "hp"])
    st.add_argument("--u", required=True, choices=["u1", "u2", "u3"])
    st.add_argument("--family", required=True)
    st.add_argument("--p", type=int, default=1)
    st.add_argument("--pmax", type=int, default=10)
    st.add_argument("--n", type=int, default=2, help="mesh size for p studies")
    st.add_argument("--sigma", type=float, default=0.5)
    st.add_argument("--mu", type=float, default=1.0)
    st.add_argument("--levels", type=int, default=None,
                    help="rows: h -> n = 4, 8, ...; hp -> n = 0 .. levels-1")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--lloyd", type=int, default=20)
    st.add_argument("--out", default=None)

    v = sub.add_parser("validate", help="check mesh regularity assumptions")
    v.add_argument("mesh")
    v.add_argument("--rho1", type=float, default=0.1)
    v.add_argument("--rho2", type=float, default=0.05)
    v.add_argument("--Lambda", type=int, default=12)
    v.add_argument("--rho3", type=float, default=10.0)
    v.add_argument("--check-quasi-uniform", action="store_true")
    return ap


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_mesh(path: str) -> Mesh:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read mesh file: {exc}") from exc
    try:
        return Mesh.from_json(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except MeshError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_mesh_gen(cfg: RunConfig) -> int:
    fam = cfg.family
    if fam == "cartesian":
        mesh = generate_cartesian(cfg.n)
    elif fam == "voronoi":
        mesh = generate_voronoi_lloyd(cfg.n * cfg.n, lloyd_iters=cfg.lloyd, rng_seed=cfg.seed)
    else:
        mesh, _ = generate_graded_lshape(cfg.n, cfg.sigma, fam)
    _write(mesh.to_json(), cfg.out)
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg.mesh)
    try:
        ref = reference(cfg.g)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.hp:
        dv = build_degree_vector(mesh, layers=layers_from_corner(mesh), mu=cfg.mu)
    else:
        if cfg.p is None:
            raise UsageError("solve needs --p or --hp")
        dv = build_degree_vector(mesh, p_uniform=cfg.p)
    system = assemble(mesh, dv, ref.value, singular_point=ref.singular_point)
    sol = solve(system)
    tol = DEFAULT_RESIDUAL_TOL if cfg.tolerance is None else cfg.tolerance
    if sol.residual > tol:
        raise SolverError(f"relative residual {sol.residual:.3e} exceeds tolerance {tol:.3e}")
    payload = {
        "p_elem": dv.p_elem.tolist(),
        "p_edge": dv.p_edge.tolist(),
        "dofs": sol.dofs.tolist(),
        "coefficients": [np.asarray(c).tolist() for c in sol.coefficients],
        "centers": [b.center.tolist() for b in sol.bases],
        "scales": [float(b.h) for b in sol.bases],
        "residual": sol.residual,
    }
    _write(json.dumps(payload), cfg.out)
    return EXIT_OK


def cmd_study(cfg: RunConfig) -> int:
    if cfg.kind == "h":
        if cfg.family not in ("cartesian", "voronoi"):
            raise UsageError("h studies use --family cartesian or voronoi")
        levels = [4 * 2 ** i for i in range(cfg.levels or 4)]
        res = run_h_study(cfg.u, cfg.family, cfg.p, levels, rng_seed=cfg.seed, lloyd_iters=cfg.lloyd)
    elif cfg.kind == "p":
        if cfg.family not in ("cartesian", "voronoi"):
            raise UsageError("p studies use --family cartesian or voronoi")
        mesh = make_mesh(cfg.family, cfg.n, cfg.seed, cfg.lloyd)
        res = run_p_study(cfg.u, mesh, range(1, cfg.pmax + 1), cfg.family, with_cond=True)
    else:
        fam = cfg.family.removeprefix("graded-")
        if fam not in ("a", "b", "c"):
            raise UsageError("hp studies use --family graded-a, graded-b or graded-c")
        res = run_hp_study(cfg.u, fam, cfg.sigma, cfg.mu, range(cfg.levels or 7))
    _write(res.to_csv(), cfg.out)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    mesh = _load_mesh(cfg.mesh)
    rep = validate_regularity(mesh, cfg.rho1, cfg.rho2, cfg.Lambda, cfg.check_quasi_uniform, cfg.rho3)
    print(rep.format())
    print("all checks passed" if rep.passed else "some checks failed")
    return EXIT_OK if rep.passed else EXIT_USAGE


COMMANDS = {"mesh-gen": cmd_mesh_gen, "solve": cmd_solve, "study": cmd_study, "validate": cmd_validate}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        ns = build_parser().parse_args(argv)
        cfg = RunConfig.from_namespace(ns)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, AssemblyError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
