"""p-convergence for u1 on a 2x2 Cartesian mesh and a 4-cell Voronoi mesh."""
import argparse
from pathlib import Path

import numpy as np

from ncvem.analysis import run_p_study
from ncvem.mesh import generate_cartesian, generate_voronoi_lloyd


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pmax", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(exist_ok=True)
    meshes = {"cartesian": generate_cartesian(2),
              "voronoi": generate_voronoi_lloyd(4, lloyd_iters=2, rng_seed=args.seed)}
    for name, mesh in meshes.items():
        res = run_p_study("u1", mesh, range(1, args.pmax + 1), name)
        (out / f"p_u1_{name}.csv").write_text(res.to_csv())
        fit = res.rate("p", "relH1")
        err = res.column("relH1")
        print(f"{name}: log err vs p slope {fit.slope:.3f} corr {fit.correlation:.4f}, "
              f"{np.log10(err.max() / err.min()):.1f} orders")


if __name__ == "__main__":
    main()
