"""h-convergence on the unit square for u1 and u2, p = 1..4."""
import argparse
from pathlib import Path

from ncvem.analysis import run_h_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="cartesian", choices=["cartesian", "voronoi"])
    ap.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--pmax", type=int, default=4)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(exist_ok=True)
    for u in ("u1", "u2"):
        for p in range(1, args.pmax + 1):
            res = run_h_study(u, args.family, p, args.levels)
            (out / f"h_{u}_{args.family}_p{p}.csv").write_text(res.to_csv())
            h1 = res.rate("log_h", "relH1", last=3)
            l2 = res.rate("log_h", "relL2", last=3)
            print(f"{u} p={p}: H1 slope {h1.slope:.3f}  L2 slope {l2.slope:.3f}")


if __name__ == "__main__":
    main()
