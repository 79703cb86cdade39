"""Condition number growth in p on a 2x2 Cartesian mesh: algebraic versus exponential fit."""
import argparse
from pathlib import Path

from ncvem.analysis import fit_rate, run_p_study
from ncvem.mesh import generate_cartesian


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pmax", type=int, default=10)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(exist_ok=True)
    res = run_p_study("u1", generate_cartesian(2), range(1, args.pmax + 1), "cartesian", with_cond=True)
    (out / "cond_cartesian.csv").write_text(res.to_csv())
    p, cond = res.column("p_max"), res.column("cond")
    for pi, c in zip(p, cond):
        print(f"p={pi:2d}  cond={c:.4e}")
    ll = fit_rate(p, cond, "log_h")
    sl = fit_rate(p, cond, "p")
    print(f"log-log: slope {ll.slope:.3f} corr {ll.correlation:.4f} residual {ll.residual:.4f}")
    print(f"semilog: slope {sl.slope:.3f} corr {sl.correlation:.4f} residual {sl.residual:.4f}")


if __name__ == "__main__":
    main()
