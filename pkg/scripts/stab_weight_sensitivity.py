"""hp study for u3 with the stabilization weighted by edge degrees or by element bulk degrees."""
import argparse

from ncvem.analysis import run_hp_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sigma", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=1.0)
    ap.add_argument("--nmax", type=int, default=6)
    args = ap.parse_args()
    for fam in "abc":
        runs = {w: run_hp_study("u3", fam, args.sigma, args.mu, range(args.nmax + 1), stab_weight=w)
                for w in ("edge", "bulk")}
        e, b = runs["edge"].column("relH1"), runs["bulk"].column("relH1")
        fe, fb = runs["edge"].rate("sqrt_dofs", "relH1"), runs["bulk"].rate("sqrt_dofs", "relH1")
        print(f"family {fam}: max relative change {abs(e / b - 1).max():.3e}; "
              f"slope edge {fe.slope:.4f} bulk {fb.slope:.4f}")


if __name__ == "__main__":
    main()
