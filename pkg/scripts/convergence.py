"""Grid convergence of the discrete operator against the quadrature reference."""
import argparse

import numpy as np

from fracflow.operator import convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--s", type=float, default=0.5)
    ap.add_argument("--p", type=float, nargs="+", default=[1.2, 1.5, 1.8, 2.0])
    ap.add_argument("--M", type=int, nargs="+", default=[128, 256, 512])
    ap.add_argument("--x0", type=float, default=0.0)
    args = ap.parse_args()
    print("p,M,rel_error,order")
    for p in args.p:
        cs = convergence_study(p, args.s, tuple(args.M), -8.0, 8.0, args.x0)
        for M, e in zip(args.M, cs.rel_errors):
            print(f"{p},{M},{e:.6e},{cs.order:.4f}")
    # at a critical point of u the dropped self-cell term scales like h^(2(p-1)-ps)
    for p in args.p:
        if p < 2:
            print(f"# p={p}: self-cell exponent {2 * (p - 1) - p * args.s:.3f}", flush=True)


if __name__ == "__main__":
    main()
