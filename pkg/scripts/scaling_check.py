"""Discrete scaling map: replay a run for k*u0 on the rescaled step schedule."""
import argparse

import numpy as np

from fracflow.config import InitialDatum, ProblemSpec
from fracflow.grid import build_domain
from fracflow.kernel import KernelSpec
from fracflow.stepper import SteppingPolicy, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=1.5)
    ap.add_argument("--M", type=int, default=256)
    ap.add_argument("--k", type=float, nargs="+", default=[0.5, 2.0, 4.0])
    args = ap.parse_args()
    base = ProblemSpec(build_domain(-1, 1, args.M), KernelSpec(args.p, 0.5), u0=InitialDatum("bump", width=0.6),
                       T=50.0, stepping=SteppingPolicy(dt_init=1e-3))
    ref = simulate(base)
    for k in args.k:
        f = k ** (2 - args.p)
        tr = simulate(base.scaled(k), dt_schedule=[d * f for d in ref.dt_history])
        err = np.max(np.abs(tr.values - k * ref.values)) / (k * ref.sup_abs[0])
        print(f"k={k} rel_state_error={err:.3e} T_ratio={tr.extinction_time / ref.extinction_time:.12f} "
              f"expected={f:.12f}")


if __name__ == "__main__":
    main()
