"""Near-extinction decay of the local mass for a bump datum."""
import argparse

from fracflow.config import InitialDatum, ProblemSpec
from fracflow.grid import build_domain
from fracflow.harnack import verify_decay
from fracflow.kernel import KernelSpec
from fracflow.stepper import SteppingPolicy, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, nargs="+", default=[1.5, 1.8])
    ap.add_argument("--s", type=float, default=0.5)
    ap.add_argument("--M", type=int, default=256)
    ap.add_argument("--rho", type=float, default=0.25)
    args = ap.parse_args()
    for p in args.p:
        tol = 1e-4 ** (1 / (2 - p))
        pr = ProblemSpec(build_domain(-1, 1, args.M), KernelSpec(p, args.s), u0=InitialDatum("bump", width=0.6),
                         T=50.0, stepping=SteppingPolicy(dt_init=1e-3, extinction_tol=tol))
        tr = simulate(pr)
        rep = verify_decay(tr, 0.0, args.rho)
        print(f"p={p} T_num={tr.extinction_time:.6f} slope={rep.slope_mass:.4f} "
              f"expected={rep.expected_slope:.4f} r2={rep.r2_mass:.6f} points={rep.n_points}")


if __name__ == "__main__":
    main()
