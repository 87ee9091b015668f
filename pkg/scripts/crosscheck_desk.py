"""Hill/dual cross-validation of the two-frequency test potential at one approximant."""
import argparse
import time

from isotorus import dual, hill
from isotorus import frequency as fq
from isotorus.potential import pushforward_periodic, random_potential


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=int, default=10)
    ap.add_argument("--R", type=int, default=11)
    ap.add_argument("--n-max", type=int, default=400)
    ap.add_argument("--epsilon", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    freq = fq.Frequency.parse(["(sqrt(5)-1)/2", "sqrt(2)-1"])
    lat = fq.build_lattice(fq.rational_approximation(freq, args.r))
    lp = pushforward_periodic(random_potential(freq, args.epsilon, seed=args.seed), lat)
    t0 = time.perf_counter()
    spec = hill.spectrum(lp, args.n_max)
    t1 = time.perf_counter()
    cc = dual.crosscheck_hill(lp, args.n_max, R=args.R, spec=spec)
    t2 = time.perf_counter()
    print(f"T = {lat.T}, open gaps {len(spec.gaps)}, hill {t1 - t0:.1f}s, dual {t2 - t1:.1f}s")
    for m in cc.matched:
        print(f"  n {m['n']:4d}  m {str(tuple(m['m'])):10s} width {m['hill'][1] - m['hill'][0]:.3e}"
              f"  discrepancy {m['discrepancy']:.1e}")
    print(f"passed {cc.passed}, max discrepancy {cc.max_discrepancy:.2e}")


if __name__ == "__main__":
    main()
