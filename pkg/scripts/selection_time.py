"""Quantum-selection time against eps.

For each eps: the slowest relaxation time T2 of the statistical matrix, its
ratio to tau/(2 eps^2), and the simulated mean collapse time of (0.5, 0.5).

    python scripts/selection_time.py --out selection.csv
"""

import argparse
import csv
import sys

from collapse_sim import (
    FluctuationParams,
    RunConfig,
    asymptotic_selection_time,
    build_stat_matrix,
    eigen_spectrum,
    run_ensemble,
)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epsilons", default="0.25,0.2,0.1,0.05,0.04,0.02,0.01")
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--trajectories", type=int, default=500)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epsilon", "T2", "tau_over_2eps2", "ratio", "mean_collapse_time"])
    for eps in (float(e) for e in args.epsilons.split(",")):
        T2 = eigen_spectrum(build_stat_matrix(eps), args.tau).selection_time
        asym = asymptotic_selection_time(eps, args.tau)
        stats = run_ensemble(RunConfig(weights=(0.5, 0.5), params=FluctuationParams(eps, args.tau, seed=args.seed),
                                       n_trajectories=args.trajectories))
        w.writerow([repr(eps), repr(T2), repr(asym), repr(T2 / asym), repr(stats.mean_collapse_time * args.tau)])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
