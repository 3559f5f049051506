"""Sensitivity of the bridge embedding to the band width and the grid step.

For each (dt, epsilon) pair this reports the fraction of runs allocated
before the cap, the share of degenerate starts, the KS distance of the
window at u = 1/2 from N(0, 1/4), and the median |endpoint|.  No rate in
epsilon is asserted; the table is descriptive.

Run with ``python benchmarks/epsilon_sensitivity.py [replicates]``.
"""
import math
import sys

import numpy as np

from slepian_lab import localtime, stats
from slepian_lab.paths import SeedSpec


def main(replicates=20_000):
    print(f"{'dt':>8s} {'eps/sqrt(dt)':>12s} {'found':>7s} {'degen':>7s} {'KS D(u=.5)':>11s} "
          f"{'p':>8s} {'med|end|':>9s}")
    for k, log_dt in enumerate((-10, -12)):
        dt = 2.0**log_dt
        for j, factor in enumerate((16, 8, 4)):
            eps = factor * math.sqrt(dt)
            r = localtime.sample_embeddings(SeedSpec(77, k, (j,)), replicates, dt, eps)
            ok = ~np.isnan(r["t_alloc"])
            mid = r["at_u"][ok, int(np.argmin(np.abs(r["u"] - 0.5)))]
            rep = stats.ks_one_sample(mid, stats.normal_cdf(0.25))
            med = float(np.median(np.abs(r["endpoint"][ok])))
            print(f"2^{log_dt:<5d} {factor:12d} {ok.mean():7.4f} {r['degenerate'].mean():7.4f} "
                  f"{rep.statistic:11.4f} {rep.p_value:8.3g} {med:9.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20_000)
