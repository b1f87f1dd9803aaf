"""Force intensity ||f||_1 of the optimal two-ion gate against gate duration."""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.chain import common_chain
from iongate.kicks import loglog_slope
from iongate.optimizer import intensity_scan


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--tmin", type=float, default=0.5, help="shortest omega*T")
    p.add_argument("--tmax", type=float, default=3.0, help="longest omega*T")
    p.add_argument("--points", type=int, default=15)
    p.add_argument("--nm", type=int, default=4, help="harmonic count")
    p.add_argument("--objective", default="norm")
    p.add_argument("--out", default="results")
    a = p.parse_args()
    Ts = np.geomspace(a.tmin, a.tmax, a.points)
    rows = intensity_scan(Ts, common_chain(2), a.nm, a.objective)
    io.write_csv(Path(a.out) / "intensity.csv", ["T", "l1", "l2", "mu"], [[r.T, r.l1, r.l2, r.mu] for r in rows])
    for r in rows:
        print(f"T={r.T:8.4f}  ||f||_1={r.l1:.5g}")
    print(f"log-log slope {loglog_slope(Ts, [r.l1 for r in rows]):.4f} (T^-3/2 law: -1.5)")


if __name__ == "__main__":
    main()
