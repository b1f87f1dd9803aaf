"""Pulse count of the six-group kick protocol against gate duration."""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.kicks import scaling_scan, scan_slope, solve_protocol1


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--pmin", type=float, default=0.05, help="shortest T in trap periods")
    p.add_argument("--pmax", type=float, default=0.5, help="longest T in trap periods")
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--momentum", type=float, default=0.01, help="recoil per pulse pair in oscillator units")
    p.add_argument("--out", default="results")
    a = p.parse_args()
    s1 = solve_protocol1()
    print(f"protocol 1: n={s1.n_repeat} gamma={s1.gamma:.4f} tau1={s1.taus[0] / (2 * np.pi):.4f} periods "
          f"T={s1.total_time / (2 * np.pi):.4f} periods")
    rows = scaling_scan(2 * np.pi * np.geomspace(a.pmin, a.pmax, a.points), a.momentum)
    io.write_csv(Path(a.out) / "kick_scan.csv", ["T", "tau1", "tau2", "tau3", "n", "N_p", "error"],
                 [[r.T, *(list(r.taus) or [None] * 3), r.n, r.pulse_pairs, r.error or ""] for r in rows])
    for r in rows:
        print(f"T={r.T:8.4f}  n={r.n}  N_p={r.pulse_pairs}" + (f"  ({r.error})" if r.error else ""))
    print(f"log-log slope {scan_slope(rows):.4f} (N_p ~ T^-3/2: -1.5)")


if __name__ == "__main__":
    main()
