"""Dissipative decay exponent kappa of the optimal gate against duration."""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.chain import common_chain
from iongate.kicks import loglog_slope
from iongate.optimizer import kappa_scan
from iongate.profiles import DissipationModel


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--pmin", type=float, default=0.05, help="shortest T in trap periods")
    p.add_argument("--pmax", type=float, default=0.5, help="longest T in trap periods")
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--nbar", type=float, default=0.0)
    p.add_argument("--out", default="results")
    a = p.parse_args()
    Ts = 2 * np.pi * np.geomspace(a.pmin, a.pmax, a.points)
    rows = kappa_scan(Ts, common_chain(2), DissipationModel.uniform(2, a.gamma, a.nbar))
    io.write_csv(Path(a.out) / "kappa_scan.csv", ["T", "kappa", "l1"], [[r.T, r.kappa, r.l1] for r in rows])
    ak = loglog_slope(Ts, [r.kappa for r in rows])
    al = loglog_slope(Ts, [r.l1 for r in rows])
    print(f"kappa ~ T^{ak:.3f}; ||f||_1 ~ T^{al:.3f} predicts kappa ~ T^{2 * al + 1:.3f}")


if __name__ == "__main__":
    main()
