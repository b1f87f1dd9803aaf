"""Anharmonic error estimate against gate duration for several trap strengths."""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.error_model import alpha_over_d, alpha_over_d_for_limit, anharmonic_error
from iongate.kernel import GATE_PHASE


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--ratios", default="10,30,100,300", help="Coulomb length ratios")
    p.add_argument("--target", type=float, default=1e-4, help="tolerated error")
    p.add_argument("--out", default="results")
    a = p.parse_args()
    Ts = np.geomspace(1e-4, 1e1, 11)
    rows = []
    for R in (float(x) for x in a.ratios.split(",")):
        ad = alpha_over_d(R)
        for T in Ts:
            rows.append([R, ad, T, anharmonic_error(GATE_PHASE, T, ad).error])
        print(f"R={R:6.1f}  alpha/d={ad:.3e}  speed limit T={anharmonic_error(GATE_PHASE, 1.0, ad, target=a.target).speed_limit_T:.3e}")
    ad = alpha_over_d_for_limit(GATE_PHASE, 1e-3, a.target)
    print(f"alpha/d = {ad:.3e} puts the limit at T = 1e-3 (E = {anharmonic_error(GATE_PHASE, 1e-3, ad).error:.2e})")
    io.write_csv(Path(a.out) / "speed_limit.csv", ["R", "alpha_over_d", "T", "error"], rows)


if __name__ == "__main__":
    main()
