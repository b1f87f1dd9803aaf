"""Closure defect and phase error of the optimal gate in the full Coulomb potential."""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.chain import TrapSetup, common_chain
from iongate.kicks import loglog_slope
from iongate.optimizer import optimal_force
from iongate.oracle import integrate_branch, integrate_full_coulomb


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--periods", type=float, default=1.5, help="gate duration in trap periods")
    p.add_argument("--ratios", default="30,100", help="Coulomb length ratios")
    p.add_argument("--amplitudes", default="1,2,4,8")
    p.add_argument("--out", default="results")
    a = p.parse_args()
    modes = common_chain(2)
    gate = optimal_force(a.periods * 2 * np.pi, modes).profile
    branch = [1.0, -1.0]
    _, harmonic = integrate_branch(gate, modes, branch)
    lams = np.array([float(x) for x in a.amplitudes.split(",")])
    rows = []
    for R in (float(x) for x in a.ratios.split(",")):
        setup = TrapSetup(2, coulomb_length_ratio=R)
        defects, dphase = [], []
        for lam in lams:
            run = integrate_full_coulomb(gate.scaled(lam), setup, branch)
            defects.append(np.hypot(run.position_defect, run.momentum_defect))
            dphase.append(abs(run.phase - lam**2 * harmonic))
            rows.append([R, lam, defects[-1], dphase[-1]])
        print(f"R={R:6.1f}  defect exponent {loglog_slope(lams, defects):.3f}  "
              f"phase-error exponent {loglog_slope(lams, dphase):.3f}")
    io.write_csv(Path(a.out) / "coulomb_sweep.csv", ["R", "amplitude", "defect", "phase_error"], rows)


if __name__ == "__main__":
    main()
