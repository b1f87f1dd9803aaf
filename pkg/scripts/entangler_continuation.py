"""Shortest duration at which a shared-modulation entangler becomes exactly solvable.

Walks T downward from a converged long gate, warm-starting each solve from the
previous design, and records the residual and fidelity at every step.
"""
import argparse
from pathlib import Path

import numpy as np

from iongate import io
from iongate.chain import common_chain
from iongate.ising import common_mode_design, coupling_target, graph_state_target


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--target", default="ghz", choices=["ghz", "cluster"])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t-start", type=float, default=14.0)
    p.add_argument("--t-stop", type=float, default=1.1)
    p.add_argument("--points", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results")
    a = p.parse_args()
    modes = common_chain(a.n)
    tg = coupling_target(graph_state_target(a.target, a.n))
    rows, prev = [], None
    for T in np.linspace(a.t_start, a.t_stop, a.points):
        d = common_mode_design(tg, T, modes, seed=a.seed, starts=2 if prev is not None else 8, init=prev)
        rows.append([T, d.residual, d.fidelity_estimate, d.converged])
        print(f"T={T:7.3f}  residual={d.residual:.3e}  fidelity={d.fidelity_estimate:.6f}  converged={d.converged}")
        prev = d
    io.write_csv(Path(a.out) / f"continuation_{a.target}{a.n}.csv", ["T", "residual", "fidelity", "converged"], rows)


if __name__ == "__main__":
    main()
