"""Pulsed phase gates built from trains of instantaneous momentum kicks.

Two antisymmetric patterns are solved for two ions sharing a centre-of-mass
and a stretch mode:

* protocol 1, four groups (g, -t1), (1, -t2), (-1, t2), (-g, t1);
* protocol 2, six groups (-2, -t1), (3, -t2), (-2, -t3), (2, t3), (-3, t2), (2, t1)
  with total duration T = 2 t1.

Because the patterns are odd in time, the real part of each closure sum
cancels identically and only the sine parts need solving.  Times are shifted
by t1 so the train lives on [0, 2 t1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, root

from .chain import NormalModeBasis, common_chain
from .kernel import GATE_PHASE, closure_norm, closure_residual
from .profiles import KickTrain

P2_WEIGHTS = np.array([-2.0, 3.0, -2.0, 2.0, -3.0, 2.0])
P1_TAU1_SEED = 0.538          # t1 in trap periods at the reported operating point
P1_TAU2_SLOPE = 0.04          # t2 / (g * period) near the same root
P2_SEEDS = ((0.883, 0.325), (0.85, 0.30), (0.82, 0.30), (0.73, 0.38))
CLOSURE_TOL = 1e-9


class KickSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class KickSolution:
    train: KickTrain
    gamma: float
    n_repeat: int
    total_time: float
    phase_achieved: float
    taus: tuple
    protocol: int
    pulse_pairs: int               # groups x pulse pairs per group
    weighted_kicks: float          # sum_l |n_l|, i.e. recoil units summed over the train
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "gamma": float(self.gamma),
            "n_repeat": int(self.n_repeat),
            "total_time": float(self.total_time),
            "phase_achieved": float(self.phase_achieved),
            "taus": [float(t) for t in self.taus],
            "pulse_pairs": int(self.pulse_pairs),
            "weighted_kicks": float(self.weighted_kicks),
            "metadata": dict(self.metadata),
            "train": self.train.to_dict(),
        }


def _pair_kernel(dt, w_c, w_r):
    d = np.abs(dt)
    return np.sin(w_c * d) / w_c - np.sin(w_r * d) / w_r


def _two_modes(modes: NormalModeBasis | None):
    modes = common_chain(2) if modes is None else modes
    if modes.n_modes != 2:
        raise ValueError("kick protocols need a two-mode basis")
    return modes, modes.frequencies[0], modes.frequencies[1]


def kick_phase(train: KickTrain, modes: NormalModeBasis | None = None, momentum: float | None = None) -> float:
    """s1 s2 phase coefficient of a two-ion kick train.

    Equals momentum**2 * sum_{l,m} n_l n_m [sin(w_c t_lm)/w_c - sin(w_r t_lm)/w_r]
    for ions that both participate fully.  ``momentum`` overrides the train's value.
    """
    modes, w_c, w_r = _two_modes(modes)
    k = train.momentum if momentum is None else momentum
    t, n = train.times, train.weights
    base = n @ _pair_kernel(np.subtract.outer(t, t), w_c, w_r) @ n
    # Mode vectors (1, +-1)/sqrt2 give M1k M2k = +-1/2; the per-ion participation scales each side.
    a, b = train.participation[:2]
    return float(k**2 * a * b * base)


# ---------------------------------------------------------------- protocol 1


def _p1_times(t1, t2):
    return np.array([-t1, -t2, t2, t1])


def _p1_closure(x, g, freqs):
    t1, t2 = x
    return np.array([g * np.sin(w * t1) + np.sin(w * t2) for w in freqs])


def _p1_jac(x, g, freqs):
    t1, t2 = x
    return np.array([[g * w * np.cos(w * t1), w * np.cos(w * t2)] for w in freqs])


def protocol1_times(gamma: float, modes: NormalModeBasis | None = None, seed=None) -> tuple[float, float]:
    """Solve the closure equations for (t1, t2) at tilt ``gamma``."""
    modes, w_c, w_r = _two_modes(modes)
    period = 2 * np.pi / w_c
    x0 = seed if seed is not None else (P1_TAU1_SEED * period, P1_TAU2_SLOPE * gamma * period)
    sol = root(_p1_closure, x0, args=(gamma, (w_c, w_r)), jac=_p1_jac, method="hybr", tol=1e-14)
    t1, t2 = sol.x
    res = np.max(np.abs(_p1_closure(sol.x, gamma, (w_c, w_r))))
    if not (sol.success or res < 1e-13) or not 0 < t2 < t1:
        raise KickSolveError(f"no protocol-1 root for gamma={gamma:g} (residual {res:.2e}, t={sol.x})")
    return float(t1), float(t2)


def _p1_base(gamma, t1, t2, w_c, w_r):
    n = np.array([gamma, 1.0, -1.0, -gamma])
    t = _p1_times(t1, t2)
    return float(n @ _pair_kernel(np.subtract.outer(t, t), w_c, w_r) @ n)


def solve_protocol1(gamma: float = 0.9, momentum: float = 0.5, modes: NormalModeBasis | None = None) -> KickSolution:
    """Four-group gate reaching phase pi/4 exactly.

    The smallest repetition count n with n^2 * phase(gamma) >= pi/4 is chosen and
    the tilt is then lowered continuously until the phase is exactly pi/4.
    """
    if not momentum > 0:
        raise ValueError("momentum must be positive")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    modes, w_c, w_r = _two_modes(modes)
    t1, t2 = protocol1_times(gamma, modes)
    base = momentum**2 * _p1_base(gamma, t1, t2, w_c, w_r)
    if base <= 0:
        raise KickSolveError("protocol-1 root gives a non-positive phase")
    n = max(1, math.ceil(math.sqrt(GATE_PHASE / base) - 1e-12))

    def excess(g):
        a, b = protocol1_times(g, modes)
        return n**2 * momentum**2 * _p1_base(g, a, b, w_c, w_r) - GATE_PHASE

    if abs(excess(gamma)) > 1e-15:
        g_final = brentq(excess, 1e-2 * gamma, gamma, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        g_final = gamma
    t1, t2 = protocol1_times(g_final, modes)
    weights = n * np.array([g_final, 1.0, -1.0, -g_final])
    train = KickTrain(_p1_times(t1, t2) + t1, weights, momentum, [1.0, 1.0], 2 * t1,
                      {"protocol": 1, "n_repeat": n})
    return _finish(train, modes, 1, g_final, n, (t1, t2), pulse_pairs=4 * n)


# ---------------------------------------------------------------- protocol 2


def _p2_times(t1, t2, t3):
    return np.array([-t1, -t2, -t3, t3, t2, t1])


def _p2_closure(x, t1, freqs):
    t2, t3 = x
    return np.array([2 * np.sin(w * t1) - 3 * np.sin(w * t2) + 2 * np.sin(w * t3) for w in freqs])


def _p2_jac(x, t1, freqs):
    t2, t3 = x
    return np.array([[-3 * w * np.cos(w * t2), 2 * w * np.cos(w * t3)] for w in freqs])


def protocol2_times(T: float, modes: NormalModeBasis | None = None) -> tuple[float, float, float]:
    """Solve closure for (t2, t3) with t1 = T/2; returns (t1, t2, t3)."""
    modes, w_c, w_r = _two_modes(modes)
    t1 = T / 2
    seeds = list(P2_SEEDS) + [(a, b) for a in np.linspace(0.05, 0.95, 10) for b in np.linspace(0.05, 0.95, 10)]
    best = None
    for a, b in seeds:
        sol = root(_p2_closure, [a * t1, b * t1], args=(t1, (w_c, w_r)), jac=_p2_jac, method="hybr", tol=1e-14)
        t2, t3 = sol.x
        res = np.max(np.abs(_p2_closure(sol.x, t1, (w_c, w_r))))
        if res < 1e-12 and 0 < t3 < t2 < t1 and t2 - t3 > 1e-9 * t1:
            base = _p2_base(t1, t2, t3, w_c, w_r)
            if base > 0:
                return float(t1), float(t2), float(t3)
            best = best or (t1, t2, t3)
    raise KickSolveError(f"no protocol-2 root with positive phase for T={T:g}"
                         + ("" if best is None else " (only negative-phase roots found)"))


def _p2_base(t1, t2, t3, w_c, w_r):
    t = _p2_times(t1, t2, t3)
    return float(P2_WEIGHTS @ _pair_kernel(np.subtract.outer(t, t), w_c, w_r) @ P2_WEIGHTS)


def solve_protocol2(T: float, momentum: float = 0.01, modes: NormalModeBasis | None = None) -> KickSolution:
    """Six-group gate of duration T.  Pulse-pair count is 14 n.

    The smallest n reaching pi/4 is used and a uniform tilt gamma <= 1 trims the
    phase to pi/4 exactly (phase scales as gamma^2 at fixed times).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    if not momentum > 0:
        raise ValueError("momentum must be positive")
    modes, w_c, w_r = _two_modes(modes)
    t1, t2, t3 = protocol2_times(T, modes)
    base = momentum**2 * _p2_base(t1, t2, t3, w_c, w_r)
    n = max(1, math.ceil(math.sqrt(GATE_PHASE / base) - 1e-12))
    gamma = math.sqrt(GATE_PHASE / (base * n**2))
    train = KickTrain(_p2_times(t1, t2, t3) + t1, n * gamma * P2_WEIGHTS, momentum, [1.0, 1.0], T,
                      {"protocol": 2, "n_repeat": n})
    return _finish(train, modes, 2, gamma, n, (t1, t2, t3), pulse_pairs=14 * n)


def _finish(train, modes, protocol, gamma, n, taus, pulse_pairs):
    D = closure_residual(train, modes)
    norm = closure_norm(D)
    phase = kick_phase(train, modes)
    if norm > CLOSURE_TOL * max(1.0, np.abs(train.impulses()).max()):
        raise KickSolveError(f"closure residual {norm:.2e} above tolerance")
    if abs(phase - GATE_PHASE) > 1e-9:
        raise KickSolveError(f"phase {phase!r} misses pi/4")
    meta = {"closure_norm": norm,
            "sum_weights": float(np.sum(train.weights)),
            # An odd number of pulse pairs leaves a global sx sx flip to undo by hand.
            "spin_flip_required": bool(pulse_pairs % 2)}
    return KickSolution(train, float(gamma), int(n), float(train.T), phase, tuple(float(t) for t in taus),
                        protocol, int(pulse_pairs), float(np.sum(np.abs(train.weights))), meta)


# ---------------------------------------------------------------- scans


@dataclass(frozen=True)
class ScanRow:
    T: float
    taus: tuple
    n: int | None
    pulse_pairs: int | None
    error: str | None = None


def scaling_scan(T_list, momentum: float = 0.01, modes: NormalModeBasis | None = None) -> list[ScanRow]:
    """Protocol-2 pulse counts over a list of durations; failures are kept per row."""
    rows = []
    for T in T_list:
        try:
            sol = solve_protocol2(float(T), momentum, modes)
            rows.append(ScanRow(float(T), sol.taus, sol.n_repeat, sol.pulse_pairs))
        except (KickSolveError, ValueError) as exc:
            rows.append(ScanRow(float(T), (), None, None, str(exc)))
    return rows


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def scan_slope(rows: list[ScanRow]) -> float:
    ok = [r for r in rows if r.pulse_pairs]
    return loglog_slope([r.T for r in ok], [r.pulse_pairs for r in ok])
