"""Optimal continuous forces for the two-ion phase gate.

The modulation f lives in an orthonormal real Fourier basis on [0, T].  The
closure conditions are linear in the coordinates, so they cut out a subspace;
inside it the phase is a quadratic form and the best force is the top
eigenvector of that form against the chosen cost (the norm, or the
smoothness int f'^2).  The eigenvector is finally rescaled to the target phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg as sla

from .chain import NormalModeBasis
from .error_model import decay_kappa, kappa_form
from .kernel import GATE_PHASE, closure_norm, closure_residual, fourier_forms, kernel_weights
from .profiles import DissipationModel, FourierProfile, harmonic_frequencies
from .quadrature import gl_panels

RANK_TOL = 1e-10


class Objective(str, Enum):
    NORM = "norm"
    SMOOTH = "smooth"

    @classmethod
    def parse(cls, value) -> "Objective":
        if isinstance(value, cls):
            return value
        aliases = {"norm": cls.NORM, "smooth": cls.SMOOTH, "smoothness": cls.SMOOTH}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown objective {value!r}") from None


class InfeasibleError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConstraintBasis:
    T: float
    n_modes: int
    basis: np.ndarray              # (2 n_modes + 1, d) orthonormal columns
    constraints: np.ndarray        # real constraint rows
    rank: int
    degenerate: bool               # a harmonic coincides with a mode frequency

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return 2 * self.n_modes + 1


def _active_modes(modes: NormalModeBasis, weights) -> np.ndarray:
    return np.flatnonzero(np.any(np.abs(modes.mode_matrix * weights[:, None]) > 1e-14, axis=0))


def closure_rows(E: np.ndarray, active) -> np.ndarray:
    return np.vstack([np.vstack([E[k].real, E[k].imag]) for k in active])


def build_constraint_basis(T: float, modes: NormalModeBasis, n_modes: int, weights=None,
                           forms=None) -> ConstraintBasis:
    """Orthonormal basis of real Fourier series on [0, T] that close every driven mode."""
    if int(n_modes) != n_modes or n_modes < 3:
        raise ValueError("n_modes must be an integer >= 3")
    w = np.ones(modes.n_ions) if weights is None else np.asarray(weights, dtype=float)
    _, E = fourier_forms(T, n_modes, modes) if forms is None else forms
    C = closure_rows(E, _active_modes(modes, w))
    _, s, Vh = np.linalg.svd(C)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size else 0
    basis = Vh[rank:].T
    if basis.shape[1] == 0:
        raise InfeasibleError(f"no closing force with {n_modes} harmonics on T={T:g}")
    nu = harmonic_frequencies(T, n_modes)[n_modes + 1:]
    degenerate = bool(np.any(np.abs(np.subtract.outer(nu, modes.frequencies)) < 1e-9))
    return ConstraintBasis(float(T), int(n_modes), basis, C, rank, degenerate)


def phase_form(Q: np.ndarray, modes: NormalModeBasis, weights, pair=(0, 1)) -> np.ndarray:
    """Symmetric matrix G with J_ij = y^T G y for F_k = weights_k f."""
    i, j = pair
    W = kernel_weights(modes)[:, i, j] * weights[i] * weights[j]
    return np.einsum("k,kpq->pq", W, Q)


def smoothness_form(T: float, n_modes: int) -> np.ndarray:
    """int_0^T f'(t)^2 dt = y^T D y in the real basis."""
    nu = harmonic_frequencies(T, n_modes)[n_modes + 1:]
    return np.diag(np.concatenate([[0.0], np.repeat(nu, 2)]) ** 2)


@dataclass(frozen=True)
class GateDesign:
    profile: FourierProfile
    mu: float
    objective: Objective
    basis: ConstraintBasis
    coupling: float
    closure: float
    kappa: float | None = None

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "mu": float(self.mu),
            "objective": self.objective.value,
            "basis_dimension": int(self.basis.dimension),
            "degenerate": bool(self.basis.degenerate),
            "coupling": float(self.coupling),
            "closure": float(self.closure),
            "kappa": None if self.kappa is None else float(self.kappa),
        }


def default_pair(n: int):
    """Branch pair used for the dissipation penalty: all up vs the first ion flipped."""
    s = np.ones(n)
    r = s.copy()
    r[0] = -1.0
    return s, r


def optimal_force(T: float, modes: NormalModeBasis, n_modes: int = 4, objective="norm",
                  kappa_penalty: tuple[DissipationModel, float] | None = None,
                  weights=None, target: float = GATE_PHASE, pair=(0, 1)) -> GateDesign:
    """Closing force with the largest phase per unit cost, rescaled to ``target``.

    A negative target maximizes -J_ij instead.

    ``kappa_penalty = (dissipation, weight)`` adds weight * kappa to the cost, where
    kappa is the decay exponent of the default branch pair.  The penalized problem is
    still a generalized eigenproblem, so the result is its exact optimum.
    """
    obj = Objective.parse(objective)
    w = np.ones(modes.n_ions) if weights is None else np.asarray(weights, dtype=float)
    if target == 0:
        raise ValueError("target phase must be non-zero")
    sign = 1.0 if target > 0 else -1.0
    Q, E = fourier_forms(T, n_modes, modes)
    basis = build_constraint_basis(T, modes, n_modes, w, forms=(Q, E))
    P = basis.basis
    G = sign * (P.T @ phase_form(Q, modes, w, pair) @ P)
    cost = np.eye(P.shape[0]) if obj is Objective.NORM else smoothness_form(T, n_modes)
    K = None
    if kappa_penalty is not None:
        dissipation, weight = kappa_penalty
        if weight < 0:
            raise ValueError("penalty weight must be non-negative")
        K = kappa_form(T, n_modes, modes, dissipation, w, default_pair(modes.n_ions))
        cost = cost + weight * K
    C = P.T @ cost @ P
    mu, V = sla.eigh(0.5 * (G + G.T), 0.5 * (C + C.T))
    if mu[-1] <= 0:
        raise InfeasibleError(f"no phase of sign {sign:+g} reachable at T={T:g}")
    v = V[:, -1]
    y = P @ v
    y = y * np.sqrt(abs(target) / (v @ G @ v))
    y = _sign_fix(y)
    profile = FourierProfile.from_real(T, y, w)
    Jij = float(y @ phase_form(Q, modes, w, pair) @ y)
    clo = closure_norm(closure_residual(profile, modes))
    kap = None if K is None else float(y @ K @ y)
    return GateDesign(profile, float(mu[-1]), obj, basis, Jij, clo, kap)


def _sign_fix(y):
    # Deterministic output: the largest coordinate is positive.
    return y if y[np.argmax(np.abs(y))] > 0 else -y


def l1_norm(profile: FourierProfile, panels: int = 512, order: int = 8) -> float:
    t, w = gl_panels(profile.start, profile.end, panels, order)
    return float(np.sum(np.abs(profile.modulation(t.ravel())) * w.ravel()))


@dataclass(frozen=True)
class IntensityRow:
    T: float
    l1: float
    l2: float
    mu: float


def intensity_scan(T_list, modes: NormalModeBasis, n_modes: int = 4, objective="norm") -> list[IntensityRow]:
    rows = []
    for T in T_list:
        d = optimal_force(float(T), modes, n_modes, objective)
        rows.append(IntensityRow(float(T), l1_norm(d.profile), float(np.linalg.norm(d.profile.real_coordinates())), d.mu))
    return rows


@dataclass(frozen=True)
class KappaRow:
    T: float
    kappa: float
    l1: float


def kappa_scan(T_list, modes: NormalModeBasis, dissipation: DissipationModel, n_modes: int = 4,
               objective="norm") -> list[KappaRow]:
    """Decay exponent of the optimal gate at each duration (default branch pair)."""
    pair = default_pair(modes.n_ions)
    rows = []
    for T in T_list:
        d = optimal_force(float(T), modes, n_modes, objective)
        rows.append(KappaRow(float(T), float(decay_kappa(d.profile, modes, dissipation, pair)), l1_norm(d.profile)))
    return rows
