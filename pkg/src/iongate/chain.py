"""Equilibrium configuration and normal modes of a linear ion chain.

Positions are measured in the Coulomb length d0, defined so that the
dimensionless potential reads

    U(u) = sum_i (u_i - c_i)^2 / 2 + sum_{i<j} 1 / |u_i - u_j|

with c_i = 0 for a common harmonic trap and c_i the well centers for
individual microtraps.  Frequencies are in units of the trap frequency.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrapKind(str, Enum):
    COMMON = "CommonHarmonic"
    MICROTRAPS = "Microtraps"


class ChainError(ValueError):
    """Invalid trap input or failed equilibrium search."""


@dataclass(frozen=True)
class TrapSetup:
    n_ions: int
    trap_kind: TrapKind = TrapKind.COMMON
    microtrap_centers: tuple[float, ...] = ()
    coulomb_length_ratio: float = 100.0

    def __post_init__(self):
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ChainError(f"n_ions must be a positive integer, got {self.n_ions}")
        object.__setattr__(self, "trap_kind", TrapKind(self.trap_kind))
        if not self.coulomb_length_ratio > 0:
            raise ChainError("coulomb_length_ratio must be positive")
        centers = tuple(float(c) for c in self.microtrap_centers)
        object.__setattr__(self, "microtrap_centers", centers)
        if self.trap_kind is TrapKind.MICROTRAPS:
            if len(centers) != self.n_ions:
                raise ChainError("microtrap_centers must have one entry per ion")
            if np.any(np.diff(centers) <= 0):
                raise ChainError("microtrap_centers must be strictly increasing (coincident centers)")
        elif centers:
            raise ChainError("microtrap_centers must be empty for a common trap")

    @property
    def centers(self) -> np.ndarray:
        if self.trap_kind is TrapKind.MICROTRAPS:
            return np.asarray(self.microtrap_centers)
        return np.zeros(self.n_ions)


@dataclass(frozen=True)
class NormalModeBasis:
    """Mode matrix M (columns are modes), frequencies and oscillator lengths.

    ``lengths`` holds alpha_k = omega_k**-1/2 in units where hbar = m = omega = 1.
    """

    equilibrium: np.ndarray
    mode_matrix: np.ndarray
    frequencies: np.ndarray
    lengths: np.ndarray = field(default=None)
    equilibrium_energy: float = 0.0
    degenerate: bool = False

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "mode_matrix", np.asarray(self.mode_matrix, dtype=float))
        object.__setattr__(self, "equilibrium", np.asarray(self.equilibrium, dtype=float))
        if self.lengths is None:
            object.__setattr__(self, "lengths", w ** -0.5)

    @property
    def n_ions(self) -> int:
        return self.mode_matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return self.mode_matrix.shape[1]

    def to_dict(self) -> dict:
        return {
            "equilibrium": self.equilibrium.tolist(),
            "mode_matrix": self.mode_matrix.tolist(),
            "frequencies": self.frequencies.tolist(),
            "lengths": self.lengths.tolist(),
            "equilibrium_energy": float(self.equilibrium_energy),
        }


def _gradient(u, c):
    d = u[:, None] - u[None, :]
    np.fill_diagonal(d, np.inf)
    return (u - c) - np.sum(np.sign(d) / d**2, axis=1)


def _hessian(u):
    n = len(u)
    d = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(d, np.inf)
    V = -2.0 / d**3
    V[np.diag_indices(n)] = 1.0 - V.sum(axis=1)
    return V


def potential_energy(u, setup: TrapSetup) -> float:
    u = np.asarray(u, dtype=float)
    iu = np.triu_indices(len(u), 1)
    return float(0.5 * np.sum((u - setup.centers) ** 2) + np.sum(1.0 / np.abs(u[iu[0]] - u[iu[1]])))


def equilibrium_positions(setup: TrapSetup, tol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Newton iteration on the dimensionless potential.

    Starts from uniform spacing over [-N/2, N/2] (or from the well centers);
    a step is halved while it would increase the gradient norm.
    """
    n = setup.n_ions
    c = setup.centers
    if n == 1:
        return c.copy()
    if setup.trap_kind is TrapKind.MICROTRAPS:
        u = c.copy()
    else:
        u = np.linspace(-n / 2, n / 2, n)
    g = _gradient(u, c)
    res = np.max(np.abs(g))
    for _ in range(max_iter):
        if res < tol:
            break
        step = np.linalg.solve(_hessian(u), g)
        lam = 1.0
        while True:
            trial = u - lam * step
            ordered = np.all(np.diff(trial) > 0)
            if ordered:
                gt = _gradient(trial, c)
                rt = np.max(np.abs(gt))
                if rt < res or lam < 1e-6:
                    break
            lam *= 0.5
            if lam < 1e-12:
                raise ChainError(f"equilibrium search stalled, residual {res:.3e}")
        u, g, res = trial, gt, rt
    if res >= tol:
        # Newton stalls at the rounding floor for long chains; accept a few ulps above tol.
        if res > 100 * tol:
            raise ChainError(f"equilibrium search did not converge, last residual {res:.3e}")
    if setup.trap_kind is TrapKind.COMMON:
        u = 0.5 * (u - u[::-1])
    return u


def hessian(setup: TrapSetup, equilibrium) -> np.ndarray:
    """Restoring-force matrix V at the equilibrium (units of omega^2)."""
    u = np.asarray(equilibrium, dtype=float)
    if len(u) != setup.n_ions:
        raise ChainError("equilibrium length does not match n_ions")
    V = _hessian(u) if len(u) > 1 else np.ones((1, 1))
    ev = np.linalg.eigvalsh(V)
    if ev[0] <= 0:
        raise ChainError(f"Hessian not positive definite: eigenvalue {ev[0]:.3e}")
    return V


def normal_modes(V, equilibrium=None, equilibrium_energy: float = 0.0) -> NormalModeBasis:
    """Diagonalize V = M diag(omega^2) M^T.

    Columns are sign-fixed so the entry of largest magnitude is positive.
    """
    V = np.asarray(V, dtype=float)
    if not np.allclose(V, V.T, atol=1e-14 * max(1.0, np.abs(V).max())):
        raise ChainError("V must be symmetric")
    w2, M = np.linalg.eigh(V)
    if w2[0] <= 0:
        raise ChainError(f"V not positive definite: eigenvalue {w2[0]:.3e}")
    idx = np.argmax(np.abs(M) + 1e-12 * np.arange(M.shape[0])[:, None], axis=0)
    signs = np.sign(M[idx, np.arange(M.shape[1])])
    M = M * signs
    if equilibrium is None:
        equilibrium = np.zeros(V.shape[0])
    return NormalModeBasis(equilibrium, M, np.sqrt(w2), equilibrium_energy=equilibrium_energy)


def chain_modes(setup: TrapSetup) -> NormalModeBasis:
    """Equilibrium, Hessian and normal modes in one call."""
    u = equilibrium_positions(setup)
    V = hessian(setup, u)
    return normal_modes(V, u, potential_energy(u, setup))


def common_chain(n_ions: int) -> NormalModeBasis:
    return chain_modes(TrapSetup(n_ions))


def tuned_two_ion_modes(stretch_ratio: float) -> NormalModeBasis:
    """Two-ion basis with omega_c = 1 and omega_r = stretch_ratio."""
    r = float(stretch_ratio)
    if not 1.0 < r <= np.sqrt(3.0) + 1e-15:
        raise ChainError(f"stretch_ratio must lie in (1, sqrt(3)], got {r}")
    degenerate = r - 1.0 < 1e-6
    if degenerate:
        warnings.warn("stretch and center-of-mass modes are nearly degenerate", RuntimeWarning)
    s = 1.0 / np.sqrt(2.0)
    M = np.array([[s, -s], [s, s]])
    u = np.array([-0.5, 0.5]) * 2 ** (1 / 3)
    return NormalModeBasis(u, M, np.array([1.0, r]), degenerate=degenerate)


def single_mode_basis(omega: float, couplings) -> NormalModeBasis:
    """One mode of frequency ``omega`` shared by ions with participation ``couplings``.

    Used for single-mode checks; the mode matrix is a single (normalized) column.
    """
    if not omega > 0:
        raise ChainError("mode frequency must be positive")
    col = np.atleast_1d(np.asarray(couplings, dtype=float))
    norm = np.linalg.norm(col)
    if norm == 0:
        raise ChainError("mode must couple to at least one ion")
    return NormalModeBasis(np.zeros(len(col)), (col / norm)[:, None], np.array([float(omega)]))
