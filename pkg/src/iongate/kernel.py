"""Coherent trajectories, closure residuals and the accumulated coupling matrix.

Conventions (hbar = m = omega = 1):

* mode k sees the force sum_i alpha_k M_ik s_i F_i(t), alpha_k = omega_k**-1/2;
* the branch phase of spin configuration s is phi(s) = s^T J s / 2, so for
  i != j the entry J_ij is the coefficient of s_i s_j;
* J_ij = int int_[0,T]^2 F_i(t) G_ij(t - tau) F_j(tau) with
  G_ij(t) = sum_k M_ik M_jk alpha_k^2 / 2 sin(omega_k |t|) exp(-gamma_k |t|).

With these conventions the two-ion gate exp(i pi sz sz / 4) has J_12 = pi/4.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import NormalModeBasis
from .expint import phi1, tri
from .profiles import (CallableForce, DissipationModel, ExpSegment, KickTrain,
                       as_segments, mode_decay)
from .quadrature import QuadratureError, gl_panels, integrate

SQRT2 = np.sqrt(2.0)
# Target phase coefficient of a maximally entangling two-ion gate.
GATE_PHASE = np.pi / 4


# ---------------------------------------------------------------- single mode


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    z: np.ndarray
    phase: np.ndarray


def coherent_trajectory(f, omega: float, z0: complex, T: float, samples: int = 1001,
                        order: int = 12) -> Trajectory:
    """Forced oscillator path z(t) and accumulated phase by quadrature.

    Solves z' = -i omega z + i f/sqrt2 through
    z(t) = e^{-i omega t} [z0 + i/sqrt2 int_0^t e^{i omega tau} f(tau) dtau]
    and phi' = f (z + conj z) / (2 sqrt2), interval by interval on the sample grid.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    t = np.linspace(0.0, T, samples)
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = t[:-1], t[1:]
    h = (b - a)[:, None]
    nodes = a[:, None] + 0.5 * (x + 1.0) * h                      # (S, p)
    wn = 0.5 * w * h
    sub_h = (nodes - a[:, None])[:, :, None]                       # (S, p, 1)
    sub = a[:, None, None] + 0.5 * (x + 1.0) * sub_h                # (S, p, p)
    sub_w = 0.5 * w * sub_h
    f_nodes = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    f_sub = np.asarray(f(sub.ravel()), dtype=float).reshape(sub.shape)
    rot_sub = np.exp(1j * omega * (sub - a[:, None, None]))
    partial = np.sum(sub_w * rot_sub * f_sub, axis=2)               # (S, p)
    full = np.sum(wn * np.exp(1j * omega * (nodes - a[:, None])) * f_nodes, axis=1)
    z = np.empty(samples, dtype=complex)
    phase = np.zeros(samples)
    z[0] = z0
    for s in range(samples - 1):
        za = z[s]
        z_nodes = np.exp(-1j * omega * (nodes[s] - a[s])) * (za + 1j / SQRT2 * partial[s])
        phase[s + 1] = phase[s] + np.sum(wn[s] * f_nodes[s] * z_nodes.real) / SQRT2
        z[s + 1] = np.exp(-1j * omega * h[s, 0]) * (za + 1j / SQRT2 * full[s])
    return Trajectory(t, z, phase)


# ---------------------------------------------------------------- closure


def _mode_arrays(modes: NormalModeBasis, dissipation):
    return modes.frequencies, mode_decay(modes, dissipation), modes.mode_matrix, modes.lengths


def _quad_moments(profile: CallableForce, rates: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """int_0^T exp(rate_k t) F_i(t) dt for a generic force (n_modes, n_ions)."""
    def fun(t):
        F = profile.force(t)
        return np.exp(np.multiply.outer(rates, t))[:, None, :] * F[None, :, :]
    return integrate(fun, 0.0, profile.T, tol=tol)


def force_moments(profile, rates) -> np.ndarray:
    """S[k, i] = int exp(rates_k t) F_i(t) dt, closed form where available."""
    rates = np.atleast_1d(np.asarray(rates, dtype=complex))
    if isinstance(profile, KickTrain):
        P = profile.impulses()
        return np.exp(np.multiply.outer(rates, profile.times)) @ P.T
    if isinstance(profile, CallableForce):
        return _quad_moments(profile, rates)
    out = 0
    for seg in as_segments(profile):
        ph = seg.T * phi1((1j * seg.nu[None, :] + rates[:, None]) * seg.T)   # (K, A)
        out = out + np.exp(rates * seg.start)[:, None] * (ph @ seg.C.T)
    return np.asarray(out)


def closure_residual(profile, modes: NormalModeBasis, dissipation: DissipationModel | None = None) -> np.ndarray:
    """D[k, i] = int_0^T e^{(i omega_k + gamma_k) tau} alpha_k M_ik F_i(tau) dtau.

    The displacement of mode k on branch s is proportional to sum_i D[k, i] s_i.
    """
    w, g, M, alpha = _mode_arrays(modes, dissipation)
    S = force_moments(profile, 1j * w + g)
    return alpha[:, None] * M.T * S


def closure_norm(D: np.ndarray) -> float:
    """Worst-case branch residual max_k sum_i |D_ki|."""
    D = np.atleast_2d(D)
    return float(np.max(np.sum(np.abs(D), axis=1))) if D.size else 0.0


# ---------------------------------------------------------------- kernel


@dataclass(frozen=True)
class PhaseKernel:
    frequencies: np.ndarray
    decay: np.ndarray
    weights: np.ndarray     # (K, N, N) = M_ik M_jk alpha_k^2 / 2

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        env = np.sin(np.multiply.outer(t, self.frequencies)) * np.exp(-np.multiply.outer(t, self.decay))
        return np.tensordot(env, self.weights, axes=([-1], [0]))


def kernel_weights(modes: NormalModeBasis) -> np.ndarray:
    M, alpha = modes.mode_matrix, modes.lengths
    return np.einsum("ik,jk,k->kij", M, M, alpha**2 / 2)


def phase_kernel_G(modes: NormalModeBasis, dissipation: DissipationModel | None = None) -> PhaseKernel:
    w, g, _, _ = _mode_arrays(modes, dissipation)
    return PhaseKernel(w, g, kernel_weights(modes))


# ---------------------------------------------------------------- couplings


def _segment_triangle(seg: ExpSegment, lam: complex) -> np.ndarray:
    """int int_{tau<t} F_i(t) F_j(tau) exp(lam (t - tau)) within one segment."""
    P = (1j * seg.nu + lam) * seg.T
    Q = (1j * seg.nu - lam) * seg.T
    Tri = seg.T**2 * tri(P[:, None], Q[None, :])
    return seg.C @ Tri @ seg.C.T


def _segment_moment(seg: ExpSegment, rate: complex) -> np.ndarray:
    ph = seg.T * phi1((1j * seg.nu + rate) * seg.T)
    return np.exp(rate * seg.start) * (seg.C @ ph)


def _quad_triangle(profile: CallableForce, lams: np.ndarray, tol: float = 1e-10,
                   order: int = 16, max_panels: int = 4096) -> np.ndarray:
    """Generic-force triangle integrals by nested Gauss-Legendre panels."""
    x, w = np.polynomial.legendre.leggauss(order)
    prev = None
    n = 8
    while n <= max_panels:
        t, wt = gl_panels(0.0, profile.T, n, order)              # (n, p)
        edges = np.linspace(0.0, profile.T, n + 1)[:-1, None]
        sub_h = (t - edges)[:, :, None]
        sub = edges[:, :, None] + 0.5 * (x + 1.0) * sub_h        # (n, p, p)
        sub_w = 0.5 * w * sub_h
        Ft = profile.force(t.ravel()).reshape(-1, *t.shape)      # (N, n, p)
        Fs = profile.force(sub.ravel()).reshape(-1, *sub.shape)  # (N, n, p, p)
        out = np.empty((len(lams), Ft.shape[0], Ft.shape[0]))
        for k, lam in enumerate(lams):
            g_sub = Fs * np.exp(-lam * sub)
            partial = np.sum(sub_w * g_sub, axis=-1)              # (N, n, p)
            g_nodes = Ft * np.exp(-lam * t)
            totals = np.sum(wt * g_nodes, axis=-1)                # (N, n)
            before = np.cumsum(totals, axis=1) - totals
            cum = before[:, :, None] + partial                    # (N, n, p)
            outer = Ft * np.exp(lam * t) * wt
            out[k] = np.einsum("inp,jnp->ij", outer, cum).imag
        if prev is not None and np.max(np.abs(out - prev)) <= tol * max(1.0, np.max(np.abs(out))):
            return out
        prev = out
        n *= 2
    raise QuadratureError("triangle quadrature did not converge")


def triangle_bilinear(profile, modes: NormalModeBasis, dissipation: DissipationModel | None = None) -> np.ndarray:
    """B[k, i, j] = int int_{tau<t} F_i(t) F_j(tau) sin(omega_k (t-tau)) e^{-gamma_k (t-tau)}."""
    w, g, _, _ = _mode_arrays(modes, dissipation)
    lams = 1j * w - g
    if isinstance(profile, KickTrain):
        P = profile.impulses()
        dt = np.subtract.outer(profile.times, profile.times)
        lower = np.tril(np.ones_like(dt, dtype=bool), -1)
        out = []
        for lam in lams:
            S = np.where(lower, np.exp(lam * np.where(lower, dt, 0.0)).imag, 0.0)
            out.append(P @ S @ P.T)
        return np.array(out)
    if isinstance(profile, CallableForce):
        return _quad_triangle(profile, lams)
    segs = as_segments(profile)
    n = segs[0].C.shape[0]
    out = np.zeros((len(lams), n, n))
    for k, lam in enumerate(lams):
        acc = np.zeros((n, n), dtype=complex)
        for p, sp in enumerate(segs):
            acc += _segment_triangle(sp, lam)
            if p:
                later = _segment_moment(sp, lam)
                for sq in segs[:p]:
                    acc += np.outer(later, _segment_moment(sq, -lam))
        out[k] = acc.imag
    return out


def coupling_from_bilinear(B: np.ndarray, modes: NormalModeBasis) -> np.ndarray:
    Wk = kernel_weights(modes)
    return np.einsum("kij,kij->ij", Wk, B + np.swapaxes(B, 1, 2))


def accumulated_coupling(profile, modes: NormalModeBasis, dissipation: DissipationModel | None = None) -> np.ndarray:
    """Coupling matrix J of a force program (see module docstring).

    The diagonal only contributes a global phase.  Closure is not checked.
    """
    return coupling_from_bilinear(triangle_bilinear(profile, modes, dissipation), modes)


def branch_phase(J: np.ndarray, s) -> float:
    s = np.asarray(s, dtype=float)
    return 0.5 * float(s @ J @ s)


# ---------------------------------------------------------------- Fourier forms


def fourier_forms(T: float, n_modes: int, modes: NormalModeBasis,
                  dissipation: DissipationModel | None = None):
    """Quadratic and closure forms over the orthonormal real Fourier basis.

    Returns (Q, E): Q[k] is the symmetric matrix of
    int int_[0,T]^2 phi_p(t) phi_q(tau) sin(omega_k|t-tau|) e^{-gamma_k|t-tau|}
    and E[k, p] = int_0^T e^{(i omega_k + gamma_k) t} phi_p(t) dt.
    """
    from .profiles import harmonic_frequencies, real_basis_to_complex

    w, g, _, _ = _mode_arrays(modes, dissipation)
    nu = harmonic_frequencies(T, n_modes)
    R = real_basis_to_complex(T, n_modes)
    Q = np.empty((len(w), len(nu), len(nu)))
    E = np.empty((len(w), len(nu)), dtype=complex)
    for k in range(len(w)):
        lam = 1j * w[k] - g[k]
        Tri = T**2 * tri(((1j * nu + lam) * T)[:, None], ((1j * nu - lam) * T)[None, :])
        half = (R @ Tri @ R.T).imag
        Q[k] = half + half.T
        E[k] = R @ (T * phi1((1j * nu + 1j * w[k] + g[k]) * T))
    return Q, E


# ---------------------------------------------------------------- adiabatic


def adiabatic_phase(F, omega_c: float, omega_r: float, T: float, tol: float = 1e-9) -> float:
    """sigma^z sigma^z coefficient of slow two-ion pushing, (w_c^-2 - w_r^-2)/2 int F^2."""
    ends = np.abs(np.asarray(F(np.array([0.0, T])), dtype=float))
    if np.any(ends > tol):
        raise ValueError(f"force must vanish at both ends (got {ends.tolist()})")
    val = integrate(lambda t: np.asarray(F(t), dtype=float) ** 2, 0.0, T, tol=1e-12)
    return float(0.5 * (omega_c**-2 - omega_r**-2) * val)
