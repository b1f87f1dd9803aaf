"""Error budget of a force program: dissipation, temperature, control noise, anharmonicity.

Damped modes follow the exact moment solution of the master equation:
for a pair of spin branches (s, r) the relative displacement obeys
beta' = -gamma beta - i (conj g_r - conj g_s) with rotating-frame couplings
g_ki(t) = F_i(t) M_ik alpha_k exp(-i omega_k t) / sqrt2, the coherence decays as
kappa = sum_k gamma_k (N_k + 1/2) int_0^T |beta_k|^2 and the phase obeys
phi' = Re[(g_r + g_s) beta].
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chain import NormalModeBasis
from .kernel import SQRT2, accumulated_coupling, closure_residual, kernel_weights, triangle_bilinear
from .profiles import (CallableForce, DissipationModel, FourierProfile, KickTrain, as_segments,
                       harmonic_frequencies, mode_decay,
                       real_basis_to_complex, sum_profiles)
from .expint import phi1
from .quadrature import gl_panels, integrate

BRUTE_FORCE_CAP = 20
SPEED_LIMIT_ERROR = 1e-4


class ErrorModelError(ValueError):
    pass


# ---------------------------------------------------------------- displacements


def _pair_weights(modes: NormalModeBasis, s, r) -> np.ndarray:
    """c[k, i] = (r_i - s_i) M_ik alpha_k / sqrt2."""
    s, r = np.asarray(s, dtype=float), np.asarray(r, dtype=float)
    return ((r - s)[:, None] * modes.mode_matrix).T * modes.lengths[:, None] / SQRT2


def partial_moments(profile, rates, t) -> np.ndarray:
    """P[n, k, i] = int_0^{t_n} exp(rates_k tau) F_i(tau) dtau."""
    rates = np.atleast_1d(np.asarray(rates, dtype=complex))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(profile, KickTrain):
        P = profile.impulses()                                    # (N, L)
        mask = profile.times[None, :] <= t[:, None]                # (n, L)
        ph = np.exp(np.multiply.outer(rates, profile.times))       # (K, L)
        return np.einsum("nl,kl,il->nki", mask, ph, P)
    if isinstance(profile, CallableForce):
        out = np.zeros((len(t), len(rates), profile.n_ions), dtype=complex)
        for n, tn in enumerate(t):
            if tn > 0:
                f = lambda x: np.exp(np.multiply.outer(rates, x))[:, None, :] * profile.force(x)[None]
                out[n] = integrate(f, 0.0, min(tn, profile.T), tol=1e-12)
        return out
    out = 0
    for seg in as_segments(profile):
        u = np.clip(t - seg.start, 0.0, seg.T)                     # (n,)
        arg = (1j * seg.nu[None, None, :] + rates[None, :, None]) * u[:, None, None]
        ph = u[:, None, None] * phi1(arg)                           # (n, K, A)
        out = out + np.exp(rates * seg.start)[None, :, None] * np.einsum("nka,ia->nki", ph, seg.C)
    return np.asarray(out)


def dissipative_displacement(profile, modes: NormalModeBasis, dissipation: DissipationModel | None,
                             pair, t=None) -> np.ndarray:
    """beta_k(t) for the branch pair (s, r); t defaults to the profile end.

    beta_k(t) = -i exp(-gamma_k t) sum_i c_ki int_0^t exp((i omega_k + gamma_k) tau) F_i(tau) dtau.
    Returns shape (K,) for scalar t, else (len(t), K).
    """
    s, r = pair
    gamma = mode_decay(modes, dissipation)
    rates = 1j * modes.frequencies + gamma
    scalar = t is None or np.ndim(t) == 0
    tt = np.atleast_1d(profile.T if t is None else t).astype(float)
    P = partial_moments(profile, rates, tt)
    c = _pair_weights(modes, s, r)
    beta = -1j * np.exp(-np.multiply.outer(tt, gamma)) * np.einsum("nki,ki->nk", P, c)
    return beta[0] if scalar else beta


def _breakpoints(profile) -> np.ndarray:
    pts = {0.0, float(profile.T)}
    if isinstance(profile, KickTrain):
        pts.update(float(x) for x in profile.times)
    elif not isinstance(profile, CallableForce):
        for seg in as_segments(profile):
            pts.update((seg.start, seg.start + seg.T))
    return np.array(sorted(p for p in pts if 0.0 <= p <= profile.T))


def decay_kappa(profile, modes: NormalModeBasis, dissipation: DissipationModel, pair,
                per_mode: bool = False, tol: float = 1e-10):
    """kappa = sum_k gamma_k (N_k + 1/2) int_0^T |beta_k|^2, adaptive quadrature per smooth piece."""
    gamma = mode_decay(modes, dissipation)
    pref = gamma * (dissipation.occupation + 0.5)
    total = np.zeros(modes.n_modes)
    br = _breakpoints(profile)
    for a, b in zip(br, br[1:]):
        if b - a <= 0:
            continue
        # Evaluate just inside the piece so kicks at the left edge are included.
        f = lambda x: np.abs(dissipative_displacement(profile, modes, dissipation, pair,
                                                      np.clip(x, a + 1e-15 * (b - a), b))) .T ** 2
        total += integrate(f, a, b, tol=tol, start_panels=2)
    kap = pref * total
    return kap if per_mode else float(kap.sum())


def dissipative_phase(profile, modes: NormalModeBasis, dissipation: DissipationModel | None, pair) -> float:
    """Relative phase of the pair from phi' = Re[(g_r + g_s) beta], in closed form.

    phi = -sum_k alpha_k^2/2 sum_ij (r+s)_i (r-s)_j M_ik M_jk B_k[i, j] with B the damped
    triangle integral of the accumulated coupling.
    """
    s, r = (np.asarray(x, dtype=float) for x in pair)
    B = triangle_bilinear(profile, modes, dissipation)
    W = kernel_weights(modes)
    return float(-np.einsum("kij,kij,i,j->", W, B, r + s, r - s))


def kappa_form(T: float, n_modes: int, modes: NormalModeBasis, dissipation: DissipationModel,
               weights, pair, panels: int = 64, order: int = 16) -> np.ndarray:
    """Symmetric K with kappa = y^T K y for F_i = weights_i f, f in the real Fourier basis."""
    gamma = mode_decay(modes, dissipation)
    rates = 1j * modes.frequencies + gamma
    nu = harmonic_frequencies(T, n_modes)
    R = real_basis_to_complex(T, n_modes)
    c = _pair_weights(modes, *pair) @ np.asarray(weights, dtype=float)   # (K,)
    t, w = gl_panels(0.0, T, panels, order)
    t, w = t.ravel(), w.ravel()
    K = np.zeros((len(nu), len(nu)))
    for k, rate in enumerate(rates):
        # b_p(t) = exp(-gamma t) int_0^t exp(rate tau) phi_p(tau) dtau
        ph = t[:, None] * phi1((1j * nu[None, :] + rate) * t[:, None])    # (n, A)
        b = np.exp(-gamma[k] * t)[:, None] * (ph @ R.T)                     # (n, P)
        pref = gamma[k] * (dissipation.occupation[k] + 0.5) * abs(c[k]) ** 2
        K += pref * np.real((b * w[:, None]).T @ np.conj(b))
    return 0.5 * (K + K.T)


# ---------------------------------------------------------------- fidelities


def single_qubit_uhlmann(delta_phi: float, kappa: float, sigma_plus_ideal: complex) -> float:
    """F = sqrt(1 + 2 |<s+>_id|^2 (exp(-kappa) cos(delta_phi) - 1)) for a pure ideal state.

    This is sqrt(<psi_id| rho_real |psi_id>) when the coherence of rho_real is
    exp(i delta_phi - kappa) times the ideal one, so F = 1 at zero error.
    """
    if kappa < 0:
        raise ErrorModelError("kappa must be non-negative")
    a2 = abs(sigma_plus_ideal) ** 2
    if a2 > 0.25 + 1e-15:
        raise ErrorModelError("|<sigma+>| of a qubit cannot exceed 1/2")
    arg = 1.0 + 2.0 * a2 * (np.exp(-kappa) * np.cos(delta_phi) - 1.0)
    if arg < 0:
        raise ErrorModelError(f"fidelity radicand negative ({arg!r})")
    return float(np.sqrt(arg))


@dataclass(frozen=True)
class BranchDisplacement:
    """beta_k(s) = sum_i beta[k, i] s_i, evaluated at time T (rotating frame)."""
    beta: np.ndarray
    T: float

    def of(self, s) -> np.ndarray:
        return self.beta @ np.asarray(s, dtype=float)


def branch_displacement(profile, modes: NormalModeBasis) -> BranchDisplacement:
    """Residual displacements of a non-dissipative program, beta[k, i] = (i/sqrt2) D[k, i]."""
    return BranchDisplacement(1j / SQRT2 * closure_residual(profile, modes), float(profile.T))


def _spins(n):
    if n > BRUTE_FORCE_CAP:
        raise ErrorModelError(f"brute-force sums are capped at {BRUTE_FORCE_CAP} ions")
    return np.array(list(itertools.product([1.0, -1.0], repeat=n)))


def thermal_fidelity(delta_J, residuals: BranchDisplacement | None, nbar, state_coeffs=None) -> float:
    """Sum_{s,r} |c_s|^2 |c_r|^2 e^{i(dphi(s) - dphi(r))} prod_k exp(-|beta_k(s)-beta_k(r)|^2 (1/2 + nbar_k)).

    dphi(s) = s^T delta_J s / 2.  ``state_coeffs`` defaults to |+>^N.
    """
    dJ = np.asarray(delta_J, dtype=float)
    n = dJ.shape[0]
    S = _spins(n)
    p = np.full(len(S), 2.0**-n) if state_coeffs is None else np.abs(np.asarray(state_coeffs)) ** 2
    dphi = 0.5 * np.einsum("bi,ij,bj->b", S, dJ, S)
    ph = np.exp(1j * (dphi[:, None] - dphi[None, :]))
    if residuals is None:
        env = 1.0
    else:
        nb = np.atleast_1d(np.asarray(nbar, dtype=float))
        b = S @ residuals.beta.T                                    # (B, K)
        d2 = np.abs(b[:, None, :] - b[None, :, :]) ** 2
        env = np.exp(-np.sum(d2 * (0.5 + nb), axis=-1))
    val = np.einsum("s,r,sr->", p, p, ph * env)
    if abs(val.imag) > 1e-12:
        raise ErrorModelError(f"fidelity sum not real ({val.imag:.2e})")
    return float(val.real)


def bose_occupation(omega, temperature) -> np.ndarray:
    """Exact mean occupation 1/(exp(omega/T) - 1), as an alternative to nbar = T/omega."""
    return 1.0 / np.expm1(np.asarray(omega, dtype=float) / temperature)


# ---------------------------------------------------------------- control errors


def _add(a, b):
    if isinstance(a, FourierProfile) and isinstance(b, FourierProfile):
        return sum_profiles(a, b)
    if abs(a.T - b.T) > 1e-12:
        raise ErrorModelError("profiles must share the duration")
    return CallableForce(a.T, lambda t: a.force(t) + b.force(t), a.n_ions)


def control_perturbation(delta_F, base_F, modes: NormalModeBasis):
    """First-order effect of delta_F on top of base_F: (displacements, delta_J).

    delta_J is the exact cross term J(F + dF) - J(F) - J(dF), which is linear in dF.
    """
    if abs(delta_F.T - base_F.T) > 1e-12:
        raise ErrorModelError("profiles must share the duration")
    disp = branch_displacement(delta_F, modes)
    cross = (accumulated_coupling(_add(base_F, delta_F), modes)
             - accumulated_coupling(base_F, modes) - accumulated_coupling(delta_F, modes))
    return disp, cross


# ---------------------------------------------------------------- anharmonicity


@dataclass(frozen=True)
class AnharmonicEstimate:
    error: float
    x_max_bound: float
    speed_limit_T: float


def alpha_over_d(coulomb_length_ratio: float) -> float:
    """Oscillator length over the separation scale d, with d^3 = 2 d0^3."""
    return 2 ** (-1 / 3) / coulomb_length_ratio


def anharmonic_error(phase: float, T: float, alpha_over_d: float, f_max: float | None = None,
                     target: float = SPEED_LIMIT_ERROR) -> AnharmonicEstimate:
    """E = (alpha/d)^2 phase^{3/2} / (4^{3/2} T), the bound x_max < f_max T^2/2, and T with E = target."""
    if phase < 0 or T <= 0 or alpha_over_d <= 0:
        raise ErrorModelError("phase must be non-negative, T and alpha/d positive")
    k = alpha_over_d**2 * phase**1.5 / 4**1.5
    x_max = float("nan") if f_max is None else 0.5 * f_max * T**2
    return AnharmonicEstimate(k / T, x_max, k / target)


def alpha_over_d_for_limit(phase: float, T_limit: float, target: float = SPEED_LIMIT_ERROR) -> float:
    """alpha/d at which the error estimate reaches ``target`` exactly at T_limit."""
    return float(np.sqrt(target * T_limit * 4**1.5 / phase**1.5))


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class ErrorReport:
    kappa_dissip: float
    delta_J: np.ndarray
    thermal_fidelity: float
    uhlmann_single: float | None
    anharmonic_error: float
    speed_limit_T: float

    def to_dict(self) -> dict:
        return {
            "kappa_dissip": self.kappa_dissip,
            "delta_J": np.asarray(self.delta_J).tolist(),
            "thermal_fidelity": self.thermal_fidelity,
            "uhlmann_single": self.uhlmann_single,
            "anharmonic_error": self.anharmonic_error,
            "speed_limit_T": self.speed_limit_T,
        }


def error_report(profile, modes: NormalModeBasis, target_J, dissipation: DissipationModel,
                 nbar, alpha_d: float, pair=None) -> ErrorReport:
    """Assemble the budget for one design.  ``pair`` defaults to all-up vs first ion flipped."""
    n = modes.n_ions
    if pair is None:
        s = np.ones(n)
        r = s.copy()
        r[0] = -1
        pair = (s, r)
    J = accumulated_coupling(profile, modes)
    dJ = J - np.asarray(target_J, dtype=float)
    np.fill_diagonal(dJ, 0.0)
    kap = decay_kappa(profile, modes, dissipation, pair)
    F = thermal_fidelity(dJ, branch_displacement(profile, modes), nbar) if n <= BRUTE_FORCE_CAP else float("nan")
    dphi = dissipative_phase(profile, modes, dissipation, pair) - dissipative_phase(profile, modes, None, pair)
    uhl = single_qubit_uhlmann(dphi, kap, 0.5)
    phase = float(np.max(np.abs(J - np.diag(np.diag(J))))) if n > 1 else 0.0
    est = anharmonic_error(phase, profile.T, alpha_d)
    return ErrorReport(kap, dJ, F, uhl, est.error, est.speed_limit_T)
