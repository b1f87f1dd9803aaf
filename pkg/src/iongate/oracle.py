"""Brute-force verifiers, independent of the closed-form kernels.

Everything here integrates equations of motion directly (scipy's DOP853 at
fixed 1e-12 tolerances) or builds explicit state vectors, so agreement with
:mod:`iongate.kernel` and :mod:`iongate.error_model` is a real check.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.optimize import minimize_scalar

from .chain import NormalModeBasis, TrapSetup, equilibrium_positions
from .profiles import KickTrain, SegmentedProfile

RTOL = 1e-12
ATOL = 1e-12
SQRT2 = np.sqrt(2.0)
SPIN_CAP = 14

# Exponent convention of spin_evolve: psi_s -> psi_s exp(-i angle sum_{i != j} J_ij s_i s_j).
# GRAPH_ANGLE with an adjacency matrix gives the graph-state map; COUPLING_ANGLE
# applies a coupling matrix J as the branch phases exp(i s^T J s / 2).
GRAPH_ANGLE = np.pi / 8
COUPLING_ANGLE = -0.5


class OracleError(RuntimeError):
    pass


# ---------------------------------------------------------------- branches


def all_spins(n: int) -> np.ndarray:
    """All configurations in {+1, -1}^n; row b has s_i = +1 where bit i of b is 0."""
    return np.array(list(itertools.product([1.0, -1.0], repeat=n)))


def _breakpoints(profile) -> list[float]:
    if isinstance(profile, SegmentedProfile):
        pts = {0.0, profile.T}
        for p in profile.pieces:
            pts.update((p.start, p.end))
        return sorted(pts)
    return [0.0, profile.T]


def integrate_branch(profile, modes: NormalModeBasis, s, z0=None):
    """Integrate dz_k/dt = -i w_k z_k + i f_k/sqrt2, dphi/dt = sum_k f_k Re z_k / sqrt2.

    f_k(t) = alpha_k sum_i M_ik s_i F_i(t).  Kicks are exact jumps of the
    momentum quadrature; Re z is continuous across them so the phase jump is
    p_k Re z_k / sqrt2.
    Returns (z(T), phi(T)).
    """
    s = np.asarray(s, dtype=float)
    w, M, alpha = modes.frequencies, modes.mode_matrix, modes.lengths
    K = len(w)
    z =np.zeros(K, dtype=complex) if z0 is None else np.asarray(z0, dtype=complex).copy()
    phase = 0.0

    def free_or_forced(t0, t1, force, z, phase):
        if t1 <= t0:
            return z, phase

        def rhs(t, y):
            zz = y[:K] + 1j * y[K:2 * K]
            f = force(t) if force is not None else np.zeros(K)
            dz = -1j * w * zz + 1j * f / SQRT2
            return np.concatenate([dz.real, dz.imag, [np.sum(f * zz.real) / SQRT2]])

        y0 = np.concatenate([z.real, z.imag, [phase]])
        sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", rtol=RTOL, atol=ATOL)
        if not sol.success:
            raise OracleError(f"branch integration failed: {sol.message}")
        y = sol.y[:, -1]
        return y[:K] + 1j * y[K:2 * K], y[-1]

    if isinstance(profile, KickTrain):
        P = profile.impulses()                  # (N, L)
        p_modes = alpha[:, None] * (M.T * s[None, :]) @ P    # (K, L)
        t_prev = 0.0
        for l, tl in enumerate(profile.times):
            z, phase = free_or_forced(t_prev, tl, None, z, phase)
            phase += np.sum(p_modes[:, l] * z.real) / SQRT2
            z = z + 1j * p_modes[:, l] / SQRT2
            t_prev = tl
        z, phase = free_or_forced(t_prev, profile.T, None, z, phase)
        return z, float(phase)

    pts = _breakpoints(profile)
    for a, b in zip(pts, pts[1:]):
        mid = 0.5 * (a + b)
        z, phase = free_or_forced(a, b, lambda t, m=mid: _mode_force(profile, M, alpha, s, t, m), z, phase)
    return z, float(phase)


def _mode_force(profile, M, alpha, s, t, window_mid=None):
    # Pieces are closed windows, so at a shared endpoint only the piece owning
    # the current integration interval may contribute.
    if isinstance(profile, SegmentedProfile) and window_mid is not None:
        F = np.zeros(M.shape[0])
        for p in profile.pieces:
            if p.start <= window_mid <= p.end:
                F = p.weights * p.modulation(np.array([t]))[0]
    else:
        F = profile.force(np.array([t]))[:, 0]
    return alpha * ((s * F) @ M)


@dataclass(frozen=True)
class BranchFit:
    J: np.ndarray            # coefficients of s_i s_j (i < j), symmetric, zero diagonal
    local: np.ndarray
    constant: float
    residual: float


def branch_regression(spins: np.ndarray, phases: np.ndarray) -> BranchFit:
    """Least squares of phi(s) against {1, s_i, s_i s_j}."""
    n = spins.shape[1]
    iu = np.triu_indices(n, 1)
    A = np.hstack([np.ones((len(spins), 1)), spins, spins[:, iu[0]] * spins[:, iu[1]]])
    coef, *_ = np.linalg.lstsq(A, phases, rcond=None)
    J = np.zeros((n, n))
    J[iu] = coef[1 + n:]
    J = J + J.T
    res = float(np.max(np.abs(A @ coef - phases)))
    return BranchFit(J, coef[1:1 + n], float(coef[0]), res)


def oracle_coupling(profile, modes: NormalModeBasis, z0=None):
    """Integrate every spin branch and regress the coupling matrix.

    Returns (BranchFit, final displacements per branch (2^N, K)).
    """
    spins = all_spins(modes.n_ions)
    phases, finals = [], []
    for s in spins:
        z, ph = integrate_branch(profile, modes, s, z0)
        phases.append(ph)
        finals.append(z)
    return branch_regression(spins, np.array(phases)), np.array(finals)


# ---------------------------------------------------------------- master moments


def integrate_master_moments(omega: float, gamma: float, nbar: float, g_s, g_r, T: float):
    """Moment equations of one damped mode for the branch pair (s, r).

    beta' = -gamma beta - i (conj g_r - conj g_s),
    kappa' = gamma (nbar + 1/2) |beta|^2,
    phi' = Re[(g_r + g_s) beta].
    ``g_s`` and ``g_r`` are complex rotating-frame couplings of time.
    Returns (beta(T), kappa(T), phi(T)).
    """
    def rhs(t, y):
        b = y[0] + 1j * y[1]
        gs, gr = g_s(t), g_r(t)
        db = -gamma * b - 1j * (np.conj(gr) - np.conj(gs))
        return [db.real, db.imag, gamma * (nbar + 0.5) * abs(b) ** 2, np.real((gr + gs) * b)]

    sol = solve_ivp(rhs, (0.0, T), [0.0, 0.0, 0.0, 0.0], method="DOP853", rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise OracleError(sol.message)
    y = sol.y[:, -1]
    return complex(y[0], y[1]), float(y[2]), float(y[3])


# ---------------------------------------------------------------- full Coulomb


@dataclass(frozen=True)
class CoulombRun:
    t: np.ndarray
    x: np.ndarray
    p: np.ndarray
    phase: float
    position_defect: float
    momentum_defect: float


def coulomb_energy(x, p, setup: TrapSetup) -> float:
    R = setup.coulomb_length_ratio
    c = setup.centers * R
    iu = np.triu_indices(len(x), 1)
    return float(0.5 * np.sum(p**2) + 0.5 * np.sum((x - c) ** 2) + R**3 * np.sum(1.0 / np.abs(x[iu[0]] - x[iu[1]])))


def integrate_full_coulomb(profile, setup: TrapSetup, s, x0=None, p0=None, samples: int = 201) -> CoulombRun:
    """Classical chain with the full Coulomb potential, lengths in oscillator units.

    x_i'' = -(x_i - R c_i) + R^3 sum_j sgn(x_i - x_j)/(x_i - x_j)^2 + s_i F_i(t),
    R = coulomb_length_ratio.  The branch phase is (1/2) sum_i s_i int F_i (x_i - x_i(0)).
    """
    s = np.asarray(s, dtype=float)
    R = setup.coulomb_length_ratio
    n = setup.n_ions
    c = setup.centers * R
    x_eq = equilibrium_positions(setup) * R
    x_init = x_eq if x0 is None else np.asarray(x0, dtype=float)
    p_init = np.zeros(n) if p0 is None else np.asarray(p0, dtype=float)
    forced = profile is not None

    def rhs(t, y):
        x, p = y[:n], y[n:2 * n]
        d = x[:, None] - x[None, :]
        np.fill_diagonal(d, np.inf)
        acc = -(x - c) + R**3 * np.sum(np.sign(d) / d**2, axis=1)
        dphi = 0.0
        if forced:
            F = s * profile.force(np.array([t]))[:, 0]
            acc = acc + F
            dphi = 0.5 * np.sum(F * (x - x_init))
        return np.concatenate([p, acc, [dphi]])

    def crossing(t, y):
        return np.min(np.diff(y[:n])) if n > 1 else 1.0
    crossing.terminal = True

    T = profile.T if forced else 10 * 2 * np.pi
    t_eval = np.linspace(0.0, T, samples)
    sol = solve_ivp(rhs, (0.0, T), np.concatenate([x_init, p_init, [0.0]]), method="DOP853",
                    rtol=RTOL, atol=ATOL, t_eval=t_eval, events=crossing)
    if sol.status == 1:
        raise OracleError("ions crossed: harmonic-chain model breaks down")
    if not sol.success:
        raise OracleError(sol.message)
    y = sol.y
    x, p = y[:n], y[n:2 * n]
    return CoulombRun(sol.t, x, p, float(y[-1, -1]),
                      float(np.linalg.norm(x[:, -1] - x_init)), float(np.linalg.norm(p[:, -1] - p_init)))


# ---------------------------------------------------------------- spin states


def _check_cap(n: int):
    if n > SPIN_CAP:
        raise OracleError(f"state-vector oracle limited to {SPIN_CAP} spins, got {n}")


def plus_state(n: int) -> np.ndarray:
    _check_cap(n)
    return np.full(2**n, 2 ** (-n / 2), dtype=complex)


def spin_evolve(J, convention_angle: float, psi=None) -> np.ndarray:
    """Apply exp(-i angle sum_{i != j} J_ij sz_i sz_j) to ``psi`` (default |+>^N)."""
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    _check_cap(n)
    psi = plus_state(n) if psi is None else np.asarray(psi, dtype=complex)
    S = all_spins(n)
    Joff = J - np.diag(np.diag(J))
    energy = np.einsum("bi,ij,bj->b", S, Joff, S)
    return psi * np.exp(-1j * convention_angle * energy)


def state_overlap(a, b) -> float:
    return float(abs(np.vdot(a, b)))


def coupling_state(J) -> np.ndarray:
    """|+>^N after the branch phases of coupling matrix J."""
    return spin_evolve(J, COUPLING_ANGLE)


def ghz_overlap(psi) -> float:
    """Overlap with (|+...+> + e^{i chi}|-...->)/sqrt2, maximized over chi and a uniform z rotation.

    This is the GHZ state of the sigma^x basis; a global Hadamard layer maps it to
    (|0...0> + e^{i chi}|1...1>)/sqrt2.
    """
    psi = np.asarray(psi, dtype=complex)
    n = int(round(np.log2(len(psi))))
    S = all_spins(n)
    m = S.sum(axis=1)
    plus = plus_state(n)
    minus = plus * np.prod(S, axis=1)

    def neg(theta):
        rot = psi * np.exp(-0.5j * theta * m)
        return -(abs(np.vdot(plus, rot)) + abs(np.vdot(minus, rot))) / SQRT2

    grid = np.linspace(0, 2 * np.pi, 65)
    best = grid[np.argmin([neg(t) for t in grid])]
    res = minimize_scalar(neg, bounds=(best - 0.1, best + 0.1), method="bounded", options={"xatol": 1e-12})
    return float(-min(res.fun, neg(best)))


def _spin_ops(psi, n):
    """(Sx psi, Sy psi, Sz psi) with S = sum_i sigma_i / 2."""
    S = all_spins(n)
    dim = len(psi)
    idx = np.arange(dim)
    sx = np.zeros(dim, dtype=complex)
    sy = np.zeros(dim, dtype=complex)
    for i in range(n):
        bit = 1 << (n - 1 - i)
        flipped = psi[idx ^ bit]
        sx += flipped
        # sigma_y |0> = i|1>, sigma_y |1> = -i|0>; source state of each target is idx ^ bit
        sy += 1j * S[idx ^ bit, i] * flipped
    sz = S.sum(axis=1) * psi
    return 0.5 * sx, 0.5 * sy, 0.5 * sz


def squeezing_metric(psi) -> float:
    """xi^2 = N min Var(S_perp) / |<S>|^2 over directions normal to the mean spin."""
    psi = np.asarray(psi, dtype=complex)
    n = int(round(np.log2(len(psi))))
    _check_cap(n)
    ops = _spin_ops(psi, n)
    mean = np.array([np.vdot(psi, o).real for o in ops])
    norm = np.linalg.norm(mean)
    if norm < 1e-9:
        raise OracleError("mean spin vanishes: squeezing parameter undefined")
    e = mean / norm
    trial = np.array([1.0, 0.0, 0.0]) if abs(e[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e, e1)
    a = sum(c * o for c, o in zip(e1, ops))
    b = sum(c * o for c, o in zip(e2, ops))
    ma, mb = np.vdot(psi, a).real, np.vdot(psi, b).real
    cov = np.array([[np.vdot(a, a).real - ma**2, np.vdot(a, b).real - ma * mb],
                    [np.vdot(a, b).real - ma * mb, np.vdot(b, b).real - mb**2]])
    return float(n * np.linalg.eigvalsh(cov)[0] / norm**2)


def one_axis_twisted(n: int, theta: float) -> np.ndarray:
    """exp(-i theta Jz^2)|+>^N with Jz = sum sz/2."""
    m = all_spins(n).sum(axis=1) / 2
    return plus_state(n) * np.exp(-1j * theta * m**2)


# ---------------------------------------------------------------- dense operators


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli(axis: str, i: int, n: int) -> np.ndarray:
    _check_cap(n)
    out = np.ones((1, 1), dtype=complex)
    for k in range(n):
        out = np.kron(out, _PAULI[axis] if k == i else np.eye(2))
    return out


def spin_hamiltonian(Js: dict, hs: dict, n: int) -> np.ndarray:
    """sum_alpha [sum_{i != j} J^alpha_ij s^alpha_i s^alpha_j + sum_i h^alpha_i s^alpha_i]."""
    H = np.zeros((2**n, 2**n), dtype=complex)
    for axis in "xyz":
        J = np.asarray(Js.get(axis, np.zeros((n, n))), dtype=float)
        h = np.asarray(hs.get(axis, np.zeros(n)), dtype=float)
        P = [pauli(axis, i, n) for i in range(n)]
        for i in range(n):
            H += h[i] * P[i]
            for j in range(n):
                if i != j and J[i, j] != 0:
                    H += J[i, j] * P[i] @ P[j]
    return H


def global_rotation(axis: str, angle: float, n: int) -> np.ndarray:
    """exp(-i angle/2 sum_i sigma^axis_i) as a dense matrix."""
    g = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        g += pauli(axis, i, n)
    return expm(-0.5j * angle * g)


def replay_trotter(schedule, psi) -> np.ndarray:
    """Apply each step as R exp(-i H_z tau) R^dagger with the step's rotation R."""
    psi = np.asarray(psi, dtype=complex)
    n = int(round(np.log2(len(psi))))
    for step in schedule.steps:
        U = expm(-1j * step.duration * spin_hamiltonian({"z": step.J}, {"z": step.h}, n))
        if step.rotation is not None:
            R = global_rotation(step.rotation[0], step.rotation[1], n)
            U = R @ U @ R.conj().T
        psi = U @ psi
    return psi


def exact_spin_evolution(Js: dict, hs: dict, T: float, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    n = int(round(np.log2(len(psi))))
    return expm(-1j * T * spin_hamiltonian(Js, hs, n)) @ psi
