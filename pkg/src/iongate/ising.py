"""Many-ion Ising couplings from force programs.

Three routes to a target coupling matrix J:

* ``pairwise_schedule``: one closing two-ion force per pair, played in sequence;
* ``common_mode_design``: one shared modulation f(t) with per-ion weights,
  F_i = w_i f, solved by Levenberg-Marquardt;
* ``cw_effective_coupling``: the time-averaged coupling of a single-frequency drive.

Coupling convention as in :mod:`iongate.kernel`: branch phases are s^T J s / 2,
so e^{i J_ij s_i s_j} per pair.  A graph with adjacency A maps to the design
target ``EDGE_PHASE * A``; the resulting state equals the graph state up to
single-qubit z rotations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .chain import NormalModeBasis
from .kernel import accumulated_coupling, closure_norm, closure_residual, fourier_forms
from .optimizer import InfeasibleError, optimal_force
from .profiles import FourierProfile, SegmentedProfile, real_basis_to_complex, real_basis_values

# Coupling per graph edge that reproduces exp(-i pi/8 sum_{i != j} A_ij sz sz) up to local z rotations.
EDGE_PHASE = np.pi / 4
FIDELITY_CAP = 20
LM_TOL = 1e-9
LM_MAX_ITER = 500
LM_STARTS = 8


# ---------------------------------------------------------------- targets


def graph_state_target(graph, n: int | None = None) -> np.ndarray:
    """Adjacency (J_ij = 1 on edges) for a 0/1 matrix or the names 'ghz' / 'cluster'."""
    if isinstance(graph, str):
        if n is None or n < 1:
            raise ValueError("named graphs need a positive ion count")
        name = graph.lower()
        if name == "ghz":
            return np.ones((n, n)) - np.eye(n)
        if name in ("cluster", "linearcluster", "linear_cluster"):
            return np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
        raise ValueError(f"unknown graph {graph!r}")
    A = np.asarray(graph, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if not np.all(np.isin(A, (0.0, 1.0))):
        raise ValueError("adjacency entries must be 0 or 1")
    return A * (1 - np.eye(len(A)))


def coupling_target(adjacency) -> np.ndarray:
    return EDGE_PHASE * np.asarray(adjacency, dtype=float)


def _upper(J):
    return J[np.triu_indices(len(J), 1)]


def wrap_coupling(delta):
    """Map coupling differences into [-pi/2, pi/2); a shift of J_ij by pi is a global phase."""
    return np.mod(np.asarray(delta, dtype=float) + np.pi / 2, np.pi) - np.pi / 2


# ---------------------------------------------------------------- fidelity


def entangler_fidelity(delta, cap: int = FIDELITY_CAP, chunk: int = 1 << 15) -> float:
    """|2^-N sum_s exp(-i sum_{i<j} dJ_ij s_i s_j)|, summed exactly over all 2^N configurations."""
    dJ = np.asarray(delta, dtype=float)
    n = len(dJ)
    if n > cap:
        raise ValueError(f"exact fidelity sum capped at {cap} ions (sampled estimator not provided)")
    off = 0.5 * (dJ + dJ.T)
    off = off - np.diag(np.diag(off))
    total = 0j
    bits = np.arange(n)[::-1]
    for start in range(0, 2**n, chunk):
        idx = np.arange(start, min(start + chunk, 2**n))
        S = 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)
        total += np.sum(np.exp(-0.5j * np.einsum("bi,ij,bj->b", S, off, S)))
    return float(abs(total) / 2**n)


# ---------------------------------------------------------------- pairwise


def pairwise_schedule(target, T: float, modes: NormalModeBasis, n_modes: int | None = None) -> SegmentedProfile:
    """Sequence of N(N-1)/2 two-ion forces, each closing every mode it drives.

    Pair (i, j) gets the window of length T / (N(N-1)/2) in row-major order.
    Closed pieces do not interact, so the accumulated couplings simply add.
    Entries may come back shifted by a multiple of pi, which is the same gate.
    """
    J = np.asarray(target, dtype=float)
    if not np.allclose(J, J.T):
        raise ValueError("target must be symmetric")
    n = modes.n_ions
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not pairs:
        raise ValueError("need at least two ions")
    tau = T / len(pairs)
    nm = n_modes or max(4, n + 2)
    pieces = []
    for p, (i, j) in enumerate(pairs):
        w = np.zeros(n)
        w[i] = 1.0
        w[j] = 1.0
        if J[i, j] == 0:
            pieces.append(FourierProfile(tau, np.zeros(2 * nm + 1), w, start=p * tau))
            continue
        try:
            d = optimal_force(tau, modes, nm, "norm", weights=w, target=J[i, j], pair=(i, j))
        except InfeasibleError:
            # Short windows reach only one sign; J_ij and J_ij -+ pi give the same gate.
            alt = J[i, j] - math.copysign(np.pi, J[i, j])
            try:
                d = optimal_force(tau, modes, nm, "norm", weights=w, target=alt, pair=(i, j))
            except InfeasibleError as exc:
                raise InfeasibleError(f"interval for pair ({i}, {j}) is infeasible: {exc}") from exc
        pieces.append(d.profile.shifted(p * tau))
    return SegmentedProfile(tuple(pieces))


# ---------------------------------------------------------------- Levenberg-Marquardt


@dataclass
class LMResult:
    x: np.ndarray
    residual: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def levenberg_marquardt(fun, x0, tol: float = LM_TOL, max_iter: int = LM_MAX_ITER,
                        lam0: float = 1e-3, lam_min: float = 1e-15, lam_max: float = 1e12) -> LMResult:
    """Minimize |r(x)|^2 for ``fun(x) -> (r, Jacobian)``; works for any shape of Jacobian.

    Damping is scaled by the mean curvature and adapted by x0.3 on accepted steps
    and x3 on rejected ones, so accepted residual norms never increase.
    """
    x = np.asarray(x0, dtype=float).copy()
    r, A = fun(x)
    cost = r @ r
    lam = lam0
    history = [cost]
    for it in range(1, max_iter + 1):
        if np.max(np.abs(r)) < tol:
            return LMResult(x, r, it - 1, True, history)
        m, n = A.shape
        small = A @ A.T if m <= n else A.T @ A
        scale = max(np.trace(small) / len(small), 1e-300)
        while True:
            H = small + lam * scale * np.eye(len(small))
            try:
                if m <= n:
                    dx = -A.T @ sla.solve(H, r, assume_a="pos")
                else:
                    dx = -sla.solve(H, A.T @ r, assume_a="pos")
            except (sla.LinAlgError, ValueError):
                dx = None
            if dx is not None and np.all(np.isfinite(dx)):
                r_new, A_new = fun(x + dx)
                c_new = r_new @ r_new
                if np.isfinite(c_new) and c_new < cost:
                    x, r, A, cost = x + dx, r_new, A_new, c_new
                    lam = max(lam * 0.3, lam_min)
                    history.append(cost)
                    break
            lam *= 3.0
            if lam > lam_max:
                return LMResult(x, r, it, bool(np.max(np.abs(r)) < tol), history)
    return LMResult(x, r, max_iter, bool(np.max(np.abs(r)) < tol), history)


# ---------------------------------------------------------------- common modulation


@dataclass(frozen=True)
class EntanglerDesign:
    weights: np.ndarray
    coefficients: np.ndarray
    T: float
    achieved: np.ndarray
    target: np.ndarray
    delta: np.ndarray
    fidelity_estimate: float
    converged: bool
    residual: float
    closure: float
    n_modes: int
    seed: int

    @property
    def profile(self) -> FourierProfile:
        return FourierProfile(self.T, self.coefficients, self.weights)

    def to_dict(self) -> dict:
        return {
            "T": float(self.T),
            "n_modes": int(self.n_modes),
            "weights": self.weights.tolist(),
            "coefficients": [[float(z.real), float(z.imag)] for z in self.coefficients],
            "achieved": self.achieved.tolist(),
            "target": self.target.tolist(),
            "delta": self.delta.tolist(),
            "fidelity_estimate": float(self.fidelity_estimate),
            "converged": bool(self.converged),
            "residual": float(self.residual),
            "closure": float(self.closure),
            "seed": int(self.seed),
        }


def default_mode_budget(n: int) -> int:
    """Harmonic count giving max(N(N-1)/2 + N + 4, 50/30 N) real coefficients."""
    count = max(n * (n - 1) // 2 + n + 4, math.ceil(50 * n / 30))
    return max(3, math.ceil((count - 1) / 2))


class CommonModeProblem:
    """Residual r(w, z) = upper(J(w, P z) - target) with P spanning the closing subspace."""

    def __init__(self, target, T: float, modes: NormalModeBasis, n_modes: int):
        self.target = np.asarray(target, dtype=float)
        self.T, self.modes, self.n_modes = float(T), modes, int(n_modes)
        n = modes.n_ions
        Q, E = fourier_forms(T, n_modes, modes)
        C = np.vstack([np.vstack([e.real, e.imag]) for e in E])
        _, s, Vh = np.linalg.svd(C)
        rank = int(np.sum(s > 1e-10 * s[0]))
        self.P = Vh[rank:].T
        if self.P.shape[1] == 0:
            raise InfeasibleError("no closing modulation for this harmonic budget")
        W = modes.lengths**2 / 2
        self.Qz = (self.P.T @ Q @ self.P) * W[:, None, None]
        self.M = modes.mode_matrix
        self.iu = np.triu_indices(n, 1)
        self.n = n

    @property
    def n_free(self) -> int:
        return self.P.shape[1]

    def coupling(self, w, z):
        q = np.einsum("p,kpq,q->k", z, self.Qz, z)
        K = (self.M * q) @ self.M.T
        return np.outer(w, w) * K, K

    def __call__(self, x):
        n = self.n
        w, z = x[:n], x[n:]
        J, K = self.coupling(w, z)
        a, b = self.iu
        res = J[a, b] - self.target[a, b]
        rows = np.arange(len(a))
        dw = np.zeros((len(a), n))
        dw[rows, a] += w[b] * K[a, b]
        dw[rows, b] += w[a] * K[a, b]
        dq = 2 * np.einsum("kpq,q->kp", self.Qz, z)
        dz = (w[a] * w[b])[:, None] * ((self.M[a] * self.M[b]) @ dq)
        return res, np.hstack([dw, dz])

    def start(self, rng):
        w = 1.0 + 0.2 * rng.standard_normal(self.n)
        z = rng.standard_normal(self.n_free)
        J, _ = self.coupling(w, z)
        scale = np.max(np.abs(_upper(self.target))) / max(np.max(np.abs(_upper(J))), 1e-300)
        return np.concatenate([w, z * np.sqrt(scale)])

    def design(self, x, seed, converged) -> EntanglerDesign:
        n = self.n
        w, z = x[:n], x[n:]
        g = np.max(np.abs(w))
        w, z = w / g, z * g                       # |w_i| <= 1 with J unchanged
        y = self.P @ z
        c = real_basis_to_complex(self.T, self.n_modes).T @ y
        c = 0.5 * (c + np.conj(c[::-1]))
        profile = FourierProfile(self.T, c, w)
        J = accumulated_coupling(profile, self.modes)
        dJ = J - self.target
        np.fill_diagonal(dJ, 0.0)
        resid = float(np.max(np.abs(wrap_coupling(_upper(dJ))))) if n > 1 else 0.0
        fid = entangler_fidelity(dJ) if n <= FIDELITY_CAP else float("nan")
        clo = closure_norm(closure_residual(profile, self.modes))
        return EntanglerDesign(w, c, self.T, J, self.target.copy(), dJ, fid, converged and resid < 10 * LM_TOL,
                               resid, clo, self.n_modes, int(seed))


def common_mode_design(target, T: float, modes: NormalModeBasis, n_modes: int | None = None,
                       seed: int = 0, starts: int = LM_STARTS, max_iter: int = LM_MAX_ITER,
                       tol: float = LM_TOL, init: EntanglerDesign | None = None) -> EntanglerDesign:
    """Shared modulation with per-ion weights realizing ``target`` (off-diagonal part).

    Closure is exact by construction (the modulation lives in the closing subspace).
    Starts are drawn from ``numpy.random.default_rng(seed)``; ``init`` adds a warm
    start from an earlier design, e.g. along a continuation in T.  When no start
    reaches ``tol`` the best design is returned with ``converged=False``.
    """
    target = np.asarray(target, dtype=float)
    if not np.allclose(target, target.T):
        raise ValueError("target must be symmetric")
    n = modes.n_ions
    nm = default_mode_budget(n) if n_modes is None else int(n_modes)
    prob = CommonModeProblem(target, T, modes, nm)
    rng = np.random.default_rng(seed)
    x0s = []
    if init is not None:
        x0s.append(_warm_start(prob, init))
    x0s += [prob.start(rng) for _ in range(starts)]
    best = None
    for x0 in x0s:
        res = levenberg_marquardt(prob, x0, tol=tol, max_iter=max_iter)
        if best is None or np.max(np.abs(res.residual)) < np.max(np.abs(best.residual)):
            best = res
        if res.converged:
            break
    return prob.design(best.x, seed, best.converged)


def _warm_start(prob: CommonModeProblem, d: EntanglerDesign) -> np.ndarray:
    """Project an earlier design onto this problem's closing subspace."""
    old = FourierProfile(d.T, d.coefficients, d.weights)
    # Same shape in normalized time, resampled on the new window.
    t = np.linspace(0.0, prob.T, 4 * (2 * prob.n_modes + 1))
    f = old.modulation(t * d.T / prob.T)
    B = real_basis_values(prob.T, prob.n_modes, t)
    y, *_ = np.linalg.lstsq(B.T, f, rcond=None)
    return np.concatenate([d.weights, prob.P.T @ y])


# ---------------------------------------------------------------- continuous wave


def cw_effective_coupling(amplitudes, drive_freq: float, modes: NormalModeBasis, tol: float = 1e-6) -> np.ndarray:
    """Time-averaged coupling rate of F_i(t) = f_i cos(Omega t).

    J_ij = sum_k f_i M_ik M_jk f_j [1 + delta_{Omega,0}] / (2 (omega_k^2 - Omega^2)).
    """
    f = np.asarray(amplitudes, dtype=float)
    Om = float(drive_freq)
    if Om < 0:
        raise ValueError("drive frequency must be non-negative")
    gap = np.abs(modes.frequencies - Om)
    if np.any(gap < tol):
        raise ValueError(f"drive at {Om:g} is resonant with a mode")
    fac = (2.0 if Om == 0 else 1.0) / (2.0 * (modes.frequencies**2 - Om**2))
    M = modes.mode_matrix * f[:, None]
    return (M * fac) @ M.T


# ---------------------------------------------------------------- Trotter


# Global rotations R with R sz R^dagger = s^axis, as (rotation axis, angle).
AXIS_ROTATION = {"z": None, "x": ("y", np.pi / 2), "y": ("x", -np.pi / 2)}


@dataclass(frozen=True)
class TrotterStep:
    axis: str
    rotation: tuple | None
    J: np.ndarray
    h: np.ndarray
    duration: float


@dataclass(frozen=True)
class TrotterSchedule:
    steps: tuple
    n_steps: int
    T: float
    error_bound: float | None

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "n_steps": self.n_steps,
            "error_bound": self.error_bound,
            "steps": [{"axis": s.axis,
                       "rotation": None if s.rotation is None else {"axis": s.rotation[0], "angle": s.rotation[1]},
                       "J": s.J.tolist(), "h": s.h.tolist(), "duration": s.duration} for s in self.steps],
        }


def trotter_schedule(Jx, Jy, Jz, hx, hy, hz, T: float, n_steps: int, bound_cap: int = 8) -> TrotterSchedule:
    """First-order splitting of H = sum_a [sum_{i != j} J^a s^a s^a + sum_i h^a s^a] into z-type segments.

    Each x or y segment is the z-type evolution conjugated by the global rotation in
    ``AXIS_ROTATION``.  Axes with no terms are skipped.  The bound
    T^2 / (2 n) * sum_{a<b} ||[H_a, H_b]|| is computed for N <= ``bound_cap``.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError("n_steps must be a positive integer")
    parts = {}
    for axis, J, h in (("x", Jx, hx), ("y", Jy, hy), ("z", Jz, hz)):
        J = np.asarray(J, dtype=float)
        h = np.asarray(h, dtype=float)
        if np.any(J - np.diag(np.diag(J))) or np.any(h):
            parts[axis] = (J, h)
    if not parts:
        parts["z"] = (np.asarray(Jz, dtype=float), np.asarray(hz, dtype=float))
    tau = T / n_steps
    steps = tuple(TrotterStep(a, AXIS_ROTATION[a], J, h, tau)
                  for _ in range(n_steps) for a, (J, h) in parts.items())
    n = len(next(iter(parts.values()))[1])
    bound = None
    if n <= bound_cap:
        from .oracle import spin_hamiltonian
        H = [spin_hamiltonian({a: J}, {a: h}, n) for a, (J, h) in parts.items()]
        comm = sum(np.linalg.norm(H[a] @ H[b] - H[b] @ H[a], 2) for a in range(len(H)) for b in range(a + 1, len(H)))
        bound = float(T**2 / (2 * n_steps) * comm)
    return TrotterSchedule(steps, int(n_steps), float(T), bound)
