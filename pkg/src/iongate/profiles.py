"""Force programs and bath parameters.

Every profile can be lowered to a list of :class:`ExpSegment`, a sum of
complex exponentials per ion on a time window.  Closure integrals and
phase double integrals are then evaluated in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class DissipationModel:
    gamma: np.ndarray
    occupation: np.ndarray

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        n = np.atleast_1d(np.asarray(self.occupation, dtype=float))
        if g.shape != n.shape:
            raise ValueError("gamma and occupation must have matching lengths")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(n))):
            raise ValueError("dissipation parameters must be finite")
        if np.any(g < 0) or np.any(n < 0):
            raise ValueError("dissipation parameters must be non-negative")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "occupation", n)

    @classmethod
    def uniform(cls, n_modes: int, gamma: float, occupation: float = 0.0) -> "DissipationModel":
        return cls(np.full(n_modes, gamma), np.full(n_modes, occupation))


def mode_decay(modes, dissipation: DissipationModel | None) -> np.ndarray:
    if dissipation is None:
        return np.zeros(modes.n_modes)
    if len(dissipation.gamma) != modes.n_modes:
        raise ValueError("dissipation model length does not match the mode count")
    return dissipation.gamma


@dataclass(frozen=True)
class ExpSegment:
    """F_i(t) = sum_a C[i, a] exp(i nu_a (t - start)) for start <= t < start + T."""

    start: float
    T: float
    nu: np.ndarray
    C: np.ndarray


# ---------------------------------------------------------------- Fourier


def harmonic_frequencies(T: float, n_modes: int) -> np.ndarray:
    return 2 * np.pi * np.arange(-n_modes, n_modes + 1) / T


def real_basis_to_complex(T: float, n_modes: int) -> np.ndarray:
    """Matrix R with c = R.T @ y mapping orthonormal real coordinates to c_m.

    Real basis order: 1/sqrt(T), then sqrt(2/T) cos(2 pi m t/T), sqrt(2/T) sin(2 pi m t/T)
    for m = 1..n_modes.
    """
    nb = 2 * n_modes + 1
    R = np.zeros((nb, nb), dtype=complex)
    mid = n_modes
    R[0, mid] = 1 / np.sqrt(T)
    a = np.sqrt(2 / T) / 2
    for m in range(1, n_modes + 1):
        R[2 * m - 1, mid + m] = a
        R[2 * m - 1, mid - m] = a
        R[2 * m, mid + m] = -1j * a
        R[2 * m, mid - m] = 1j * a
    return R


def real_basis_values(T: float, n_modes: int, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    rows = [np.full_like(t, 1 / np.sqrt(T))]
    for m in range(1, n_modes + 1):
        x = 2 * np.pi * m * t / T
        rows += [np.sqrt(2 / T) * np.cos(x), np.sqrt(2 / T) * np.sin(x)]
    return np.array(rows)


@dataclass(frozen=True)
class FourierProfile:
    """Common modulation f(t) = sum_m c_m e^{2 pi i m t/T} with per-ion weights.

    F_i(t) = weights[i] * f(t - start) on [start, start + T].
    """

    T: float
    coefficients: np.ndarray
    weights: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise ValueError("coefficients must have odd length 2*n_modes+1")
        if not np.allclose(c, np.conj(c[::-1]), atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValueError("coefficients must satisfy c_{-m} = conj(c_m)")
        if not self.T > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "weights", np.atleast_1d(np.asarray(self.weights, dtype=float)))

    @property
    def n_modes(self) -> int:
        return (len(self.coefficients) - 1) // 2

    @property
    def n_ions(self) -> int:
        return len(self.weights)

    @property
    def end(self) -> float:
        return self.start + self.T

    @classmethod
    def from_real(cls, T: float, y, weights, start: float = 0.0) -> "FourierProfile":
        y = np.asarray(y, dtype=float)
        n_modes = (len(y) - 1) // 2
        c = real_basis_to_complex(T, n_modes).T @ y
        c = 0.5 * (c + np.conj(c[::-1]))
        return cls(T, c, weights, start)

    def real_coordinates(self) -> np.ndarray:
        n, mid = self.n_modes, self.n_modes
        c = self.coefficients
        y = np.empty(2 * n + 1)
        y[0] = c[mid].real * np.sqrt(self.T)
        s = np.sqrt(2 / self.T)
        for m in range(1, n + 1):
            y[2 * m - 1] = 2 * c[mid + m].real / s
            y[2 * m] = -2 * c[mid + m].imag / s
        return y

    def modulation(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        nu = harmonic_frequencies(self.T, self.n_modes)
        tau = t - self.start
        val = np.real(np.exp(1j * np.multiply.outer(tau, nu)) @ self.coefficients)
        return np.where((tau >= 0) & (tau <= self.T), val, 0.0)

    def force(self, t) -> np.ndarray:
        return np.multiply.outer(self.weights, self.modulation(t))

    def scaled(self, factor: float) -> "FourierProfile":
        return FourierProfile(self.T, self.coefficients * factor, self.weights, self.start)

    def shifted(self, start: float) -> "FourierProfile":
        return FourierProfile(self.T, self.coefficients, self.weights, start)

    def segments(self) -> list[ExpSegment]:
        nu = harmonic_frequencies(self.T, self.n_modes)
        return [ExpSegment(self.start, self.T, nu, np.outer(self.weights, self.coefficients))]

    def repeated(self, times: int) -> "FourierProfile":
        """The same modulation played ``times`` times back to back."""
        k = int(times)
        if k < 1:
            raise ValueError("times must be a positive integer")
        c = np.zeros(2 * k * self.n_modes + 1, dtype=complex)
        c[k * self.n_modes + k * np.arange(-self.n_modes, self.n_modes + 1)] = self.coefficients
        return FourierProfile(k * self.T, c, self.weights, self.start)

    def to_dict(self) -> dict:
        return {
            "T": float(self.T),
            "n_modes": int(self.n_modes),
            "coefficients": [[float(z.real), float(z.imag)] for z in self.coefficients],
            "weights": self.weights.tolist(),
            "start": float(self.start),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FourierProfile":
        c = np.array([complex(a, b) for a, b in d["coefficients"]])
        if "n_modes" in d and len(c) != 2 * int(d["n_modes"]) + 1:
            raise ValueError("coefficients length does not match n_modes")
        return cls(float(d["T"]), c, d["weights"], float(d.get("start", 0.0)))


# ---------------------------------------------------------------- kicks


@dataclass(frozen=True)
class KickTrain:
    """Instantaneous state-dependent kicks.

    Group l transfers momentum 2 * momentum * weights[l] (a pulse pair gives
    twice the single-photon recoil) to every participating ion, scaled by
    ``participation[i]``.
    """

    times: np.ndarray
    weights: np.ndarray
    momentum: float
    participation: np.ndarray
    T: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.shape != w.shape:
            raise ValueError("times and weights must match")
        if np.any(np.diff(t) < 0):
            raise ValueError("kick times must be ascending")
        if len(t) and (t[0] < -1e-12 or t[-1] > self.T + 1e-12):
            raise ValueError("kick times must lie inside [0, T]")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "participation", np.atleast_1d(np.asarray(self.participation, dtype=float)))

    @property
    def n_ions(self) -> int:
        return len(self.participation)

    def impulses(self) -> np.ndarray:
        """(n_ions, n_kicks) momentum transfers."""
        return np.outer(self.participation, 2 * self.momentum * self.weights)

    def scaled(self, factor: float) -> "KickTrain":
        return KickTrain(self.times, self.weights * factor, self.momentum, self.participation, self.T, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "T": float(self.T),
            "kicks": [[float(a), float(b)] for a, b in zip(self.times, self.weights)],
            "momentum": float(self.momentum),
            "participation": self.participation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KickTrain":
        k = np.asarray(d["kicks"], dtype=float).reshape(-1, 2)
        return cls(k[:, 0], k[:, 1], float(d["momentum"]), d.get("participation", [1.0, 1.0]), float(d["T"]))


# ---------------------------------------------------------------- composites


@dataclass(frozen=True)
class SegmentedProfile:
    """Sequence of Fourier pieces on disjoint windows (per-piece ion weights)."""

    pieces: tuple[FourierProfile, ...]

    def __post_init__(self):
        pieces = tuple(sorted(self.pieces, key=lambda p: p.start))
        for a, b in zip(pieces, pieces[1:]):
            if b.start < a.end - 1e-12:
                raise ValueError("segments overlap")
        if len({p.n_ions for p in pieces}) > 1:
            raise ValueError("segments disagree on the ion count")
        object.__setattr__(self, "pieces", pieces)

    @property
    def n_ions(self) -> int:
        return self.pieces[0].n_ions

    @property
    def T(self) -> float:
        return self.pieces[-1].end

    def force(self, t) -> np.ndarray:
        return sum(p.force(t) for p in self.pieces)

    def segments(self) -> list[ExpSegment]:
        return [s for p in self.pieces for s in p.segments()]

    def to_dict(self) -> dict:
        return {"T": float(self.T), "pieces": [p.to_dict() for p in self.pieces]}


@dataclass(frozen=True)
class CallableForce:
    """Generic force program F(t) -> (n_ions, len(t)) on [0, T]; handled by quadrature."""

    T: float
    func: Callable[[np.ndarray], np.ndarray]
    n_ions: int

    def force(self, t) -> np.ndarray:
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float).reshape(self.n_ions, -1)


def sum_profiles(a: FourierProfile, b: FourierProfile) -> list[ExpSegment]:
    """Exponential segments of F_a + F_b for profiles sharing a window."""
    if abs(a.T - b.T) > 1e-12 or abs(a.start - b.start) > 1e-12:
        raise ValueError("profiles must share the same window")
    sa, sb = a.segments()[0], b.segments()[0]
    return [ExpSegment(a.start, a.T, np.concatenate([sa.nu, sb.nu]), np.hstack([sa.C, sb.C]))]


def as_segments(profile) -> list[ExpSegment]:
    if isinstance(profile, (list, tuple)) and all(isinstance(s, ExpSegment) for s in profile):
        return list(profile)
    return profile.segments()


def profile_from_dict(d: dict):
    if "kicks" in d:
        return KickTrain.from_dict(d)
    if "pieces" in d:
        return SegmentedProfile(tuple(FourierProfile.from_dict(p) for p in d["pieces"]))
    return FourierProfile.from_dict(d)


def sample_profile(profile, samples: int = 1001) -> tuple[np.ndarray, np.ndarray]:
    t = np.linspace(0.0, profile.T, samples)
    return t, profile.force(t)


Profile = FourierProfile | KickTrain | SegmentedProfile | CallableForce
PieceList = Sequence[FourierProfile]
