import numpy as np
import pytest
from hypothesis import given, strategies as st

from iongate.chain import common_chain
from iongate.expint import phi1, tri
from iongate.kernel import (GATE_PHASE, accumulated_coupling, adiabatic_phase, branch_phase, closure_norm,
                            closure_residual, coherent_trajectory, fourier_forms, kernel_weights, phase_kernel_G)
from iongate.oracle import oracle_coupling
from iongate.profiles import (CallableForce, DissipationModel, FourierProfile, KickTrain, SegmentedProfile,
                              profile_from_dict, real_basis_values)
from iongate.quadrature import QuadratureError, integrate

def offdiag_err(a, b):
    n = len(a)
    return np.max(np.abs((a - b) * (1 - np.eye(n))))


# ---------------------------------------------------------------- building blocks


def test_phi1_and_tri_match_quadrature():
    rng = np.random.default_rng(1)
    p = rng.normal(size=12) * 3 + 1j * rng.normal(size=12) * 10
    q = rng.normal(size=12) * 3 + 1j * rng.normal(size=12) * 10
    p[:3] = [0, 1e-9, 0.2j]
    q[:3] = [0, -1e-9, -0.2j]
    for a, b in zip(p, q):
        ref_phi = integrate(lambda u: np.exp(a * u), 0.0, 1.0, tol=1e-14)
        assert phi1(a) == pytest.approx(ref_phi, rel=1e-12, abs=1e-14)
        ref_tri = integrate(lambda u: np.exp(a * u) * u * phi1(b * u), 0.0, 1.0, tol=1e-14)
        assert tri(a, b) == pytest.approx(ref_tri, rel=1e-11, abs=1e-13)


def test_quadrature_reports_failure():
    assert integrate(np.sin, 0.0, np.pi) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(QuadratureError):
        integrate(lambda t: np.sign(t - 0.3) * 1e3, 0.0, 1.0, tol=1e-15, max_panels=64)


def test_fourier_profile_round_trip(rng):
    y = rng.normal(size=7)
    fp = FourierProfile.from_real(2.5, y, [1.0, -0.5])
    assert fp.real_coordinates() == pytest.approx(y, abs=1e-13)
    t = np.linspace(0, 2.5, 33)
    assert fp.modulation(t) == pytest.approx(y @ real_basis_values(2.5, 3, t), abs=1e-12)
    back = profile_from_dict(fp.to_dict())
    assert back.force(t) == pytest.approx(fp.force(t), abs=1e-13)
    with pytest.raises(ValueError):
        FourierProfile(1.0, [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        FourierProfile(1.0, [1.0, 0.0, 2.0], [1.0])


def test_real_basis_is_orthonormal():
    T = 3.7
    gram = integrate(lambda t: np.einsum("pt,qt->pqt", real_basis_values(T, 4, t), real_basis_values(T, 4, t)),
                     0.0, T, tol=1e-13)
    assert gram == pytest.approx(np.eye(9), abs=1e-12)


def test_kick_train_validation():
    with pytest.raises(ValueError):
        KickTrain([0.5, 0.1], [1, 1], 1.0, [1, 1], 1.0)
    with pytest.raises(ValueError):
        KickTrain([0.5, 2.0], [1, 1], 1.0, [1, 1], 1.0)
    kt = KickTrain([0.1, 0.5], [1, -2], 0.3, [1, 0.5], 1.0)
    assert kt.impulses() == pytest.approx(np.array([[0.6, -1.2], [0.3, -0.6]]))
    assert profile_from_dict(kt.to_dict()).impulses() == pytest.approx(kt.impulses())


# ---------------------------------------------------------------- trajectories


def test_free_trajectory_rotates():
    z0 = 0.5 + 0.2j
    tr = coherent_trajectory(lambda t: 0 * t, 1.3, z0, 4.0, 11)
    assert tr.z == pytest.approx(np.exp(-1.3j * tr.t) * z0, abs=1e-14)
    assert tr.phase == pytest.approx(np.zeros(11))


def test_constant_force_trajectory():
    # z' = -i w z + i f/sqrt2 from rest: z = f/(sqrt2 w) (1 - e^{-i w t}).
    w, f0 = 1.7, 0.4
    tr = coherent_trajectory(lambda t: f0 + 0 * t, w, 0.0, 3.0, 301)
    ref = f0 / (np.sqrt(2) * w) * (1 - np.exp(-1j * w * tr.t))
    assert tr.z == pytest.approx(ref, abs=1e-13)


# ---------------------------------------------------------------- closure


def test_com_mode_closes_for_two_full_cycles(chain2):
    T = 2 * np.pi
    f = lambda t: np.sin(4 * np.pi * t / T)
    D = closure_residual(CallableForce(T, lambda t: np.array([f(t), f(t)]), 2), chain2)
    assert np.abs(D[0]).max() < 1e-12
    # Equal pushes on both ions leave the stretch mode at rest on the aligned branch.
    assert np.abs(D @ [1.0, 1.0]).max() < 1e-12
    assert closure_norm(D) > 1.0


def test_closure_matches_fourier_forms(rng, chain3):
    T, y = 3.0, rng.normal(size=9)
    fp = FourierProfile.from_real(T, y, [1, -0.7, 0.4])
    _, E = fourier_forms(T, 4, chain3)
    D = closure_residual(fp, chain3)
    ref = chain3.lengths[:, None] * chain3.mode_matrix.T * fp.weights[None, :] * (E @ y)[:, None]
    assert D == pytest.approx(ref, abs=1e-13)


# ---------------------------------------------------------------- couplings vs oracle


def test_two_ion_kick_coupling_matches_oracle(chain2):
    kt = KickTrain([0.3, 1.1, 2.0], [1, -0.5, 0.7], 0.4, [1, 1], 2.5)
    J = accumulated_coupling(kt, chain2)
    fit, _ = oracle_coupling(kt, chain2)
    assert J[0, 1] == pytest.approx(fit.J[0, 1], abs=1e-9)
    assert fit.residual < 1e-9


def test_fourier_coupling_matches_oracle(rng, chain3):
    fp = FourierProfile.from_real(3.0, rng.normal(size=9), [1, -0.7, 0.4])
    fit, _ = oracle_coupling(fp, chain3)
    assert offdiag_err(accumulated_coupling(fp, chain3), fit.J) < 1e-9


def test_segmented_coupling_matches_oracle(rng, chain3):
    sp = SegmentedProfile((FourierProfile.from_real(3.0, rng.normal(size=9), [1, -0.7, 0.4]),
                           FourierProfile.from_real(2.0, rng.normal(size=5), [0.3, 1, -1], start=3.0)))
    fit, _ = oracle_coupling(sp, chain3)
    assert offdiag_err(accumulated_coupling(sp, chain3), fit.J) < 1e-9


def test_callable_force_matches_closed_form(rng, chain3):
    fp = FourierProfile.from_real(3.0, rng.normal(size=9), [1, -0.7, 0.4])
    cf = CallableForce(3.0, fp.force, 3)
    assert accumulated_coupling(cf, chain3) == pytest.approx(accumulated_coupling(fp, chain3), abs=1e-9)
    assert closure_residual(cf, chain3) == pytest.approx(closure_residual(fp, chain3), abs=1e-10)
    dm = DissipationModel.uniform(3, 0.2, 1.0)
    assert accumulated_coupling(cf, chain3, dm) == pytest.approx(accumulated_coupling(fp, chain3, dm), abs=1e-9)


def test_quadratic_forms_reproduce_coupling(rng, chain3):
    T, y = 3.0, rng.normal(size=9)
    fp = FourierProfile.from_real(T, y, [1, -0.7, 0.4])
    Q, _ = fourier_forms(T, 4, chain3)
    Jq = np.einsum("kij,k->ij", kernel_weights(chain3), np.array([y @ Qk @ y for Qk in Q]))
    assert Jq * np.outer(fp.weights, fp.weights) == pytest.approx(accumulated_coupling(fp, chain3), abs=1e-12)


def test_double_integral_definition(chain2):
    # Direct tensor-product quadrature over the square; the |t - tau| kink limits it to ~1e-9.
    T = 2.0
    fp = FourierProfile.from_real(T, [0.3, 1.0, -0.4], [1.0, 1.0])
    G = phase_kernel_G(chain2)
    x, w = np.polynomial.legendre.leggauss(80)
    t = 0.5 * T * (x + 1)
    w = 0.5 * T * w
    F = fp.force(t)
    Gm = G(np.subtract.outer(t, t))                      # (p, p, N, N)
    J = np.einsum("a,b,ia,abij,jb->ij", w, w, F, Gm, F)
    assert J[0, 1] == pytest.approx(accumulated_coupling(fp, chain2)[0, 1], abs=1e-8)


def test_kernel_is_even_in_time(chain3):
    G = phase_kernel_G(chain3)
    t = np.linspace(-3, 3, 13)
    assert G(t) == pytest.approx(G(-t))
    assert G(0.0) == pytest.approx(np.zeros((3, 3)))


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_coupling_is_quadratic_in_force(a, b, seed):
    m = common_chain(2)
    rng = np.random.default_rng(seed)
    y1, y2 = rng.normal(size=5), rng.normal(size=5)
    J = lambda y: accumulated_coupling(FourierProfile.from_real(2.0, y, [1.0, -1.0]), m)[0, 1]
    # Polarization: J(a y1 + b y2) = a^2 J(y1) + b^2 J(y2) + a b (J(y1+y2) - J(y1) - J(y2)).
    cross = J(y1 + y2) - J(y1) - J(y2)
    ref = a * a * J(y1) + b * b * J(y2) + a * b * cross
    assert J(a * y1 + b * y2) == pytest.approx(ref, abs=1e-10 * (1 + a * a + b * b))


@given(st.integers(0, 2**32 - 1))
def test_time_reversal_preserves_coupling(seed):
    # Reversing F(t) -> F(T - t) leaves the symmetric double integral unchanged.
    m = common_chain(3)
    rng = np.random.default_rng(seed)
    y = rng.normal(size=7)
    fp = FourierProfile.from_real(2.5, y, [1.0, 0.3, -0.8])
    rev = CallableForce(2.5, lambda t: fp.force(2.5 - t), 3)
    assert accumulated_coupling(rev, m) == pytest.approx(accumulated_coupling(fp, m), abs=1e-9)


def test_branch_phase_convention():
    J = np.array([[0.0, GATE_PHASE], [GATE_PHASE, 0.0]])
    assert branch_phase(J, [1, 1]) == pytest.approx(np.pi / 4)
    assert branch_phase(J, [1, -1]) == pytest.approx(-np.pi / 4)


def test_adiabatic_limit(chain2):
    # A slow sin^2 push: the coupling approaches 1/2 (w_c^-2 - w_r^-2) int F^2.
    T = 200.0
    F = lambda t: 0.05 * np.sin(np.pi * t / T) ** 2
    ref = adiabatic_phase(F, 1.0, np.sqrt(3.0), T)
    J = accumulated_coupling(CallableForce(T, lambda t: np.array([F(t), F(t)]), 2), chain2)
    assert J[0, 1] == pytest.approx(ref, rel=1e-3)
    with pytest.raises(ValueError):
        adiabatic_phase(lambda t: 1.0 + 0 * t, 1.0, 2.0, 1.0)
