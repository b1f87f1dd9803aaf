import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from iongate.chain import (ChainError, TrapKind, TrapSetup, chain_modes, common_chain, equilibrium_positions,
                           hessian, normal_modes, single_mode_basis, tuned_two_ion_modes)


def test_single_ion_sits_at_origin():
    setup = TrapSetup(1)
    assert equilibrium_positions(setup) == pytest.approx([0.0])
    assert hessian(setup, [0.0]) == pytest.approx(np.ones((1, 1)))


def test_two_ion_equilibrium_solves_cubic():
    # Half-separation u satisfies u^3 = 1/4.
    u = equilibrium_positions(TrapSetup(2))
    assert u == pytest.approx([-0.25 ** (1 / 3), 0.25 ** (1 / 3)], abs=1e-13)


def test_three_ion_equilibrium():
    u = equilibrium_positions(TrapSetup(3))
    assert u[1] == pytest.approx(0.0, abs=1e-14)
    assert u[2] == pytest.approx(1.0772, abs=1e-4)
    # Independent check: minimize the 1D potential of the outer ion on a fine grid.
    c = np.linspace(1.0, 1.2, 200001)
    energy = c**2 + 2 / c + 1 / (2 * c)
    assert u[2] == pytest.approx(c[np.argmin(energy)], abs=2e-6)


def test_hessian_eigenvalues_small_chains():
    for n, expected in [(2, [1.0, 3.0]), (3, [1.0, 3.0, 29 / 5])]:
        setup = TrapSetup(n)
        V = hessian(setup, equilibrium_positions(setup))
        assert np.linalg.eigvalsh(V) == pytest.approx(expected, abs=1e-11)


def test_two_ion_mode_vectors():
    m = common_chain(2)
    s = 1 / np.sqrt(2)
    assert m.mode_matrix[:, 0] == pytest.approx([s, s], abs=1e-14)
    assert m.mode_matrix[:, 1] == pytest.approx([-s, s], abs=1e-14)
    assert m.frequencies == pytest.approx([1.0, np.sqrt(3.0)], abs=1e-13)
    assert m.lengths == pytest.approx(m.frequencies ** -0.5)


def test_five_ions_match_characteristic_polynomial():
    setup = TrapSetup(5)
    V = hessian(setup, equilibrium_positions(setup))
    roots = np.sort(np.roots(np.poly(V)).real)
    assert chain_modes(setup).frequencies ** 2 == pytest.approx(roots, rel=1e-10)


def test_diagonal_hessian_gives_identity_modes():
    m = normal_modes(np.diag([1.0, 2.0, 5.0]))
    assert m.mode_matrix == pytest.approx(np.eye(3))


@given(st.integers(min_value=2, max_value=30))
def test_common_chain_invariants(n):
    setup = TrapSetup(n)
    m = chain_modes(setup)
    V = hessian(setup, m.equilibrium)
    M, w = m.mode_matrix, m.frequencies
    assert np.allclose(M @ M.T, np.eye(n), atol=1e-12)
    assert np.linalg.norm(V - M @ np.diag(w**2) @ M.T) < 1e-10 * np.linalg.norm(V)
    assert np.all(np.diff(w) > 0)
    assert w[0] == pytest.approx(1.0, abs=1e-12)
    assert M[:, 0] == pytest.approx(np.full(n, n**-0.5), abs=1e-12)
    assert np.array_equal(m.equilibrium, -m.equilibrium[::-1])
    for j in range(n):
        col = M[:, j]
        assert col[np.argmax(np.abs(col) + 1e-12 * np.arange(n))] > 0


def test_microtraps_modes():
    setup = TrapSetup(2, TrapKind.MICROTRAPS, (-5.0, 5.0))
    m = chain_modes(setup)
    # Weak coupling between distant wells: both frequencies close to 1.
    assert m.frequencies[0] == pytest.approx(1.0, abs=1e-12)
    assert 1.0 < m.frequencies[1] < 1.05


def test_invalid_setups():
    with pytest.raises(ChainError):
        TrapSetup(0)
    with pytest.raises(ChainError, match="coincident"):
        TrapSetup(2, "Microtraps", (1.0, 1.0))
    with pytest.raises(ChainError):
        TrapSetup(2, "Microtraps", (0.0,))
    with pytest.raises(ChainError):
        TrapSetup(2, coulomb_length_ratio=-1.0)


def test_non_positive_hessian_is_rejected():
    with pytest.raises(ChainError, match="eigenvalue"):
        normal_modes(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_tuned_two_ion_modes():
    m = tuned_two_ion_modes(np.sqrt(3.0))
    ref = common_chain(2)
    assert m.frequencies == pytest.approx(ref.frequencies)
    assert m.mode_matrix == pytest.approx(ref.mode_matrix)
    m15 = tuned_two_ion_modes(1.5)
    assert np.abs(m15.mode_matrix) == pytest.approx(np.full((2, 2), 2**-0.5))
    with pytest.warns(RuntimeWarning):
        assert tuned_two_ion_modes(1.0 + 1e-9).degenerate
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not m15.degenerate
    for bad in (1.0, 2.0):
        with pytest.raises(ChainError):
            tuned_two_ion_modes(bad)


def test_single_mode_basis():
    m = single_mode_basis(2.0, [1.0, 1.0])
    assert m.n_ions == 2 and m.n_modes == 1
    assert m.lengths == pytest.approx([2**-0.5])
    with pytest.raises(ChainError):
        single_mode_basis(1.0, [0.0])
