import numpy as np
import pytest
from hypothesis import given, strategies as st

from iongate.chain import common_chain
from iongate.ising import (EDGE_PHASE, LMResult, common_mode_design, coupling_target, cw_effective_coupling,
                           default_mode_budget, entangler_fidelity, graph_state_target, levenberg_marquardt,
                           pairwise_schedule, trotter_schedule, wrap_coupling)
from iongate.kernel import accumulated_coupling
from iongate.oracle import (coupling_state, exact_spin_evolution, ghz_overlap, oracle_coupling, replay_trotter,
                            state_overlap)
from iongate.profiles import CallableForce, FourierProfile

OFF = lambda n: 1 - np.eye(n)


# ---------------------------------------------------------------- targets and fidelity


def test_named_graphs():
    assert graph_state_target("ghz", 3) == pytest.approx(np.ones((3, 3)) - np.eye(3))
    c = graph_state_target("cluster", 4)
    assert c.sum() == 6 and c[0, 1] == 1 and c[0, 2] == 0
    assert coupling_target(c)[1, 2] == pytest.approx(EDGE_PHASE)
    for bad in (("ring", 3), ("ghz", None)):
        with pytest.raises(ValueError):
            graph_state_target(*bad)
    with pytest.raises(ValueError):
        graph_state_target([[0, 1], [0, 0]])
    with pytest.raises(ValueError):
        graph_state_target([[0, 2], [2, 0]])


def test_wrap_coupling():
    assert wrap_coupling([0.1, np.pi + 0.1, -np.pi + 0.1, np.pi / 2]) == pytest.approx([0.1, 0.1, 0.1, -np.pi / 2])


def test_single_pair_fidelity_is_cosine():
    for eps in (0.0, 0.1, 0.7, np.pi / 2):
        dJ = np.array([[0.0, eps], [eps, 0.0]])
        assert entangler_fidelity(dJ) == pytest.approx(abs(np.cos(eps)), abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_fidelity_matches_state_overlap(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    dJ = rng.normal(size=(n, n)) * 0.3
    dJ = (dJ + dJ.T) / 2
    ref = state_overlap(coupling_state(np.zeros((n, n))), coupling_state(dJ))
    assert entangler_fidelity(dJ) == pytest.approx(ref, abs=1e-12)
    # Flipping the sign of all errors conjugates the sum.
    assert entangler_fidelity(-dJ) == pytest.approx(entangler_fidelity(dJ), abs=1e-12)


def test_fidelity_cap():
    with pytest.raises(ValueError):
        entangler_fidelity(np.zeros((4, 4)), cap=3)


# ---------------------------------------------------------------- pairwise


def test_pairwise_schedule_matches_oracle():
    m = common_chain(4)
    rng = np.random.default_rng(3)
    A = rng.normal(size=(4, 4))
    A = (A + A.T) / 2
    np.fill_diagonal(A, 0)
    sp = pairwise_schedule(A, 4 * 2 * np.pi, m)
    J = accumulated_coupling(sp, m)
    assert np.abs(wrap_coupling((J - A) * OFF(4))).max() < 1e-9
    fit, final = oracle_coupling(sp, m)
    assert np.abs(wrap_coupling((fit.J - A) * OFF(4))).max() < 1e-7
    assert np.abs(final).max() < 1e-8


def test_pairwise_zero_entries_and_validation(chain3):
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 0.3
    sp = pairwise_schedule(A, 3 * 2 * np.pi, chain3)
    J = accumulated_coupling(sp, chain3)
    assert np.abs(wrap_coupling((J - A) * OFF(3))).max() < 1e-9
    with pytest.raises(ValueError):
        pairwise_schedule(np.triu(np.ones((3, 3)), 1), 5.0, chain3)


# ---------------------------------------------------------------- Levenberg-Marquardt


def test_lm_history_is_non_increasing():
    # Underdetermined: one equation, two unknowns.
    fun = lambda x: (np.array([x[0] ** 2 + x[1] ** 2 - 1.0]), np.array([[2 * x[0], 2 * x[1]]]))
    res = levenberg_marquardt(fun, [3.0, 1.0])
    assert isinstance(res, LMResult) and res.converged
    assert np.all(np.diff(res.history) <= 0)
    assert np.hypot(*res.x) == pytest.approx(1.0, abs=1e-8)


def test_lm_overdetermined_rosenbrock():
    fun = lambda x: (np.array([10 * (x[1] - x[0] ** 2), 1 - x[0], 0.0]),
                     np.array([[-20 * x[0], 10.0], [-1.0, 0.0], [0.0, 0.0]]))
    res = levenberg_marquardt(fun, [-1.2, 1.0], tol=1e-12)
    assert res.x == pytest.approx([1.0, 1.0], abs=1e-10)
    assert np.all(np.diff(res.history) <= 0)


# ---------------------------------------------------------------- common modulation


def test_ghz4_converges_for_long_gates():
    m = common_chain(4)
    tg = coupling_target(graph_state_target("ghz", 4))
    d = common_mode_design(tg, 12.0, m)
    assert d.converged
    assert d.fidelity_estimate == pytest.approx(1.0, abs=1e-12)
    assert d.closure < 1e-8
    assert np.max(np.abs(d.weights)) == pytest.approx(1.0)
    assert ghz_overlap(coupling_state(d.achieved)) == pytest.approx(1.0, abs=1e-8)
    fit, final = oracle_coupling(d.profile, m)
    assert np.abs(wrap_coupling((fit.J - tg) * OFF(4))).max() < 1e-7


def test_design_is_reproducible():
    m = common_chain(3)
    tg = coupling_target(graph_state_target("cluster", 3))
    a = common_mode_design(tg, 6.0, m, seed=5, starts=2)
    b = common_mode_design(tg, 6.0, m, seed=5, starts=2)
    assert np.array_equal(a.coefficients, b.coefficients)
    assert a.to_dict() == b.to_dict()


def test_nonconverged_design_is_reported():
    m = common_chain(4)
    tg = coupling_target(graph_state_target("ghz", 4))
    d = common_mode_design(tg, 1.1, m, starts=2, max_iter=100)
    assert not d.converged
    assert d.residual > 0.1
    assert d.closure < 1e-8


def test_warm_start_continuation():
    m = common_chain(4)
    tg = coupling_target(graph_state_target("ghz", 4))
    d12 = common_mode_design(tg, 12.0, m)
    d13 = common_mode_design(tg, 12.5, m, starts=0, init=d12)
    assert d13.converged


def test_mode_budget():
    assert default_mode_budget(2) >= 3
    n = 10
    assert 2 * default_mode_budget(n) + 1 >= n * (n - 1) // 2 + n + 4


# ---------------------------------------------------------------- continuous wave


def test_cw_coupling_against_long_drive():
    m = common_chain(3)
    f, Om = np.array([0.05, 0.03, -0.04]), 0.6
    Jcw = cw_effective_coupling(f, Om, m)
    scale = np.abs(Jcw * OFF(3)).max()
    # A whole number of drive cycles is a single harmonic of the window.
    for cycles, tol in ((40, 0.02), (400, 0.002)):
        T = 2 * np.pi / Om * cycles
        c = np.zeros(2 * cycles + 1)
        c[0] = c[-1] = 0.5
        J = accumulated_coupling(FourierProfile(T, c, f), m)
        assert np.abs((J / T - Jcw) * OFF(3)).max() < tol * scale
    # Independent oracle over 10 cycles.
    T = 2 * np.pi / Om * 10
    fit, _ = oracle_coupling(CallableForce(T, lambda t: np.outer(f, np.cos(Om * t)), 3), m)
    assert np.abs((fit.J / T - Jcw) * OFF(3)).max() < 0.05 * scale


def test_cw_static_limit_and_resonance(chain2):
    f = np.array([0.1, 0.1])
    J0 = cw_effective_coupling(f, 0.0, chain2)
    assert J0[0, 1] == pytest.approx(0.01 * 0.5 * (1 - 1 / 3), rel=1e-12)
    with pytest.raises(ValueError):
        cw_effective_coupling(f, 1.0, chain2)
    with pytest.raises(ValueError):
        cw_effective_coupling(f, -0.5, chain2)


# ---------------------------------------------------------------- Trotter


def _random_xyz(n, rng):
    out = []
    for _ in range(3):
        J = rng.normal(size=(n, n))
        out.append((J + J.T) / 2)
    return out + [rng.normal(size=n) for _ in range(3)]


def test_single_axis_is_exact():
    rng = np.random.default_rng(2)
    n = 3
    Jx, _, _, hx, _, _ = _random_xyz(n, rng)
    z = np.zeros((n, n))
    sched = trotter_schedule(Jx, z, z, hx, np.zeros(n), np.zeros(n), 0.8, 1)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    exact = exact_spin_evolution({"x": Jx}, {"x": hx}, 0.8, psi)
    assert replay_trotter(sched, psi) == pytest.approx(exact, abs=1e-12)
    assert sched.error_bound == pytest.approx(0.0, abs=1e-12)


def test_trotter_error_is_first_order():
    rng = np.random.default_rng(4)
    n, T = 3, 0.2
    Jx, Jy, Jz, hx, hy, hz = _random_xyz(n, rng)
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    exact = exact_spin_evolution({"x": Jx, "y": Jy, "z": Jz}, {"x": hx, "y": hy, "z": hz}, T, psi)
    errs = []
    for steps in (4, 8, 16, 32):
        sched = trotter_schedule(Jx, Jy, Jz, hx, hy, hz, T, steps)
        errs.append(np.linalg.norm(replay_trotter(sched, psi) - exact))
        assert errs[-1] <= sched.error_bound
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert ratios == pytest.approx(np.full(3, 2.0), rel=0.1)


def test_trotter_validation():
    z = np.zeros((2, 2))
    with pytest.raises(ValueError):
        trotter_schedule(z, z, z, np.zeros(2), np.zeros(2), np.zeros(2), 1.0, 0)
    sched = trotter_schedule(z, z, np.ones((2, 2)), np.zeros(2), np.zeros(2), np.zeros(2), 1.0, 3)
    assert [s.axis for s in sched.steps] == ["z"] * 3
    assert sched.to_dict()["n_steps"] == 3
