import numpy as np
import pytest
from hypothesis import given, strategies as st

from iongate.kernel import GATE_PHASE, accumulated_coupling, closure_norm, closure_residual
from iongate.kicks import (KickSolveError, kick_phase, loglog_slope, protocol1_times, protocol2_times,
                           scaling_scan, scan_slope, solve_protocol1, solve_protocol2)
from iongate.oracle import oracle_coupling
from iongate.profiles import KickTrain

PERIOD = 2 * np.pi


@pytest.fixture(scope="module")
def p1():
    return solve_protocol1(0.9, 0.5)


def test_protocol1_operating_point(p1):
    assert p1.n_repeat == 2
    assert p1.taus[0] / PERIOD == pytest.approx(0.538, abs=0.005)
    assert p1.total_time / PERIOD == pytest.approx(1.08, rel=0.02)
    assert p1.phase_achieved == pytest.approx(GATE_PHASE, abs=1e-12)
    assert p1.pulse_pairs == 8 and not p1.metadata["spin_flip_required"]


def test_protocol1_against_oracle(p1, chain2):
    fit, final = oracle_coupling(p1.train, chain2)
    assert fit.J[0, 1] == pytest.approx(GATE_PHASE, abs=1e-8)
    assert np.abs(final).max() < 1e-8


def test_protocol1_times_close_both_modes():
    for g in (0.2, 0.5, 1.0):
        t1, t2 = protocol1_times(g)
        for w in (1.0, np.sqrt(3.0)):
            assert g * np.sin(w * t1) + np.sin(w * t2) == pytest.approx(0.0, abs=1e-12)


def test_protocol1_rejects_bad_inputs():
    with pytest.raises(ValueError):
        solve_protocol1(1.5)
    with pytest.raises(ValueError):
        solve_protocol1(0.9, momentum=0.0)


def test_protocol2_gate(chain2):
    sol = solve_protocol2(1.08 * PERIOD, 0.01)
    assert sol.total_time == pytest.approx(1.08 * PERIOD)
    assert sol.pulse_pairs == 14 * sol.n_repeat
    assert 0 < sol.gamma <= 1
    fit, final = oracle_coupling(sol.train, chain2)
    assert fit.J[0, 1] == pytest.approx(GATE_PHASE, abs=1e-8)
    assert np.abs(final).max() < 1e-8
    t1, t2, t3 = protocol2_times(1.08 * PERIOD)
    assert 0 < t3 < t2 < t1


def test_protocol2_count_scales_with_recoil():
    # Phase ~ momentum^2 n^2 at fixed times, so halving the recoil doubles n.
    a = solve_protocol2(1.0, 0.02).n_repeat
    b = solve_protocol2(1.0, 0.01).n_repeat
    assert b == pytest.approx(2 * a, abs=1)


def test_kick_phase_matches_kernel(chain2):
    rng = np.random.default_rng(7)
    for _ in range(5):
        t = np.sort(rng.uniform(0, 6, 5))
        kt = KickTrain(t, rng.normal(size=5), 0.3, [1.0, 1.0], 6.0)
        assert kick_phase(kt) == pytest.approx(accumulated_coupling(kt, chain2)[0, 1], abs=1e-12)


@given(st.floats(0.1, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_kick_phase_is_quadratic_in_momentum(k, a, b):
    kt = KickTrain([0.5, 1.7], [a, b], k, [1.0, 1.0], 2.0)
    assert kick_phase(kt) == pytest.approx(k * k * kick_phase(kt, momentum=1.0), abs=1e-12)
    assert kick_phase(kt.scaled(-1.0)) == pytest.approx(kick_phase(kt), abs=1e-12)


def test_open_train_does_not_close(chain2):
    kt = KickTrain([0.5], [1.0], 0.3, [1.0, 1.0], 1.0)
    assert closure_norm(closure_residual(kt, chain2)) > 0.1


def test_scaling_scan_slope():
    rows = scaling_scan(PERIOD * np.geomspace(0.05, 0.5, 10), 0.01)
    assert all(r.error is None for r in rows)
    assert scan_slope(rows) == pytest.approx(-1.5, abs=0.2)


def test_scan_keeps_failures_per_row():
    rows = scaling_scan([-1.0, 1.0])
    assert rows[0].error and rows[0].n is None
    assert rows[1].error is None


def test_loglog_slope():
    x = np.geomspace(1, 10, 5)
    assert loglog_slope(x, 3 * x**-2.5) == pytest.approx(-2.5)


def test_two_mode_basis_required():
    from iongate.chain import common_chain
    with pytest.raises(ValueError):
        kick_phase(KickTrain([0.1], [1.0], 1.0, [1, 1, 1], 1.0), common_chain(3))
    assert issubclass(KickSolveError, RuntimeError)
