import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscowell.energetics import (dissipation_rhs, energy_identity_residual, energy_records, functional_E,
                                  functional_I, functional_J, g_circ, max_energy_increase,
                                  relative_energy_increase)
from viscowell.kernels import ExponentialKernel, PolynomialKernel, ZeroKernel
from viscowell.solver import ProblemParams, make_initial_data, run
from viscowell.weighted_space import Grid, gradient_norm2, norm_H2, power_integral

EXP = ExponentialKernel(0.4, 1.0)
G = Grid(1.0, 64)


def test_gcirc_trivial_cases():
    u = np.cos(G.x)
    assert g_circ(G, [0.0], [u], EXP) == 0.0
    ts = np.linspace(0, 2, 21)
    assert g_circ(G, ts, np.tile(u, (21, 1)), EXP) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        g_circ(G, [0.5, 1.0], [u, u], EXP)


def test_gcirc_unit_gradient_jump():
    # u(s) = 0 for s < t, u(t) = x: |u_x(t) - u_x(s)| = 1, so gcirc -> (int_0^t g) * int x dx
    t = 1.5
    for N in (200, 400):
        ts = np.linspace(0.0, t, N + 1)
        U = np.zeros((N + 1, G.n + 1))
        U[-1] = G.x
        expect = 0.5 * EXP.mass(t)
        # the trapezoid misses half of the last interval's g(0) contribution: O(dt)
        assert g_circ(G, ts, U, EXP) == pytest.approx(expect, abs=0.5 * 0.4 * t / N * 0.5 * 1.01)


def test_functional_examples():
    z = np.zeros_like(G.x)
    assert functional_I(G, z, 2.5, EXP) == 0.0 and functional_J(G, z, 2.5, EXP) == 0.0
    assert functional_E(G, z, z, 2.5, EXP) == 0.0
    v = np.cos(G.x)
    assert functional_E(G, z, v, 2.5, EXP) == pytest.approx(0.5 * norm_H2(G, v))
    u = G.x - 1
    u = u / np.sqrt(gradient_norm2(G, u))
    assert functional_J(G, u, 2.5, EXP, source_enabled=False) == pytest.approx(0.5)


def test_I_sign_with_amplitude():
    small, _ = make_initial_data(G, "quadratic", 1.0)
    large, _ = make_initial_data(G, "quadratic", 1e4)
    assert functional_I(G, small, 2.5, EXP) > 0
    assert functional_I(G, large, 2.5, EXP) < 0


@given(st.floats(0.01, 1e4), st.floats(0.0, 3.0), st.floats(0.0, 5.0), st.floats(0.0, 2.0))
def test_record_identities(A, t, gcirc, mu):
    u, v = make_initial_data(G, "quadratic", A, mu)
    p = 2.5
    I = functional_I(G, u, p, EXP, t, gcirc)
    J = functional_J(G, u, p, EXP, t, gcirc)
    E = functional_E(G, u, v, p, EXP, t, gcirc)
    elastic = (1 - EXP.mass(t)) * gradient_norm2(G, u) + gcirc
    scale = elastic + power_integral(G, u, p) + norm_H2(G, v)
    assert abs(J - ((p - 2) / (2 * p) * elastic + I / p)) <= 1e-10 * scale
    assert abs(E - (J + 0.5 * norm_H2(G, v))) <= 1e-10 * scale


def _traj(kernel, a, source=True, div=2, T=1.0, n=64, family="quartic", A=1.0):
    g = Grid(1.0, n)
    params = ProblemParams(2.5, a, kernel, g, source_enabled=source)
    return run(params, *make_initial_data(g, family, A, 0.5), T, g.h / div)


def test_records_internal_identities():
    traj = _traj(PolynomialKernel(0.3, 3.0), 0.2)
    for r in traj.records:
        assert r.gcirc >= 0
        assert r.E == pytest.approx(r.J + r.kinetic, rel=1e-10, abs=1e-14)
        elastic = (1 - 0.3 / 2 * (1 - (1 + r.t) ** -2)) * r.norm_ux_H2 + r.gcirc
        assert r.J == pytest.approx(0.1 * elastic + r.I / 2.5, rel=1e-10, abs=1e-14)


def test_gprime_term_dissipative():
    traj = _traj(PolynomialKernel(0.3, 3.0), 0.0)
    from viscowell.energetics import _memory_seminorms

    gp = _memory_seminorms(traj.grid, traj.params.kernel, traj.times, traj.u, derivative=True)
    assert np.all(gp <= 0)


def test_identity_conservative_and_damped():
    res = [energy_identity_residual(_traj(ZeroKernel(), 0.0, source=False, div=d)) for d in (2, 4)]
    assert res[0] / res[1] >= 3.5
    res = [energy_identity_residual(_traj(ZeroKernel(), 0.5, source=False, div=d)) for d in (2, 4)]
    assert res[0] / res[1] >= 3.5


def test_identity_full_problem_halving():
    res = [energy_identity_residual(_traj(EXP, 0.1, div=d, n=128, A=5.0)) for d in (2, 4)]
    assert res[0] / res[1] >= 3.5


def test_dissipation_rhs_nonpositive():
    traj = _traj(EXP, 0.3)
    rhs = dissipation_rhs(traj.grid, EXP, 0.3, traj.times, traj.u, traj.v)
    assert np.all(rhs <= 1e-14)


def test_monotone_energy_on_stable_run():
    traj = _traj(EXP, 0.1, family="quadratic", T=3.0)
    assert max_energy_increase(traj.records) <= 0
    assert relative_energy_increase(traj.records, 2.5) <= 0


def test_energy_records_shape():
    traj = _traj(EXP, 0.1, T=0.1)
    recs = energy_records(traj.grid, EXP, 2.5, traj.times, traj.u, traj.v)
    assert len(recs) == len(traj.times) and recs == traj.records
