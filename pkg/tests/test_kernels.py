import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viscowell.kernels import (ConstantXi, ExponentialKernel, KernelError, LogMixedKernel, LogMixedXi,
                               PolynomialKernel, PowerLawXi, TabulatedKernel, ZeroKernel,
                               check_mass_condition, eval_kernel, eval_kernel_derivative, kernel_mass,
                               load_tabulated_kernel, make_kernel, mass_threshold, verify_G1, verify_G2,
                               xi_for_kernel)

TS = np.linspace(0.0, 50.0, 2001)


def test_exponential_values():
    k = ExponentialKernel(0.4, 1.0)
    assert eval_kernel(k, 0.0) == pytest.approx(0.4, abs=1e-15)
    assert eval_kernel(k, math.log(2)) == pytest.approx(0.2, rel=1e-14)
    assert eval_kernel_derivative(k, 0.0) == pytest.approx(-0.4, rel=1e-14)
    assert kernel_mass(k) == pytest.approx(0.4, rel=1e-14)
    assert k.l == pytest.approx(0.6, rel=1e-14)


def test_polynomial_values():
    k = PolynomialKernel(0.3, 3.0)
    assert eval_kernel(k, 1.0) == pytest.approx(0.0375, rel=1e-14)
    assert eval_kernel_derivative(k, 0.0) == pytest.approx(-0.9, rel=1e-14)
    assert kernel_mass(k) == pytest.approx(0.15, rel=1e-14)
    assert k.l == pytest.approx(0.85, rel=1e-14)


def test_zero_kernel():
    k = ZeroKernel()
    assert eval_kernel(k, 3.0) == 0.0
    assert eval_kernel_derivative(k, 3.0) == 0.0
    assert kernel_mass(k) == 0.0 and k.l == 1.0


def test_domain_errors():
    with pytest.raises(ValueError):
        eval_kernel(ExponentialKernel(0.4, 1.0), -1.0)
    with pytest.raises(KernelError):
        kernel_mass(PolynomialKernel(0.3, 1.0))
    with pytest.raises(KernelError):
        make_kernel("gaussian")


def test_finite_horizon_mass_matches_quadrature():
    from scipy.integrate import quad

    for k in (ExponentialKernel(0.4, 1.0), PolynomialKernel(0.3, 3.0), PolynomialKernel(0.2, 1.0),
              LogMixedKernel(1.25, 0.5)):
        ref, _ = quad(lambda s: k.value(s), 0.0, 7.0)
        assert kernel_mass(k, 7.0) == pytest.approx(ref, rel=1e-10)


def test_tabulated_kernel(tmp_path):
    path = tmp_path / "g.csv"
    ts = np.linspace(0, 5, 51)
    rows = "\n".join(f"{float(t)!r},{0.4 * math.exp(-t)!r}" for t in ts)
    path.write_text("t,g\n" + rows + "\n")
    k = load_tabulated_kernel(path)
    assert k.value(0.0) == pytest.approx(0.4)
    assert k.value(2.5) == pytest.approx(0.4 * math.exp(-2.5), rel=5e-3)
    assert k.mass(5.0) == pytest.approx(0.4 * (1 - math.exp(-5)), rel=1e-3)
    assert k.derivative(0.0) == pytest.approx((k.value(0.1) - 0.4) / 0.1)
    with pytest.raises(KernelError):
        k.value(6.0)
    with pytest.raises(KernelError):
        k.mass(math.inf)
    with pytest.raises(KernelError):
        TabulatedKernel(np.array([0.0, 1.0]), np.array([1.0, -1.0]))


def test_xi_for_kernel():
    r, xi = xi_for_kernel(ExponentialKernel(0.4, 1.0))
    assert r == 1.0 and isinstance(xi, ConstantXi) and xi.xi0 == 1.0
    r, xi = xi_for_kernel(PolynomialKernel(0.3, 3.0))
    assert r == pytest.approx(4 / 3)
    assert xi.xi0 == pytest.approx(4.4814, abs=1e-4)
    with pytest.raises(KernelError):
        xi_for_kernel(PolynomialKernel(0.3, 2.0))
    r, xi = xi_for_kernel(LogMixedKernel(1.25, 1.0))
    assert r == 1.25 and isinstance(xi, LogMixedXi)


def test_verify_G1():
    rep = verify_G1(ExponentialKernel(0.4, 1.0), TS)
    assert rep.passed and rep.l == pytest.approx(0.6)
    assert not verify_G1(ExponentialKernel(1.5, 1.0), TS).passed
    assert not verify_G1(ZeroKernel(), TS).passed


def test_verify_G2_examples():
    k = ExponentialKernel(0.4, 1.0)
    rep = verify_G2(k, 1.0, ConstantXi(1.0), TS)
    assert rep.passed and abs(rep.max_residual) <= 1e-15
    p = PolynomialKernel(0.3, 3.0)
    assert verify_G2(p, 4 / 3, ConstantXi(3 * 0.3 ** (-1 / 3)), TS).passed
    assert not verify_G2(p, 1.0, ConstantXi(1.0), TS).passed
    with pytest.raises(ValueError):
        verify_G2(p, 1.5, ConstantXi(1.0), TS)


@pytest.mark.parametrize("q, expected", [(2.5, True), (3.0, True), (2.05, True)])
def test_polynomial_power_integrability(q, expected):
    k = PolynomialKernel(0.3, q)
    r, xi = xi_for_kernel(k)
    rep = verify_G2(k, r, xi, TS)
    assert rep.g_power_integrable_ok is expected
    # int g^(2-r) finite iff q (2 - r) > 1, i.e. q > 2
    assert (q * (2 - r) > 1) is expected


def test_mass_threshold_hand_values():
    assert mass_threshold(2.5, 0.0) == pytest.approx(0.5 / 0.9, abs=1e-12)
    assert mass_threshold(2.5, 0.5) == pytest.approx(0.36, abs=1e-12)
    k = ExponentialKernel(0.4, 1.0)
    assert check_mass_condition(k, 2.5, 0.0)
    assert not check_mass_condition(k, 2.5, 0.5)
    assert check_mass_condition(ZeroKernel(), 2.7, 0.9)


def test_xi_integrals():
    assert ConstantXi(2.0).integral(0.0, 3.0) == pytest.approx(6.0)
    assert PowerLawXi(0.5).integral(0.0, 3.0) == pytest.approx(2.0)
    assert PowerLawXi(0.5).integral(1.7, 1.7) == 0.0
    with pytest.raises(ValueError):
        ConstantXi(1.0).integral(2.0, 1.0)


# --------------------------------------------------------------------------
# properties

kernels = st.one_of(
    st.builds(ExponentialKernel, st.floats(0.01, 0.95), st.floats(0.1, 5.0)),
    st.builds(PolynomialKernel, st.floats(0.01, 0.5), st.floats(2.05, 6.0)),
    st.builds(LogMixedKernel, st.floats(1.01, 1.49), st.floats(0.05, 0.5)),
)


@given(kernels)
def test_xi_for_kernel_always_satisfies_G2(k):
    r, xi = xi_for_kernel(k)
    rep = verify_G2(k, r, xi, TS)
    assert rep.inequality_ok and rep.max_residual <= 1e-10


@given(kernels, st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_mass_monotone_in_horizon(k, t1, t2):
    lo, hi = sorted((t1, t2))
    assert kernel_mass(k, lo) <= kernel_mass(k, hi) + 1e-12
    assert kernel_mass(k, hi) <= kernel_mass(k) + 1e-9


@given(kernels)
def test_kernel_nonincreasing_nonnegative(k):
    vals = k.value(TS)
    assert np.all(vals >= 0)
    assert np.all(np.diff(vals) <= 1e-10 + 1e-8 * vals[:-1])


@given(st.floats(2.01, 2.99), st.floats(-3.0, 0.99), st.floats(0.0, 1.0))
def test_mass_condition_monotone(p, delta, frac):
    thr = mass_threshold(p, delta)
    assert 0 < thr < 1
    big = ExponentialKernel(min(thr, 0.99), 1.0)
    small = ExponentialKernel(frac * big.g0 + 1e-6, 1.0)
    if check_mass_condition(big, p, delta):
        assert check_mass_condition(small, p, delta) or small.g0 > big.g0


@given(st.floats(0.05, 0.95), st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_xi_integral_additive(m, a, b, c):
    t0, t1, t2 = sorted((a, b, c))
    for xi in (ConstantXi(1.3), PowerLawXi(m), LogMixedXi(1.3)):
        total = xi.integral(t0, t2)
        assert xi.integral(t0, t1) + xi.integral(t1, t2) == pytest.approx(total, rel=1e-12, abs=1e-12)
