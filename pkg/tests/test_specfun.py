import math

import numpy as np
import pytest
from scipy.integrate import quad

from hpchain.specfun import (bessel_i_scaled, bessel_i_scaled_row,
                             bessel_row_complex_scaled, coupling_scale,
                             generalized_bessel, generalized_bessel_scaled,
                             generalized_bessel_row_scaled)


def series_bessel_i(nu, x, terms=60):
    """Power-series oracle: I_nu(x) = sum_m (x/2)^{2m+nu} / (m! (m+nu)!)."""
    nu = abs(nu)
    total = 0.0
    for m in range(terms):
        total += (x / 2.0) ** (2 * m + nu) / (
            math.factorial(m) * math.factorial(m + nu))
    return total


def test_scaled_bessel_at_zero():
    assert bessel_i_scaled(0, 0.0) == 1.0
    assert bessel_i_scaled(3, 0.0) == 0.0


def test_scaled_bessel_series_oracle():
    expected = series_bessel_i(0, 1.0) * math.exp(-1.0)
    assert abs(bessel_i_scaled(0, 1.0) - expected) < 1e-14
    for nu in (1, 2, 5):
        for x in (0.3, 1.0, 4.0):
            expected = series_bessel_i(nu, x) * math.exp(-x)
            assert abs(bessel_i_scaled(nu, x) - expected) < 1e-13


def test_negative_order_symmetry_exact():
    assert bessel_i_scaled(-2, 1.5) == bessel_i_scaled(2, 1.5)
    assert bessel_i_scaled(-7, 0.4) == bessel_i_scaled(7, 0.4)


def test_scaled_values_in_unit_interval():
    for nu in range(0, 30, 3):
        for x in (1e-3, 1.0, 50.0, 1e4, 1e6):
            v = bessel_i_scaled(nu, x)
            assert 0.0 <= v <= 1.0


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf, 1e7])
def test_scaled_bessel_rejects_bad_arguments(bad):
    with pytest.raises(ValueError):
        bessel_i_scaled(0, bad)


def test_three_term_recurrence_scaled():
    # I_{nu-1}(x) - I_{nu+1}(x) = (2 nu / x) I_nu(x), in scaled form
    for x in (0.5, 1.0, 5.0, 50.0):
        row = bessel_i_scaled_row(22, x)
        for nu in range(-20, 21):
            lo, mid, hi = row[abs(nu - 1)], row[abs(nu)], row[abs(nu + 1)]
            lhs = lo - hi
            rhs = (2.0 * nu / x) * mid
            scale = max(abs(lo), abs(hi), abs(rhs), 1e-300)
            assert abs(lhs - rhs) / scale < 1e-10


def test_generating_function_normalization():
    # I_0 + 2 sum_{nu>=1} I_nu = e^x, i.e. the scaled row sums to 1
    for x in (0.5, 5.0, 50.0):
        row = bessel_i_scaled_row(int(x) + 80, x)
        total = row[0] + 2.0 * row[1:].sum()
        assert abs(total - 1.0) < 1e-12


def test_generalized_reduces_to_bessel_at_k1():
    for J in (0.0, 0.7, 2.0, 5.0):
        got = generalized_bessel_scaled(0, [J])
        assert abs(got - bessel_i_scaled(0, J)) < 1e-14
    assert abs(generalized_bessel(2, [1.3]) -
               series_bessel_i(2, 1.3)) < 1e-12


def test_single_range_collapse():
    # range-K-only kernel: odd orders vanish, K | nu collapses to I_{nu/K}
    for J in (0.5, 1.0, 3.0):
        assert abs(generalized_bessel_scaled(3, [0.0, J])) < 1e-15
        assert abs(generalized_bessel_scaled(1, [0.0, J])) < 1e-15
        # with couplings (0, 2J) the per-entry scale is exp(J), matching
        # the scaled ordinary Bessel at argument J
        got = generalized_bessel_scaled(2, [0.0, 2.0 * J])
        assert abs(got - bessel_i_scaled(1, J)) < 1e-14
        # the defining integral itself gives argument J/2 at couplings (0, J)
        got2 = generalized_bessel(2, [0.0, J])
        assert abs(got2 - series_bessel_i(1, J / 2.0)) < 1e-12


def test_generalized_against_adaptive_quadrature():
    # independent oracle: direct adaptive quadrature of the defining integral
    couplings = [1.0, 0.5]

    def integrand(theta, nu):
        V = couplings[0] * math.cos(theta) + couplings[1] / 2.0 * math.cos(2 * theta)
        return math.cos(nu * theta) * math.exp(V)

    for nu in (0, 1, 2, 4):
        ref, err = quad(integrand, 0.0, 2.0 * math.pi, args=(nu,),
                        epsabs=1e-14, epsrel=1e-14, limit=200)
        ref /= 2.0 * math.pi
        assert abs(generalized_bessel(nu, couplings) - ref) < 1e-12


def test_generalized_rejects_nonfinite():
    with pytest.raises(ValueError):
        generalized_bessel(0, [math.inf])
    with pytest.raises(ValueError):
        generalized_bessel(0, [math.nan, 1.0])


def test_coupling_scale():
    assert abs(coupling_scale([2.0, 3.0]) - (2.0 + 1.5)) < 1e-15


def test_complex_row_against_quadrature():
    z = complex(1.5, -0.8)

    def integrand_re(theta, nu):
        val = np.exp(z * np.cos(theta)) * np.exp(1j * nu * theta)
        return val.real

    def integrand_im(theta, nu):
        val = np.exp(z * np.cos(theta)) * np.exp(1j * nu * theta)
        return val.imag

    row = bessel_row_complex_scaled(3, z)
    for nu in range(4):
        re, _ = quad(integrand_re, 0, 2 * np.pi, args=(nu,), epsabs=1e-14)
        im, _ = quad(integrand_im, 0, 2 * np.pi, args=(nu,), epsabs=1e-14)
        ref = (re + 1j * im) / (2 * np.pi) * np.exp(-z.real)
        assert abs(row[nu] - ref) < 1e-12


def test_row_matches_scalar_api():
    row = generalized_bessel_row_scaled(5, [1.0, 0.5])
    for nu in range(6):
        assert row[nu] == generalized_bessel_scaled(nu, [1.0, 0.5])
