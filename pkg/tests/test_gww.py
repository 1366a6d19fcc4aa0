import math

import mpmath
import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from hpchain.gww import (GwwParams, Phase, T_of_a, a_of_T, gww_log_partition,
                         multi_coupling_log_partition, planar_free_energy,
                         planar_free_energy_derivative, planar_polyakov,
                         saddle_entropy, sourced_entropy_density,
                         transition_temperature)
from hpchain.identities import bruteforce_unitary_log_partition
from hpchain.toeplitz import gww_toeplitz_logdet


def test_partition_small_rank_closed_forms():
    J = 1.7
    i0, i1 = float(mpmath.besseli(0, J)), float(mpmath.besseli(1, J))
    z1 = gww_log_partition(GwwParams(1, J)).ln_magnitude
    assert abs(z1 - math.log(i0)) < 1e-13
    z2 = gww_log_partition(GwwParams(2, J / 2.0)).ln_magnitude
    assert abs(z2 - math.log(i0 * i0 - i1 * i1)) < 1e-12


@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("J", [0.5, 1.0, 2.0])
def test_partition_against_bruteforce_weyl_integral(N, J):
    lhs = gww_toeplitz_logdet(N, J)
    rhs = bruteforce_unitary_log_partition(N, [J])
    assert abs(math.expm1(lhs - rhs)) < 1e-8


def test_multi_coupling_reduction_and_zero():
    assert multi_coupling_log_partition(3, [0.0, 0.0]).ln_magnitude == 0.0
    lhs = multi_coupling_log_partition(4, [1.2]).ln_magnitude
    rhs = gww_log_partition(GwwParams(4, 0.3)).ln_magnitude
    assert abs(lhs - rhs) < 1e-13


def test_multi_coupling_against_bruteforce():
    lhs = multi_coupling_log_partition(2, [1.0, 0.5]).ln_magnitude
    rhs = bruteforce_unitary_log_partition(2, [1.0, 0.5])
    assert abs(math.expm1(lhs - rhs)) < 1e-8


def test_planar_free_energy_branch_point():
    assert planar_free_energy(0.0) == 0.0
    lo = planar_free_energy(1.0 - 1e-12)
    hi = planar_free_energy(1.0 + 1e-12)
    assert abs(lo - 0.25) < 1e-11 and abs(hi - 0.25) < 1e-11
    # continuous first and second derivatives at sigma = 1 (third order);
    # one-sided stencils stay on a single branch
    assert planar_free_energy_derivative(1.0 - 1e-14) == pytest.approx(0.5, abs=1e-13)
    assert planar_free_energy_derivative(1.0 + 1e-14) == pytest.approx(0.5, abs=1e-13)
    h = 1e-5
    dd_lo = (planar_free_energy(1.0 - 2 * h) - 2 * planar_free_energy(1.0 - h)
             + planar_free_energy(1.0)) / h**2
    dd_hi = (planar_free_energy(1.0) - 2 * planar_free_energy(1.0 + h)
             + planar_free_energy(1.0 + 2 * h)) / h**2
    assert abs(dd_lo - dd_hi) < 1e-4


def test_planar_free_energy_from_finite_rank():
    # (1/N^2) ln Z_N(N sigma) approaches F(sigma)
    for sigma, tol in [(0.5, 2e-3), (2.0, 2e-3)]:
        f96 = gww_toeplitz_logdet(96, 96 * sigma) / 96**2
        assert abs(f96 - planar_free_energy(sigma)) < tol


def test_saddle_phases():
    low = saddle_entropy(0.5)
    assert low.phase is Phase.UNGAPPED
    assert low.sigma_star == 0.0 and low.entropy_density == 0.0

    crit = saddle_entropy(1.0)
    assert crit.phase is Phase.GAPPED
    assert crit.sigma_star == pytest.approx(1.0, abs=1e-12)
    assert crit.entropy_density == pytest.approx(0.0, abs=1e-12)

    high = saddle_entropy(2.0)
    assert high.sigma_star == pytest.approx(2.0 + math.sqrt(2.0), rel=1e-14)
    assert high.entropy_density == pytest.approx(0.5931331925367895, rel=1e-12)


def test_saddle_against_golden_section():
    # independent 1-d minimization of the effective action
    for a in (1.3, 2.0, 4.0):
        res = minimize_scalar(
            lambda s: s * s / (4.0 * a) - planar_free_energy(s),
            bounds=(0.0, 4.0 * a), method="bounded",
            options={"xatol": 1e-12})
        r = saddle_entropy(a)
        assert abs(res.x - r.sigma_star) < 1e-7
        assert abs(-res.fun - r.entropy_density) < 1e-10


def test_saddle_local_and_global_optimality():
    for a in (1.01, 1.5, 2.0, 3.0, 5.0):
        r = saddle_entropy(a)
        act = lambda s: s * s / (4.0 * a) - planar_free_energy(s)
        assert act(r.sigma_star + 1e-4) > act(r.sigma_star)
        assert act(r.sigma_star - 1e-4) > act(r.sigma_star)
        assert r.entropy_density > 0.0      # beats the sigma = 0 saddle


def test_entropy_monotone_and_first_order_kink():
    grid = np.linspace(1.01, 5.0, 30)
    s = [saddle_entropy(a).entropy_density for a in grid]
    assert all(b > a for a, b in zip(s, s[1:]))
    # ds/da jumps across a = 1: zero below, sigma*^2/(4a^2) -> 1/4 above
    h = 1e-3
    below = (saddle_entropy(1.0 - h).entropy_density
             - saddle_entropy(1.0 - 2 * h).entropy_density) / h
    above = (saddle_entropy(1.0 + 2 * h).entropy_density
             - saddle_entropy(1.0 + h).entropy_density) / h
    assert abs(below) < 1e-6 and above > 0.2


def test_temperature_map():
    assert abs(transition_temperature() - 0.38) < 0.005
    assert a_of_T(0.05) < 1e-3
    assert a_of_T(0.38) == pytest.approx(1.0035, abs=1e-3)
    for a in (0.1, 0.5, 1.0, 2.0, 7.0):
        assert abs(a_of_T(T_of_a(a)) - a) < 1e-12 * a
    with pytest.raises(ValueError):
        a_of_T(0.0)
    with pytest.raises(ValueError):
        T_of_a(-1.0)


def test_temperature_map_monotone():
    Ts = np.linspace(0.1, 2.0, 40)
    vals = [a_of_T(T) for T in Ts]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_planar_polyakov_values():
    assert planar_polyakov(0.5) == 0.0
    sigma = 2.0 + math.sqrt(2.0)
    assert planar_polyakov(2.0) == pytest.approx(1.0 - 0.5 / sigma, rel=1e-14)
    vals = [planar_polyakov(a) for a in (1.5, 2.0, 5.0, 50.0, 5000.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1.0


def test_polyakov_from_sourced_saddle():
    # central finite difference of the sourced saddle value
    eps = 1e-5
    for a in (1.5, 2.0, 3.0):
        fd = (sourced_entropy_density(a, eps)
              - sourced_entropy_density(a, -eps)) / (2.0 * eps)
        assert abs(fd - planar_polyakov(a)) < 1e-6


def test_params_validation():
    with pytest.raises(ValueError):
        GwwParams(0, 1.0)
    with pytest.raises(ValueError):
        GwwParams(2, -0.5)
    with pytest.raises(ValueError):
        saddle_entropy(0.0)
    with pytest.raises(ValueError):
        planar_free_energy(-0.1)
