import math

import mpmath
import numpy as np
import pytest

from hpchain import chain
from hpchain.chain import (INFINITE, ChainSpec, OccupationState, amplitude,
                           dispersion_from_couplings, ed_oracle_echo,
                           fermion_amplitude, log_normalized_echo,
                           normalized_echo, propagator, psi0, psi_impurity)


def bessel_oracle(nu, x):
    # independent route: arbitrary-precision Bessel
    return float(mpmath.besseli(abs(nu), x))


# ----------------------------------------------------------------------
# states
# ----------------------------------------------------------------------

def test_psi0():
    assert psi0(3, 10).sites == (0, 1, 2)
    assert psi0(1, 5).sites == (0,)
    assert psi0(4, 11).sites == (0, 1, 2, 3)
    with pytest.raises(ValueError):
        psi0(5, 5)


def test_psi_impurity():
    assert psi_impurity(3, 10, 1).sites == (0, 1, 3)
    assert psi_impurity(2, 8, 3).sites == (0, 4)
    assert psi_impurity(4, 11, 2).sites == (0, 1, 2, 5)
    with pytest.raises(ValueError):
        psi_impurity(4, 5, 2)       # shifted site out of range
    with pytest.raises(ValueError):
        psi_impurity(1, 8, 1)


def test_occupation_state_validation():
    with pytest.raises(ValueError):
        OccupationState((3, 1))
    with pytest.raises(ValueError):
        OccupationState((1, 1, 2))


def test_chain_spec_validation():
    with pytest.raises(ValueError):
        ChainSpec(4, (1.0, 0.5))     # L <= 2K
    with pytest.raises(ValueError):
        ChainSpec(10, (-1.0,))
    assert ChainSpec(INFINITE, (1.0, 0.5)).K == 2


# ----------------------------------------------------------------------
# propagator
# ----------------------------------------------------------------------

def test_propagator_zero_coupling_is_delta():
    spec = ChainSpec(10, (0.0,))
    for j in range(4):
        for k in range(4):
            assert propagator(spec, j, k) == pytest.approx(float(j == k), abs=1e-15)


def test_propagator_infinite_is_bessel():
    spec = ChainSpec(INFINITE, (2.0,))
    assert abs(propagator(spec, 1, 0) - bessel_oracle(1, 2.0)) < 1e-13


def test_propagator_single_magnon_ed():
    # one down spin: the kernel itself is the sector propagator
    spec = ChainSpec(12, (1.0,))
    for j, k in [(0, 0), (3, 1), (7, 2)]:
        ed = ed_oracle_echo(spec, OccupationState((k,)), OccupationState((j,)))
        assert abs(propagator(spec, j, k) - ed) < 1e-12


# ----------------------------------------------------------------------
# amplitude vs the dense oracle
# ----------------------------------------------------------------------

def test_amplitude_trivial_cases():
    spec = ChainSpec(10, (0.0,))
    one = amplitude(spec, psi0(1, 10), psi0(1, 10))
    assert one.sign == 1 and one.ln_magnitude == 0.0
    crossed = amplitude(spec, psi_impurity(3, 10, 1), psi0(3, 10))
    assert crossed.sign == 0


def test_amplitude_matches_ed_example():
    spec = ChainSpec(10, (1.5,))
    state = psi0(3, 10)
    det = amplitude(spec, state, state).value()
    ed = ed_oracle_echo(spec, state, state)
    assert abs(det - ed) / abs(ed) < 1e-10


@pytest.mark.parametrize("L", [8, 10])
@pytest.mark.parametrize("N", [1, 2, 3, 4])
@pytest.mark.parametrize("J", [0.5, 2.0])
def test_amplitude_ed_grid_k1(L, N, J):
    spec = ChainSpec(L, (J,))
    state = psi0(N, L)
    det = amplitude(spec, state, state).value()
    ed = ed_oracle_echo(spec, state, state)
    assert abs(det - ed) / abs(ed) < 1e-9


@pytest.mark.parametrize("N", [2, 3, 4])
@pytest.mark.parametrize("J", [1.0, 2.0])
def test_amplitude_ed_grid_k2_decoupling(N, J):
    spec = ChainSpec(12, (0.0, J))
    state = psi0(N, 12)
    det = amplitude(spec, state, state).value()
    ed = ed_oracle_echo(spec, state, state)
    assert abs(det - ed) / abs(ed) < 1e-9


def test_impurity_amplitude_matches_ed():
    for L, N, J in [(10, 3, 1.5), (8, 2, 2.0), (12, 4, 1.0)]:
        spec = ChainSpec(L, (J,))
        inn, out = psi_impurity(N, L, 1), psi0(N, L)
        det = amplitude(spec, inn, out).value()
        ed = ed_oracle_echo(spec, inn, out)
        assert abs(abs(det) - abs(ed)) / abs(ed) < 1e-10


def test_generic_k2_is_not_free():
    # with both couplings active the chain is not a free-fermion model:
    # range-2 hops cross occupied sites, and no kernel determinant matches
    # the dense amplitude (this bounds the determinant formula's validity)
    spec = ChainSpec(10, (1.0, 1.0))
    state = psi0(2, 10)
    det = amplitude(spec, state, state).value()
    ed = ed_oracle_echo(spec, state, state)
    assert abs(det - ed) / abs(ed) > 1e-3


def test_translation_invariance():
    for L, N, J in [(10, 3, 1.5), (10, 2, 2.0), (12, 4, 1.0)]:
        spec = ChainSpec(L, (J,))
        base = amplitude(spec, psi0(N, L), psi0(N, L))
        for c in (1, 3, L - 2):
            shifted = OccupationState(tuple(sorted((s + c) % L for s in range(N))))
            moved = amplitude(spec, shifted, shifted)
            assert moved.sign == base.sign
            assert abs(moved.ln_magnitude - base.ln_magnitude) < 1e-12


def test_positivity_on_grid():
    for L in (8, 12):
        for N in (1, 2, 3):
            for J in (0.5, 2.0):
                assert amplitude(ChainSpec(L, (J,)), psi0(N, L), psi0(N, L)).sign == 1


# ----------------------------------------------------------------------
# echoes
# ----------------------------------------------------------------------

def test_normalized_echo_trivial():
    assert normalized_echo(ChainSpec(12, (0.0,)), 3) == pytest.approx(1.0, abs=1e-14)
    assert normalized_echo(ChainSpec(INFINITE, (1.7,)), 1) == 1.0


def test_normalized_echo_two_particle_closed_form():
    J = 1.0
    i0, i1 = bessel_oracle(0, J), bessel_oracle(1, J)
    expected = (i0 * i0 - i1 * i1) ** 2 / (i0 * i0)
    got = normalized_echo(ChainSpec(INFINITE, (J,)), 2)
    assert abs(got - expected) / expected < 1e-12


def test_echo_l_convergence_monotone():
    # finite-L echo approaches the infinite-L value monotonically for L >= 4N
    N, J = 3, 1.5
    target = log_normalized_echo(ChainSpec(INFINITE, (J,)), N)
    errs = [abs(log_normalized_echo(ChainSpec(L, (J,)), N) - target)
            for L in (12, 16, 20, 24)]
    assert all(errs[i] > errs[i + 1] for i in range(len(errs) - 1))
    assert errs[-1] < 1e-10


# ----------------------------------------------------------------------
# fermionic picture
# ----------------------------------------------------------------------

def test_fermion_amplitude_identity_at_beta_zero():
    model = dispersion_from_couplings((1.0,))
    assert fermion_amplitude(model, 3, 32, 0.0).value() == 1.0


def test_fermion_matches_chain_k1():
    model = dispersion_from_couplings((1.5,))
    for L in (16, INFINITE):
        f = fermion_amplitude(model, 3, L, 1.0)
        c = amplitude(ChainSpec(L, (1.5,)), psi0(3, L), psi0(3, L))
        assert abs(f.ln_magnitude - c.ln_magnitude) < 1e-12
        assert f.sign == c.sign == 1


def test_fermion_matches_chain_k2():
    model = dispersion_from_couplings((1.0, 0.8))
    f = fermion_amplitude(model, 4, 64, 1.0)
    c = amplitude(ChainSpec(64, (1.0, 0.8)), psi0(4, 64), psi0(4, 64))
    assert abs(math.expm1(f.ln_magnitude - c.ln_magnitude)) < 1e-9


def test_dispersion_shape():
    model = dispersion_from_couplings((2.0, 1.0))
    k = np.linspace(-np.pi, np.pi, 7)
    eps = model.energies(k)
    assert np.allclose(eps, model.energies(-k))          # even in k
    assert eps[3] == pytest.approx(-2.0 - 0.5)           # k = 0


# ----------------------------------------------------------------------
# dense oracle details
# ----------------------------------------------------------------------

def test_ed_zero_coupling_overlaps():
    spec = ChainSpec(8, (0.0,))
    assert ed_oracle_echo(spec, psi0(2, 8), psi0(2, 8)) == pytest.approx(1.0)
    assert ed_oracle_echo(spec, psi_impurity(2, 8, 1), psi0(2, 8)) == pytest.approx(0.0)


def test_ed_single_magnon_closed_form():
    # L=4, N=1: eigenvalues -J cos(2 pi q / 4)
    J = 1.3
    spec = ChainSpec(4, (J,))
    got = ed_oracle_echo(spec, psi0(1, 4), psi0(1, 4))
    expected = np.mean([math.exp(J * math.cos(math.pi * q / 2.0)) for q in range(4)])
    assert abs(got - expected) < 1e-13


def test_ed_cost_guards():
    with pytest.raises(ValueError):
        ed_oracle_echo(ChainSpec(16, (1.0,)), psi0(2, 16), psi0(2, 16))
    with pytest.raises(ValueError):
        ed_oracle_echo(ChainSpec(14, (1.0,) * 7), psi0(2, 14), psi0(2, 14))
