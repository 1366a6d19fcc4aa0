import json
import math

import mpmath
import pytest

from hpchain import chain
from hpchain.identities import (check_det_identity, check_fermion_equivalence,
                                check_heine_szego, check_prop_bessel,
                                default_manifest, format_table, reports_to_json,
                                run_all)
from hpchain.specfun import bessel_i_scaled, generalized_bessel_scaled


def test_prop_bessel_specific_values():
    # odd order vanishes for range 2
    assert abs(generalized_bessel_scaled(1, [0.0, 2.0])) < 1e-15
    # even order collapses: scaled gen at (0, 2J) equals scaled I_{nu/2}(J)
    got = generalized_bessel_scaled(4, [0.0, 2.0])
    assert abs(got - bessel_i_scaled(2, 1.0)) < 1e-13
    # zero coupling, any range: order 0 gives 1
    assert generalized_bessel_scaled(0, [0.0, 0.0, 0.0]) == pytest.approx(1.0)


@pytest.mark.parametrize("K", [2, 3, 4, 5])
def test_prop_bessel_grids(K):
    rep = check_prop_bessel(nu_max=24, J_grid=(0.5, 1.0, 2.0, 5.0), K=K)
    assert rep.passed
    assert rep.max_abs_error < 1e-12


def test_det_identity_printed_case():
    # N = 1, K = 2: gen_0(0,2J)^2 - gen_{-1} gen_1 = I_0(J)^2
    J = 1.3
    g0 = generalized_bessel_scaled(0, [0.0, 2.0 * J])
    g1 = generalized_bessel_scaled(1, [0.0, 2.0 * J])
    lhs = g0 * g0 - g1 * g1
    rhs = bessel_i_scaled(0, J) ** 2
    assert abs(lhs - rhs) < 1e-14
    assert check_det_identity(2, 1, J).passed


def test_det_identity_trivial_zero_coupling():
    rep = check_det_identity(3, 2, 0.0)
    assert rep.passed and rep.max_rel_error < 1e-15


@pytest.mark.parametrize("K,N,J", [(2, 4, 2.0), (3, 4, 2.0), (2, 12, 5.0),
                                   (4, 6, 5.0)])
def test_det_identity_grid(K, N, J):
    rep = check_det_identity(K, N, J)
    assert rep.passed, rep.failures


def test_det_identity_guards():
    with pytest.raises(ValueError):
        check_det_identity(5, 5, 1.0)
    with pytest.raises(ValueError):
        check_det_identity(2, 2, 6.0)


def test_factorization_two_routes():
    # chain amplitude with range-2-only couplings against the squared
    # nearest-neighbour amplitude: generalized-kernel route vs Bessel route
    for N, J in [(2, 1.0), (3, 2.0)]:
        lhs = chain.amplitude(chain.ChainSpec(chain.INFINITE, (0.0, J)),
                              chain.psi0(2 * N, chain.INFINITE),
                              chain.psi0(2 * N, chain.INFINITE))
        rhs = chain.amplitude(chain.ChainSpec(chain.INFINITE, (J / 2.0,)),
                              chain.psi0(N, chain.INFINITE),
                              chain.psi0(N, chain.INFINITE))
        assert abs(lhs.ln_magnitude - 2.0 * rhs.ln_magnitude) < 1e-10


def test_fermion_reports():
    assert check_fermion_equivalence(1, 4, chain.INFINITE, [1.5]).passed
    assert check_fermion_equivalence(2, 4, 64, [1.0, 0.8]).passed
    assert check_fermion_equivalence(2, 4, chain.INFINITE, [1.0, 0.8]).passed
    assert check_fermion_equivalence(1, 2, 16, [0.0]).passed
    with pytest.raises(ValueError):
        check_fermion_equivalence(2, 4, 12, [1.0, 0.8])   # L < 4N


def test_heine_szego_report():
    rep = check_heine_szego(3, (0.5, 1.0, 2.0))
    assert rep.passed
    assert rep.max_rel_error < 1e-8


def test_run_all_default_manifest_passes():
    reports = run_all()
    assert all(r.passed for r in reports), format_table(reports)
    payload = json.loads(reports_to_json(reports))
    assert payload["all_passed"]
    assert payload["manifest_version"] == default_manifest()["manifest_version"]


def test_perturbation_sensitivity():
    reports = run_all(perturb=1e-6)
    assert not all(r.passed for r in reports)


def test_bruteforce_oracle_self_consistency():
    # N = 1 brute force is just the I_0 integral
    from hpchain.identities import bruteforce_unitary_log_partition
    J = 2.0
    assert abs(bruteforce_unitary_log_partition(1, [J])
               - math.log(float(mpmath.besseli(0, J)))) < 1e-10
    with pytest.raises(ValueError):
        bruteforce_unitary_log_partition(4, [1.0])
