"""Audit suite for the determinant identities behind the chain mapping.

Four families are verified on frozen grids:

  PROP_BESSEL         single-range generalized coefficients collapse to
                      ordinary Bessel values: gen_nu(0,..,0,K*J) is 0
                      unless K | nu and equals I_{nu/K}(J) otherwise
                      (arguments in the rescaled J_K/K convention);
  DET_ID_K2 /         det_{KN}[gen kernel, range K only] equals the K-th
  DET_ID_GENERAL_K    power of det_N[I_{j-k}(J)];
  FERMION_EQUIVALENCE free-fermion Slater amplitudes with the matched
                      dispersion equal the chain determinants;
  HEINE_SZEGO         Toeplitz determinants equal the brute-force
                      eigenvalue-angle integral of the unitary matrix model.

Each check returns a machine-readable report; a perturbation hook rescales
one kernel entry so that the audit's sensitivity itself is testable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from . import chain, toeplitz
from .specfun import (bessel_i_scaled, coupling_scale,
                      generalized_bessel_row_scaled)

MANIFEST_VERSION = 1


@dataclass
class IdentityReport:
    identity_id: str
    parameter_grid: list
    max_abs_error: float
    max_rel_error: float
    tolerance: float
    passed: bool
    failures: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _report(identity_id, grid, abs_errs, rel_errs, tol, use_rel, failures):
    max_abs = float(max(abs_errs)) if abs_errs else 0.0
    max_rel = float(max(rel_errs)) if rel_errs else 0.0
    passed = (max_rel if use_rel else max_abs) < tol and not failures
    return IdentityReport(identity_id, list(grid), max_abs, max_rel, tol,
                          passed, failures)


# ----------------------------------------------------------------------
# PROP_BESSEL
# ----------------------------------------------------------------------

def check_prop_bessel(nu_max: int = 24, J_grid: Sequence[float] = (0.5, 1.0, 2.0, 5.0),
                      K: int = 2, perturb: float = 0.0) -> IdentityReport:
    """Single-range collapse of generalized coefficients, scaled, abs < 1e-12.

    In the package's coupling convention the range-K-only kernel at
    couplings (0,...,0, K*J) has per-entry scale exp(J), so scaled values
    compare directly against e^{-J} I_{nu/K}(J).
    """
    if nu_max > 32:
        raise ValueError("nu_max <= 32")
    if not 2 <= K <= 5:
        raise ValueError("K in 2..5")
    tol = 1e-12
    abs_errs, failures, grid = [], [], []
    for J in J_grid:
        couplings = np.zeros(K)
        couplings[-1] = K * J
        lhs = generalized_bessel_row_scaled(nu_max, couplings)
        if perturb:
            lhs = lhs.copy()
            lhs[0] *= (1.0 + perturb)
        for nu in range(nu_max + 1):
            rhs = bessel_i_scaled(nu // K, J) if nu % K == 0 else 0.0
            err = abs(float(lhs[nu]) - rhs)
            abs_errs.append(err)
            grid.append((K, nu, float(J)))
            if err >= tol:
                failures.append({"K": K, "nu": nu, "J": float(J),
                                 "lhs": float(lhs[nu]), "rhs": rhs})
    return _report("PROP_BESSEL", grid, abs_errs, [0.0], tol, False, failures)


# ----------------------------------------------------------------------
# DET_ID (range-K-only factorization)
# ----------------------------------------------------------------------

def _single_range_logdet(K: int, N_tot: int, J: float, perturb: float) -> float:
    """ln det_{N_tot} of the range-K-only kernel at rescaled coupling J."""
    couplings = np.zeros(K)
    couplings[-1] = K * J
    S = float(coupling_scale(couplings))

    def row_f(numax):
        row = generalized_bessel_row_scaled(numax, couplings)
        if perturb:
            row = row.copy()
            row[0] *= (1.0 + perturb)
        return row

    def row_m(numax, dps):
        row = toeplitz._generalized_row_mp(numax, couplings, dps)
        if perturb:
            row[0] *= (1.0 + perturb)
        return row

    c0 = float(row_f(0)[0])
    nats = toeplitz.general_cancellation_nats(N_tot, S, math.log(max(c0, 1e-300)))
    sites = np.arange(N_tot)
    lv = toeplitz.kernel_logdet(sites, sites, row_f, row_m, S, nats)
    return lv.ln_magnitude


def check_det_identity(K: int, N: int, J: float,
                       perturb: float = 0.0) -> IdentityReport:
    """det_{KN}[range-K kernel] = (det_N[I_{j-k}(J)])^K, rel tol 1e-9."""
    if K * N > 24:
        raise ValueError("K*N <= 24")
    if J > 5.0:
        raise ValueError("J <= 5")
    tol = 1e-9
    lhs = _single_range_logdet(K, K * N, J, perturb)
    rhs = K * toeplitz.gww_toeplitz_logdet(N, J)
    rel = abs(math.expm1(lhs - rhs)) if abs(lhs - rhs) < 1.0 else math.inf
    failures = [] if rel < tol else [{"K": K, "N": N, "J": J,
                                      "lhs_ln": lhs, "rhs_ln": rhs}]
    ident = "DET_ID_K2" if K == 2 else "DET_ID_GENERAL_K"
    return _report(ident, [(K, N, J)], [abs(lhs - rhs)], [rel], tol, True,
                   failures)


# ----------------------------------------------------------------------
# FERMION_EQUIVALENCE
# ----------------------------------------------------------------------

def check_fermion_equivalence(K: int, N: int, L, J_vec: Sequence[float],
                              perturb: float = 0.0) -> IdentityReport:
    """Chain determinant vs Slater determinant with the matched dispersion.

    Tolerance 1e-9 at infinite L; the finite-L comparison carries the
    documented looser tolerance 1e-6 (periodic fermion momenta against the
    parity-matched chain grid).
    """
    if K > 3:
        raise ValueError("K <= 3")
    if L != chain.INFINITE and L < 4 * N:
        raise ValueError("finite-L comparison restricted to L >= 4N")
    J_vec = tuple(float(v) for v in J_vec)
    if len(J_vec) != K:
        raise ValueError("J_vec length must equal K")
    tol = 1e-9 if L == chain.INFINITE else 1e-6
    spec = chain.ChainSpec(L, J_vec)
    state = chain.psi0(N, L)
    a_chain = chain.amplitude(spec, state, state)
    model = chain.dispersion_from_couplings(J_vec)
    a_ferm = chain.fermion_amplitude(model, N, L, 1.0)
    lhs = a_chain.ln_magnitude + (math.log1p(perturb) if perturb else 0.0)
    rhs = a_ferm.ln_magnitude
    if all(v == 0.0 for v in J_vec):
        rel = abs(a_chain.value() - a_ferm.value())
    else:
        rel = abs(math.expm1(lhs - rhs)) if abs(lhs - rhs) < 1.0 else math.inf
    failures = [] if rel < tol else [{"K": K, "N": N, "L": str(L),
                                      "J_vec": list(J_vec),
                                      "chain_ln": lhs, "fermion_ln": rhs}]
    return _report("FERMION_EQUIVALENCE", [(K, N, str(L)) + J_vec],
                   [abs(lhs - rhs)], [rel], tol, True, failures)


# ----------------------------------------------------------------------
# HEINE_SZEGO
# ----------------------------------------------------------------------

def bruteforce_unitary_log_partition(N: int, couplings,
                                     nodes_per_axis: int = 72) -> float:
    """Direct N-fold eigenvalue-angle integral with the squared Vandermonde.

    (1/N!) prod_j int (dtheta_j/2pi) prod_{j<k} |e^{i theta_j}-e^{i theta_k}|^2
    exp( sum_j V(theta_j) ), trapezoid per axis; practical for N <= 3.
    """
    if N > 3:
        raise ValueError("brute force limited to N <= 3 (quadrature budget)")
    J = np.asarray(couplings, dtype=float)
    M = nodes_per_axis
    theta = 2.0 * np.pi * np.arange(M) / M
    V = np.zeros(M)
    for n, Jn in enumerate(J, start=1):
        if Jn != 0.0:
            V += (Jn / n) * np.cos(n * theta)
    w = np.exp(V - V.max())
    if N == 1:
        total = w.mean()
    else:
        z = np.exp(1j * theta)
        if N == 2:
            d = np.abs(z[:, None] - z[None, :]) ** 2
            total = np.einsum("i,j,ij->", w, w, d) / (2.0 * M * M)
        else:
            d01 = np.abs(z[:, None] - z[None, :]) ** 2
            total = np.einsum("i,j,k,ij,ik,jk->", w, w, w,
                              d01, d01, d01) / (6.0 * M ** 3)
    return math.log(total) + N * float(V.max())


def check_heine_szego(N_max: int = 3, J_grid: Sequence[float] = (0.5, 1.0, 2.0),
                      perturb: float = 0.0) -> IdentityReport:
    """Toeplitz determinant vs brute-force unitary integral, rel tol 1e-8."""
    if N_max > 3:
        raise ValueError("brute-force side limited to N <= 3")
    tol = 1e-8
    rel_errs, abs_errs, failures, grid = [], [], [], []
    for N in range(1, N_max + 1):
        for J in J_grid:
            lhs = toeplitz.gww_toeplitz_logdet(N, float(J))
            if perturb:
                lhs += math.log1p(perturb)
            rhs = bruteforce_unitary_log_partition(N, [float(J)])
            rel = abs(math.expm1(lhs - rhs))
            rel_errs.append(rel)
            abs_errs.append(abs(lhs - rhs))
            grid.append((N, float(J)))
            if rel >= tol:
                failures.append({"N": N, "J": float(J),
                                 "toeplitz_ln": lhs, "bruteforce_ln": rhs})
    return _report("HEINE_SZEGO", grid, abs_errs, rel_errs, tol, True, failures)


# ----------------------------------------------------------------------
# frozen manifest and the audit driver
# ----------------------------------------------------------------------

def default_manifest() -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "prop_bessel": {"nu_max": 24, "J_grid": [0.5, 1.0, 2.0, 5.0],
                        "K_values": [2, 3, 4, 5]},
        "det_identity": {"cases": [[2, 1], [2, 2], [2, 4], [2, 8], [2, 12],
                                   [3, 1], [3, 4], [3, 8], [4, 3], [4, 6]],
                         "J_grid": [0.5, 2.0, 5.0]},
        "fermion": {"cases": [[1, 4, "inf", [1.5]],
                              [2, 4, "inf", [1.0, 0.8]],
                              [3, 3, "inf", [0.8, 0.5, 0.4]],
                              [1, 4, 64, [1.5]],
                              [2, 4, 64, [1.0, 0.8]]]},
        "heine_szego": {"N_max": 3, "J_grid": [0.5, 1.0, 2.0]},
    }


def run_all(manifest: Optional[dict] = None,
            perturb: float = 0.0) -> list:
    m = manifest or default_manifest()
    reports = []
    pb = m["prop_bessel"]
    for K in pb["K_values"]:
        reports.append(check_prop_bessel(pb["nu_max"], pb["J_grid"], K, perturb))
    di = m["det_identity"]
    for K, N in di["cases"]:
        for J in di["J_grid"]:
            reports.append(check_det_identity(K, N, float(J), perturb))
    for K, N, L, J_vec in m["fermion"]["cases"]:
        Lval = chain.INFINITE if L == "inf" else int(L)
        reports.append(check_fermion_equivalence(K, N, Lval, J_vec, perturb))
    hs = m["heine_szego"]
    reports.append(check_heine_szego(hs["N_max"], hs["J_grid"], perturb))
    return reports


def reports_to_json(reports) -> str:
    payload = {"manifest_version": MANIFEST_VERSION,
               "all_passed": all(r.passed for r in reports),
               "reports": [r.to_dict() for r in reports]}
    return json.dumps(payload, indent=2, sort_keys=True)


def format_table(reports) -> str:
    lines = [f"{'identity':24s} {'grid':>5s} {'max_abs':>12s} "
             f"{'max_rel':>12s} {'status':>8s}"]
    for r in reports:
        lines.append(f"{r.identity_id:24s} {len(r.parameter_grid):5d} "
                     f"{r.max_abs_error:12.3e} {r.max_rel_error:12.3e} "
                     f"{'PASS' if r.passed else 'FAIL':>8s}")
        for f in r.failures[:4]:
            lines.append(f"    offending: {f}")
    return "\n".join(lines)
