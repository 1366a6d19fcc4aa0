"""Overflow- and cancellation-safe log-determinants of kernel matrices.

The amplitude determinants det[c_{x_r - y_s}] live many orders of magnitude
below the scale of their entries: for the Bessel kernel at coupling J = N
sigma the determinant is exp(N^2 F(sigma)) while the entries are O(e^J), a
gap of N^2 (sigma - F(sigma)) nats that reaches thousands of decimal digits
on the scan grids.  Plain float64 LU silently loses the value once the gap
exceeds ~30 nats, so every public function here routes through one of

  * a float64 scaled-entry slogdet fast path, used only when an a-priori
    cancellation bound certifies it, or
  * fixed multiprecision (mpmath, gmpy backend): Bessel rows by Miller's
    downward recurrence with generating-function normalization, determinants
    by the Levinson-Durbin prediction-error recursion (Toeplitz case) or
    plain LU with partial pivoting (shifted-column case), with working
    precision set from the cancellation bound plus guard digits.

All rows are exponentially scaled (entries in [-1, 1]); the true log value
is restored from the known per-entry scale.
"""

from __future__ import annotations

import json
import math
import os
from typing import Callable, Sequence

import numpy as np
from mpmath import mp

from .logvalue import LogValue
from .specfun import (bessel_i_scaled_row, bessel_row_complex_scaled,
                      coupling_scale, generalized_bessel_row_scaled)

_FLOAT64_SAFE_NATS = 12.0
_GUARD_DIGITS = 25
_LN10 = math.log(10.0)


def _planar_gww_free_energy(sigma: float) -> float:
    # Used only to size working precision; the public planar solution lives
    # in hpchain.gww.
    if sigma <= 1.0:
        return 0.25 * sigma * sigma
    return sigma - 0.5 * math.log(sigma) - 0.75


def bessel_cancellation_nats(N: int, J: float) -> float:
    """Bound on ln(entry-scale^N / det) for det_N[I_{j-k}(J)]."""
    if J <= 0.0:
        return 0.0
    ln_i0 = float(np.log(bessel_i_scaled_row(0, J)[0])) + J
    nats = N * ln_i0 - N * N * _planar_gww_free_energy(J / N)
    return max(0.0, nats) + 0.5 * N * math.log(max(N, 2))


def general_cancellation_nats(N: int, scale: float, ln_c0_scaled: float) -> float:
    """Cancellation bound for a positive symbol with zero-mean log.

    The Toeplitz prediction errors decrease from c_0 toward the geometric
    mean exp(<ln symbol>) = 1 of the cosine-series symbols used here, so
    1 <= det <= c_0^N and N ln c_0 bounds the cancellation.
    """
    nats = N * (ln_c0_scaled + scale)
    return max(0.0, nats) + 0.5 * N * math.log(max(N, 2))


def atomic_cancellation_nats(N: int, scale: float, ln_c0_scaled: float) -> float:
    """Conservative variant for finite-L (atomic-measure) kernels.

    The geometric-mean floor of the continuum symbol does not apply to
    atomic measures, so the symbol minimum exp(-scale) is used instead:
    ln det >= -N*scale.
    """
    nats = N * (ln_c0_scaled + scale) + N * scale
    return max(0.0, nats) + 0.5 * N * math.log(max(N, 2))


def _dps_for(nats: float) -> int:
    return max(30, int(nats / _LN10) + _GUARD_DIGITS)


# ----------------------------------------------------------------------
# multiprecision Bessel rows (Miller's algorithm)
# ----------------------------------------------------------------------

def _miller_start(nu_max: int, absx: float, target_nats: float) -> int:
    """Start order M with I_M(x) below e^{-target} of the row scale."""
    M = max(nu_max + 8, int(absx) + 8)
    while True:
        r = math.hypot(M, absx)
        ln_scaled = r - M * math.asinh(M / max(absx, 1e-300)) - absx
        if ln_scaled < -target_nats:
            return M
        M = int(M * 1.25) + 8


def _bessel_row_mp(nu_max: int, x, dps: int):
    """Scaled row [e^{-x} I_0(x) .. e^{-x} I_{nu_max}(x)] at dps digits.

    Downward three-term recurrence from a super-decayed start order,
    normalized through I_0 + 2 sum_{k>=1} I_k = e^x.  Works for complex x
    (normalization then carries the phase e^{i Im x}).
    """
    is_complex = isinstance(x, complex) or (hasattr(x, "imag") and x.imag != 0)
    with mp.workdps(dps + 10):
        xm = mp.mpc(x) if is_complex else mp.mpf(x)
        target = (dps + 15) * _LN10
        M = _miller_start(nu_max, abs(complex(x)), target)
        two_over_x = 2 / xm
        p_hi = mp.mpf(0)
        p_lo = mp.mpf(1)
        total = mp.mpf(0)
        row = [mp.mpf(0)] * (nu_max + 1)
        k = M
        while k > 0:
            if k <= nu_max:
                row[k] = p_lo
            total += 2 * p_lo
            p_hi, p_lo = p_lo, p_hi + k * two_over_x * p_lo
            k -= 1
        row[0] = p_lo
        total += p_lo
        # row/total = e^{-x} I_nu(x); rescale to e^{-Re x} I_nu(x)
        if is_complex:
            phase = mp.exp(mp.mpc(0, xm.imag))
            return [r * phase / total for r in row]
        return [r / total for r in row]


def _mp_trapezoid_nodes(nu_max: int, absJ_sum: float, dps: int) -> int:
    # aliasing of the uniform grid is set by coefficients of order ~ Mnodes;
    # push them below the working precision
    target = (dps + 12) * _LN10
    return max(64, nu_max + _miller_start(0, max(absJ_sum, 1e-6), target))


def _generalized_row_mp(nu_max: int, couplings: Sequence[float], dps: int):
    """Scaled generalized row (orders 0..nu_max) by trapezoid sum in mp."""
    J = [float(v) for v in couplings]
    S = sum(v / n for n, v in enumerate(J, start=1))
    Mnodes = _mp_trapezoid_nodes(nu_max, sum(abs(v) for v in J), dps)
    with mp.workdps(dps + 10):
        row = [mp.mpf(0)] * (nu_max + 1)
        for m in range(Mnodes):
            frac = mp.mpf(2 * m) / Mnodes          # theta / pi
            V = mp.mpf(0)
            for n, v in enumerate(J, start=1):
                if v != 0.0:
                    V += mp.mpf(v) / n * mp.cospi(n * frac)
            w = mp.exp(V - S)
            # cos(nu * theta) by Chebyshev recurrence on cos(theta)
            c1 = mp.cospi(frac)
            c_prev, c_cur = mp.mpf(1), c1
            row[0] += w
            for nu in range(1, nu_max + 1):
                row[nu] += w * c_cur
                c_prev, c_cur = c_cur, 2 * c1 * c_cur - c_prev
        return [r / Mnodes for r in row]


def _finite_chain_row_mp(nu_max: int, L: int, couplings: Sequence[float],
                         twist: float, dps: int):
    """Scaled finite-L kernel row (1/L) sum_q e^{i k_q nu} e^{V(k_q) - S}."""
    J = [float(v) for v in couplings]
    S = sum(v / n for n, v in enumerate(J, start=1))
    with mp.workdps(dps + 10):
        row = [mp.mpf(0)] * (nu_max + 1)
        for q in range(L):
            frac = mp.mpf(2) * (q + twist) / L      # k_q / pi
            V = mp.mpf(0)
            for n, v in enumerate(J, start=1):
                if v != 0.0:
                    V += mp.mpf(v) / n * mp.cospi(n * frac)
            w = mp.exp(V - S)
            e = mp.expjpi(frac)
            z = mp.mpc(1)
            for nu in range(nu_max + 1):
                row[nu] += w * z.real
                z *= e
        return [r / L for r in row]


# ----------------------------------------------------------------------
# determinant engines
# ----------------------------------------------------------------------

def _levinson_logdet_mp(row, dps: int) -> float:
    """ln det of the symmetric PD Toeplitz with first row `row` (mp list).

    Durbin recursion; ln det = sum of log prediction errors.  Exact in
    exact arithmetic, so precision = cancellation bound + guard digits
    makes it reliable in fixed multiprecision.
    """
    N = len(row)
    with mp.workdps(dps):
        E = row[0]
        lndet = mp.log(E)
        a: list = []
        for k in range(1, N):
            acc = row[k]
            for j in range(1, k):
                acc -= a[j - 1] * row[k - j]
            kappa = acc / E
            a = [a[j] - kappa * a[k - 2 - j] for j in range(k - 1)] + [kappa]
            E = E * (1 - kappa * kappa)
            if E <= 0:
                raise ArithmeticError(
                    "Toeplitz matrix lost positive definiteness; "
                    "cancellation bound too small")
            lndet += mp.log(E)
        return float(lndet)


def _lu_slogdet_mp(M, dps: int):
    """(sign, ln|det|) of a square mp matrix (list of lists), partial pivoting.

    For complex matrices the returned sign is +1 and only ln|det| is
    meaningful.
    """
    n = len(M)
    is_complex = any(getattr(v, "imag", 0) != 0 for r in M for v in r)
    with mp.workdps(dps):
        A = [list(r) for r in M]
        sign = 1
        ln = mp.mpf(0)
        for col in range(n):
            piv, pmag = col, abs(A[col][col])
            for r in range(col + 1, n):
                if abs(A[r][col]) > pmag:
                    piv, pmag = r, abs(A[r][col])
            if pmag == 0:
                return 0, -math.inf
            if piv != col:
                A[col], A[piv] = A[piv], A[col]
                sign = -sign
            p = A[col][col]
            if not is_complex and p < 0:
                sign = -sign
            ln += mp.log(abs(p))
            inv_p = 1 / p
            for r in range(col + 1, n):
                f = A[r][col] * inv_p
                if f != 0:
                    Ar, Ac = A[r], A[col]
                    for c in range(col + 1, n):
                        Ar[c] -= f * Ac[c]
        return (1 if is_complex else sign), float(ln)


def _toeplitz_matrix_from_row(row: np.ndarray, x: np.ndarray, y: np.ndarray):
    idx = np.abs(x[:, None] - y[None, :])
    return row[idx]


# ----------------------------------------------------------------------
# public log-determinants
# ----------------------------------------------------------------------

def gww_toeplitz_logdet(N: int, J: float) -> float:
    """ln det_{0<=j,k<N}[ I_{j-k}(J) ], exact to ~1e-13 relative anywhere."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if J == 0.0:
        return 0.0
    cached = _cache_get(N, J)
    if cached is not None:
        return cached
    nats = bessel_cancellation_nats(N, J)
    if nats < _FLOAT64_SAFE_NATS:
        row = bessel_i_scaled_row(N - 1, J)
        rng = np.arange(N)
        sign, ld = np.linalg.slogdet(_toeplitz_matrix_from_row(row, rng, rng))
        out = ld + N * J
    else:
        dps = _dps_for(nats)
        row = _bessel_row_mp(N - 1, J, dps)
        out = _levinson_logdet_mp(row, dps) + N * J
    _cache_put(N, J, out)
    return out


def gen_toeplitz_logdet(N: int, couplings) -> float:
    """ln det_N of the generalized kernel Toeplitz matrix."""
    if N < 1:
        raise ValueError("N must be >= 1")
    J = np.asarray(couplings, dtype=float)
    if np.all(J == 0.0):
        return 0.0
    if J.size == 1:
        return gww_toeplitz_logdet(N, float(J[0]))
    S = float(coupling_scale(J))
    row = generalized_bessel_row_scaled(N - 1, J)
    nats = general_cancellation_nats(N, S, float(np.log(max(row[0], 1e-300))))
    if nats < _FLOAT64_SAFE_NATS:
        rng = np.arange(N)
        sign, ld = np.linalg.slogdet(_toeplitz_matrix_from_row(row, rng, rng))
        return ld + N * S
    dps = _dps_for(nats)
    return _levinson_logdet_mp(_generalized_row_mp(N - 1, J, dps), dps) + N * S


def finite_chain_toeplitz_logdet(N: int, L: int, couplings, twist: float) -> float:
    """ln det_N of the finite-L kernel for a contiguous block state."""
    J = np.asarray(couplings, dtype=float)
    if np.all(J == 0.0):
        return 0.0
    S = float(coupling_scale(J))
    row_f = finite_chain_row_scaled(N - 1, L, J, twist)
    nats = atomic_cancellation_nats(N, S, float(np.log(max(row_f[0], 1e-300))))
    if nats < _FLOAT64_SAFE_NATS:
        rng = np.arange(N)
        sign, ld = np.linalg.slogdet(_toeplitz_matrix_from_row(row_f, rng, rng))
        return ld + N * S
    dps = _dps_for(nats)
    row = _finite_chain_row_mp(N - 1, L, J, twist, dps)
    return _levinson_logdet_mp(row, dps) + N * S


def finite_chain_row_scaled(nu_max: int, L: int, couplings, twist: float) -> np.ndarray:
    """Float finite-L kernel row, scaled by exp(-sum J_n/n), orders 0..nu_max."""
    J = np.asarray(couplings, dtype=float)
    S = float(coupling_scale(J)) if J.size else 0.0
    k = 2.0 * np.pi * (np.arange(L) + twist) / L
    V = np.zeros(L)
    for n, Jn in enumerate(J, start=1):
        if Jn != 0.0:
            V += (Jn / n) * np.cos(n * k)
    w = np.exp(V - S)
    nu = np.arange(nu_max + 1)
    return (np.cos(np.outer(nu, k)) @ w) / L


def kernel_logdet(x_sites, y_sites, row_float: Callable[[int], np.ndarray],
                  row_mp: Callable[[int, int], list], scale: float,
                  cancellation_nats: float) -> LogValue:
    """LogValue of det[ c_{x_r - y_s} ] for arbitrary site lists.

    row_float(nu_max) and row_mp(nu_max, dps) return scaled kernel entries
    for orders 0..nu_max (entries are even in the order); `scale` is the
    per-entry log scale.  Contiguous equal x and y reduce to the symmetric
    Toeplitz fast path.
    """
    x = np.asarray(x_sites, dtype=int)
    y = np.asarray(y_sites, dtype=int)
    if x.size != y.size:
        raise ValueError("bra and ket occupation sizes differ")
    N = x.size
    nu_max = int(np.max(np.abs(x[:, None] - y[None, :])))
    toeplitz_pd = bool(np.array_equal(x, y))
    if cancellation_nats < _FLOAT64_SAFE_NATS:
        row = row_float(nu_max)
        M = _toeplitz_matrix_from_row(row, x, y)
        sign, ld = np.linalg.slogdet(M)
        if sign == 0.0 or ld == -np.inf:
            return LogValue.zero()
        return LogValue.from_log(ld + N * scale, int(sign))
    dps = _dps_for(cancellation_nats)
    row = row_mp(nu_max, dps)
    if toeplitz_pd:
        return LogValue.from_log(_levinson_logdet_mp(row[:N], dps) + N * scale, 1)
    M = [[row[abs(int(xr - ys))] for ys in y] for xr in x]
    sign, ld = _lu_slogdet_mp(M, dps)
    if sign == 0:
        return LogValue.zero()
    return LogValue.from_log(ld + N * scale, sign)


def complex_toeplitz_logabsdet(N: int, z: complex) -> float:
    """ln |det_N[atoms I_{j-k}(z)]| for complex argument z."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if z == 0:
        return 0.0
    nats = bessel_cancellation_nats(N, abs(complex(z))) + N * abs(complex(z).imag)
    if nats < _FLOAT64_SAFE_NATS:
        row = bessel_row_complex_scaled(N - 1, z)
        rng = np.arange(N)
        M = _toeplitz_matrix_from_row(row, rng, rng)
        sign, ld = np.linalg.slogdet(M)
        return float(ld) + N * complex(z).real
    dps = _dps_for(nats)
    row = _bessel_row_mp(N - 1, complex(z), dps)
    M = [[row[abs(j - k)] for k in range(N)] for j in range(N)]
    _, ld = _lu_slogdet_mp(M, dps)
    return ld + N * complex(z).real


# ----------------------------------------------------------------------
# optional on-disk kernel cache (HPCHAIN_CACHE_DIR)
# ----------------------------------------------------------------------

_cache: dict | None = None
_cache_path: str | None = None


def _cache_init():
    global _cache, _cache_path
    if _cache is not None:
        return
    d = os.environ.get("HPCHAIN_CACHE_DIR")
    if not d:
        _cache = {}
        return
    os.makedirs(d, exist_ok=True)
    _cache_path = os.path.join(d, "gww_logdet_cache.json")
    try:
        with open(_cache_path) as fh:
            _cache = {k: float(v) for k, v in json.load(fh).items()}
    except (OSError, ValueError):
        _cache = {}


def _cache_key(N: int, J: float) -> str:
    return f"{N}:{float(J).hex()}"


def _cache_get(N: int, J: float):
    _cache_init()
    return _cache.get(_cache_key(N, J))


def _cache_put(N: int, J: float, val: float):
    _cache.setdefault(_cache_key(N, J), val)


def flush_cache():
    """Persist the kernel cache if HPCHAIN_CACHE_DIR is configured."""
    if _cache_path and _cache:
        tmp = _cache_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(_cache, fh)
        os.replace(tmp, _cache_path)
