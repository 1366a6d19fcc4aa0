"""Scaled modified Bessel functions and their multi-coupling generalization.

These are the entry kernels of every Toeplitz determinant in the package:
I_nu(J) for the nearest-neighbour chain, and the generalized coefficient

    I_nu(J_1,...,J_K) = (1/2pi) int_0^{2pi} e^{i nu theta}
                        exp( sum_n (J_n/n) cos(n theta) ) dtheta

for interaction range K.  Everything is evaluated in exponentially scaled
form (divided by the theta = 0 maximum of the integrand) so that Toeplitz
entries stay in [-1, 1].
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ive


def _check_real_arg(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x}")
    if x < 0.0:
        raise ValueError(f"argument must be non-negative, got {x}")
    if x > 1e6:
        raise ValueError(f"argument out of supported range (<= 1e6): {x}")
    return x


def bessel_i_scaled(nu: int, x: float) -> float:
    """e^{-x} I_nu(x) for integer order nu (negative allowed), x >= 0.

    The scaled value lies in [0, 1]; I_{-nu} = I_nu for integer nu.
    """
    x = _check_real_arg(x)
    nu = int(nu)
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    return float(ive(abs(nu), x))


def bessel_i_scaled_row(nu_max: int, x: float) -> np.ndarray:
    """Array [e^{-x} I_0(x), ..., e^{-x} I_{nu_max}(x)]."""
    x = _check_real_arg(x)
    if x == 0.0:
        row = np.zeros(nu_max + 1)
        row[0] = 1.0
        return row
    return ive(np.arange(nu_max + 1), x)


def coupling_scale(couplings) -> float:
    """sum_n J_n / n, the log of the integrand maximum at theta = 0."""
    J = np.asarray(couplings, dtype=complex if np.iscomplexobj(couplings) else float)
    if J.ndim != 1 or J.size < 1:
        raise ValueError("couplings must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(J)):
        raise ValueError("couplings must be finite")
    n = np.arange(1, J.size + 1)
    return (J / n).sum()


def _node_count(nu_max: int, absJ_sum: float) -> int:
    # Equally spaced trapezoid on [0, 2pi) is exponentially convergent for
    # entire integrands; this node rule keeps aliasing far below 1e-15.
    m = 8 * (abs(int(nu_max)) + math.ceil(absJ_sum) + 1)
    return max(256, 1 << (m - 1).bit_length())


def generalized_bessel_row_scaled(nu_max: int, couplings) -> np.ndarray:
    """Scaled coefficients for orders 0..nu_max at couplings (J_1,...,J_K).

    Entry nu is I_nu(J_1,...,J_K) * exp(-sum_n J_n/n).  One uniform theta
    grid evaluates all orders at once through a discrete Fourier sum.
    Negative orders follow by symmetry I_{-nu} = I_nu.
    """
    J = np.asarray(couplings, dtype=float)
    if not np.all(np.isfinite(J)):
        raise ValueError("couplings must be finite")
    S = float(coupling_scale(J))
    M = _node_count(nu_max, float(np.abs(J).sum()))
    theta = 2.0 * np.pi * np.arange(M) / M
    V = np.zeros(M)
    for n, Jn in enumerate(J, start=1):
        if Jn != 0.0:
            V += (Jn / n) * np.cos(n * theta)
    w = np.exp(V - S)
    coeff = np.fft.ifft(w).real
    return coeff[: nu_max + 1].copy()


def generalized_bessel_scaled(nu: int, couplings) -> float:
    """Scaled generalized coefficient, I_nu(J_1..J_K) * exp(-sum J_n/n)."""
    nu = abs(int(nu))
    return float(generalized_bessel_row_scaled(nu, couplings)[nu])


def generalized_bessel(nu: int, couplings) -> float:
    """Unscaled I_nu(J_1,...,J_K); overflows for sum J_n/n beyond ~700."""
    S = float(coupling_scale(np.asarray(couplings, dtype=float)))
    return generalized_bessel_scaled(nu, couplings) * math.exp(S)


def bessel_row_complex_scaled(nu_max: int, z: complex) -> np.ndarray:
    """Coefficients of exp(z cos theta), scaled by exp(-Re z), orders 0..nu_max.

    Used for the complex-temperature kernel; z = e^{-i phi/2} J.  The
    orders are even in nu, so only nu >= 0 is returned.
    """
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("complex coupling must be finite")
    M = _node_count(nu_max, abs(z))
    theta = 2.0 * np.pi * np.arange(M) / M
    w = np.exp(z * np.cos(theta) - z.real)
    coeff = np.fft.ifft(w)
    return coeff[: nu_max + 1].copy()
