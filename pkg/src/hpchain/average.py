"""Gaussian coupling averages of echo square roots, in log domain.

The central object is

    <f>_{2a} = int_0^inf (J dJ / 2a) e^{-J^2/(4a)} f(J),

a normalized radial-Gaussian average of a non-negative integrand given by
its logarithm.  In the large-disorder phase the integrand peaks at
J ~ N sigma*(a), thousands of e-folds above its tails, so node values are
combined by max-shifted exponential sums and truncation follows the saddle
location, not the bare Gaussian width.  Variants: tensorized multi-coupling
averages, the nested average over a random width, and the
complex-temperature average of the echo itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import chain, gww, toeplitz
from .logvalue import LogValue
from .specfun import bessel_i_scaled, bessel_row_complex_scaled

_DECAY_NATS = 30.0     # required drop of the integrand at the truncation edge


class QuadratureError(RuntimeError):
    """Raised when node doubling does not reach the requested tolerance."""

    def __init__(self, msg, value_estimate=None, error_estimate=None):
        super().__init__(msg)
        self.value_estimate = value_estimate
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class AverageParams:
    """Width parameter a = a_modulus * e^{i a_phase} and quadrature controls."""

    a_modulus: float
    a_phase: float = 0.0
    quad_rel_tol: float = 1e-9
    max_nodes: int = 4096

    def __post_init__(self):
        if not (self.a_modulus > 0.0 and math.isfinite(self.a_modulus)):
            raise ValueError("a_modulus must be positive and finite")
        if not (-math.pi < self.a_phase <= math.pi):
            raise ValueError("a_phase must lie in (-pi, pi]")
        if not (0.0 < self.quad_rel_tol <= 1e-3):
            raise ValueError("quad_rel_tol must be in (0, 1e-3]")
        if self.max_nodes < 64:
            raise ValueError("max_nodes too small")


@dataclass(frozen=True)
class NestedParams:
    """Center a, width parameter b of the N^2-scaled width average."""

    a: float
    b: float
    N: int

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ValueError("a must be positive and finite")
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ValueError("b must be positive and finite")
        if self.N < 1:
            raise ValueError("N must be >= 1")


@dataclass(frozen=True)
class EchoFunction:
    """Log-domain integrand: log_fn(J) = ln f(J), with optional peak hint."""

    log_fn: Callable[[float], float]
    peak: Optional[float] = None


@dataclass(frozen=True)
class AverageResult:
    log_value: LogValue
    error_estimate: float
    nodes: int


def _logsumexp(values: np.ndarray) -> float:
    m = np.max(values)
    if m == -np.inf:
        return -np.inf
    return float(m + np.log(np.sum(np.exp(values - m))))


def _gl_nodes(lo: float, hi: float, panels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * x[None, :]).ravel(), (half * w[None, :]).ravel()


def _radial_log_integral(log_fn, a: float, J_max: float, tol: float,
                         max_nodes: int):
    """ln int_0^{J_max} (J/2a) e^{-J^2/4a} f(J) dJ by panel doubling."""

    def log_integrand(J):
        return math.log(J / (2.0 * a)) - J * J / (4.0 * a) + log_fn(J)

    order = 16
    panels = max(4, int(J_max / 8.0))
    prev = None
    while True:
        J, w = _gl_nodes(0.0, J_max, panels, order)
        vals = np.array([log_integrand(Jj) + math.log(wj)
                         for Jj, wj in zip(J, w) if Jj > 0.0])
        cur = _logsumexp(vals)
        if prev is not None:
            err = abs(cur - prev)
            if err <= tol:
                return cur, err, J.size
            if 2 * panels * order > max_nodes:
                raise QuadratureError(
                    f"no convergence within {max_nodes} nodes "
                    f"(achieved {err:.3e}, requested {tol:.3e})",
                    value_estimate=cur, error_estimate=err)
        prev = cur
        panels *= 2


def _truncation(a: float, peak: Optional[float]) -> float:
    tail = 8.0 * math.sqrt(2.0 * a)
    return max(tail, (peak or 0.0) + tail)


def _check_edge(log_fn, a, J_max, peak_guess):
    """Extend J_max until the integrand has dropped _DECAY_NATS below its peak."""
    def h(J):
        return math.log(max(J, 1e-12) / (2 * a)) - J * J / (4 * a) + log_fn(J)

    probe = peak_guess if peak_guess and peak_guess < J_max else 0.5 * J_max
    for _ in range(8):
        if h(J_max) < h(probe) - _DECAY_NATS:
            return J_max
        J_max *= 1.5
    return J_max


def gaussian_average_full(f: EchoFunction, p: AverageParams) -> AverageResult:
    """Normalized radial-Gaussian average of e^{log_fn}; real widths only."""
    if p.a_phase != 0.0:
        raise ValueError("gaussian_average takes a real width; "
                         "use complex_temperature_average for a_phase != 0")
    a = p.a_modulus
    J_max = _check_edge(f.log_fn, a, _truncation(a, f.peak), f.peak)
    ln, err, n = _radial_log_integral(f.log_fn, a, J_max, p.quad_rel_tol,
                                      p.max_nodes)
    return AverageResult(LogValue.from_log(ln), err, n)


def gaussian_average(f: EchoFunction, p: AverageParams) -> LogValue:
    return gaussian_average_full(f, p).log_value


def _echo_peak(N: int, a: float) -> float:
    return N * gww.saddle_entropy(a).sigma_star if a > 1.0 else 0.0


def sqrt_echo_log_fn(N: int, L=chain.INFINITE,
                     profile: Optional[Sequence[float]] = None):
    """ln sqrt(echo ratio) as a function of the overall coupling J.

    profile gives relative weights gamma_n (couplings J_n = J * gamma_n);
    None means the nearest-neighbour chain.
    """
    gamma = np.asarray(profile if profile is not None else [1.0], dtype=float)
    if np.any(gamma < 0) or not np.all(np.isfinite(gamma)):
        raise ValueError("profile must be non-negative and finite")

    if L == chain.INFINITE and gamma.size == 1 and gamma[0] == 1.0:
        def log_fn(J):
            if J == 0.0:
                return 0.0
            return (toeplitz.gww_toeplitz_logdet(N, J)
                    - toeplitz.gww_toeplitz_logdet(1, J))
        return log_fn

    def log_fn(J):
        spec = chain.ChainSpec(L, tuple(J * gamma))
        return 0.5 * chain.log_normalized_echo(spec, N)
    return log_fn


def averaged_echo_full(N: int, p: AverageParams, L=chain.INFINITE,
                       profile: Optional[Sequence[float]] = None) -> AverageResult:
    """<sqrt(echo ratio)>_{2a} for the chain at size N (finite L or infinite)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N == 1:
        return AverageResult(LogValue.from_log(0.0), 0.0, 0)
    f = EchoFunction(sqrt_echo_log_fn(N, L, profile), peak=_echo_peak(N, p.a_modulus))
    return gaussian_average_full(f, p)


def averaged_echo(N: int, p: AverageParams, L=chain.INFINITE,
                  profile: Optional[Sequence[float]] = None) -> LogValue:
    return averaged_echo_full(N, p, L, profile).log_value


# ----------------------------------------------------------------------
# multi-coupling average
# ----------------------------------------------------------------------

def multi_gaussian_average(N: int, a_vec: Sequence[float],
                           quad_rel_tol: float = 1e-9,
                           max_nodes_per_axis: int = 96) -> LogValue:
    """K-fold normalized Gaussian average of sqrt of the K-coupling echo.

    Tensorized Gauss-Legendre over (J_1, ..., J_K); K <= 3 as a cost guard.
    """
    a_vec = [float(v) for v in a_vec]
    K = len(a_vec)
    if K < 1:
        raise ValueError("need at least one width")
    if K > 3:
        raise ValueError("K > 3 rejected (cost guard)")
    if any(v <= 0 for v in a_vec):
        raise ValueError("widths must be positive")
    if K == 1:
        f = EchoFunction(sqrt_echo_log_fn(N), peak=_echo_peak(N, a_vec[0]))
        return gaussian_average(f, AverageParams(a_vec[0], quad_rel_tol=quad_rel_tol))

    def log_sqrt_echo(Jvec):
        if all(v == 0.0 for v in Jvec):
            return 0.0
        return (toeplitz.gen_toeplitz_logdet(N, Jvec)
                - toeplitz.gen_toeplitz_logdet(1, Jvec))

    J_maxes = [_truncation(a, _echo_peak(N, a)) for a in a_vec]
    order = 12
    panels = [max(2, int(Jm / 12.0)) for Jm in J_maxes]
    prev = None
    while True:
        axes = [_gl_nodes(0.0, Jm, pn, order) for Jm, pn in zip(J_maxes, panels)]
        grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
        wgrids = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        logw = np.zeros(pts.shape[0])
        for i, a in enumerate(a_vec):
            Ji = pts[:, i]
            logw += np.log(np.maximum(Ji, 1e-300) / (2 * a)) - Ji**2 / (4 * a)
        for wg in wgrids:
            logw += np.log(np.maximum(wg.ravel(), 1e-300))
        vals = np.array([log_sqrt_echo(tuple(row)) for row in pts])
        cur = _logsumexp(logw + vals)
        if prev is not None:
            err = abs(cur - prev)
            if err <= quad_rel_tol:
                return LogValue.from_log(cur)
            if any(2 * pn * order > max_nodes_per_axis for pn in panels):
                raise QuadratureError(
                    "multi-coupling average did not converge "
                    f"(achieved {err:.3e})", cur, err)
        prev = cur
        panels = [2 * pn for pn in panels]


# ----------------------------------------------------------------------
# nested average over the width
# ----------------------------------------------------------------------

_MU_FLOOR = 1e-6


def _nested_range(p: NestedParams):
    w = math.sqrt(2.0 * p.b) / p.N
    lo = max(_MU_FLOOR, p.a - 8.0 * w)
    hi = p.a + 8.0 * w
    if hi <= lo:
        raise ValueError("degenerate width range (a too close to zero)")
    return lo, hi


def _nested_quadrature(p: NestedParams, inner_log, tol: float, max_nodes: int):
    lo, hi = _nested_range(p)
    order = 16
    panels = 2
    prev = None
    while True:
        mu, w = _gl_nodes(lo, hi, panels, order)
        vals = np.array([
            math.log(wj) - math.log(m) - p.N**2 * (m - p.a)**2 / (4 * p.b)
            + inner_log(m)
            for m, wj in zip(mu, w)])
        cur = _logsumexp(vals)
        if prev is not None:
            err = abs(cur - prev)
            if err <= tol:
                return cur, err
            if 2 * panels * order > max_nodes:
                raise QuadratureError(
                    f"nested average did not converge (achieved {err:.3e})",
                    cur, err)
        prev = cur
        panels *= 2


def nested_log_weight(p: NestedParams, tol: float = 1e-11) -> float:
    """ln int (dmu/mu) e^{-N^2 (mu-a)^2 / 4b} over the clipped range."""
    val, _ = _nested_quadrature(p, lambda m: 0.0, tol, 4096)
    return val


def nested_average(N: int, p: NestedParams, quad_rel_tol: float = 1e-9,
                   inner_tol: Optional[float] = None) -> LogValue:
    """Width-averaged echo average, normalized by the width measure.

    Returns ln [ int (dmu/mu) w(mu) <sqrt echo>_{2mu} / int (dmu/mu) w(mu) ]
    with w(mu) = e^{-N^2 (mu-a)^2/4b}; the b -> 0 limit then recovers the
    single average at width a exactly.
    """
    if N != p.N:
        p = NestedParams(p.a, p.b, N)
    inner_tol = inner_tol or quad_rel_tol

    def inner_log(mu):
        return averaged_echo(N, AverageParams(mu, quad_rel_tol=inner_tol)).ln_magnitude

    num, _ = _nested_quadrature(p, inner_log, quad_rel_tol, 4096)
    den, _ = _nested_quadrature(p, lambda m: 0.0, min(quad_rel_tol, 1e-11), 4096)
    return LogValue.from_log(num - den)


# ----------------------------------------------------------------------
# complex temperature
# ----------------------------------------------------------------------

def log_echo_complex(N: int, z: complex) -> float:
    """ln Lhat_N at complex coupling argument z (echo of |det|^2 ratios)."""
    if N == 1:
        return 0.0
    if z == 0:
        return 0.0
    ln_det = toeplitz.complex_toeplitz_logabsdet(N, z)
    c0 = bessel_row_complex_scaled(0, z)[0]
    ln_i0 = math.log(abs(c0)) + complex(z).real
    return 2.0 * (ln_det - ln_i0)


def complex_temperature_average(N: int, p: AverageParams) -> LogValue:
    """<Lhat_N(e^{-i phi/2} J)>_{2|a|}: the echo itself is averaged here.

    phi = 0 reduces to the real Gaussian average of Lhat (not of its square
    root).  |phi| < pi required.
    """
    if not (-math.pi < p.a_phase < math.pi):
        raise ValueError("|phi| < pi required")
    phi = p.a_phase
    a = p.a_modulus
    rot = complex(math.cos(-phi / 2.0), math.sin(-phi / 2.0))

    def log_fn(J):
        return log_echo_complex(N, rot * J)

    # Lhat ~ |Z_N/I_0|^2 peaks near twice the sqrt-echo exponent; same
    # saddle location in J.
    peak = _echo_peak(N, a)
    J_max = _check_edge(log_fn, a, _truncation(a, peak), peak)
    ln, err, n = _radial_log_integral(log_fn, a, J_max, p.quad_rel_tol,
                                      p.max_nodes)
    return LogValue.from_log(ln)


# ----------------------------------------------------------------------
# seeded Monte-Carlo mode (mimics the sampling protocol)
# ----------------------------------------------------------------------

def mc_gaussian_average(f: EchoFunction, a: float, n_samples: int,
                        seed: int):
    """Sample J from the radial-Gaussian law and average e^{log_fn}.

    Returns (LogValue of the sample mean, relative standard error).  The
    transform J = 2 sqrt(a E) with E ~ Exp(1) realizes the measure
    (J/2a) e^{-J^2/4a} dJ exactly.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    J = 2.0 * np.sqrt(a * rng.exponential(size=n_samples))
    logs = np.array([f.log_fn(float(j)) for j in J])
    m = logs.max()
    v = np.exp(logs - m)
    mean = v.mean()
    sem = v.std(ddof=1) / math.sqrt(n_samples)
    return LogValue.from_log(m + math.log(mean)), float(sem / mean)
