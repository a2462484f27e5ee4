"""Special functions for the monochromatic random wave model.

Probabilists' Hermite polynomials, the formal Hermite coefficients of the
Dirac delta, the cardinal-sine covariance with its radial derivatives and
the derived ``A``/``B`` kernels, Gaussian half-moments and Bessel ``J0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._validation import DimensionError, check_nonneg_int

SERIES_THRESHOLD = 1e-2
J0_SERIES_LIMIT = 12.0

__all__ = [
    "KernelValue",
    "hermite",
    "multi_hermite",
    "hermite_at_zero",
    "delta_coefficient",
    "delta_coefficient_rational",
    "sinc_kernel",
    "gaussian_half_moment",
    "bessel_j0",
]


def hermite(n: int, x):
    """Probabilists' Hermite polynomial ``He_n(x)`` by forward recurrence."""
    n = check_nonneg_int(n, "n")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev[()]
    h = x.copy()
    for k in range(2, n + 1):
        h, h_prev = x * h - (k - 1) * h_prev, h
    return h[()]


def multi_hermite(alpha: Sequence[int], y):
    """Product ``prod_i He_{alpha_i}(y_i)``.

    ``y`` may carry extra leading axes; its last axis must match ``alpha``.
    """
    alpha = [check_nonneg_int(a, "alpha entry") for a in alpha]
    y = np.asarray(y, dtype=float)
    if y.shape[-1:] != (len(alpha),):
        raise DimensionError(
            f"multi-index of length {len(alpha)} does not match y of shape {y.shape}"
        )
    out = np.ones(y.shape[:-1])
    for i, a in enumerate(alpha):
        if a:
            out = out * hermite(a, y[..., i])
    return out[()]


def hermite_at_zero(n: int) -> int:
    """Exact integer ``He_n(0)``: zero for odd n, ``(-1)^(n/2) (n-1)!!`` otherwise."""
    n = check_nonneg_int(n, "n")
    if n % 2:
        return 0
    value = 1
    for k in range(n - 1, 0, -2):
        value *= k
    return -value if (n // 2) % 2 else value


def delta_coefficient_rational(alpha: int) -> Fraction:
    """Rational part of ``b_alpha``; the full coefficient is this over sqrt(2 pi)."""
    alpha = check_nonneg_int(alpha, "alpha")
    return Fraction(hermite_at_zero(alpha), math.factorial(alpha))


def delta_coefficient(alpha: int) -> float:
    """Formal Hermite coefficient ``b_alpha = He_alpha(0) / (alpha! sqrt(2 pi))``."""
    return float(delta_coefficient_rational(alpha)) / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KernelValue:
    """Covariance ``sinc`` and its radial derivatives at distance ``u``.

    ``r``, ``r1``, ``r2`` are sinc, sinc' and sinc''; ``A = r1/u - r2`` and
    ``B = r1/u`` are the kernels appearing in the gradient covariances.
    Fields are floats or arrays matching the input shape.
    """

    r: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    A: np.ndarray
    B: np.ndarray


def _series(u2, coeffs):
    out = np.zeros_like(u2)
    for c in reversed(coeffs):
        out = out * u2 + c
    return out


# Taylor coefficients in powers of u^2, truncated at degree 8 in u.
_N = range(0, 5)
_SINC = [(-1) ** n / math.factorial(2 * n + 1) for n in _N]
# B(u) = sinc'(u)/u and sinc''(u), both even in u
_B = [(-1) ** n * 2 * n / math.factorial(2 * n + 1) for n in range(1, 6)]
_D2 = [(-1) ** n * 2 * n * (2 * n - 1) / math.factorial(2 * n + 1) for n in range(1, 6)]


def sinc_kernel(u) -> KernelValue:
    """Evaluate sinc, sinc', sinc'', A and B at ``u >= 0``.

    Below ``SERIES_THRESHOLD`` the Taylor expansions are used so every
    field stays finite and smooth through ``u = 0``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("sinc_kernel expects u >= 0")
    small = u < SERIES_THRESHOLD
    safe = np.where(small, 1.0, u)
    s, c = np.sin(safe), np.cos(safe)
    r = s / safe
    r1 = (safe * c - s) / safe**2
    B = r1 / safe
    # radial Helmholtz: sinc'' + 2 sinc'/u + sinc = 0
    r2 = -r - 2.0 * B
    A = r + 3.0 * B
    if np.any(small):
        u2 = np.where(small, u * u, 0.0)
        r_s = _series(u2, _SINC)
        b_s = _series(u2, _B)
        d2_s = _series(u2, _D2)
        r = np.where(small, r_s, r)
        B = np.where(small, b_s, B)
        r1 = np.where(small, u * b_s, r1)
        r2 = np.where(small, d2_s, r2)
        A = np.where(small, b_s - d2_s, A)
    return KernelValue(r=r[()], r1=r1[()], r2=r2[()], A=A[()], B=B[()])


def gaussian_half_moment(k: int) -> float:
    """``m_k = int_0^inf rho^k phi(rho) d rho`` via ``m_{k+1} = k m_{k-1}``."""
    k = check_nonneg_int(k, "k")
    m_even, m_odd = 0.5, 1.0 / math.sqrt(2.0 * math.pi)
    m = [m_even, m_odd]
    for j in range(1, k):
        m.append(j * m[j - 1])
    return m[k]


def _j0_series(x):
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 60):
        term = term * q / (k * k)
        total = total + term
    return total


def _j0_asymptotic(x):
    # Hankel expansion, a_k = prod_{j<=k} -(2j-1)^2 / (k 8^k)
    a = [1.0]
    for k in range(1, 24):
        a.append(a[-1] * (-((2 * k - 1) ** 2)) / (k * 8.0))
    P = np.zeros_like(x)
    Q = np.zeros_like(x)
    for k in range(0, 24, 2):
        P = P + (-1) ** (k // 2) * a[k] / x**k
    for k in range(1, 24, 2):
        Q = Q + (-1) ** ((k - 1) // 2) * a[k] / x**k
    chi = x - math.pi / 4.0
    return np.sqrt(2.0 / (math.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j0(x):
    """Bessel function ``J0`` for ``x >= 0`` (absolute error below 1e-12)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("bessel_j0 expects x >= 0")
    near = x <= J0_SERIES_LIMIT
    out = np.empty_like(x)
    out[near] = _j0_series(x[near])
    far = ~near
    if np.any(far):
        out[far] = _j0_asymptotic(x[far])
    return out[()]
