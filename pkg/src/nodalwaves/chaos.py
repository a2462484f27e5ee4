"""Wiener-chaos coefficients of the nodal-length functional.

The Jacobian factor ``det_perp(y) = |y[:3] x y[3:]|`` on R^6 has Hermite
coefficients ``a_alpha``; combined with the delta coefficients ``b`` of the
two field values they give the chaos coefficients ``c_alpha`` on R^8.

Two conventions are kept apart on purpose:

* ``"paper"`` returns the four published families (1, 1/3, 1/9, -5/9) and
  refuses anything else.
* ``"exact"`` returns the true normalised coefficients up to order 4, derived
  from rotation invariance of ``det_perp`` and the chi moments; they agree
  with the Monte Carlo oracle ``mc_a_coefficient``.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._validation import DimensionError, UnsupportedError, check_nonneg_int, check_seed
from .kernels import delta_coefficient_rational, multi_hermite
from .stats import RunningMoments, stream

CONVENTIONS = ("paper", "exact")
MC_BLOCK = 1 << 16


@dataclass(frozen=True)
class GradientPair:
    """Two standardized gradient vectors ``z1``, ``z2`` in R^3."""

    z1: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        for name in ("z1", "z2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise DimensionError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class CoefficientEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int


def det_perp(pair_or_z1, z2=None):
    """Norm of ``z1 x z2``; accepts a GradientPair or two (..., 3) arrays."""
    if z2 is None:
        z1, z2 = pair_or_z1.z1, pair_or_z1.z2
    else:
        z1 = pair_or_z1
    out = np.linalg.norm(np.cross(np.asarray(z1, float), np.asarray(z2, float)), axis=-1)
    return out[()] if np.ndim(out) == 0 else out


def _alpha6(alpha) -> tuple[int, ...]:
    alpha = tuple(check_nonneg_int(a, "alpha entry") for a in alpha)
    if len(alpha) != 6:
        raise DimensionError(f"det_perp multi-indices live in N^6, got length {len(alpha)}")
    return alpha


def _paper_a(alpha: tuple[int, ...]) -> Fraction:
    nonzero = sorted(a for a in alpha if a)
    if not nonzero:
        return Fraction(1)
    if nonzero == [2]:
        return Fraction(1, 3)
    if nonzero == [2, 2]:
        return Fraction(1, 9)
    if nonzero == [4]:
        return Fraction(-5, 9)
    raise UnsupportedError(
        f"alpha={alpha} is outside the published families {{0, 2e_k, 2e_i+2e_j, 4e_k}}"
    )


def _exact_a(alpha: tuple[int, ...]) -> Fraction:
    order = sum(alpha)
    if order > 4:
        raise UnsupportedError(f"exact coefficients are tabulated up to order 4, got {order}")
    first, second = alpha[:3], alpha[3:]
    # det_perp is even in each vector and in each coordinate axis
    if sum(first) % 2 or sum(second) % 2:
        return Fraction(0)
    if any((first[k] + second[k]) % 2 for k in range(3)):
        return Fraction(0)
    support = [(i, a) for i, a in enumerate(alpha) if a]
    if not support:
        return Fraction(2)
    values = sorted(a for _, a in support)
    if values == [2]:
        return Fraction(1, 3)
    if values == [4]:
        return Fraction(-1, 60)
    if values == [2, 2]:
        (i, _), (j, _) = support
        same_vector = (i < 3) == (j < 3)
        same_axis = i % 3 == j % 3
        if same_vector or same_axis:
            return Fraction(-1, 30)
        return Fraction(1, 10)
    if values == [1, 1, 1, 1]:
        # the only parity-admissible pattern: both vectors on the same two axes
        return Fraction(-4, 15)
    raise AssertionError(f"unhandled admissible multi-index {alpha}")


def a_coefficient_rational(alpha: Sequence[int], convention: str = "paper") -> Fraction:
    alpha = _alpha6(alpha)
    if convention == "paper":
        order = sum(alpha)
        if order > 4 or order % 2:
            raise UnsupportedError(f"published coefficients cover even orders <= 4, got {order}")
        return _paper_a(alpha)
    if convention == "exact":
        return _exact_a(alpha)
    raise ValueError(f"convention must be one of {CONVENTIONS}")


def a_coefficient(alpha: Sequence[int], convention: str = "paper") -> float:
    """Hermite coefficient of ``det_perp`` at ``alpha`` in N^6."""
    return float(a_coefficient_rational(alpha, convention))


def exact_a_coefficient(alpha: Sequence[int]) -> float:
    return a_coefficient(alpha, "exact")


def c_coefficient_rational(alpha: Sequence[int], convention: str = "paper") -> Fraction:
    """Rational part of ``c_alpha``; the coefficient itself is this over ``2 pi``."""
    alpha = tuple(check_nonneg_int(a, "alpha entry") for a in alpha)
    if len(alpha) != 8:
        raise DimensionError(f"chaos multi-indices live in N^8, got length {len(alpha)}")
    b = delta_coefficient_rational(alpha[0]) * delta_coefficient_rational(alpha[1])
    if b == 0:
        return Fraction(0)
    return b * a_coefficient_rational(alpha[2:], convention)


def c_coefficient(alpha: Sequence[int], convention: str = "paper") -> float:
    """``c_alpha = b_{alpha1} b_{alpha2} a_{(alpha3..alpha8)}``."""
    return float(c_coefficient_rational(alpha, convention)) / (2.0 * math.pi)


def chaos_multi_indices(order: int, convention: str = "exact"):
    """All ``(alpha, c_alpha rational part)`` in N^8 with ``|alpha| = order`` and c != 0."""
    out = []
    for combo in itertools.combinations_with_replacement(range(8), order):
        alpha = [0] * 8
        for i in combo:
            alpha[i] += 1
        try:
            c = c_coefficient_rational(alpha, convention)
        except UnsupportedError:
            continue
        if c:
            out.append((tuple(alpha), c))
    return out


def _mc_block(alpha, seed, block, size):
    z = stream(seed, block).standard_normal((size, 6))
    weight = 1.0 / math.prod(math.factorial(a) for a in alpha)
    values = det_perp(z[:, :3], z[:, 3:]) * multi_hermite(alpha, z) * weight
    return RunningMoments.from_array(values)


def mc_a_coefficient(alpha: Sequence[int], n: int, seed: int = 0,
                     threads: int = 1, block_size: int = MC_BLOCK) -> CoefficientEstimate:
    """Monte Carlo estimate of ``E[det_perp(Z) He_alpha(Z)] / alpha!``.

    Samples are drawn in fixed-size blocks, block ``b`` from stream
    ``(seed, b)``; block moments are merged in block order, so the estimate
    does not depend on ``threads``.
    """
    alpha = _alpha6(alpha)
    n = check_nonneg_int(n, "n")
    if n < 10_000:
        raise ValueError("n must be at least 1e4")
    seed = check_seed(seed)
    sizes = [block_size] * (n // block_size)
    if n % block_size:
        sizes.append(n % block_size)
    jobs = [(alpha, seed, b, s) for b, s in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _mc_block(*job), jobs))
    else:
        parts = [_mc_block(*job) for job in jobs]
    acc = RunningMoments()
    for part in parts:
        acc.merge(part)
    return CoefficientEstimate(acc.mean, acc.stderr_mean, n, seed)


def _check_correlations(orders, corr) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    k = len(orders)
    if corr.shape != (k, k):
        raise DimensionError(f"expected a {k}x{k} correlation matrix, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise ValueError("correlations must lie in [-1, 1]")
    return corr


def _require_zero(corr, pairs):
    for i, j in pairs:
        if abs(corr[i, j]) > 1e-12:
            raise UnsupportedError(f"formula needs E[X{i + 1} X{j + 1}] = 0")


def hermite_product_moment(orders: Sequence[int], correlations) -> float:
    """Closed-form ``E[prod He_{n_i}(X_i)]`` for the supported order patterns."""
    orders = tuple(int(o) for o in orders)
    rho = _check_correlations(orders, correlations)
    if len(orders) == 2:
        p, q = orders
        return float(math.factorial(p) * rho[0, 1] ** p) if p == q else 0.0
    if orders == (2, 2, 2, 2):
        _require_zero(rho, [(0, 1), (2, 3)])
        r13, r14, r23, r24 = rho[0, 2], rho[0, 3], rho[1, 2], rho[1, 3]
        return float(4 * r13**2 * r24**2 + 4 * r14**2 * r23**2 + 16 * r13 * r14 * r23 * r24)
    if orders == (2, 2, 4):
        _require_zero(rho, [(0, 1)])
        return float(24 * rho[0, 2] ** 2 * rho[1, 2] ** 2)
    if orders == (1, 1, 1, 1):
        _require_zero(rho, [(0, 1), (2, 3)])
        return float(rho[0, 2] * rho[1, 3] + rho[0, 3] * rho[1, 2])
    raise UnsupportedError(f"no closed form registered for orders {orders}")


def bipartite_diagrams(left: Sequence[int], right: Sequence[int]):
    """Yield ``(K, weight)`` for ``E[prod He_{n_i}(U_i) prod He_{m_j}(V_j)]``.

    ``U`` and ``V`` are each standard with independent components; the moment
    is ``sum_K weight * prod rho_ij^K_ij`` over non-negative integer matrices
    ``K`` with row sums ``left`` and column sums ``right``.
    """
    left, right = list(left), list(right)
    if sum(left) != sum(right):
        return
    const = math.prod(math.factorial(n) for n in left) * math.prod(math.factorial(m) for m in right)

    def rows(i, remaining):
        if i == len(left):
            if all(r == 0 for r in remaining):
                yield []
            return
        for row in _compositions(left[i], remaining):
            rest = [r - k for r, k in zip(remaining, row)]
            for tail in rows(i + 1, rest):
                yield [row] + tail

    for K in rows(0, right):
        denom = math.prod(math.factorial(k) for row in K for k in row)
        yield K, Fraction(const, denom)


def _compositions(total, caps):
    if not caps:
        if total == 0:
            yield ()
        return
    for k in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - k, caps[1:]):
            yield (k,) + rest
