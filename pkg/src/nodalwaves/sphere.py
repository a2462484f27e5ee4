"""Angular integrals over the unit sphere S^2.

Exact moments ``int_{S^2} u1^(2a) u2^(2b) u3^(2c) d sigma`` are returned as
a rational multiple of pi. Index patterns summed over distinct axes are
evaluated by enumerating the injective label assignments.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable

import numpy as np

from ._validation import check_nonneg_int

SUMMATIONS = {
    "single": 0,
    "sum_over_k": 1,
    "sum_over_distinct_pairs": 2,
    "sum_over_distinct_triples": 3,
}


class PatternError(ValueError):
    """Malformed angular pattern."""


@dataclass(frozen=True)
class PiMultiple:
    """An exact value ``coefficient * pi``."""

    coefficient: Fraction

    @property
    def numerator(self) -> int:
        return self.coefficient.numerator

    @property
    def denominator(self) -> int:
        return self.coefficient.denominator

    def __float__(self) -> float:
        return float(self.coefficient) * math.pi

    def __add__(self, other: "PiMultiple") -> "PiMultiple":
        return PiMultiple(self.coefficient + other.coefficient)

    def __mul__(self, k) -> "PiMultiple":
        return PiMultiple(self.coefficient * Fraction(k))

    __rmul__ = __mul__

    def __str__(self) -> str:
        return f"{self.coefficient}*pi"


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def sphere_monomial_moment(a: int, b: int, c: int) -> PiMultiple:
    """``int_{S^2} u1^(2a) u2^(2b) u3^(2c)`` as an exact multiple of pi."""
    a, b, c = (check_nonneg_int(v, "half-exponent") for v in (a, b, c))
    num = 4 * _double_factorial(2 * a - 1) * _double_factorial(2 * b - 1) * _double_factorial(2 * c - 1)
    den = _double_factorial(2 * (a + b + c) + 1)
    return PiMultiple(Fraction(num, den))


@dataclass(frozen=True)
class AngularPattern:
    """Monomial in direction components, optionally summed over axis labels.

    ``exponents`` holds ``(axis, exponent)`` pairs. For ``summation="single"``
    axes are concrete integers in {1, 2, 3}. Otherwise axes are symbolic labels
    summed over all injective assignments to {1, 2, 3}; the number of summed
    labels is fixed by the summation kind, and labels without an exponent are
    free (they only contribute multiplicity).
    """

    exponents: tuple[tuple[Hashable, int], ...]
    summation: str = "single"

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple((ax, int(e)) for ax, e in self.exponents))
        if self.summation not in SUMMATIONS:
            raise PatternError(f"unknown summation {self.summation!r}")
        axes = [ax for ax, _ in self.exponents]
        if len(set(axes)) != len(axes):
            raise PatternError("repeated axis in pattern")
        for ax, e in self.exponents:
            if e < 2 or e % 2:
                raise PatternError(f"exponent {e} on axis {ax!r} must be even and >= 2")
        n_labels = SUMMATIONS[self.summation]
        if self.summation == "single":
            if any(ax not in (1, 2, 3) for ax in axes):
                raise PatternError("single patterns need concrete axes in {1, 2, 3}")
        elif len(axes) > n_labels:
            raise PatternError(
                f"{self.summation} binds {n_labels} labels but {len(axes)} carry exponents"
            )

    def assignments(self):
        """Yield the concrete half-exponent triples summed by this pattern."""
        n_labels = SUMMATIONS[self.summation]
        if self.summation == "single":
            half = [0, 0, 0]
            for ax, e in self.exponents:
                half[ax - 1] = e // 2
            yield tuple(half)
            return
        for perm in itertools.permutations((0, 1, 2), n_labels):
            half = [0, 0, 0]
            for (_, e), axis in zip(self.exponents, perm):
                half[axis] = e // 2
            yield tuple(half)


def angular_pattern_sum(pattern: AngularPattern) -> PiMultiple:
    """Summed sphere integral of an angular pattern, exactly."""
    total = Fraction(0)
    for half in pattern.assignments():
        total += sphere_monomial_moment(*half).coefficient
    return PiMultiple(total)


def sphere_quadrature_moment(a: int, b: int, c: int, resolution: int = 32) -> float:
    """Numerical ``int_{S^2} u1^(2a) u2^(2b) u3^(2c)``.

    Gauss-Legendre in ``cos(theta)`` times the trapezoid rule in ``phi``.
    """
    a, b, c = (check_nonneg_int(v, "half-exponent") for v in (a, b, c))
    resolution = check_nonneg_int(resolution, "resolution")
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    t, w = np.polynomial.legendre.leggauss(resolution)
    n_phi = 2 * resolution
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - t * t)
    u1 = st[:, None] * np.cos(phi)[None, :]
    u2 = st[:, None] * np.sin(phi)[None, :]
    u3 = np.broadcast_to(t[:, None], u1.shape)
    f = u1 ** (2 * a) * u2 ** (2 * b) * u3 ** (2 * c)
    return float(w @ f.sum(axis=1) * (2.0 * np.pi / n_phi))
