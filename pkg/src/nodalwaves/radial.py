"""Radial integrals of products of the sinc-family kernels.

Every kernel is a combination of ``sin``/``cos`` over powers of ``rho``, so
an integrand ``g(rho) rho^w`` is an exact finite sum of terms
``c e^{i j rho} rho^{-p}``. The integral over ``[0, X]`` is computed with
Gauss-Legendre rules on period cells ``[n pi, (n+1) pi]`` (bisected where the
two rule orders disagree), and the tail ``[X, inf)`` term by term: exactly for
the non-oscillating ``j = 0`` part and by the convergent-in-practice
asymptotic series of the incomplete oscillatory integral otherwise.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from ._validation import DomainError, check_positive
from .kernels import sinc_kernel

KERNELS = ("sinc", "dsinc", "A", "B")
# large-rho decay order of each kernel, in powers of 1/rho
DECAY_ORDER = {"sinc": 1, "dsinc": 1, "A": 1, "B": 2}

_GL_LO = np.polynomial.legendre.leggauss(24)
_GL_HI = np.polynomial.legendre.leggauss(48)


class NonConvergentError(ValueError):
    """The requested improper integral does not converge absolutely."""


class ConvergenceError(RuntimeError):
    """Tolerance not reached within the cell budget."""

    def __init__(self, message: str, best_estimate: "IntegralResult"):
        super().__init__(message)
        self.best_estimate = best_estimate


@dataclass(frozen=True)
class RadialKernelSpec:
    """Integrand ``prod_k kernel_k(rho)^power_k * rho^weight_exponent``."""

    factors: tuple[tuple[str, int], ...] = ()
    weight_exponent: int = 2

    def __post_init__(self):
        merged: dict[str, int] = defaultdict(int)
        for name, power in self.factors:
            if name not in KERNELS:
                raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")
            if int(power) != power or power < 1:
                raise ValueError(f"kernel powers must be positive integers, got {power}")
            merged[name] += int(power)
        ordered = tuple((k, merged[k]) for k in KERNELS if merged.get(k))
        object.__setattr__(self, "factors", ordered)
        object.__setattr__(self, "weight_exponent", int(self.weight_exponent))

    @classmethod
    def of(cls, weight_exponent: int = 2, **powers: int) -> "RadialKernelSpec":
        return cls(tuple((k, p) for k, p in powers.items() if p), weight_exponent)

    @property
    def decay_degree(self) -> int:
        return sum(p * DECAY_ORDER[k] for k, p in self.factors) - self.weight_exponent

    @property
    def is_convergent(self) -> bool:
        return self.decay_degree >= 2

    def check_convergent(self) -> None:
        if not self.is_convergent:
            raise NonConvergentError(
                f"{self.label} decays like rho^-{self.decay_degree}; need degree >= 2"
            )

    @property
    def label(self) -> str:
        parts = [k if p == 1 else f"{k}^{p}" for k, p in self.factors] or ["1"]
        if self.weight_exponent:
            parts.append(f"rho^{self.weight_exponent}")
        return "*".join(parts)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        kv = sinc_kernel(rho)
        values = {"sinc": kv.r, "dsinc": kv.r1, "A": kv.A, "B": kv.B}
        out = np.ones_like(rho)
        for name, power in self.factors:
            out = out * values[name] ** power
        return out * rho**self.weight_exponent


@dataclass(frozen=True)
class IntegralResult:
    value: float
    abs_error_estimate: float
    cells_used: int


# --- exact trigonometric-Laurent form -------------------------------------
# A term dict maps (j, p) -> complex c and stands for sum c e^{i j rho} rho^-p.

_SIN = {1: -0.5j, -1: 0.5j}
_COS = {1: 0.5, -1: 0.5}


def _combo(*parts):
    out: dict[tuple[int, int], complex] = defaultdict(complex)
    for scale, trig, p in parts:
        for j, c in trig.items():
            out[(j, p)] += scale * c
    return dict(out)


_KERNEL_TERMS = {
    "sinc": _combo((1, _SIN, 1)),
    "dsinc": _combo((1, _COS, 1), (-1, _SIN, 2)),
    "A": _combo((1, _SIN, 1), (3, _COS, 2), (-3, _SIN, 3)),
    "B": _combo((1, _COS, 2), (-1, _SIN, 3)),
}


def _multiply(a, b):
    out: dict[tuple[int, int], complex] = defaultdict(complex)
    for (j1, p1), c1 in a.items():
        for (j2, p2), c2 in b.items():
            out[(j1 + j2, p1 + p2)] += c1 * c2
    return {k: v for k, v in out.items() if v != 0}


@lru_cache(maxsize=None)
def trig_laurent_terms(spec: RadialKernelSpec) -> tuple[tuple[int, int, complex], ...]:
    """Exact expansion of ``spec`` as ``((j, p, c), ...)``."""
    terms = {(0, -spec.weight_exponent): 1.0 + 0j}
    for name, power in spec.factors:
        for _ in range(power):
            terms = _multiply(terms, _KERNEL_TERMS[name])
    return tuple(sorted((j, p, c) for (j, p), c in terms.items() if abs(c) > 0))


def _oscillatory_tail(p: int, y: float) -> tuple[complex, float]:
    """``int_y^inf e^{it} t^{-p} dt`` for large ``y`` with an error bound."""
    total = 0j
    term = 1j * y ** (-p)
    m = 0
    while True:
        total += term
        nxt = term * (-1j) * (p + m) / y
        m += 1
        if abs(nxt) > abs(term) or m > 200:
            return total * complex(math.cos(y), math.sin(y)), abs(term)
        if abs(nxt) < 1e-20 * abs(total):
            return (total + nxt) * complex(math.cos(y), math.sin(y)), abs(nxt)
        term = nxt


def analytic_tail(spec: RadialKernelSpec, start: float) -> tuple[float, float]:
    """Exact ``int_start^inf`` of ``spec`` and an error bound for it."""
    value = 0j
    err = 0.0
    for j, p, c in trig_laurent_terms(spec):
        if j == 0:
            if p <= 1:
                raise NonConvergentError(f"{spec.label} has a non-integrable rho^-{p} mean tail")
            value += c * start ** (1 - p) / (p - 1)
            continue
        if p < 1:
            raise NonConvergentError(f"{spec.label} has a growing oscillatory term")
        aj = abs(j)
        part, bound = _oscillatory_tail(p, aj * start)
        if j < 0:
            part = part.conjugate()
        value += c * aj ** (p - 1) * part
        err += abs(c) * aj ** (p - 1) * bound
    return value.real, err


# --- cell quadrature -------------------------------------------------------


def _gl(func, a: np.ndarray, b: np.ndarray, rule) -> np.ndarray:
    x, w = rule
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    return half * (func(nodes) @ w)


def _cell_quadrature(func, edges: np.ndarray, tolerance: float, max_cells: int):
    """Integrate over consecutive cells; returns (cell values, cell errors, count)."""
    a, b = edges[:-1], edges[1:]
    values = np.zeros(a.size)
    errors = np.zeros(a.size)
    pending = [(np.arange(a.size), a, b)]
    cells = 0
    per_cell_tol = tolerance / max(a.size, 1)
    while pending:
        idx, lo, hi = pending.pop()
        cells += lo.size
        q_lo = _gl(func, lo, hi, _GL_LO)
        q_hi = _gl(func, lo, hi, _GL_HI)
        err = np.abs(q_hi - q_lo)
        width_share = (hi - lo) / math.pi
        bad = err > per_cell_tol * np.maximum(width_share, 1e-3)
        good = ~bad
        np.add.at(values, idx[good], q_hi[good])
        np.add.at(errors, idx[good], err[good])
        if np.any(bad):
            if cells + 2 * int(bad.sum()) > max_cells:
                np.add.at(values, idx[bad], q_hi[bad])
                np.add.at(errors, idx[bad], err[bad])
                return values, errors, cells, False
            mid = 0.5 * (lo[bad] + hi[bad])
            pending.append((np.concatenate([idx[bad], idx[bad]]),
                            np.concatenate([lo[bad], mid]),
                            np.concatenate([mid, hi[bad]])))
    return values, errors, cells, True


def _ordered_sum(values: Iterable[float]) -> float:
    return math.fsum(values)


def radial_integral(spec: RadialKernelSpec, tolerance: float = 1e-10,
                    n_cells: int = 64, max_cells: int = 20000) -> IntegralResult:
    """``int_0^inf spec(rho) d rho`` for a convergent spec.

    Cells ``[n pi, (n+1) pi]`` for ``n < n_cells`` are integrated numerically;
    everything beyond is integrated from the exact expansion.
    """
    tolerance = check_positive(tolerance, "tolerance")
    spec.check_convergent()
    start = n_cells * math.pi
    tail, tail_err = analytic_tail(spec, start)
    edges = math.pi * np.arange(n_cells + 1, dtype=float)
    values, errors, cells, ok = _cell_quadrature(spec, edges, tolerance / 2, max_cells)
    total = _ordered_sum(list(values) + [tail])
    err = float(errors.sum() + tail_err)
    result = IntegralResult(value=total, abs_error_estimate=err, cells_used=cells)
    if not ok or err > tolerance:
        raise ConvergenceError(
            f"radial integral of {spec.label} reached error {err:.3g} > {tolerance:.3g}", result
        )
    return result


def ball_covariogram(R: float, rho):
    """Volume of ``B_R`` intersected with its translate by distance ``rho``."""
    R = check_positive(R, "R")
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0) or np.any(rho_arr > 2 * R):
        raise DomainError(f"rho must lie in [0, 2R] = [0, {2 * R}]")
    t = rho_arr / R
    out = (4.0 * math.pi / 3.0) * R**3 * (1.0 - 0.75 * t + t**3 / 16.0)
    return out[()] if out.ndim == 0 else out


def overlap_integral(R: float, spec: RadialKernelSpec, tolerance: float = 1e-10,
                     max_cells: int = 200000) -> float:
    """``int_{B_R x B_R} g(|x - y|) dx dy`` by the exact covariogram reduction.

    ``spec`` includes the ``rho^2`` surface factor through its weight exponent,
    so the radial integrand is ``4 pi * spec(rho) * covariogram(R, rho)``.
    """
    R = check_positive(R, "R")
    n_full = int(math.floor(2 * R / math.pi))
    edges = list(math.pi * np.arange(n_full + 1, dtype=float))
    if 2 * R - edges[-1] > 1e-12 * R:
        edges.append(2 * R)
    edges = np.array(edges)

    def integrand(rho):
        return 4.0 * math.pi * spec(rho) * ball_covariogram(R, np.minimum(rho, 2 * R))

    scale = (4.0 * math.pi / 3.0) * R**3
    values, errors, _, ok = _cell_quadrature(integrand, edges, tolerance * scale, max_cells)
    if not ok:
        best = IntegralResult(math.fsum(values), float(errors.sum()), max_cells)
        raise ConvergenceError("overlap integral did not converge", best)
    return math.fsum(values)


def leading_order_constant(spec: RadialKernelSpec, tolerance: float = 1e-10) -> float:
    """``c`` with ``int_{B_R x B_R} g ~ vol(B_R) * c``, i.e. ``4 pi int_0^inf g rho^2``."""
    return 4.0 * math.pi * radial_integral(spec, tolerance).value
