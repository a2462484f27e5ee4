"""Variance ledger for the fourth chaos of the 3D nodal length.

``2 pi I_4(B_R)`` is split into groups ``A11 .. A35`` of Hermite monomials in
the standardized vector ``Y = (xi, eta, sqrt3 grad xi, sqrt3 grad eta)``.
Every covariance between two groups is expanded mechanically with the
diagram formula into monomials in the kernels ``sinc, sinc', A, B`` and the
direction components ``Delta_k``; each monomial then factors into an exact
rational coefficient, a radial integral and a sphere moment.

Units: every term constant is the leading coefficient of the covariance in
units of ``4 pi^3 R^3 / 3`` (that is ``vol(B_R) * pi^2``) for ``2 pi I_4``.
The conversion to ``Var(I_4) / vol(B_R)`` happens only in
``I4_PER_VOLUME``.

Conventions
-----------
``"paper"``
    The published grouping and coefficients: ``a_0 = 1``, ``1/3``, ``1/9``,
    ``-5/9``, with ``A31``/``A32`` summed over ordered pairs ``i != j`` and no
    same-axis or odd-order gradient terms.
``"exact"``
    The true fourth chaos: exact coefficients from ``chaos.a_coefficient``
    with ``convention="exact"``, every multi-index of order 4 exactly once.
    ``A34`` collects ``H2(xi_k)H2(eta_k)`` and ``A35`` the
    ``H1 H1 H1 H1`` cross terms.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .chaos import CONVENTIONS, bipartite_diagrams, c_coefficient_rational, chaos_multi_indices
from .kernels import sinc_kernel
from .radial import RadialKernelSpec, overlap_integral, radial_integral
from .sphere import AngularPattern, angular_pattern_sum, sphere_monomial_moment

# Var(2 pi I4) in units of vol * pi^2  ->  Var(I4) in units of vol
I4_PER_VOLUME = Fraction(1, 4)

COMPONENTS = ("xi", "eta", "gxi1", "gxi2", "gxi3", "geta1", "geta2", "geta3")
_FIELD = (0, 1, 0, 0, 0, 1, 1, 1)
_AXIS = (None, None, 0, 1, 2, 0, 1, 2)


# --- covariance kernels ----------------------------------------------------


@dataclass(frozen=True)
class KernelDerivatives:
    """Covariances of the field and its gradient at displacement ``x - y``.

    ``grad_x[k] = Cov(d_k xi(x), xi(y))``, ``grad_y[k] = Cov(xi(x), d_k xi(y))``
    and ``hess[k, l] = Cov(d_k xi(x), d_l xi(y))``.
    """

    r: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    hess: np.ndarray


def kernel_derivatives(displacement) -> KernelDerivatives:
    z = np.asarray(displacement, dtype=float)
    if z.shape != (3,):
        raise ValueError("displacement must be a 3-vector")
    u = float(np.linalg.norm(z))
    kv = sinc_kernel(u)
    delta = z / u if u > 0 else np.zeros(3)
    grad_x = float(kv.r1) * delta
    hess = float(kv.A) * np.outer(delta, delta) - float(kv.B) * np.eye(3)
    return KernelDerivatives(float(kv.r), grad_x, -grad_x, hess)


# --- polynomial algebra in (s, d, a, b, D1, D2, D3) -------------------------
# A polynomial maps an exponent 7-tuple to a Fraction. s = sinc, d = sinc',
# a = A, b = B and Dk = Delta_k.

_ONE = (0,) * 7


def _mono(**exps) -> tuple[int, ...]:
    keys = ("s", "d", "a", "b", "D1", "D2", "D3")
    return tuple(exps.get(k, 0) for k in keys)


def _poly_mul(p, q):
    out = defaultdict(Fraction)
    for e1, c1 in p.items():
        for e2, c2 in q.items():
            out[tuple(x + y for x, y in zip(e1, e2))] += c1 * c2
    return {e: c for e, c in out.items() if c}


def _delta(k: int, power: int = 1) -> dict:
    exps = [0] * 7
    exps[4 + k] = power
    return tuple(exps)


@lru_cache(maxsize=None)
def _rho(i: int, j: int):
    """Unscaled ``Cov(Y_i(x), Y_j(y))`` as a polynomial, or None when zero.

    The sqrt3 gradient scaling is applied separately.
    """
    if _FIELD[i] != _FIELD[j]:
        return None
    ki, kj = _AXIS[i], _AXIS[j]
    if ki is None and kj is None:
        return {_mono(s=1): Fraction(1)}
    if ki is None:
        e = list(_delta(kj))
        e[1] = 1
        return {tuple(e): Fraction(-1)}
    if kj is None:
        e = list(_delta(ki))
        e[1] = 1
        return {tuple(e): Fraction(1)}
    e = [0, 0, 1, 0, 0, 0, 0]
    e[4 + ki] += 1
    e[4 + kj] += 1
    out = {tuple(e): Fraction(1)}
    if ki == kj:
        out[_mono(b=1)] = Fraction(-1)
    return out


@lru_cache(maxsize=None)
def _rho_power(i: int, j: int, n: int):
    p = {_ONE: Fraction(1)}
    base = _rho(i, j)
    for _ in range(n):
        p = _poly_mul(p, base)
    return p


Monomial = tuple[tuple[int, int], ...]  # ((component, order), ...)


def _grad_order(m: Monomial) -> int:
    return sum(n for c, n in m if _AXIS[c] is not None)


@lru_cache(maxsize=None)
def monomial_covariance(left: Monomial, right: Monomial):
    """``E[H_left(Y(x)) H_right(Y(y))]`` as a polynomial in the kernels."""
    lc = [c for c, _ in left]
    rc = [c for c, _ in right]
    total = defaultdict(Fraction)
    for K, weight in bipartite_diagrams([n for _, n in left], [n for _, n in right]):
        poly = {_ONE: weight}
        for i, row in enumerate(K):
            for j, k in enumerate(row):
                if not k:
                    continue
                if _rho(lc[i], rc[j]) is None:
                    poly = None
                    break
                poly = _poly_mul(poly, _rho_power(lc[i], rc[j], k))
            if poly is None:
                break
        if poly:
            for e, c in poly.items():
                total[e] += c
    g = _grad_order(left) + _grad_order(right)
    out = {}
    for e, c in total.items():
        if c == 0 or any(x % 2 for x in e[4:]):
            continue
        # odd gradient counts carry an odd Delta degree and vanish above
        out[e] = c * 3 ** (g // 2)
    return out


# --- group catalog ---------------------------------------------------------


def _classify(alpha: Sequence[int]) -> str:
    xi, eta = alpha[0], alpha[1]
    gx, ge = alpha[2:5], alpha[5:8]
    sx, se = sum(gx), sum(ge)
    if sx == 0 and se == 0:
        return {(4, 0): "A11", (0, 4): "A12", (2, 2): "A13"}[(xi, eta)]
    if xi + eta == 0 and sorted(gx + ge, reverse=True)[:2] == [4, 0]:
        return "A14" if sx else "A15"
    if xi + eta == 2:
        return {(2, 0, 2, 0): "A21", (0, 2, 0, 2): "A22",
                (2, 0, 0, 2): "A23", (0, 2, 2, 0): "A24"}[(xi, eta, sx, se)]
    if max(alpha) == 1:
        return "A35"
    if sx == 4:
        return "A31"
    if se == 4:
        return "A32"
    same_axis = any(gx[k] == 2 and ge[k] == 2 for k in range(3))
    return "A34" if same_axis else "A33"


def _as_monomial(alpha) -> Monomial:
    return tuple((i, a) for i, a in enumerate(alpha) if a)


def _paper_groups():
    groups = defaultdict(list)
    for alpha, _ in chaos_multi_indices(4, "exact"):
        label = _classify(alpha)
        if label in ("A34", "A35"):
            continue
        coef = c_coefficient_rational(alpha, "paper")
        if label in ("A31", "A32"):
            # published sum runs over ordered pairs i != j
            coef *= 2
        groups[label].append((coef, _as_monomial(alpha)))
    return groups


def _exact_groups():
    groups = defaultdict(list)
    for alpha, coef in chaos_multi_indices(4, "exact"):
        groups[_classify(alpha)].append((coef, _as_monomial(alpha)))
    return groups


@lru_cache(maxsize=None)
def i4_groups(convention: str = "paper") -> dict[str, tuple[tuple[Fraction, Monomial], ...]]:
    """Groups of ``2 pi I_4`` as ``label -> ((coefficient, monomial), ...)``."""
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    raw = _paper_groups() if convention == "paper" else _exact_groups()
    return {k: tuple(sorted(raw[k], key=lambda t: t[1])) for k in sorted(raw)}


# --- terms -----------------------------------------------------------------

_RADIAL_NAMES = ("sinc", "dsinc", "A", "B")
_LABELS = ("i", "j", "k")
_SUMMATION = {0: "single", 1: "sum_over_k", 2: "sum_over_distinct_pairs",
              3: "sum_over_distinct_triples"}
_N_ASSIGN = {0: 1, 1: 3, 2: 6, 3: 6}

PAPER_NONNEGATIVE = frozenset({
    "Cov(A14,A21)", "Cov(A15,A22)", "Cov(A11,A31)", "Cov(A12,A32)", "Cov(A13,A33)",
})


@dataclass(frozen=True)
class ChaosTerm:
    """One ``coefficient * radial * angular`` contribution to a covariance.

    ``coefficient`` already contains the group coefficients, the diagram
    weights and the sqrt3 scalings.
    """

    label: str
    coefficient: Fraction
    radial: RadialKernelSpec
    angular: AngularPattern
    sign_known_nonnegative: bool = False

    def __post_init__(self):
        if self.coefficient == 0:
            raise ValueError("ChaosTerm coefficient must be nonzero")
        self.radial.check_convergent()

    @property
    def pair(self) -> tuple[str, str]:
        inner = self.label[self.label.index("(") + 1:-1]
        parts = inner.split(",")
        return (parts[0], parts[0]) if len(parts) == 1 else (parts[0], parts[1])


def pair_label(g1: str, g2: str) -> str:
    return f"Var({g1})" if g1 == g2 else f"Cov({min(g1, g2)},{max(g1, g2)})"


def _block(group: str) -> str:
    return group[:2]


def _nonnegative(label: str, g1: str, g2: str, convention: str) -> bool:
    # blocks of Var(A2) and Var(A3) are dropped as a whole
    if _block(g1) == _block(g2) and _block(g1) in ("A2", "A3"):
        return True
    return convention == "paper" and label in PAPER_NONNEGATIVE


def group_covariance(g1: str, g2: str, convention: str = "paper"):
    """Polynomial of ``Cov(g1, g2)`` in the kernels, before integration."""
    groups = i4_groups(convention)
    total = defaultdict(Fraction)
    for c1, m1 in groups[g1]:
        for c2, m2 in groups[g2]:
            for e, c in monomial_covariance(m1, m2).items():
                total[e] += c1 * c2 * c
    return {e: c for e, c in total.items() if c}


def _terms_for(label, poly, nonneg):
    bins = defaultdict(Fraction)
    for e, c in poly.items():
        radial = tuple(e[:4])
        orbit = tuple(sorted((x for x in e[4:] if x), reverse=True))
        bins[(radial, orbit)] += c
    terms = []
    for (radial, orbit), c in sorted(bins.items()):
        if c == 0:
            continue
        spec = RadialKernelSpec(tuple((n, p) for n, p in zip(_RADIAL_NAMES, radial) if p))
        pattern = AngularPattern(tuple(zip(_LABELS, orbit)), _SUMMATION[len(orbit)])
        terms.append(ChaosTerm(label, c / _N_ASSIGN[len(orbit)], spec, pattern, nonneg))
    return terms


@lru_cache(maxsize=None)
def _catalog(convention: str) -> tuple[ChaosTerm, ...]:
    names = list(i4_groups(convention))
    terms = []
    for a, g1 in enumerate(names):
        for g2 in names[a:]:
            poly = group_covariance(g1, g2, convention)
            if not poly:
                continue
            label = pair_label(g1, g2)
            terms.extend(_terms_for(label, poly, _nonnegative(label, g1, g2, convention)))
    return tuple(terms)


def i4_term_catalog(convention: str = "paper") -> list[ChaosTerm]:
    """All nonvanishing ``Var``/``Cov`` terms between the groups of ``2 pi I_4``.

    Only unordered group pairs appear; the assembly doubles off-diagonal
    covariances. Pairs that vanish by independence of ``xi`` and ``eta`` or by
    parity produce no terms.
    """
    return list(_catalog(convention))


@lru_cache(maxsize=None)
def _radial_over_pi(spec: RadialKernelSpec, tolerance: float) -> float:
    return radial_integral(spec, tolerance).value / math.pi


@lru_cache(maxsize=None)
def _overlap_over_pi(spec: RadialKernelSpec, R: float, tolerance: float) -> float:
    # overlap_integral carries the full 4 pi solid angle; divide it back out
    vol = 4.0 * math.pi * R**3 / 3.0
    return overlap_integral(R, spec, tolerance) / (4.0 * math.pi) / vol / math.pi


def evaluate_term(term: ChaosTerm, tolerance: float = 1e-10, R: float | None = None) -> float:
    """Leading constant of ``term`` in units of ``4 pi^3 R^3 / 3``.

    The double integral over ``B_R x B_R`` is ``vol * int rho^2 g * angular``,
    hence the constant is ``coefficient * (radial / pi) * (angular / pi)``.
    With ``R`` given, the exact finite-ball integral divided by
    ``vol(B_R) pi^2`` is returned instead (the ball covariogram replaces
    ``vol``).
    """
    angular = angular_pattern_sum(term.angular).coefficient
    if R is None:
        radial = _radial_over_pi(term.radial, tolerance)
    else:
        radial = _overlap_over_pi(term.radial, float(R), tolerance)
    return float(term.coefficient * angular) * radial


def variance_at_radius(R: float, convention: str = "exact", tolerance: float = 1e-10) -> float:
    """Exact ``Var(I_4(B_R)) / vol(B_R)`` of the Gaussian model at finite ``R``.

    Sums every catalog term (none dropped), so this is the full variance.
    """
    total = 0.0
    for term in i4_term_catalog(convention):
        g1, g2 = term.pair
        total += (1 if g1 == g2 else 2) * evaluate_term(term, tolerance, R)
    return total * float(I4_PER_VOLUME)


# --- report ----------------------------------------------------------------

PAPER_VALUES = {
    "Var(A11)": Fraction(3, 4),
    "Var(A13)": Fraction(1, 2),
    "Cov(A11,A14)": Fraction(-21, 5),
    "Var(A14)": Fraction(488, 7),
    "Cov(A11,A21)": Fraction(-1, 2),
    "Cov(A13,A23)": Fraction(-1, 6),
    "Cov(A14,A31)": Fraction(-592, 105),
    "Cov(A21,A31)": Fraction(-1304, 3675),
    "Cov(A23,A33)": Fraction(-316, 735),
    "Var(A1)": Fraction(4362, 35),
    "Cov(A1,A2)": Fraction(-4, 3),
    "Cov(A1,A3)": Fraction(-1184, 105),
    "Cov(A2,A3)": Fraction(-824, 525),
    "Var(I4)/vol bound": Fraction(7691, 350),
}
# values whose disagreement is anticipated by the r^4 constant and
# normalisation questions
OPEN_QUESTION_LABELS = frozenset({"Var(A11)", "Var(A13)", "Var(A1)", "Var(I4)/vol bound"})
MATCH_RTOL = 1e-6


@dataclass
class TermRecord:
    label: str
    coefficient: str
    radial: str
    radial_value: float
    angular: str
    angular_value: float
    constant: float
    sign_known_nonnegative: bool


@dataclass
class Comparison:
    label: str
    computed: float
    computed_rational: str
    paper: str
    paper_value: float
    open_question: bool
    flag: str


@dataclass
class LedgerReport:
    """Evaluated ledger.

    ``subtotals`` maps every group pair label to its constant. ``blocks``
    holds ``Var(A1)``, ``Cov(A1,A2)``, ... both complete (``full``) and with
    the nonnegative-flagged terms dropped (``bound``); ``Cov(Ai,Aj)`` already
    counts both orderings of each group pair. ``lower_bound`` is
    ``Var(A1) + 2 Cov(A1,A2) + 2 Cov(A1,A3) + 2 Cov(A2,A3)`` from the bound
    column; ``full_variance`` adds ``Var(A2) + Var(A3)`` from the full column.
    """

    convention: str
    terms: list[TermRecord]
    subtotals: dict[str, float]
    blocks: dict[str, dict[str, float]]
    lower_bound: float
    full_variance: float
    var_i4_per_volume_bound: float
    var_i4_per_volume_full: float
    positive: bool
    comparisons: list[Comparison] = field(default_factory=list)

    def recompute_lower_bound(self) -> float:
        b = self.blocks["bound"]
        return b["Var(A1)"] + 2 * (b["Cov(A1,A2)"] + b["Cov(A1,A3)"] + b["Cov(A2,A3)"])

    def mismatches(self, include_open_questions: bool = False) -> list[Comparison]:
        return [c for c in self.comparisons
                if c.flag != "match" and (include_open_questions or not c.open_question)]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _nearest_rational(x: float) -> str:
    return _frac_str(Fraction(x).limit_denominator(20000))


def assemble_lower_bound(tolerance: float = 1e-10, convention: str = "paper",
                         threads: int = 1) -> LedgerReport:
    """Evaluate every catalog term and assemble ``Var(2 pi I_4)``.

    Terms are evaluated independently (optionally in threads) and reduced in
    catalog order, so the result does not depend on ``threads``.
    """
    terms = i4_term_catalog(convention)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda t: evaluate_term(t, tolerance), terms))
    else:
        values = [evaluate_term(t, tolerance) for t in terms]

    records = []
    sub_parts: dict[str, list[float]] = defaultdict(list)
    block_parts = {"full": defaultdict(list), "bound": defaultdict(list)}
    for term, value in zip(terms, values):
        angular = angular_pattern_sum(term.angular)
        records.append(TermRecord(
            term.label, _frac_str(term.coefficient), term.radial.label,
            _radial_over_pi(term.radial, tolerance) * math.pi, str(angular),
            float(angular), value, term.sign_known_nonnegative,
        ))
        sub_parts[term.label].append(value)
        g1, g2 = term.pair
        b1, b2 = sorted((_block(g1), _block(g2)))
        key = f"Var({b1})" if b1 == b2 else f"Cov({b1},{b2})"
        # an off-diagonal group pair inside one block appears twice in Var(block)
        mult = 2 if (b1 == b2 and g1 != g2) else 1
        block_parts["full"][key].append(mult * value)
        if not term.sign_known_nonnegative:
            block_parts["bound"][key].append(mult * value)

    subtotals = {k: math.fsum(v) for k, v in sorted(sub_parts.items())}
    keys = ("Var(A1)", "Var(A2)", "Var(A3)", "Cov(A1,A2)", "Cov(A1,A3)", "Cov(A2,A3)")
    blocks = {col: {k: math.fsum(parts.get(k, [])) for k in keys}
              for col, parts in block_parts.items()}
    b, f = blocks["bound"], blocks["full"]
    lower = b["Var(A1)"] + 2 * (b["Cov(A1,A2)"] + b["Cov(A1,A3)"] + b["Cov(A2,A3)"])
    full = f["Var(A1)"] + f["Var(A2)"] + f["Var(A3)"] + 2 * (
        f["Cov(A1,A2)"] + f["Cov(A1,A3)"] + f["Cov(A2,A3)"])
    report = LedgerReport(
        convention=convention,
        terms=records,
        subtotals=subtotals,
        blocks=blocks,
        lower_bound=lower,
        full_variance=full,
        var_i4_per_volume_bound=lower * float(I4_PER_VOLUME),
        var_i4_per_volume_full=full * float(I4_PER_VOLUME),
        positive=lower > 0,
    )
    report.comparisons = _compare(report)
    return report


def _compare(report: LedgerReport) -> list[Comparison]:
    computed = dict(report.subtotals)
    for k in ("Var(A1)", "Cov(A1,A2)", "Cov(A1,A3)", "Cov(A2,A3)"):
        computed[k] = report.blocks["bound"][k]
    computed["Var(I4)/vol bound"] = report.var_i4_per_volume_bound
    out = []
    for label, paper in PAPER_VALUES.items():
        value = computed.get(label, 0.0)
        ok = abs(value - float(paper)) <= MATCH_RTOL * abs(float(paper))
        oq = label in OPEN_QUESTION_LABELS
        flag = "match" if ok else ("mismatch-open-question" if oq else "mismatch")
        out.append(Comparison(label, value, _nearest_rational(value), _frac_str(paper),
                              float(paper), oq, flag))
    return out


def expected_length_density() -> float:
    """Expected nodal length per unit volume, ``1 / (3 pi)``."""
    return 1.0 / (3.0 * math.pi)
