"""Acceptance criteria 1-10 at their stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) and then
asserts the same condition, so a failing criterion is reported, not hidden.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import linregress

from nodalwaves import ledger
from nodalwaves.chaos import hermite_product_moment, mc_a_coefficient
from nodalwaves.config import ExperimentConfig
from nodalwaves.experiments import (ANGULAR_TABLE, DENSITY_2D, JACOBIAN_TABLE, RADIAL_TABLE,
                                    run_chaos_study, run_scaling_study, weighted_slope)
from nodalwaves.kernels import gaussian_half_moment, hermite
from nodalwaves.nodal import extract_nodal_curve_3d, mc_nodal_statistics
from nodalwaves.radial import RadialKernelSpec, radial_integral
from nodalwaves.sphere import angular_pattern_sum, sphere_quadrature_moment
from nodalwaves.wavefield import grid_from_functions

pytestmark = pytest.mark.slow

REPLICATES_3D = 400
REPLICATES_2D = 2000
REPLICATES_CHAOS = 300


@pytest.fixture(scope="module")
def scaling_3d():
    cfg = ExperimentConfig(kind="scaling", dim=3, radii=(4.0, 6.0, 8.0),
                           replicates=REPLICATES_3D, seed=2024)
    return run_scaling_study(cfg)


@pytest.fixture(scope="module")
def scaling_2d():
    cfg = ExperimentConfig(kind="scaling", dim=2, radii=(4.0, 8.0, 16.0),
                           replicates=REPLICATES_2D, seed=2025)
    return run_scaling_study(cfg)


@pytest.fixture(scope="module")
def chaos_3d():
    cfg = ExperimentConfig(kind="chaos", dim=3, radii=(4.0, 6.0, 8.0),
                           replicates=REPLICATES_CHAOS, seed=2026)
    return run_chaos_study(cfg)


@pytest.fixture(scope="module")
def paper_ledger():
    return ledger.assemble_lower_bound(1e-10, "paper")


def test_criterion_01_radial_constants(record):
    start = time.perf_counter()
    worst = 0.0
    for name, powers, multiple in RADIAL_TABLE:
        value = radial_integral(RadialKernelSpec.of(2, **powers), 1e-10).value
        worst = max(worst, abs(value - float(multiple) * math.pi))
    elapsed = time.perf_counter() - start
    ok = record(1, "radial table", worst <= 1e-8 and elapsed < 10,
                f"max abs error {worst:.2e} (tol 1e-8), {elapsed:.2f} s (limit 10 s)")
    assert ok


def test_criterion_02_angular_constants(record):
    exact_ok, worst = True, 0.0
    for name, pattern, expected in ANGULAR_TABLE:
        exact = angular_pattern_sum(pattern)
        exact_ok &= exact.coefficient == expected
        quad = sum(sphere_quadrature_moment(*half) for half in pattern.assignments())
        worst = max(worst, abs(quad - float(exact)))
    ok = record(2, "angular table", exact_ok and worst <= 1e-9,
                f"exact rationals {'equal' if exact_ok else 'differ'}, "
                f"quadrature max abs diff {worst:.2e} (tol 1e-9)")
    assert ok


def test_criterion_03_published_jacobian_coefficients(record):
    start = time.perf_counter()
    failures = []
    for name, alpha, published, exact in JACOBIAN_TABLE:
        est = mc_a_coefficient(alpha, 10_000_000, seed=3)
        z = (est.value - float(published)) / est.stderr
        line = f"mc {est.value:.5f} +- {est.stderr:.1e}, published {float(published):.5f}"
        line += f", exact {float(exact):.5f}, z={z:.1f}"
        passed = abs(z) <= 3
        record(3, name, passed, line)
        if not passed:
            failures.append(line)
    elapsed = time.perf_counter() - start
    record(3, "runtime", elapsed < 60, f"{elapsed:.1f} s (limit 60 s)")
    assert elapsed < 60
    assert not failures, failures


def test_criterion_04_moment_identities(record):
    m3, m5, m7 = (gaussian_half_moment(k) for k in (3, 5, 7))
    ratios_ok = m5 / m3 == 4 and m7 / m3 == 24
    record(4, "half moments", ratios_ok, f"m5/m3 = {m5 / m3!r}, m7/m3 = {m7 / m3!r}")

    rng = np.random.default_rng(0)
    n = 1_000_000
    x = rng.standard_normal(n)
    worst = 0.0
    for a, b in itertools.combinations_with_replacement(range(5), 2):
        prod = hermite(a, x) * hermite(b, x)
        target = math.factorial(a) if a == b else 0.0
        if a == b == 0:
            assert np.all(prod == 1.0)
            continue
        worst = max(worst, abs(prod.mean() - target) / (prod.std() / math.sqrt(n)))
    orth_ok = worst <= 3
    record(4, "Hermite orthogonality", orth_ok, f"max |z| over 14 nonconstant pairs {worst:.2f}")

    basis = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    worst4 = 0.0
    for orders in ((2, 2, 2, 2), (2, 2, 4), (1, 1, 1, 1)):
        M = np.array([np.eye(4)[0], np.eye(4)[1]] + [basis[:, k] for k in range(len(orders) - 2)])
        z = rng.standard_normal((n, 4)) @ M.T
        vals = np.prod([hermite(o, z[:, i]) for i, o in enumerate(orders)], axis=0)
        formula = hermite_product_moment(orders, M @ M.T)
        worst4 = max(worst4, abs(vals.mean() - formula) / (vals.std() / math.sqrt(n)))
    fourth_ok = worst4 <= 3
    record(4, "fourth-moment formulas", fourth_ok, f"max |z| {worst4:.2f}")
    assert ratios_ok and orth_ok and fourth_ok


def test_criterion_05_mean_density(record, scaling_3d):
    _, fit = scaling_3d
    s6 = next(s for s in fit["stats"] if s.R == 6.0)
    first = np.array(s6.lengths[:200])
    mean = first.mean() / s6.volume
    se = first.std(ddof=1) / math.sqrt(first.size) / s6.volume
    ref = ledger.expected_length_density()
    ok3 = abs(mean - ref) <= max(3 * se, 0.03 * ref)
    record(5, "3D R=6, 200 replicates", ok3,
           f"E[L]/vol {mean:.5f} +- {se:.5f} vs 1/(3 pi) {ref:.5f} ({mean / ref - 1:+.2%})")

    cfg = ExperimentConfig(kind="simulate", dim=2, radii=(6.0,), replicates=1000, seed=77)
    s2 = mc_nodal_statistics(cfg)[0]
    ok2 = abs(s2.mean_per_volume - DENSITY_2D) <= 0.03 * DENSITY_2D
    record(5, "2D R=6, 1000 replicates", ok2,
           f"E[L]/area {s2.mean_per_volume:.5f} vs 1/(2 sqrt 2) {DENSITY_2D:.5f} "
           f"({s2.mean_per_volume / DENSITY_2D - 1:+.2%})")
    assert ok3 and ok2


def test_criterion_06_linear_variance(record, scaling_3d, paper_ledger):
    _, fit = scaling_3d
    v = [s.variance_per_volume for s in fit["stats"]]
    positive = all(x > 0 for x in v)
    ratios = [b / a for a, b in zip(v, v[1:])]
    within = all(abs(r - 1) <= 0.25 for r in ratios)
    record(6, "Var/vol at R=4,6,8", positive and within,
           "values " + ", ".join(f"{x:.4f}" for x in v)
           + "; consecutive ratios " + ", ".join(f"{r:.3f}" for r in ratios))
    record(6, "assembled ledger bound", paper_ledger.positive,
           f"lower bound {paper_ledger.lower_bound:.4f} in units vol pi^2, "
           f"Var(I4)/vol >= {paper_ledger.var_i4_per_volume_bound:.4f}")
    assert positive and within and paper_ledger.positive


def test_criterion_07_cancellation_contrast(record, chaos_3d, scaling_2d):
    _, summary = chaos_3d
    v2 = [e["I2"].variance / (4 * math.pi * e["R"] ** 3 / 3) for e in summary]
    decreasing = all(b < a for a, b in zip(v2, v2[1:]))
    record(7, "3D Var(I2)/vol decreasing", decreasing,
           "R=4,6,8: " + ", ".join(f"{x:.4f}" for x in v2))

    _, fit = scaling_2d
    stats = fit["stats"]
    slope, se = weighted_slope([math.log(s.volume) for s in stats],
                               [s.variance_per_volume for s in stats],
                               [s.stderr_variance / s.volume for s in stats])
    t = slope / se
    ok2 = slope > 0 and t > 2
    record(7, "2D Var/area vs log(area)", ok2,
           "Var/area " + ", ".join(f"{s.variance_per_volume:.4f}" for s in stats)
           + f"; slope {slope:.4f}, t={t:.2f} (need > 2)")
    assert decreasing and ok2


def test_criterion_08_concentration(record, scaling_3d, scaling_2d):
    slope3 = scaling_3d[1]["slope"]
    slope2 = scaling_2d[1]["slope"]
    ok3 = -3.6 <= slope3 <= -2.4
    ok2 = -2.6 <= slope2 <= -1.4
    record(8, "3D slope", ok3, f"{slope3:.3f} in [-3.6, -2.4]")
    record(8, "2D slope", ok2, f"{slope2:.3f} in [-2.6, -1.4]")
    # the fit reported by the scaling study is an ordinary least-squares slope
    logs = [math.log(s.R) for s in scaling_3d[1]["stats"]]
    ys = [math.log(s.variance / s.mean_length**2) for s in scaling_3d[1]["stats"]]
    assert linregress(logs, ys).slope == pytest.approx(slope3)
    assert ok3 and ok2


def _circle(R, h):
    grid = grid_from_functions(R, h, 3, xi=lambda p: p[:, 0] ** 2 + p[:, 1] ** 2 - 1,
                               eta=lambda p: p[:, 2])
    return extract_nodal_curve_3d(grid, R).total_length


def test_criterion_09_extractor_fixtures(record):
    line = grid_from_functions(2.0, 2 * math.pi / 12, 3, xi=lambda p: p[:, 0],
                               eta=lambda p: p[:, 1])
    length = extract_nodal_curve_3d(line, 2.0).total_length
    ok_line = abs(length - 4.0) <= 1e-6 * 4.0
    record(9, "straight line", ok_line, f"length {length:.10f} vs 4")
    c04 = _circle(2.0, 0.04)
    ok_circle = abs(c04 - 2 * math.pi) <= 0.005 * 2 * math.pi
    record(9, "circle h=0.04", ok_circle, f"relative error {c04 / (2 * math.pi) - 1:+.2e}")
    e1 = abs(_circle(1.2, 0.04) - 2 * math.pi)
    e2 = abs(_circle(1.2, 0.02) - 2 * math.pi)
    ok_ref = e2 * 3 <= e1
    record(9, "circle refinement", ok_ref, f"error reduction factor {e1 / e2:.2f} (need >= 3)")
    assert ok_line and ok_circle and ok_ref


def test_criterion_10_ledger_audit(record, paper_ledger):
    unexpected = []
    for c in paper_ledger.comparisons:
        both = math.isfinite(c.computed) and math.isfinite(c.paper_value)
        expected = c.flag == "match" or c.open_question
        tag = "match" if c.flag == "match" else (
            "open-question mismatch" if c.open_question else "UNEXPLAINED mismatch")
        record(10, c.label, expected and both,
               f"computed {c.computed:.6g}, published {c.paper_value:.6g} ({tag})")
        if not expected:
            unexpected.append(c.label)
    assert not unexpected, unexpected
