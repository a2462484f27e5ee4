"""Experiment runners producing flat result rows.

Every runner returns a list of ``ResultRow``; ``write_rows`` serializes them
to CSV with a commented header, so two runs of the same configuration give
byte-identical bodies.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from . import ledger
from .chaos import mc_a_coefficient
from .config import ConfigError, ExperimentConfig
from .kernels import gaussian_half_moment
from .nodal import mc_nodal_statistics
from .radial import ConvergenceError, RadialKernelSpec, leading_order_constant, radial_integral
from .sphere import AngularPattern, angular_pattern_sum, sphere_quadrature_moment
from .stats import RunningMoments
from .wavefield import chaos_projection, sample_ensemble, sample_grid

CSV_COLUMNS = ("experiment_id", "kind", "dim", "R", "statistic", "value", "stderr",
               "paper_value", "flag")
FLAGS = ("ok", "mismatch", "n/a")
OPEN_QUESTION_TAG = " [open question]"

# grid-bias allowance for simulated densities and the window for fitted slopes
DENSITY_RTOL = 0.03
SLOPE_WINDOW = 0.6
DENSITY_2D = 1.0 / (2.0 * math.sqrt(2.0))
MC_SAMPLES = 10_000_000

# published radial constants (multiples of pi) and their integrands
RADIAL_TABLE = (
    ("dsinc^4", {"dsinc": 4}, Fraction(7, 60)),
    ("A^4", {"A": 4}, Fraction(11, 140)),
    ("A^3 B", {"A": 3, "B": 1}, Fraction(1, 70)),
    ("A^2 B^2", {"A": 2, "B": 2}, Fraction(2, 315)),
    ("A B^3", {"A": 1, "B": 3}, Fraction(17, 3780)),
    ("B^4", {"B": 4}, Fraction(17, 2835)),
    ("sinc^2 dsinc^2", {"sinc": 2, "dsinc": 2}, Fraction(1, 12)),
    ("dsinc^2 A^2", {"dsinc": 2, "A": 2}, Fraction(23, 420)),
    ("dsinc^2 A B", {"dsinc": 2, "A": 1, "B": 1}, Fraction(1, 42)),
    ("dsinc^2 B^2", {"dsinc": 2, "B": 2}, Fraction(2, 105)),
)

# published angular constants (multiples of pi) and their patterns
ANGULAR_TABLE = (
    ("sum_k D_k^4", AngularPattern((("i", 4),), "sum_over_k"), Fraction(12, 5)),
    ("sum_k D_k^8", AngularPattern((("i", 8),), "sum_over_k"), Fraction(12, 9)),
    ("sum_{i!=j} D_i^4 D_j^4",
     AngularPattern((("i", 4), ("j", 4)), "sum_over_distinct_pairs"), Fraction(24, 105)),
    ("sum_k D_k^6", AngularPattern((("i", 6),), "sum_over_k"), Fraction(12, 7)),
    ("sum_{i!=j} D_i^2 D_j^6",
     AngularPattern((("i", 2), ("j", 6)), "sum_over_distinct_pairs"), Fraction(8, 21)),
    ("sum_{i!=j} D_i^2 D_j^4",
     AngularPattern((("i", 2), ("j", 4)), "sum_over_distinct_pairs"), Fraction(24, 35)),
    ("sum_{i!=j} D_i^2 D_j^2",
     AngularPattern((("i", 2), ("j", 2)), "sum_over_distinct_pairs"), Fraction(8, 5)),
    ("sum_{i!=j!=k} D_i^2 D_j^2 D_k^4",
     AngularPattern((("i", 2), ("j", 2), ("k", 4)), "sum_over_distinct_triples"),
     Fraction(24, 315)),
    ("sum_{i!=j!=k} D_i^2 D_j^2 D_k^2",
     AngularPattern((("i", 2), ("j", 2), ("k", 2)), "sum_over_distinct_triples"),
     Fraction(8, 35)),
    ("sum_k D_k^2", AngularPattern((("i", 2),), "sum_over_k"), Fraction(4)),
)

# published Hermite coefficients of det_perp, with a representative index
JACOBIAN_TABLE = (
    ("a_0", (0, 0, 0, 0, 0, 0), Fraction(1), Fraction(2)),
    ("a_{2e_k}", (2, 0, 0, 0, 0, 0), Fraction(1, 3), Fraction(1, 3)),
    ("a_{2e_i+2e_j}", (2, 0, 0, 2, 0, 0), Fraction(1, 9), Fraction(-1, 30)),
    ("a_{4e_k}", (4, 0, 0, 0, 0, 0), Fraction(-5, 9), Fraction(-1, 60)),
)

# overlap constants of int r^p over B_R x B_R in units of 4 pi^3 R^3 / 3
OVERLAP_TABLE = (
    ("overlap r^4 constant", 4, Fraction(2), True),
    ("overlap r^6 constant", 6, Fraction(1, 2), False),
)


@dataclass(frozen=True)
class ResultRow:
    """One output record.

    ``paper_value`` is the reference the row is checked against (a published
    constant or a ledger entry); ``flag`` is ``mismatch`` exactly when a
    reference exists and the deviation exceeds the declared tolerance
    combined with the standard error.
    """

    experiment_id: str
    kind: str
    dim: int
    R: float | None
    statistic: str
    value: float
    stderr: float | None = None
    paper_value: float | None = None
    flag: str = "n/a"
    open_question: bool = False

    def as_csv(self) -> list[str]:
        return [self.experiment_id, self.kind, str(self.dim), _num(self.R), self.statistic,
                _num(self.value), _num(self.stderr), _num(self.paper_value), self.flag]

    @property
    def is_regression(self) -> bool:
        return self.flag == "mismatch" and not self.open_question


def _num(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def compare(value: float, reference: float | None, tolerance: float,
            stderr: float | None = None, n_sigma: float = 3.0) -> str:
    """Flag ``value`` against ``reference``: ok within ``max(tolerance, n_sigma * stderr)``."""
    if reference is None:
        return "n/a"
    if not math.isfinite(value):
        return "mismatch"
    allowed = max(tolerance, n_sigma * stderr if stderr and math.isfinite(stderr) else 0.0)
    return "ok" if abs(value - reference) <= allowed else "mismatch"


def _row(config, kind, R, statistic, value, stderr=None, reference=None,
         tolerance=0.0, open_question=False):
    flag = compare(value, reference, tolerance, stderr)
    if open_question and flag == "mismatch":
        statistic += OPEN_QUESTION_TAG
    return ResultRow(config.experiment_id, kind, config.dim, R, statistic, float(value),
                     None if stderr is None else float(stderr),
                     None if reference is None else float(reference), flag,
                     open_question and flag == "mismatch")


# --- verification ----------------------------------------------------------


def run_verification_suite(tolerance: float = 1e-8, seed: int = 0, threads: int = 1,
                           mc_samples: int = MC_SAMPLES,
                           experiment_id: str = "verify") -> tuple[list[ResultRow], "ledger.LedgerReport"]:
    """Recompute every published constant and flag disagreements.

    Returns the rows and the paper-convention ledger report. Quadrature
    failures become ``mismatch`` rows carrying the best estimate.
    """
    cfg = ExperimentConfig(kind="verify", tolerance=tolerance, seed=seed,
                           experiment_id=experiment_id, replicates=1)
    rows = []
    for name, powers, paper in RADIAL_TABLE:
        spec = RadialKernelSpec.of(2, **powers)
        try:
            value = radial_integral(spec, min(tolerance, 1e-10)).value
        except ConvergenceError as exc:
            value = exc.best_estimate.value
            rows.append(ResultRow(cfg.experiment_id, "verify", 3, None, f"radial {name}",
                                  value, None, float(paper) * math.pi, "mismatch"))
            continue
        rows.append(_row(cfg, "verify", None, f"radial {name}", value, None,
                         float(paper) * math.pi, tolerance))

    for name, pattern, paper in ANGULAR_TABLE:
        exact = angular_pattern_sum(pattern)
        # exact rational comparison; the quadrature row checks the formula
        flag = "ok" if exact.coefficient == paper else "mismatch"
        rows.append(ResultRow(cfg.experiment_id, "verify", 3, None, f"angular {name}",
                              float(exact), None, float(paper) * math.pi, flag))
        quad = sum(sphere_quadrature_moment(*half) for half in pattern.assignments())
        rows.append(_row(cfg, "verify", None, f"angular {name} quadrature", quad, None,
                         float(exact), 1e-9))

    m3, m5, m7 = (gaussian_half_moment(k) for k in (3, 5, 7))
    rows.append(_row(cfg, "verify", None, "m5/m3", m5 / m3, None, 4.0, 1e-12))
    rows.append(_row(cfg, "verify", None, "m7/m3", m7 / m3, None, 24.0, 1e-12))

    for name, alpha, paper, exact in JACOBIAN_TABLE:
        est = mc_a_coefficient(alpha, mc_samples, seed=seed, threads=threads)
        rows.append(_row(cfg, "verify", None, f"{name} mc vs published", est.value,
                         est.stderr, float(paper), 0.0))
        rows.append(_row(cfg, "verify", None, f"{name} mc vs exact", est.value,
                         est.stderr, float(exact), 0.0))

    for name, power, paper, open_question in OVERLAP_TABLE:
        spec = RadialKernelSpec.of(2, sinc=power)
        value = leading_order_constant(spec, min(tolerance, 1e-10)) / math.pi**2
        rows.append(_row(cfg, "verify", None, name, value, None, float(paper),
                         ledger.MATCH_RTOL * float(paper), open_question))

    report = ledger.assemble_lower_bound(min(tolerance, 1e-10), "paper", threads)
    for c in report.comparisons:
        tol = ledger.MATCH_RTOL * abs(c.paper_value)
        rows.append(_row(cfg, "verify", None, f"ledger {c.label}", c.computed, None,
                         c.paper_value, tol, c.open_question))
    rows.append(ResultRow(cfg.experiment_id, "verify", 3, None, "ledger lower bound positive",
                          float(report.positive), None, 1.0,
                          "ok" if report.positive else "mismatch"))
    exact = ledger.assemble_lower_bound(min(tolerance, 1e-10), "exact", threads)
    rows.append(ResultRow(cfg.experiment_id, "verify", 3, None,
                          "ledger Var(I4)/vol full (exact coefficients)",
                          exact.var_i4_per_volume_full))
    rows.append(ResultRow(cfg.experiment_id, "verify", 3, None,
                          "ledger Var(I4)/vol full (published coefficients)",
                          report.var_i4_per_volume_full))
    return rows, report


# --- Monte Carlo nodal statistics ------------------------------------------


def _require(config: ExperimentConfig, kind: str):
    if config.kind != kind:
        raise ConfigError(f"expected a {kind!r} config, got kind={config.kind!r}")


def density_reference(dim: int) -> float:
    return ledger.expected_length_density() if dim == 3 else DENSITY_2D


def weighted_slope(x, y, stderr):
    """Weighted least-squares slope of ``y`` on ``x`` and its standard error."""
    x, y, s = (np.asarray(v, dtype=float) for v in (x, y, stderr))
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        s = np.ones_like(y)
    coef, cov = np.polyfit(x, y, 1, w=1.0 / s, cov="unscaled")
    return float(coef[0]), float(math.sqrt(cov[0, 0]))


def run_simulation(config: ExperimentConfig, threads: int = 1):
    """Nodal-length mean and variance per radius.

    In 2D with at least three radii the weighted slope of ``Var/area`` on
    ``log(area)`` and its t-statistic are appended.
    """
    _require(config, "simulate")
    stats = mc_nodal_statistics(config, threads)
    ref = density_reference(config.dim)
    rows = []
    for s in stats:
        rows.append(_row(config, "simulate", s.R, "mean_length", s.mean_length, s.stderr_mean))
        rows.append(_row(config, "simulate", s.R, "mean_per_volume", s.mean_per_volume,
                         s.stderr_mean / s.volume, ref, DENSITY_RTOL * ref))
        rows.append(_row(config, "simulate", s.R, "variance", s.variance, s.stderr_variance))
        rows.append(_row(config, "simulate", s.R, "variance_per_volume", s.variance_per_volume,
                         s.stderr_variance / s.volume))
        rows.append(_row(config, "simulate", s.R, "skipped_cell_fraction",
                         s.cells_skipped / max(s.cells_examined, 1)))
    if config.dim == 2 and len(stats) >= 3:
        slope, se = weighted_slope([math.log(s.volume) for s in stats],
                                   [s.variance_per_volume for s in stats],
                                   [s.stderr_variance / s.volume for s in stats])
        rows.append(_row(config, "simulate", None, "slope variance_per_area vs log_area",
                         slope, se))
        rows.append(_row(config, "simulate", None, "t_stat variance_per_area vs log_area",
                         slope / se if se > 0 else math.nan))
    return rows, stats


def run_scaling_study(config: ExperimentConfig, threads: int = 1):
    """Fit ``log(Var / E^2)`` against ``log R``.

    Targets are ``-3`` (3D) and ``-2`` (2D); the fit is ordinary least squares
    and the row is flagged outside ``target +- 0.6``.
    """
    _require(config, "scaling")
    stats = mc_nodal_statistics(config, threads)
    rows = []
    logs, ratios = [], []
    for s in stats:
        ratio = s.variance / s.mean_length**2
        # delta method, ignoring the mean/variance correlation
        rel = math.hypot(s.stderr_variance / s.variance, 2 * s.stderr_mean / s.mean_length)
        rows.append(_row(config, "scaling", s.R, "mean_per_volume", s.mean_per_volume,
                         s.stderr_mean / s.volume))
        rows.append(_row(config, "scaling", s.R, "variance_per_volume", s.variance_per_volume,
                         s.stderr_variance / s.volume))
        rows.append(_row(config, "scaling", s.R, "var_over_mean_sq", ratio, ratio * rel))
        logs.append(math.log(s.R))
        ratios.append(math.log(ratio))
    fit = linregress(logs, ratios)
    slope, se = float(fit.slope), float(fit.stderr)
    target = -3.0 if config.dim == 3 else -2.0
    rows.append(_row(config, "scaling", None, "slope log(var_over_mean_sq) vs log R", slope,
                     se, target, SLOPE_WINDOW))
    return rows, {"slope": slope, "stderr": se, "target": target, "stats": stats}


# --- chaos projections -----------------------------------------------------


def _chaos_replicate(config: ExperimentConfig, convention: str, replicate: int):
    xi_ens, eta_ens = sample_ensemble(3, config.n_waves, config.seed, replicate)
    grid = sample_grid((xi_ens, eta_ens), config.radii[-1], config.grid_spacing)
    return [(chaos_projection(grid, 1, R, convention), chaos_projection(grid, 2, R, convention))
            for R in config.radii]


def run_chaos_study(config: ExperimentConfig, threads: int = 1):
    """Empirical ``I_2`` and ``I_4`` statistics per radius (3D only).

    ``config.extra["convention"]`` selects ``"exact"`` (default) or
    ``"paper"`` coefficients. ``Var(I_4)/vol`` is checked against the exact
    finite-radius ledger value of the same convention.
    """
    _require(config, "chaos")
    if config.dim != 3:
        raise ConfigError("chaos studies are defined for the 3D complex field")
    convention = config.extra.get("convention", "exact")
    if convention not in ("exact", "paper"):
        raise ConfigError("extra.convention must be 'exact' or 'paper'")
    reps = range(config.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _chaos_replicate(config, convention, r), reps))
    else:
        results = [_chaos_replicate(config, convention, r) for r in reps]
    asymptotic = ledger.assemble_lower_bound(1e-10, convention).var_i4_per_volume_full
    rows, summary = [], []
    for k, R in enumerate(config.radii):
        vol = config.domain_volume(R)
        entry = {"R": R}
        for q, name in ((0, "I2"), (1, "I4")):
            acc = RunningMoments.from_array(np.array([res[k][q] for res in results]))
            entry[name] = acc
            rows.append(_row(config, "chaos", R, f"mean_{name}", acc.mean, acc.stderr_mean,
                             0.0, 0.0))
            ref = ledger.variance_at_radius(R, convention) if name == "I4" else None
            rows.append(_row(config, "chaos", R, f"var_{name}_per_volume", acc.variance / vol,
                             acc.stderr_variance / vol, ref, 0.0))
        rows.append(_row(config, "chaos", R, "ledger var_I4_per_volume asymptotic", asymptotic))
        summary.append(entry)
    return rows, summary


# --- output ----------------------------------------------------------------


def format_rows(rows, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.as_csv())
    return buf.getvalue()


def write_rows(rows, path, config: ExperimentConfig | None = None) -> Path:
    """Append rows to ``path``; a new file gets a comment header and column names.

    Only the comment lines carry a timestamp.
    """
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        if fresh:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            fh.write(f"# nodalwaves results, written {stamp}\n")
            if config is not None:
                fh.write(f"# config: {config.to_dict()}\n")
        fh.write(format_rows(rows, header=fresh))
    return path


def read_rows(path) -> list[dict]:
    """CSV body as dicts, skipping comment lines."""
    with Path(path).open() as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))
