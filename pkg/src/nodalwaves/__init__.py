"""Numerical laboratory for the nodal length of monochromatic random waves."""

from .chaos import (a_coefficient, c_coefficient, det_perp, hermite_product_moment,
                    mc_a_coefficient)
from .config import ConfigError, ExperimentConfig
from .estimators import ChaosProjector, NodalLengthEstimator, PlaneWaveField
from .kernels import delta_coefficient, gaussian_half_moment, hermite, multi_hermite, sinc_kernel
from .ledger import (assemble_lower_bound, evaluate_term, expected_length_density,
                     i4_term_catalog, kernel_derivatives, variance_at_radius)
from .nodal import extract_nodal_curve_3d, extract_nodal_lines_2d, mc_nodal_statistics
from .radial import (RadialKernelSpec, ball_covariogram, leading_order_constant,
                     overlap_integral, radial_integral)
from .sphere import AngularPattern, angular_pattern_sum, sphere_monomial_moment
from .wavefield import (chaos_projection, eval_field_and_gradient, exact_gaussian_sample,
                        sample_ensemble, sample_grid)

__version__ = "0.1.0"

__all__ = [
    "AngularPattern", "ChaosProjector", "ConfigError", "ExperimentConfig",
    "NodalLengthEstimator", "PlaneWaveField", "RadialKernelSpec", "a_coefficient",
    "angular_pattern_sum", "assemble_lower_bound", "ball_covariogram", "c_coefficient",
    "chaos_projection", "delta_coefficient", "det_perp", "eval_field_and_gradient",
    "evaluate_term", "exact_gaussian_sample", "expected_length_density",
    "extract_nodal_curve_3d", "extract_nodal_lines_2d", "gaussian_half_moment", "hermite",
    "hermite_product_moment", "i4_term_catalog", "kernel_derivatives",
    "leading_order_constant", "mc_a_coefficient", "mc_nodal_statistics", "multi_hermite",
    "overlap_integral", "radial_integral", "sample_ensemble", "sample_grid",
    "sphere_monomial_moment", "sinc_kernel", "variance_at_radius",
]
