"""scikit-learn style wrappers around the simulation pieces.

The math lives in plain functions; these classes only hold parameters,
run the seeded simulation in ``fit`` and expose fitted attributes with a
trailing underscore.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .config import ExperimentConfig
from .nodal import mc_nodal_statistics
from .wavefield import (DEFAULT_N_WAVES, DEFAULT_SPACING, FieldGrid, chaos_projection,
                        eval_field_and_gradient, sample_ensemble, sample_grid)


class PlaneWaveField(BaseEstimator):
    """Seeded plane-wave approximation of the complex (3D) or real (2D) random wave.

    Parameters
    ----------
    dim : {2, 3}, default=3
    n_waves : int, default=256
        Plane waves per real component.
    seed : int, default=0
    replicate : int, default=0
        Stream index; distinct replicates are independent fields.

    Attributes
    ----------
    xi_ensemble_, eta_ensemble_ : PlaneWaveEnsemble
        Real and imaginary parts.

    Examples
    --------
    >>> field = PlaneWaveField(dim=3, seed=1).fit()
    >>> values, grads = field.evaluate([[0.0, 0.0, 0.0]])
    >>> values.shape, grads.shape
    ((1, 2), (1, 2, 3))
    """

    def __init__(self, dim: int = 3, n_waves: int = DEFAULT_N_WAVES, seed: int = 0,
                 replicate: int = 0):
        self.dim = dim
        self.n_waves = n_waves
        self.seed = seed
        self.replicate = replicate

    def fit(self, X=None, y=None):
        """Draw the two ensembles; ``X`` and ``y`` are ignored."""
        self.xi_ensemble_, self.eta_ensemble_ = sample_ensemble(
            self.dim, self.n_waves, self.seed, self.replicate)
        return self

    def evaluate(self, X, threads: int = 1):
        """Values ``(n, 2)`` and gradients ``(n, 2, dim)`` of ``(xi, eta)`` at points ``X``."""
        check_is_fitted(self, "xi_ensemble_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        v1, g1 = eval_field_and_gradient(self.xi_ensemble_, X, threads)
        v2, g2 = eval_field_and_gradient(self.eta_ensemble_, X, threads)
        return np.stack([v1, v2], axis=1), np.stack([g1, g2], axis=1)

    def grid(self, R: float, spacing: float = DEFAULT_SPACING, threads: int = 1,
             complex_field: bool | None = None) -> FieldGrid:
        """Sample on a node-symmetric grid covering ``[-R, R]^dim``.

        By default the 3D grid carries both components and the 2D grid only
        ``xi`` (the real 2D model).
        """
        check_is_fitted(self, "xi_ensemble_")
        if complex_field is None:
            complex_field = self.dim == 3
        eta = self.eta_ensemble_ if complex_field else None
        return sample_grid((self.xi_ensemble_, eta), R, spacing, threads)


class NodalLengthEstimator(BaseEstimator):
    """Monte Carlo estimate of nodal-length mean and variance per domain radius.

    Parameters
    ----------
    dim : {2, 3}, default=3
        3D: length of ``{xi = eta = 0}`` in the ball ``B_R``. 2D: length of
        ``{xi = 0}`` in the square ``[-R, R]^2``.
    n_waves : int, default=256
    grid_spacing : float, default=2*pi/12
    replicates : int, default=32
    seed : int, default=0
    threads : int, default=1
        Replicate-level worker threads; results do not depend on it.

    Attributes
    ----------
    radii_ : ndarray of shape (n_radii,)
    statistics_ : list of NodalStatistics
    mean_per_volume_ : ndarray of shape (n_radii,)
    variance_per_volume_ : ndarray of shape (n_radii,)
    lengths_ : ndarray of shape (replicates, n_radii)
        Per-replicate lengths; radii are nested on the same field.
    """

    def __init__(self, dim: int = 3, n_waves: int = DEFAULT_N_WAVES,
                 grid_spacing: float = DEFAULT_SPACING, replicates: int = 32, seed: int = 0,
                 threads: int = 1):
        self.dim = dim
        self.n_waves = n_waves
        self.grid_spacing = grid_spacing
        self.replicates = replicates
        self.seed = seed
        self.threads = threads

    def _config(self, radii) -> ExperimentConfig:
        return ExperimentConfig(kind="simulate", dim=self.dim, radii=tuple(radii),
                                n_waves=self.n_waves, grid_spacing=self.grid_spacing,
                                replicates=self.replicates, seed=self.seed)

    def fit(self, X, y=None):
        """Run the replicates.

        Parameters
        ----------
        X : array-like of shape (n_radii,)
            Strictly increasing domain radii.
        y : ignored

        Returns
        -------
        self : NodalLengthEstimator
        """
        radii = np.asarray(X, dtype=float).ravel()
        self.statistics_ = mc_nodal_statistics(self._config(radii), self.threads)
        self.radii_ = radii
        self.mean_per_volume_ = np.array([s.mean_per_volume for s in self.statistics_])
        self.variance_per_volume_ = np.array([s.variance_per_volume for s in self.statistics_])
        self.lengths_ = np.array([s.lengths for s in self.statistics_]).T
        return self

    def relative_variance(self) -> np.ndarray:
        """``Var(L) / E[L]^2`` per radius."""
        check_is_fitted(self, "statistics_")
        return np.array([s.variance / s.mean_length**2 for s in self.statistics_])

    def concentration_slope(self) -> float:
        """Least-squares slope of ``log(Var/E^2)`` on ``log R``."""
        check_is_fitted(self, "statistics_")
        if self.radii_.size < 2:
            raise ValueError("need at least two radii for a slope")
        return float(np.polyfit(np.log(self.radii_), np.log(self.relative_variance()), 1)[0])


class ChaosProjector(TransformerMixin, BaseEstimator):
    """Map complex 3D field grids to their chaos components ``I_2``, ``I_4``.

    Parameters
    ----------
    radius : float, default=4.0
        Ball ``B_R`` over which the components are integrated.
    orders : tuple of int, default=(1, 2)
        Values of ``q`` in ``I_{2q}``.
    convention : {"exact", "paper"}, default="exact"
        Coefficient set of the chaos expansion.

    Attributes
    ----------
    n_features_out_ : int
    """

    def __init__(self, radius: float = 4.0, orders=(1, 2), convention: str = "exact"):
        self.radius = radius
        self.orders = orders
        self.convention = convention

    def fit(self, X=None, y=None):
        if any(q not in (1, 2) for q in self.orders):
            raise ValueError("orders must be drawn from {1, 2}")
        if self.convention not in ("exact", "paper"):
            raise ValueError("convention must be 'exact' or 'paper'")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError("radius must be positive")
        self.n_features_out_ = len(self.orders)
        return self

    def transform(self, X):
        """``X`` is a sequence of FieldGrid; returns shape ``(len(X), len(orders))``."""
        check_is_fitted(self, "n_features_out_")
        return np.array([[chaos_projection(g, q, self.radius, self.convention)
                          for q in self.orders] for g in X], dtype=float).reshape(
                              len(X), self.n_features_out_)

    def get_feature_names_out(self, input_features=None):
        return np.array([f"I{2 * q}" for q in self.orders], dtype=object)
