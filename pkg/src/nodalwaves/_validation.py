"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


class DimensionError(ValueError):
    """Raised when array lengths or dimensions do not agree."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


class UnsupportedError(ValueError):
    """Raised when a request falls outside what an operation supports."""


def check_nonneg_int(value, name: str) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return int(value)


def check_positive(value, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value}")
    return value


def check_seed(seed) -> int:
    seed = check_nonneg_int(seed, "seed")
    if seed >= 2**64:
        raise DomainError("seed must fit in an unsigned 64-bit integer")
    return seed


def check_points(points, dim: int | None = None) -> np.ndarray:
    """Return ``points`` as a finite float array of shape (n, dim)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2:
        raise DimensionError(f"points must be 2-D, got shape {pts.shape}")
    if dim is not None and pts.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got {pts.shape[1]}")
    if not np.all(np.isfinite(pts)):
        raise DomainError("points must be finite")
    return pts
