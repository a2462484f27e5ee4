"""Plane-wave synthesis of the monochromatic random wave model.

A real component is ``sqrt(2/N) sum_n cos(<u_n, x> + phi_n)`` with directions
uniform on the unit sphere (3D) or circle (2D) and uniform phases; its
covariance tends to ``sinc(|x - y|)`` (3D) or ``J0(|x - y|)`` (2D). The
complex field ``psi = xi + i eta`` uses two independent ensembles.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import DomainError, check_nonneg_int, check_points, check_positive, check_seed
from .chaos import CONVENTIONS, chaos_multi_indices
from .kernels import bessel_j0, multi_hermite, sinc_kernel
from .stats import stream

DEFAULT_N_WAVES = 256
DEFAULT_SPACING = 2.0 * math.pi / 12.0
CHUNK = 2048
JITTER_LADDER = (0.0, 1e-14, 1e-12, 1e-10, 1e-8)


class ConditioningError(np.linalg.LinAlgError):
    """Covariance factorization failed even with the largest jitter."""


@dataclass(frozen=True)
class PlaneWaveEnsemble:
    """Directions, phases and amplitude of one real plane-wave superposition."""

    dim: int
    directions: np.ndarray
    phases: np.ndarray
    amplitude: float
    seed: int

    @property
    def n_waves(self) -> int:
        return self.phases.size


def _draw_ensemble(dim: int, n_waves: int, seed: int, key: tuple[int, ...]) -> PlaneWaveEnsemble:
    rng = stream(seed, *key)
    if dim == 3:
        g = rng.standard_normal((n_waves, 3))
        directions = g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        theta = rng.uniform(0.0, 2.0 * math.pi, n_waves)
        directions = np.column_stack([np.cos(theta), np.sin(theta)])
    phases = rng.uniform(0.0, 2.0 * math.pi, n_waves)
    return PlaneWaveEnsemble(dim, directions, phases, math.sqrt(2.0 / n_waves), seed)


def sample_ensemble(dim: int, n_waves: int = DEFAULT_N_WAVES, seed: int = 0,
                    replicate: int = 0) -> tuple[PlaneWaveEnsemble, PlaneWaveEnsemble]:
    """Independent ensembles for ``xi`` and ``eta``.

    They use streams ``(seed, replicate, 0)`` and ``(seed, replicate, 1)``.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    n_waves = check_nonneg_int(n_waves, "n_waves")
    if n_waves < 1:
        raise ValueError("n_waves must be >= 1")
    seed = check_seed(seed)
    replicate = check_nonneg_int(replicate, "replicate")
    return (_draw_ensemble(dim, n_waves, seed, (replicate, 0)),
            _draw_ensemble(dim, n_waves, seed, (replicate, 1)))


def _eval_block(ensemble: PlaneWaveEnsemble, x: np.ndarray):
    u = ensemble.directions
    phase = ensemble.phases[None, :] + x[:, 0:1] * u[None, :, 0]
    for k in range(1, ensemble.dim):
        phase = phase + x[:, k:k + 1] * u[None, :, k]
    c, s = np.cos(phase), np.sin(phase)
    value = ensemble.amplitude * c.sum(axis=1)
    grad = np.stack([-ensemble.amplitude * (s * u[None, :, k]).sum(axis=1)
                     for k in range(ensemble.dim)], axis=1)
    return value, grad


def eval_field_and_gradient(ensemble: PlaneWaveEnsemble, x, threads: int = 1):
    """Exact value and gradient of the cosine sum at one or many points.

    Points are processed in fixed chunks; every reduction is a plain sum over
    the wave axis, so results do not depend on ``threads``.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = check_points(pts, ensemble.dim)
    starts = range(0, pts.shape[0], CHUNK)
    blocks = [pts[i:i + CHUNK] for i in starts]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _eval_block(ensemble, b), blocks))
    else:
        parts = [_eval_block(ensemble, b) for b in blocks]
    if parts:
        value = np.concatenate([p[0] for p in parts])
        grad = np.concatenate([p[1] for p in parts])
    else:
        value, grad = np.zeros(0), np.zeros((0, ensemble.dim))
    if single:
        return float(value[0]), grad[0]
    return value, grad


@dataclass
class FieldGrid:
    """Regular grid with ``xi``, ``eta`` and their analytic gradients at the nodes.

    Arrays have shape ``shape`` (gradients ``shape + (dim,)``). ``eta`` and
    ``grad_eta`` may be None for real 2D fields.
    """

    origin: np.ndarray
    spacing: float
    shape: tuple[int, ...]
    xi: np.ndarray
    grad_xi: np.ndarray
    eta: np.ndarray | None = None
    grad_eta: np.ndarray | None = None

    def __post_init__(self):
        check_positive(self.spacing, "spacing")
        self.origin = np.asarray(self.origin, dtype=float)
        self.shape = tuple(int(n) for n in self.shape)

    @property
    def dim(self) -> int:
        return len(self.shape)

    def axes(self) -> list[np.ndarray]:
        return [self.origin[k] + self.spacing * np.arange(n) for k, n in enumerate(self.shape)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def covers_ball(self, R: float) -> bool:
        lo = self.origin
        hi = self.origin + self.spacing * (np.array(self.shape) - 1)
        return bool(np.all(lo <= -R + 1e-12) and np.all(hi >= R - 1e-12))

    def dump(self, path) -> tuple[Path, Path]:
        """Write little-endian float64 arrays to ``path`` and a JSON header beside it."""
        path = Path(path)
        arrays = [("xi", self.xi), ("grad_xi", self.grad_xi),
                  ("eta", self.eta), ("grad_eta", self.grad_eta)]
        present = [(name, a) for name, a in arrays if a is not None]
        with open(path, "wb") as fh:
            for _, a in present:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        header = {
            "dim": self.dim,
            "shape": list(self.shape),
            "origin": self.origin.tolist(),
            "spacing": self.spacing,
            "arrays": [{"name": n, "shape": list(a.shape)} for n, a in present],
            "dtype": "<f8",
        }
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(json.dumps(header, indent=2))
        return path, sidecar

    @classmethod
    def load(cls, path) -> "FieldGrid":
        path = Path(path)
        header = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        raw = np.fromfile(path, dtype="<f8")
        arrays, offset = {}, 0
        for entry in header["arrays"]:
            size = int(np.prod(entry["shape"]))
            arrays[entry["name"]] = raw[offset:offset + size].reshape(entry["shape"])
            offset += size
        return cls(np.array(header["origin"]), header["spacing"], tuple(header["shape"]),
                   arrays["xi"], arrays["grad_xi"], arrays.get("eta"), arrays.get("grad_eta"))


def centered_axes(R: float, spacing: float, dim: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Origin and shape of the smallest node-symmetric grid covering ``[-R, R]^dim``."""
    R = check_positive(R, "R")
    spacing = check_positive(spacing, "spacing")
    n = int(math.ceil(2.0 * R / spacing - 1e-9)) + 1
    half = 0.5 * (n - 1) * spacing
    return np.full(dim, -half), (n,) * dim


def _grid_eval(ensemble: PlaneWaveEnsemble, axes, threads: int = 1):
    """Value and gradient on a tensor grid via separable complex exponentials.

    ``e^{i(<u, x> + phi)}`` factors into per-axis tables, so the grid sum is
    a contraction over the wave index. ``einsum`` without path optimization
    reduces each node in a fixed order, and the first axis is split into
    independent slabs, so the output is the same for any thread count.
    """
    u = ensemble.directions
    w = ensemble.amplitude * np.exp(1j * ensemble.phases)
    tables = [np.exp(1j * np.outer(ax, u[:, k])) for k, ax in enumerate(axes)]
    weights = [np.ones(u.shape[0])] + [1j * u[:, k] for k in range(ensemble.dim)]
    first = tables[0] * w[None, :]

    def slab(rows):
        if ensemble.dim == 3:
            pair = np.einsum("in,jn->ijn", first[rows], tables[1], optimize=False)
            outs = [np.einsum("ijn,kn->ijk", pair, tables[2] * c[None, :], optimize=False).real
                    for c in weights]
        else:
            outs = [np.einsum("in,jn->ij", first[rows], tables[1] * c[None, :], optimize=False).real
                    for c in weights]
        return outs[0], np.stack(outs[1:], axis=-1)

    n0 = len(axes[0])
    step = max(1, -(-n0 // max(threads, 1)))
    slabs = [slice(i, min(i + step, n0)) for i in range(0, n0, step)]
    if threads > 1 and len(slabs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(slab, slabs))
    else:
        parts = [slab(sl) for sl in slabs]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_grid(ensembles, R: float, spacing: float = DEFAULT_SPACING,
                threads: int = 1) -> FieldGrid:
    """Evaluate ``(xi_ensemble, eta_ensemble_or_None)`` on a grid covering ``[-R, R]^dim``."""
    xi_ens, eta_ens = ensembles
    dim = xi_ens.dim
    origin, shape = centered_axes(R, spacing, dim)
    grid = FieldGrid(origin, spacing, shape, np.zeros(shape), np.zeros(shape + (dim,)))
    axes = grid.axes()
    grid.xi, grid.grad_xi = _grid_eval(xi_ens, axes, threads)
    if eta_ens is not None:
        grid.eta, grid.grad_eta = _grid_eval(eta_ens, axes, threads)
    return grid


def grid_from_functions(R: float, spacing: float, dim: int, xi, eta=None,
                        grad_xi=None, grad_eta=None) -> FieldGrid:
    """Grid of analytic test fields; callables map an ``(n, dim)`` array to values."""
    origin, shape = centered_axes(R, spacing, dim)
    grid = FieldGrid(origin, spacing, shape, np.zeros(shape), np.zeros(shape + (dim,)))
    pts = grid.points()

    def grads(f):
        return np.zeros(shape + (dim,)) if f is None else np.asarray(f(pts)).reshape(shape + (dim,))

    grid.xi = np.asarray(xi(pts), dtype=float).reshape(shape)
    grid.grad_xi = grads(grad_xi)
    if eta is not None:
        grid.eta = np.asarray(eta(pts), dtype=float).reshape(shape)
        grid.grad_eta = grads(grad_eta)
    return grid


def covariance_function(dim: int):
    if dim == 3:
        return lambda d: sinc_kernel(d).r
    if dim == 2:
        return bessel_j0
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def exact_gaussian_sample(points, dim: int, seed: int = 0, n_samples: int = 1):
    """Exact joint draws of ``xi`` and ``eta`` at up to 2000 points.

    The sinc (3D) or J0 (2D) covariance matrix is Cholesky-factorized with
    an increasing diagonal jitter (at most 1e-8). Coincident points are
    merged before factorization, so they receive identical values. Returns
    two arrays of shape ``(n_samples, n_points)``.
    """
    pts = check_points(points, dim)
    if pts.shape[0] > 2000:
        raise ValueError("exact sampling is limited to 2000 points")
    seed = check_seed(seed)
    n_samples = check_nonneg_int(n_samples, "n_samples")
    unique, inverse = np.unique(pts, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    dist = np.linalg.norm(unique[:, None, :] - unique[None, :, :], axis=-1)
    cov = covariance_function(dim)(dist)
    eye = np.eye(unique.shape[0])
    for jitter in JITTER_LADDER:
        try:
            chol = np.linalg.cholesky(cov + jitter * eye)
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise ConditioningError(
            f"covariance of {unique.shape[0]} points is not positive definite with jitter 1e-8"
        )
    out = []
    for field in (0, 1):
        z = stream(seed, field).standard_normal((unique.shape[0], n_samples))
        out.append((chol @ z).T[:, inverse])
    return out[0], out[1]


def standardized_vector(grid: FieldGrid, mask=None) -> np.ndarray:
    """``Y = (xi, eta, sqrt3 grad xi, sqrt3 grad eta)`` at grid nodes, shape ``(n, 8)``."""
    if grid.dim != 3 or grid.eta is None:
        raise ValueError("the standardized vector needs a complex 3D grid")
    sel = (lambda a: a[mask]) if mask is not None else (lambda a: a.reshape(-1, *a.shape[3:]))
    s3 = math.sqrt(3.0)
    return np.column_stack([sel(grid.xi), sel(grid.eta),
                            s3 * sel(grid.grad_xi), s3 * sel(grid.grad_eta)])


def _chaos_terms(q: int, convention: str):
    if q == 1:
        return chaos_multi_indices(2, convention)
    # the ledger grouping, so "paper" keeps its ordered-pair double count
    from .ledger import i4_groups

    out = []
    for members in i4_groups(convention).values():
        for coef, monomial in members:
            alpha = [0] * 8
            for comp, order in monomial:
                alpha[comp] = order
            out.append((tuple(alpha), coef))
    return out


def chaos_projection(grid: FieldGrid, q: int, R: float, convention: str = "exact") -> float:
    """Riemann sum of the chaos component ``I_{2q}(B_R)``.

    ``sum_alpha c_alpha sum_{|x| <= R} H_alpha(Y(x)) h^3`` over grid nodes
    in the ball. ``convention="exact"`` uses the true coefficients, for
    which the second chaos reduces to a boundary term; ``"paper"`` uses the
    published ones.
    """
    q = check_nonneg_int(q, "q")
    if q not in (1, 2):
        raise ValueError("chaos projections are implemented for q in {1, 2}")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    R = check_positive(R, "R")
    if not grid.covers_ball(R):
        raise DomainError(f"grid does not cover the ball of radius {R}")
    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    mask = sum(m * m for m in mesh) <= R * R
    y = standardized_vector(grid, mask)
    total = np.zeros(y.shape[0])
    for alpha, c in _chaos_terms(q, convention):
        total = total + float(c) * multi_hermite(alpha, y)
    return float(total.sum()) * grid.spacing**3 / (2.0 * math.pi)
