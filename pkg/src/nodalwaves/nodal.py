"""Nodal set extraction and Monte Carlo nodal statistics.

3D: the common zero set of ``xi`` and ``eta`` inside ``B_R``. Every cube
cell is split into six Kuhn tetrahedra; on each tetrahedron both fields are
linear, so their common zero set is a single segment (or empty), clipped to
the tetrahedron and then to the ball.

2D: the zero set of ``xi`` in ``[-R, R]^2`` by marching squares.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, check_positive
from .config import ExperimentConfig
from .stats import RunningMoments
from .wavefield import FieldGrid, sample_ensemble, sample_grid

DEGENERATE_TOL = 1e-12
# Kuhn split of the unit cube: one tetrahedron per axis permutation
_KUHN = []
for _perm in itertools.permutations(range(3)):
    _path = [np.zeros(3, dtype=int)]
    for _axis in _perm:
        _nxt = _path[-1].copy()
        _nxt[_axis] = 1
        _path.append(_nxt)
    _KUHN.append(np.array(_path))
KUHN_TETRAHEDRA = np.array(_KUHN)  # (6, 4, 3) vertex offsets


@dataclass
class NodalCurve:
    """Polyline pieces of a nodal set.

    ``segments`` has shape ``(n, 2, dim)``. ``cells_skipped`` counts
    degenerate cells left out; ``cells_examined`` counts the cells that had a
    sign change in every field.
    """

    segments: np.ndarray
    cells_skipped: int = 0
    cells_examined: int = 0

    @property
    def segment_lengths(self) -> np.ndarray:
        if self.segments.size == 0:
            return np.zeros(0)
        return np.linalg.norm(self.segments[:, 1] - self.segments[:, 0], axis=1)

    @property
    def total_length(self) -> float:
        return math.fsum(self.segment_lengths)

    def to_obj(self, path) -> None:
        """Write ``v x y z`` vertices and ``l i j`` line records."""
        lines = []
        for a, b in self.segments:
            for p in (a, b):
                p3 = list(p) + [0.0] * (3 - len(p))
                lines.append("v {:.12g} {:.12g} {:.12g}".format(*p3))
        for i in range(len(self.segments)):
            lines.append(f"l {2 * i + 1} {2 * i + 2}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))


NUDGE = 1e-10
FEASIBILITY_TOL = 1e-12


def _nudge_zeros(v: np.ndarray) -> np.ndarray:
    # exact node zeros move the zero set off shared faces and edges by a
    # relative 1e-10, so a piece is owned by the cells on one side only
    scale = float(np.max(np.abs(v))) if v.size else 0.0
    return np.where(v == 0.0, NUDGE * (scale if scale > 0 else 1.0), v)


def _dedupe(p0: np.ndarray, p1: np.ndarray, h: float):
    """Drop repeated segments produced by tetrahedra sharing a face or edge."""
    if p0.shape[0] < 2:
        return p0, p1
    q0 = np.round(p0 / (1e-7 * h)).astype(np.int64)
    q1 = np.round(p1 / (1e-7 * h)).astype(np.int64)
    # orientation-free key: lexicographically smaller endpoint first
    diff = q0 - q1
    first = np.argmax(diff != 0, axis=1)
    swap = diff[np.arange(diff.shape[0]), first] > 0
    key = np.where(swap[:, None], np.concatenate([q1, q0], axis=1),
                   np.concatenate([q0, q1], axis=1))
    _, keep = np.unique(key, axis=0, return_index=True)
    keep = np.sort(keep)
    return p0[keep], p1[keep]


def _clip_to_ball(p0: np.ndarray, p1: np.ndarray, R: float):
    d = p1 - p0
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", p0, d)
    c = np.einsum("ij,ij->i", p0, p0) - R * R
    disc = b * b - 4.0 * a * c
    ok = (disc > 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    safe_a = np.where(a > 0, a, 1.0)
    lo = np.clip((-b - sq) / (2.0 * safe_a), 0.0, 1.0)
    hi = np.clip((-b + sq) / (2.0 * safe_a), 0.0, 1.0)
    keep = ok & (hi > lo)
    q0 = p0 + lo[:, None] * d
    q1 = p0 + hi[:, None] * d
    return q0[keep], q1[keep]


def _clip_to_box(p0: np.ndarray, p1: np.ndarray, R: float):
    """Liang-Barsky clipping to ``[-R, R]^dim``."""
    d = p1 - p0
    lo = np.zeros(p0.shape[0])
    hi = np.ones(p0.shape[0])
    keep = np.ones(p0.shape[0], dtype=bool)
    for k in range(p0.shape[1]):
        dk = d[:, k]
        moving = dk != 0
        inside = (p0[:, k] >= -R) & (p0[:, k] <= R)
        keep &= moving | inside
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (-R - p0[:, k]) / dk
            t2 = (R - p0[:, k]) / dk
        tmin = np.where(moving, np.minimum(t1, t2), -np.inf)
        tmax = np.where(moving, np.maximum(t1, t2), np.inf)
        lo = np.maximum(lo, tmin)
        hi = np.minimum(hi, tmax)
    keep &= hi > lo
    return (p0 + lo[:, None] * d)[keep], (p0 + hi[:, None] * d)[keep]


def _tetra_segments(P: np.ndarray, f: np.ndarray, g: np.ndarray):
    """Common zero segment of the linear interpolants on each tetrahedron.

    ``P`` is ``(T, 4, 3)``, ``f`` and ``g`` are ``(T, 4)``. Returns endpoint
    arrays for the tetrahedra with a segment and the count of degenerate ones.
    """
    fs = f / np.max(np.abs(f), axis=1, keepdims=True)
    gs = g / np.max(np.abs(g), axis=1, keepdims=True)
    M = np.stack([fs, gs, np.ones_like(fs)], axis=1)  # (T, 3, 4)
    # null direction of M by cofactors
    d = np.stack([(-1) ** a * np.linalg.det(np.delete(M, a, axis=2)) for a in range(4)], axis=1)
    norm_d = np.linalg.norm(d, axis=1)
    degenerate = norm_d < DEGENERATE_TOL
    gram = np.einsum("tij,tkj->tik", M, M)
    rhs = np.zeros((M.shape[0], 3))
    rhs[:, 2] = 1.0
    gram = np.where(degenerate[:, None, None], np.eye(3), gram)
    lam0 = np.einsum("tij,ti->tj", M, np.linalg.solve(gram, rhs[..., None])[..., 0])
    safe = np.where(np.abs(d) > 0, d, 1.0)
    bound = -lam0 / safe
    t_lo = np.where(d > 0, bound, -np.inf).max(axis=1)
    t_hi = np.where(d < 0, bound, np.inf).min(axis=1)
    scale_d = np.maximum(norm_d, DEGENERATE_TOL)[:, None]
    flat_dir = np.abs(d) <= FEASIBILITY_TOL * scale_d
    feasible = np.all(~flat_dir | (lam0 >= -FEASIBILITY_TOL), axis=1)
    bound = np.where(flat_dir, np.where(d > 0, -np.inf, np.inf), bound)
    ok = ~degenerate & feasible & (t_hi > t_lo)
    lam_a = lam0[ok] + t_lo[ok, None] * d[ok]
    lam_b = lam0[ok] + t_hi[ok, None] * d[ok]
    p0 = np.einsum("ta,tak->tk", lam_a, P[ok])
    p1 = np.einsum("ta,tak->tk", lam_b, P[ok])
    return p0, p1, int(degenerate.sum())


def extract_nodal_curve_3d(grid: FieldGrid, R: float, domain: str = "ball") -> NodalCurve:
    """Common zero set of ``xi`` and ``eta`` clipped to ``B_R`` (or the cube).

    Cells where either field is ``~0`` throughout, or where the two linear
    gradients are parallel, are skipped and tallied in ``cells_skipped``.
    """
    R = check_positive(R, "R")
    if grid.dim != 3 or grid.eta is None:
        raise DomainError("3D extraction needs a complex 3D grid")
    if domain not in ("ball", "cube"):
        raise ValueError("domain must be 'ball' or 'cube'")
    if not grid.covers_ball(R):
        raise DomainError(f"grid does not cover the domain of radius {R}")
    h = grid.spacing
    axes = grid.axes()
    # cells whose closure meets the domain
    lo_idx = [np.arange(n - 1) for n in grid.shape]
    mesh = np.meshgrid(*lo_idx, indexing="ij")
    corner = np.stack([axes[k][mesh[k]] for k in range(3)], axis=-1)
    nearest = np.clip(0.0, corner, corner + h)
    near = np.linalg.norm(nearest, axis=-1) <= R if domain == "ball" else np.all(
        np.abs(nearest) <= R, axis=-1)
    xi = _nudge_zeros(grid.xi)
    eta = _nudge_zeros(grid.eta)
    # sign change of both fields within the cell
    def cell_corners(a):
        return np.stack([a[i:i + a.shape[0] - 1, j:j + a.shape[1] - 1, k:k + a.shape[2] - 1]
                         for i in (0, 1) for j in (0, 1) for k in (0, 1)], axis=-1)

    cx, ce = cell_corners(xi), cell_corners(eta)
    flat_x = np.max(np.abs(cx), axis=-1) < DEGENERATE_TOL
    flat_e = np.max(np.abs(ce), axis=-1) < DEGENERATE_TOL
    change = (cx.min(-1) < 0) & (cx.max(-1) > 0) & (ce.min(-1) < 0) & (ce.max(-1) > 0)
    skipped = int(np.sum(near & (flat_x | flat_e)))
    active = near & change & ~flat_x & ~flat_e
    idx = np.argwhere(active)  # C order: deterministic cell order
    if idx.size == 0:
        return NodalCurve(np.zeros((0, 2, 3)), skipped, 0)
    verts = idx[:, None, None, :] + KUHN_TETRAHEDRA[None, :, :, :]  # (C, 6, 4, 3)
    verts = verts.reshape(-1, 4, 3)
    f = xi[verts[..., 0], verts[..., 1], verts[..., 2]]
    g = eta[verts[..., 0], verts[..., 1], verts[..., 2]]
    both = ((f.min(1) < 0) & (f.max(1) > 0) & (g.min(1) < 0) & (g.max(1) > 0))
    P = grid.origin[None, None, :] + h * verts[both].astype(float)
    p0, p1, degenerate = _tetra_segments(P, f[both], g[both])
    p0, p1 = _dedupe(p0, p1, h)
    if domain == "ball":
        p0, p1 = _clip_to_ball(p0, p1, R)
    else:
        p0, p1 = _clip_to_box(p0, p1, R)
    return NodalCurve(np.stack([p0, p1], axis=1), skipped + degenerate, int(idx.shape[0]))


_SQUARE_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))  # bottom, right, top, left


def extract_nodal_lines_2d(grid: FieldGrid, R: float, center_values=None) -> NodalCurve:
    """Zero set of ``grid.xi`` in ``[-R, R]^2`` by marching squares.

    Crossings are placed by linear interpolation along cell edges. In saddle
    cells the sign at the cell center decides the pairing: ``center_values``
    (shape ``(nx - 1, ny - 1)``) if given, else the mean of the corners.
    """
    R = check_positive(R, "R")
    if grid.dim != 2:
        raise DomainError("2D extraction needs a 2D grid")
    if not grid.covers_ball(R):
        raise DomainError(f"grid does not cover the square of half-side {R}")
    v = _nudge_zeros(grid.xi)
    h = grid.spacing
    ax = grid.axes()
    nx, ny = grid.shape
    # corners counterclockwise: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
    c = np.stack([v[:-1, :-1], v[1:, :-1], v[1:, 1:], v[:-1, 1:]], axis=-1)
    X0, Y0 = np.meshgrid(ax[0][:-1], ax[1][:-1], indexing="ij")
    offs = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    cpos = np.stack([X0, Y0], axis=-1)[..., None, :] + h * offs  # (nx-1, ny-1, 4, 2)
    flat = np.max(np.abs(c), axis=-1) < DEGENERATE_TOL
    pos = c > 0
    n_pos = pos.sum(-1)
    active = (n_pos > 0) & (n_pos < 4) & ~flat
    idx = np.argwhere(active)
    if idx.size == 0:
        return NodalCurve(np.zeros((0, 2, 2)), int(flat.sum()), 0)
    cc = c[active]
    cp = cpos[active]
    crosses = []
    points = []
    for a, b in _SQUARE_EDGES:
        va, vb = cc[:, a], cc[:, b]
        cross = (va > 0) != (vb > 0)
        t = np.where(cross, va / np.where(cross, va - vb, 1.0), 0.0)
        crosses.append(cross)
        points.append(cp[:, a] + t[:, None] * (cp[:, b] - cp[:, a]))
    crosses = np.stack(crosses, axis=1)  # (C, 4)
    points = np.stack(points, axis=1)  # (C, 4, 2)
    count = crosses.sum(1)
    seg0, seg1 = [], []
    two = count == 2
    if np.any(two):
        order = np.argsort(~crosses[two], axis=1, kind="stable")[:, :2]
        rows = np.nonzero(two)[0]
        seg0.append(points[rows, order[:, 0]])
        seg1.append(points[rows, order[:, 1]])
    four = count == 4
    if np.any(four):
        rows = np.nonzero(four)[0]
        if center_values is not None:
            center = np.asarray(center_values, dtype=float)[tuple(idx[rows].T)]
        else:
            center = cc[rows].mean(axis=1)
        # center agrees with corner 0: corners 1 and 3 are cut off, else 0 and 2
        same = (center > 0) == (cc[rows, 0] > 0)
        e_a = np.where(same[:, None], [[0, 2]], [[3, 1]])
        e_b = np.where(same[:, None], [[1, 3]], [[0, 2]])
        for k in range(2):
            seg0.append(points[rows, e_a[:, k]])
            seg1.append(points[rows, e_b[:, k]])
    p0 = np.concatenate(seg0)
    p1 = np.concatenate(seg1)
    p0, p1 = _clip_to_box(p0, p1, R)
    return NodalCurve(np.stack([p0, p1], axis=1), int(flat.sum()), int(idx.shape[0]))


@dataclass
class NodalStatistics:
    """Replicate statistics of the nodal length in one domain.

    ``volume`` is the ball volume (3D) or the square area (2D).
    """

    R: float
    dim: int
    n_replicates: int
    volume: float
    mean_length: float
    variance: float
    stderr_mean: float
    stderr_variance: float
    cells_skipped: int = 0
    cells_examined: int = 0
    lengths: list[float] = field(default_factory=list, repr=False)

    @property
    def mean_per_volume(self) -> float:
        return self.mean_length / self.volume

    @property
    def variance_per_volume(self) -> float:
        return self.variance / self.volume


def replicate_lengths(config: ExperimentConfig, replicate: int):
    """Nodal lengths of one replicate at every configured radius.

    A single grid covering the largest radius is sampled from streams keyed by
    ``(seed, replicate)``; each radius clips the same field.
    """
    xi_ens, eta_ens = sample_ensemble(config.dim, config.n_waves, config.seed, replicate)
    Rmax = config.radii[-1]
    if config.dim == 3:
        grid = sample_grid((xi_ens, eta_ens), Rmax, config.grid_spacing)
        curves = [extract_nodal_curve_3d(grid, R) for R in config.radii]
    else:
        grid = sample_grid((xi_ens, None), Rmax, config.grid_spacing)
        curves = [extract_nodal_lines_2d(grid, R) for R in config.radii]
    return [(c.total_length, c.cells_skipped, c.cells_examined) for c in curves]


def mc_nodal_statistics(config: ExperimentConfig, threads: int = 1) -> list[NodalStatistics]:
    """Monte Carlo nodal-length statistics, one record per configured radius.

    Replicates run independently (optionally in a thread pool) and are
    reduced in replicate order, so results do not depend on ``threads``.
    """
    reps = range(config.replicates)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: replicate_lengths(config, r), reps))
    else:
        results = [replicate_lengths(config, r) for r in reps]
    out = []
    for k, R in enumerate(config.radii):
        lengths = [res[k][0] for res in results]
        acc = RunningMoments()
        for x in lengths:
            acc.push(x)
        out.append(NodalStatistics(
            R=R, dim=config.dim, n_replicates=acc.n, volume=config.domain_volume(R),
            mean_length=acc.mean, variance=acc.variance if acc.n > 1 else 0.0,
            stderr_mean=acc.stderr_mean if acc.n > 1 else math.nan,
            stderr_variance=acc.stderr_variance if acc.n > 1 else math.nan,
            cells_skipped=sum(res[k][1] for res in results),
            cells_examined=sum(res[k][2] for res in results),
            lengths=lengths,
        ))
    return out
