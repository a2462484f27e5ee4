import math

import numpy as np
import pytest

import nodalwaves.wavefield as wf
from nodalwaves._validation import DomainError
from nodalwaves.chaos import chaos_multi_indices
from nodalwaves.kernels import multi_hermite
from nodalwaves.wavefield import (ConditioningError, FieldGrid, PlaneWaveEnsemble,
                                  chaos_projection, eval_field_and_gradient,
                                  exact_gaussian_sample, grid_from_functions, sample_ensemble,
                                  sample_grid)

J0_ROOT = 2.404825557695773


def test_directions_are_unit_and_deterministic():
    for dim in (2, 3):
        a, b = sample_ensemble(dim, 64, seed=3)
        norms = np.linalg.norm(a.directions, axis=1)
        assert np.all(np.abs(norms - 1) <= 1e-12)
        assert a.amplitude == pytest.approx(math.sqrt(2 / 64))
        a2, _ = sample_ensemble(dim, 64, seed=3)
        np.testing.assert_array_equal(a.directions, a2.directions)
        np.testing.assert_array_equal(a.phases, a2.phases)
        assert not np.array_equal(a.phases, b.phases)
        assert np.all((a.phases >= 0) & (a.phases < 2 * math.pi))


def test_sample_ensemble_validation():
    with pytest.raises(ValueError):
        sample_ensemble(4, 10)
    with pytest.raises(ValueError):
        sample_ensemble(3, 0)


def _single_wave(direction):
    d = np.array([direction], float)
    return PlaneWaveEnsemble(len(direction), d, np.zeros(1), math.sqrt(2.0), 0)


def test_single_wave_examples():
    ens = _single_wave([1.0, 0.0, 0.0])
    value, grad = eval_field_and_gradient(ens, np.zeros(3))
    assert value == pytest.approx(math.sqrt(2))
    np.testing.assert_allclose(grad, 0.0, atol=1e-15)
    value, grad = eval_field_and_gradient(ens, np.array([math.pi / 2, 0, 0]))
    assert value == pytest.approx(0, abs=1e-15)
    np.testing.assert_allclose(grad, [-math.sqrt(2), 0, 0], atol=1e-15)


def test_gradient_matches_finite_differences():
    ens, _ = sample_ensemble(3, 256, seed=1)
    rng = np.random.default_rng(0)
    x = rng.uniform(-5, 5, (10, 3))
    h = 1e-5
    _, grad = eval_field_and_gradient(ens, x)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (eval_field_and_gradient(ens, x + e)[0] - eval_field_and_gradient(ens, x - e)[0])
        np.testing.assert_allclose(grad[:, k], fd / (2 * h), atol=1e-8)


def test_helmholtz_on_grid():
    ens, _ = sample_ensemble(3, 256, seed=2)
    errors = []
    for h in (0.1, 0.05):
        x = np.array([[0.3, -0.2, 0.5]])
        f0 = eval_field_and_gradient(ens, x)[0]
        lap = -6 * f0
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            lap = lap + eval_field_and_gradient(ens, x + e)[0] + eval_field_and_gradient(ens, x - e)[0]
        errors.append(abs(float(lap[0] / h**2 + f0[0])))
    assert errors[1] < errors[0] / 3
    assert errors[1] < 1e-2


def test_grid_matches_direct_evaluation_and_threads():
    xi, eta = sample_ensemble(3, 256, seed=4)
    g1 = sample_grid((xi, eta), 3.0, threads=1)
    g3 = sample_grid((xi, eta), 3.0, threads=3)
    for name in ("xi", "grad_xi", "eta", "grad_eta"):
        assert np.array_equal(getattr(g1, name), getattr(g3, name))
    v, g = eval_field_and_gradient(xi, g1.points())
    np.testing.assert_allclose(g1.xi.ravel(), v, atol=1e-12)
    np.testing.assert_allclose(g1.grad_xi.reshape(-1, 3), g, atol=1e-12)
    assert g1.covers_ball(3.0)


def test_dump_load_roundtrip(tmp_path):
    xi, eta = sample_ensemble(3, 32, seed=5)
    grid = sample_grid((xi, eta), 1.0, 0.4)
    path, sidecar = grid.dump(tmp_path / "grid.bin")
    assert path.stat().st_size == 8 * (grid.xi.size * 8)
    assert sidecar.exists()
    back = FieldGrid.load(path)
    for name in ("xi", "grad_xi", "eta", "grad_eta"):
        assert np.array_equal(getattr(back, name), getattr(grid, name))
    assert back.spacing == grid.spacing and back.shape == grid.shape


def _lag_products(dim, lag, n=2000, base=None):
    base = np.zeros(dim) if base is None else base
    e = np.zeros(dim)
    e[0] = lag
    vals = []
    for rep in range(n):
        ens, _ = sample_ensemble(dim, 256, seed=10, replicate=rep)
        v = eval_field_and_gradient(ens, np.stack([base, base + e]))[0]
        vals.append(v[0] * v[1])
    vals = np.array(vals)
    return vals.mean(), vals.std() / math.sqrt(n)


def test_covariance_zero_at_sinc_root_3d():
    mean, se = _lag_products(3, math.pi)
    assert abs(mean) <= 3 * se


def test_covariance_zero_at_j0_root_2d():
    mean, se = _lag_products(2, J0_ROOT)
    assert abs(mean) <= 3 * se


def test_xi_and_eta_uncorrelated():
    vals = []
    x = np.array([[0.4, 1.0, -0.3]])
    for rep in range(2000):
        xi, eta = sample_ensemble(3, 256, seed=12, replicate=rep)
        vals.append(eval_field_and_gradient(xi, x)[0][0] * eval_field_and_gradient(eta, x)[0][0])
    vals = np.array(vals)
    assert abs(vals.mean()) <= 3 * vals.std() / math.sqrt(vals.size)


def test_stationarity():
    rng = np.random.default_rng(1)
    bases = rng.uniform(-3, 3, (3, 3))
    for lag in (0.5, 1.5, 3.0):
        stats = [_lag_products(3, lag, n=800, base=b) for b in bases]
        means = np.array([s[0] for s in stats])
        ses = np.array([s[1] for s in stats])
        for i in range(3):
            for j in range(i + 1, 3):
                assert abs(means[i] - means[j]) <= 3 * math.hypot(ses[i], ses[j])


def test_exact_sampler_examples():
    pts = np.array([[0.0, 0, 0], [math.pi, 0, 0], [0.0, 0, 0]])
    xi, eta = exact_gaussian_sample(pts, 3, seed=0, n_samples=100_000)
    assert xi.shape == (100_000, 3)
    np.testing.assert_array_equal(xi[:, 0], xi[:, 2])
    prod = xi[:, 0] * xi[:, 1]
    assert abs(prod.mean()) <= 3 * prod.std() / math.sqrt(prod.size)
    sq = xi[:, 0] ** 2
    assert abs(sq.mean() - 1) <= 3 * sq.std() / math.sqrt(sq.size)
    cross = xi[:, 0] * eta[:, 0]
    assert abs(cross.mean()) <= 3 * cross.std() / math.sqrt(cross.size)


def test_exact_sampler_limits(monkeypatch):
    with pytest.raises(ValueError):
        exact_gaussian_sample(np.zeros((2001, 3)) + np.arange(2001)[:, None], 3)
    monkeypatch.setattr(wf, "covariance_function", lambda dim: lambda d: 1.0 - d)
    with pytest.raises(ConditioningError):
        exact_gaussian_sample(np.array([[0.0, 0, 0], [3.0, 0, 0], [0, 3.0, 0]]), 3)


@pytest.fixture(scope="module")
def covariance_pair():
    rng = np.random.default_rng(21)
    pts = rng.uniform(-2, 2, (50, 3))
    n = 10_000
    pw = np.empty((n, 50))
    for rep in range(n):
        ens, _ = sample_ensemble(3, 256, seed=22, replicate=rep)
        pw[rep] = eval_field_and_gradient(ens, pts)[0]
    ex, _ = exact_gaussian_sample(pts, 3, seed=23, n_samples=n)
    out = []
    for a in (pw, ex):
        prod = a[:, :, None] * a[:, None, :]
        out.append((prod.mean(0), prod.std(0) / math.sqrt(n)))
    (c_pw, s_pw), (c_ex, s_ex) = out
    iu = np.triu_indices(50)
    return np.abs(c_pw - c_ex)[iu], np.hypot(s_pw, s_ex)[iu]


def test_plane_wave_matches_exact_oracle_entrywise(covariance_pair):
    diff, se = covariance_pair
    bad = np.flatnonzero(diff > np.maximum(3 * se, 0.02))
    assert bad.size == 0, [(float(diff[i]), float(diff[i] / se[i])) for i in bad]


def test_plane_wave_matches_exact_oracle_familywise(covariance_pair):
    # Bonferroni over the 1275 distinct entries at a 0.3% family-wise level
    from scipy.stats import norm
    diff, se = covariance_pair
    z = norm.isf(0.0027 / 2 / diff.size)
    assert np.all(diff <= np.maximum(z * se, 0.02))


def test_chaos_projection_domain_and_order_checks():
    xi, eta = sample_ensemble(3, 32, seed=1)
    grid = sample_grid((xi, eta), 2.0)
    with pytest.raises(DomainError):
        chaos_projection(grid, 2, 3.0)
    with pytest.raises(ValueError):
        chaos_projection(grid, 3, 1.0)
    with pytest.raises(ValueError):
        chaos_projection(grid, 1, 1.0, convention="other")


def test_chaos_projection_constant_fields():
    y0 = np.array([0.3, -0.5, 0.2, 0.1, -0.4, 0.6, 0.0, 0.25])
    s3 = math.sqrt(3)
    grid = grid_from_functions(
        4.0, 0.25, 3,
        xi=lambda p: np.full(len(p), y0[0]), eta=lambda p: np.full(len(p), y0[1]),
        grad_xi=lambda p: np.tile(y0[2:5] / s3, (len(p), 1)),
        grad_eta=lambda p: np.tile(y0[5:8] / s3, (len(p), 1)))
    poly = sum(float(c) * multi_hermite(a, y0[None, :])[0] for a, c in chaos_multi_indices(2))
    volume = 4 * math.pi * 64 / 3
    value = chaos_projection(grid, 1, 4.0)
    assert value == pytest.approx(poly * volume / (2 * math.pi), rel=0.02)
