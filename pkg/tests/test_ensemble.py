import numpy as np
import pytest

from savanna_pdmp.core import IntensitySpec, figure_params
from savanna_pdmp.ensemble import (
    DensityGrid,
    boundary_stationary_1d,
    l1_distance,
    l1_distance_1d,
    propagate,
    read_grid,
    read_report,
    run_ensemble,
    stationary_estimate,
    write_grid,
    write_report,
)
from savanna_pdmp.errors import DomainError, GridMismatch
from savanna_pdmp.flow import flow


def test_single_particle_at_time_zero(params):
    rep = run_ensemble(params, (0.1, 0.2), n=1, times=[0.0], grid=(64, 64))
    g = rep.grids[0]
    masses = g.cell_masses()
    assert masses.sum() == pytest.approx(1.0)
    assert masses[int(0.2 * 64), int(0.1 * 64)] == pytest.approx(1.0)


def test_grassless_start_is_all_boundary(params):
    rep = run_ensemble(params, (0.5, 0.0), n=1000, times=[0.0, 10.0, 100.0], grid=(16, 16))
    for grid, b in zip(rep.grids, rep.boundary_mass):
        assert b == 1.0
        assert grid.mass() == 0.0
    assert rep.boundary_g0 == [1.0, 1.0, 1.0]


def test_mass_plus_boundary_is_one(params):
    rep = run_ensemble(params, (0.1, 0.2), n=5000, times=[1.0, 20.0], grid=(32, 32))
    for grid in rep.grids:
        assert grid.mass() + grid.boundary_mass == pytest.approx(1.0, abs=1e-12)


def test_l1_examples():
    a = DensityGrid.point(2, 2, (0.25, 0.25))
    b = DensityGrid.point(2, 2, (0.75, 0.75))
    u = DensityGrid.uniform(2, 2)
    assert l1_distance(a, a) == 0.0
    assert l1_distance(a, b) == pytest.approx(2.0)
    assert l1_distance(a, u) == pytest.approx(1.5)
    with pytest.raises(GridMismatch):
        l1_distance(a, DensityGrid.uniform(4, 4))


def test_seed_stability(params):
    a = run_ensemble(params, (0.1, 0.2), n=2000, times=[5.0, 30.0], grid=(16, 16), seed=3)
    b = run_ensemble(params, (0.1, 0.2), n=2000, times=[5.0, 30.0], grid=(16, 16), seed=3)
    for x, y in zip(a.grids, b.grids):
        assert np.array_equal(x.values, y.values)


def test_chunking_does_not_change_samples(params):
    w0, g0 = np.full(300, 0.1), np.full(300, 0.2)
    W, G = propagate(params, w0, g0, [3.0, 25.0], seed=5)
    W1, G1 = propagate(params, w0[:120], g0[:120], [3.0, 25.0], seed=5, indices=np.arange(120))
    W2, G2 = propagate(params, w0[120:], g0[120:], [3.0, 25.0], seed=5, indices=np.arange(120, 300))
    assert np.array_equal(W, np.hstack([W1, W2]))
    assert np.array_equal(G, np.hstack([G1, G2]))


def test_workers_identical(params):
    a = run_ensemble(params, (0.1, 0.2), n=1500, times=[20.0], grid=(16, 16), workers=1)
    b = run_ensemble(params, (0.1, 0.2), n=1500, times=[20.0], grid=(16, 16), workers=2)
    assert np.array_equal(a.grids[0].values, b.grids[0].values)


def test_no_fire_ensemble_follows_flow():
    p = figure_params(intensity=IntensitySpec.none())
    W, G = propagate(p, np.array([0.3]), np.array([0.4]), [7.0], seed=1)
    ref = flow(p, (0.3, 0.4), 7.0).state
    assert abs(W[0, 0] - ref.w) < 1e-6
    assert abs(G[0, 0] - ref.g) < 1e-6


def test_grid_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = DensityGrid.from_samples(rng.random(500), rng.random(500), 8, 5)
    write_grid(tmp_path / "g.txt", g)
    back = read_grid(tmp_path / "g.txt")
    assert np.array_equal(back.values, g.values)


def test_report_round_trip(params, tmp_path):
    rep = run_ensemble(params, (0.1, 0.2), n=500, times=[0.0, 4.0], grid=(8, 8))
    write_report(tmp_path, rep)
    back = read_report(tmp_path)
    assert back.times == rep.times
    assert back.n == rep.n and back.seed == rep.seed
    for x, y in zip(back.grids, rep.grids):
        assert np.array_equal(x.values, y.values)
    assert back.boundary_mass == rep.boundary_mass


def test_callable_initial(params):
    def sampler(rng, n):
        return rng.uniform(0.2, 0.3, n), rng.uniform(0.6, 0.7, n)

    rep = run_ensemble(params, sampler, n=400, times=[0.0], grid=(10, 10))
    m = rep.grids[0].cell_masses()
    assert m[6, 2] == pytest.approx(1.0)


def test_rare_fires_concentrate_near_woodland():
    p = figure_params(intensity=IntensitySpec.power(c=1e-6))
    est = stationary_estimate(p, burn_in=200.0, n_samples=3000, grid=(20, 20))
    w, g = est.samples
    assert np.mean((w > 0.9) & (g < 0.1)) > 0.99


def test_both_modes_report_distance(params):
    est = stationary_estimate(params, burn_in=50.0, n_samples=4000, grid=(16, 16), mode="both", n_chains=40)
    assert est.alternative is not None
    assert 0.0 <= est.cross_l1 <= 2.0


def test_boundary_law_without_grass_loss_is_full_grass():
    p = figure_params(M_g=1e-9)
    d = boundary_stationary_1d(p, burn_in=100.0, n_samples=2000)
    assert d.mass() == pytest.approx(1.0)
    assert d.mean() > 0.99


def test_boundary_law_rejects_grassless_start(params):
    with pytest.raises(DomainError):
        boundary_stationary_1d(params, g0=0.0)


def test_boundary_law_reproducible(params):
    a = boundary_stationary_1d(params, burn_in=50.0, n_samples=3000, seed=4)
    b = boundary_stationary_1d(params, burn_in=50.0, n_samples=3000, seed=4)
    assert l1_distance_1d(a, b) == 0.0
