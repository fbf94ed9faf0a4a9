import math

import numpy as np
import pytest

from befilter.spectral_nse import (
    ForcedTaylorGreen,
    NSERun,
    SpectralGrid,
    be_nse_step,
    discrete_energy,
    energy_ledger,
    filter_step_nse,
    forced_tg_problem,
    leray_project,
    nonlinear_term,
    one_leg_nse_step,
    pressure_from_momentum,
    random_solenoidal,
    read_snapshot,
    run_nse_constant,
    taylor_green_exact,
    tg_shape,
    write_snapshot,
)
from befilter.stepper import SolverFailure


@pytest.fixture(scope="module")
def grid():
    return SpectralGrid(32, nu=0.1)


def single_mode(grid, k, vec):
    """Coefficients of vec * cos(k.x)."""
    phase = k[0] * grid.x + k[1] * grid.y
    return grid.fft(np.stack([vec[0] * np.cos(phase), vec[1] * np.cos(phase)]))


@pytest.mark.parametrize("N,nu", [(3, 1.0), (48, 1.0), (2, 1.0), (16, 0.0), (16, -1.0)])
def test_grid_validation(N, nu):
    with pytest.raises(ValueError):
        SpectralGrid(N, nu)


def test_dealias_mask_two_thirds(grid):
    kept = np.unique(np.abs(grid.kx[grid.mask]))
    assert kept.max() == (grid.N - 1) // 3


def test_leray_examples(grid):
    along = single_mode(grid, (1, 0), (0.0, 1.0))
    np.testing.assert_allclose(leray_project(grid, along), along, atol=1e-12)
    gradient = single_mode(grid, (1, 0), (1.0, 0.0))
    assert np.abs(leray_project(grid, gradient)).max() < 1e-12


def test_leray_random_field_is_solenoidal_and_idempotent(grid):
    rng = np.random.default_rng(1)
    u = grid.fft(rng.standard_normal((2, grid.N, grid.N)))
    pu = leray_project(grid, u)
    div = np.abs(grid.divergence(pu)).max() / (np.abs(grid.k * pu).max())
    assert div <= 1e-12
    np.testing.assert_allclose(leray_project(grid, pu), pu, atol=1e-12 * np.abs(pu).max())


def test_nonlinear_term_zero(grid):
    z = np.zeros((2, grid.N, grid.N), dtype=complex)
    assert np.all(nonlinear_term(grid, z) == 0)


def test_taylor_green_convection_is_a_gradient(grid):
    u, _ = taylor_green_exact(grid, 0.0)
    conv = nonlinear_term(grid, u)
    assert np.abs(conv).max() > 1.0
    assert np.abs(leray_project(grid, conv)).max() <= 1e-12 * np.abs(conv).max()


def test_taylor_green_convection_oracle(grid):
    # u.grad u for TG equals -grad p with p = -(1/4)(cos 2x + cos 2y)
    u, p = taylor_green_exact(grid, 0.0)
    conv = grid.ifft(nonlinear_term(grid, u))
    oracle = np.stack([-0.5 * np.sin(2 * grid.x), -0.5 * np.sin(2 * grid.y)])
    np.testing.assert_allclose(conv, oracle, atol=1e-13)
    p_rec = pressure_from_momentum(grid, -nonlinear_term(grid, u))
    np.testing.assert_allclose(grid.ifft(p_rec), grid.ifft(p), atol=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_nonlinear_term_energy_neutral(grid, seed):
    u = random_solenoidal(grid, np.random.default_rng(seed), amplitude=1.0, kmax=6)
    conv = leray_project(grid, nonlinear_term(grid, u))
    assert abs(grid.inner(conv, u)) <= 1e-12 * grid.norm(u) ** 3


def test_random_solenoidal_properties(grid):
    u = random_solenoidal(grid, np.random.default_rng(3), amplitude=0.5)
    assert grid.rms(u) == pytest.approx(0.5, rel=1e-14)
    assert np.abs(grid.divergence(u)).max() < 1e-12
    phys = np.fft.ifft2(u, axes=(-2, -1))
    assert np.abs(phys.imag).max() < 1e-14


def test_taylor_green_exact_values(grid):
    u, p = taylor_green_exact(grid, 0.0)
    phys = grid.ifft(u)
    j = grid.N // 4
    np.testing.assert_allclose(phys[:, 0, j], [1.0, 0.0], atol=1e-14)
    assert 0.5 * grid.norm(u) ** 2 == pytest.approx(math.pi ** 2, rel=1e-14)
    assert np.abs(grid.divergence(u)).max() < 1e-12
    assert abs(p[0, 0]) < 1e-12
    u1, p1 = taylor_green_exact(grid, 2.0)
    assert grid.norm(u1) / grid.norm(u) == pytest.approx(math.exp(-0.4), rel=1e-14)
    assert grid.norm(p1) / grid.norm(p) == pytest.approx(math.exp(-0.8), rel=1e-14)


def test_be_step_on_taylor_green(grid):
    u0, _ = taylor_green_exact(grid, 0.0)
    dt = 0.05
    u1, p1, rep = be_nse_step(grid, u0, dt, dt)
    factor = 1 / (1 + 2 * grid.nu * dt)
    np.testing.assert_allclose(u1, factor * u0, atol=1e-12)
    _, p_shape = taylor_green_exact(grid, 0.0)
    np.testing.assert_allclose(p1, factor ** 2 * p_shape, atol=1e-10)
    assert rep.converged


def test_be_step_zero_stays_zero(grid):
    z = np.zeros((2, grid.N, grid.N), dtype=complex)
    u, p, _ = be_nse_step(grid, z, 0.1, 0.1)
    assert np.all(u == 0) and np.all(p == 0)


def test_be_step_random_field_64():
    g = SpectralGrid(64, nu=0.01)
    u0 = random_solenoidal(g, np.random.default_rng(0), amplitude=0.1)
    u, p, rep = be_nse_step(g, u0, 1e-3, 1e-3)
    assert rep.converged and rep.iterations <= 50
    assert abs(p[0, 0]) == 0.0
    assert np.abs(g.divergence(u)).max() <= 1e-12 * np.abs(g.k * u).max()


def test_be_step_reports_failure(grid):
    u0 = random_solenoidal(grid, np.random.default_rng(0), amplitude=5.0)
    with pytest.raises(SolverFailure):
        be_nse_step(grid, u0, 0.5, 0.5, max_iter=2)


def test_be_step_rejects_bad_arguments(grid):
    u0, _ = taylor_green_exact(grid, 0.0)
    with pytest.raises(ValueError):
        be_nse_step(grid, u0, 0.1, 0.0)
    with pytest.raises(ValueError):
        be_nse_step(grid, u0, 0.1, 0.1, variant="explicit")


def test_filter_step_constant_data_and_option_a(grid):
    u, _ = taylor_green_exact(grid, 0.0)
    p = np.arange(grid.N * grid.N, dtype=complex).reshape(grid.N, grid.N)
    out, p_out = filter_step_nse(u, u, u, 1.0, "A", p, 2 * p, 3 * p)
    np.testing.assert_allclose(out, u, atol=1e-15)
    assert p_out is p
    _, p_b = filter_step_nse(u, u, u, 1.0, "B", p, p, p)
    np.testing.assert_allclose(p_b, p, atol=1e-12)
    with pytest.raises(ValueError):
        filter_step_nse(u, u, u, 1.0, "C")


def test_filters_preserve_divergence_free(grid):
    rng = np.random.default_rng(5)
    a, b, c = (random_solenoidal(grid, rng) for _ in range(3))
    out, _ = filter_step_nse(a, b, c, 1.7)
    assert np.abs(grid.divergence(out)).max() <= 1e-12 * np.abs(grid.k * out).max()


def test_one_leg_constant_zero_flow(grid):
    z = np.zeros((2, grid.N, grid.N), dtype=complex)
    u, p, rep = one_leg_nse_step(grid, z, z, 0.1, 0.1, p_n=z[0], p_nm1=z[0])
    assert np.all(u == 0) and rep.converged


def test_forced_taylor_green_constant_amplitude(grid):
    c = 0.7
    forcing = ForcedTaylorGreen(grid, F=lambda t: (c, 0.0))
    u0 = forcing.velocity(0.0)
    run = run_nse_constant(grid, u0, 0.0, 1.0, 0.1, forcing=forcing)
    for u in run.velocity:
        np.testing.assert_allclose(u, u0, atol=1e-10)
    np.testing.assert_allclose(forcing(0.3), 2 * grid.nu * c * tg_shape(grid), atol=1e-13)


def test_forced_taylor_green_reduces_to_decay(grid):
    nu = grid.nu
    forcing = ForcedTaylorGreen(grid, F=lambda t: (math.exp(-2 * nu * t),
                                                   -2 * nu * math.exp(-2 * nu * t)))
    assert np.abs(forcing(0.4)).max() < 1e-12
    np.testing.assert_allclose(forcing.velocity(0.4), taylor_green_exact(grid, 0.4)[0],
                               atol=1e-12)


def test_forced_tg_problem_wraps_the_step(grid):
    prob = forced_tg_problem(grid)
    u0 = prob.meta["y0"]
    np.testing.assert_allclose(u0, prob.exact(0.0))
    assert prob.norm(u0) == grid.norm(u0)


def test_energy_definitions(grid):
    u, _ = taylor_green_exact(grid, 0.0)
    u = u * (math.sqrt(2) / grid.norm(u))
    assert discrete_energy(grid, u, u) == pytest.approx(1.0, rel=1e-14)


def test_energy_matches_g_form(grid):
    rng = np.random.default_rng(4)
    a, b = random_solenoidal(grid, rng), random_solenoidal(grid, rng)
    uu, uv, vv = grid.inner(a, a), grid.inner(a, b), grid.inner(b, b)
    g = 1.5 * uu - 1.5 * uv + 0.5 * vv
    assert discrete_energy(grid, a, b) == pytest.approx(g, rel=1e-13)


def test_zero_numerical_dissipation_for_constant_data(grid):
    u, _ = taylor_green_exact(grid, 0.0)
    run = NSERun([0.0, 0.1, 0.2], [u, u, u], [None] * 3)
    led = energy_ledger(grid, run)
    assert led.Z[0] == 0.0 and led.D[0] > 0


@pytest.mark.parametrize("option", ["A", "B"])
def test_energy_equality_unforced(option):
    g = SpectralGrid(32, nu=0.1)
    u0 = random_solenoidal(g, np.random.default_rng(0))
    run = run_nse_constant(g, u0, 0.0, 0.2, 0.01, option=option, tol=1e-13)
    led = energy_ledger(g, run)
    assert np.all(led.D >= 0) and np.all(led.Z >= 0)
    assert led.relative_residual <= 1e-10


def test_snapshot_round_trip(tmp_path):
    g = SpectralGrid(8, nu=1.0)
    u, p = taylor_green_exact(g, 0.3)
    path = tmp_path / "snap.csv"
    write_snapshot(path, g, 0.3, u, p)
    N, t, uu, vv, pp = read_snapshot(path)
    assert N == 8 and t == 0.3
    np.testing.assert_array_equal(uu, g.ifft(u)[0])
    np.testing.assert_array_equal(vv, g.ifft(u)[1])
    np.testing.assert_array_equal(pp, g.ifft(p))
    first = path.read_text().splitlines()[:2]
    assert first == ["# N=8 t=0.3 components=u,v,p", "i,j,u,v,p"]
