"""Brownian coupling grid, strong-error studies and sampling diagnostics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from metrolangevin import (BrownianIncrementGrid, ConvergenceStudyConfig,
                           InertialModel, ModelError, PhaseState,
                           QuadratureCdf, RngStreamSpec, StudyAbort,
                           coarse_increment, coarse_increments,
                           coarse_ou_integral, coarse_ou_integrals,
                           equilibrium_sample_1d, ergodicity_study, fit_order,
                           generate_brownian_grid, ks_distance,
                           make_quadratic_model, make_quartic_model,
                           make_zero_model, ou_variance, reference_trajectory,
                           rejection_rate_study, strong_error_study,
                           trajectory_study)

QUARTIC = make_quartic_model(beta=1.0)
INERTIAL = InertialModel(make_quartic_model(beta=1.0), gamma=1.0)


def spec(seed=0, index=0):
    return RngStreamSpec(seed, index, "brownian")


def zero_grid(horizon, h_fine, n=1):
    inc = np.zeros((round(horizon / h_fine), n))
    inc.setflags(write=False)
    return BrownianIncrementGrid(horizon, h_fine, inc)


# ------------------------------------------------------------------ the grid

def test_grid_is_deterministic_and_frozen():
    a = generate_brownian_grid(1.0, 2.0 ** -8, 2, spec(3))
    b = generate_brownian_grid(1.0, 2.0 ** -8, 2, spec(3))
    assert np.array_equal(a.increments, b.increments)
    assert a.n_rows == 256 and a.dimension == 2
    assert not a.increments.flags.writeable
    c = generate_brownian_grid(1.0, 2.0 ** -8, 2, spec(4))
    assert not np.array_equal(a.increments, c.increments)


def test_grid_terminal_variance_matches_horizon():
    # 1e4 independent columns stand in for 1e4 grids
    grid = generate_brownian_grid(1.0, 2.0 ** -6, 10_000, spec(7))
    terminal = np.sum(grid.increments, axis=0)
    assert np.var(terminal) == pytest.approx(1.0, rel=0.05)


def test_grid_rejects_non_integral_ratio():
    with pytest.raises(ValueError):
        generate_brownian_grid(1.0, 0.3, 1, spec())
    with pytest.raises(ValueError):
        generate_brownian_grid(0.0, 0.1, 1, spec())


# ------------------------------------------------------------- coarsening

def test_coarsen_by_one_is_identity():
    grid = generate_brownian_grid(1.0, 2.0 ** -5, 3, spec(11))
    assert np.array_equal(coarse_increments(grid, grid.h_fine), grid.increments)


def test_coarse_rows_telescope_to_total():
    grid = generate_brownian_grid(1.0, 2.0 ** -8, 2, spec(13))
    total = np.sum(grid.increments, axis=0)
    for h in (2.0 ** -2, 2.0 ** -5):
        assert_allclose(np.sum(coarse_increments(grid, h), axis=0), total,
                        rtol=1e-13)


def test_dyadic_nesting_is_exact():
    # rows at h are bitwise the pair sums of rows at h/2
    grid = generate_brownian_grid(1.0, 2.0 ** -10, 2, spec(17))
    for h in (2.0 ** -2, 2.0 ** -3, 2.0 ** -6):
        coarse = coarse_increments(grid, h)
        finer = coarse_increments(grid, h / 2.0)
        assert np.array_equal(coarse, finer[0::2] + finer[1::2])


def test_coarse_increment_indexing():
    grid = generate_brownian_grid(1.0, 2.0 ** -6, 1, spec(19))
    rows = coarse_increments(grid, 2.0 ** -3)
    for k in range(rows.shape[0]):
        assert np.array_equal(coarse_increment(grid, 2.0 ** -3, k), rows[k])
    with pytest.raises(IndexError):
        coarse_increment(grid, 2.0 ** -3, rows.shape[0])
    with pytest.raises(ValueError):
        coarse_increments(grid, 0.3)


# -------------------------------------------------------------- OU integrals

def test_ou_integral_single_fine_step():
    grid = generate_brownian_grid(0.5, 2.0 ** -4, 1, spec(23))
    h_fine = grid.h_fine
    xi = coarse_ou_integral(grid, INERTIAL, 0.0, h_fine)
    expected = math.sqrt(2.0) * math.exp(-h_fine) * grid.increments[0, 0]
    assert xi[0] == pytest.approx(expected, rel=1e-13)


def test_ou_integral_matches_left_point_sum():
    model = InertialModel(make_quartic_model(beta=0.7), gamma=1.3,
                          mass=np.array([1.7]))
    grid = generate_brownian_grid(1.0, 2.0 ** -6, 1, spec(29))
    a, b = 0.25, 0.75
    i0, i1 = 16, 48
    lefts = np.arange(i0, i1) * grid.h_fine
    weights = math.sqrt(2.0 * 1.3 / 0.7) * np.exp(-1.3 * (b - lefts) / 1.7)
    expected = float(weights @ grid.increments[i0:i1, 0])
    assert coarse_ou_integral(grid, model, a, b)[0] == pytest.approx(
        expected, rel=1e-12)


def test_ou_integral_vanishes_with_damping():
    weak = InertialModel(make_quartic_model(beta=1.0), gamma=1e-12)
    grid = generate_brownian_grid(1.0, 2.0 ** -6, 1, spec(31))
    xi = coarse_ou_integral(grid, weak, 0.0, 1.0)
    plain = math.sqrt(2e-12) * np.sum(grid.increments[:, 0])
    assert abs(xi[0]) < 1e-5
    assert xi[0] == pytest.approx(plain, rel=1e-9)


def test_ou_integral_ensemble_variance_ito_isometry():
    # duration 0.1, gamma=beta=M=1: Var -> (1 - e^{-0.2}) as h_fine -> 0
    grid = generate_brownian_grid(0.1, 0.1 / 64.0, 100_000, spec(37))
    xi = coarse_ou_integral(grid, INERTIAL, 0.0, 0.1)
    target = float(ou_variance(INERTIAL, 0.1)[0])
    assert np.var(xi) == pytest.approx(target, rel=0.05)


def test_ou_integral_rejects_off_grid_endpoints():
    grid = generate_brownian_grid(1.0, 2.0 ** -4, 1, spec(41))
    with pytest.raises(ValueError):
        coarse_ou_integral(grid, INERTIAL, 0.0, 0.3)
    with pytest.raises(ValueError):
        coarse_ou_integrals(grid, INERTIAL, 0.3)


def test_ou_integral_pair_splits_the_step():
    # per-step halves line up with the direct [a, mid), [mid, b) integrals
    grid = generate_brownian_grid(1.0, 2.0 ** -6, 2, spec(43))
    h = 2.0 ** -3
    xi1, xi2 = coarse_ou_integrals(grid, INERTIAL, h)
    for k in (0, 3, 7):
        a = k * h
        assert_allclose(xi1[k], coarse_ou_integral(grid, INERTIAL, a, a + h / 2),
                        rtol=1e-12)
        assert_allclose(xi2[k], coarse_ou_integral(grid, INERTIAL, a + h / 2, a + h),
                        rtol=1e-12)


# --------------------------------------------------------- reference runs

def test_reference_zero_potential_is_exact_diffusion():
    m = make_zero_model(beta=2.0)
    grid = generate_brownian_grid(1.0, 2.0 ** -8, 1, spec(47))
    out = reference_trajectory(m, grid, x0=[0.4])
    assert out[0] == pytest.approx(0.4 + np.sum(grid.increments), rel=1e-12)


def test_reference_inertial_matches_matrix_exponential():
    # zero-noise damped oscillator: dz = [[0,1],[-1,-1]] z dt
    model = InertialModel(make_quadratic_model(beta=1.0), gamma=1.0)
    exact = expm(np.array([[0.0, 1.0], [-1.0, -1.0]])) @ np.array([1.0, 0.0])
    errors = []
    for k in (6, 7, 8):
        out = reference_trajectory(model, zero_grid(1.0, 2.0 ** -k),
                                   x0=PhaseState([1.0], [0.0]))
        errors.append(math.hypot(out.q[0] - exact[0], out.p[0] - exact[1]))
    assert errors[0] < 0.05 * 2.0 ** -6
    assert errors[2] < 0.05 * 2.0 ** -8
    assert errors[0] / errors[1] > 1.8  # at least first-order decay


def test_reference_rejects_unknown_scheme():
    grid = generate_brownian_grid(1.0, 2.0 ** -4, 1, spec(53))
    with pytest.raises(ValueError):
        reference_trajectory(QUARTIC, grid, "milstein", x0=[0.0])


# ------------------------------------------------------------- fit_order

def test_fit_order_exact_power_laws():
    h = np.array([0.5, 0.25, 0.125, 0.0625])
    fit = fit_order(h, h)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.half_width == pytest.approx(0.0, abs=1e-10)
    assert fit_order(h, h ** 0.75).slope == pytest.approx(0.75, abs=1e-12)
    assert fit_order(h, 3.0 * h ** 1.5).slope == pytest.approx(1.5, abs=1e-12)


def test_fit_order_with_multiplicative_noise():
    gen = np.random.Generator(np.random.PCG64(59))
    h = 2.0 ** -np.arange(2, 10)
    rms = 2.0 * h * (1.0 + 0.01 * gen.normal(size=h.size))
    fit = fit_order(h, rms)
    assert 0.97 <= fit.slope <= 1.03
    assert fit.half_width > 0.0


def test_fit_order_input_validation():
    with pytest.raises(ValueError):
        fit_order([0.5, 0.25], [0.1, 0.05])
    with pytest.raises(ValueError):
        fit_order([0.5, 0.25, 0.125], [0.1, 0.0, 0.01])


# ----------------------------------------------------- equilibrium sampling

def test_quadrature_cdf_shape_and_energy_expectation():
    # E_pi[x U'(x)] = 1/beta makes E_pi[U] = 1/(4 beta) for the quartic
    for beta in (1.0, 2.0):
        quad = QuadratureCdf(make_quartic_model(beta=beta))
        assert quad.cdf(np.array([quad.lower]))[0] == pytest.approx(0.0, abs=1e-9)
        assert quad.cdf(np.array([quad.upper]))[0] == pytest.approx(1.0, abs=1e-9)
        assert quad.cdf(np.array([0.0]))[0] == pytest.approx(0.5, abs=1e-12)
        energy_mean = quad.expectation(lambda x: 0.25 * x ** 4)
        assert energy_mean == pytest.approx(1.0 / (4.0 * beta), abs=1e-9)


def test_quadrature_cdf_round_trip():
    quad = QuadratureCdf(QUARTIC)
    u = np.linspace(0.01, 0.99, 25)
    x = quad.ppf(u)
    assert np.all(np.diff(x) > 0)
    assert_allclose(quad.cdf(x), u, atol=1e-9)


def test_quadrature_cdf_rejects_flat_potential():
    with pytest.raises(ModelError):
        QuadratureCdf(make_zero_model(beta=1.0))


def test_equilibrium_sampler_statistics():
    gen = np.random.Generator(np.random.PCG64(61))
    quad = QuadratureCdf(QUARTIC)
    samples = equilibrium_sample_1d(QUARTIC, gen, size=100_000, cdf=quad)
    assert abs(np.median(samples)) < 0.02
    energies = 0.25 * samples ** 4
    se = np.std(energies, ddof=1) / math.sqrt(energies.size)
    assert abs(np.mean(energies) - 0.25) < 3.0 * se
    assert ks_distance(samples, quad.cdf) < 0.006


# ------------------------------------------------------------- ks_distance

def test_ks_distance_degenerate_cases():
    quad = QuadratureCdf(QUARTIC)
    median = quad.ppf(np.array([0.5]))[0]
    assert ks_distance(np.array([median]), quad.cdf) == pytest.approx(0.5, abs=1e-9)
    far_left = np.full(50, quad.lower - 5.0)
    assert ks_distance(far_left, quad.cdf) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        ks_distance(np.empty(0), quad.cdf)


# ------------------------------------------------------ strong-error studies

def test_study_zero_potential_hits_coupling_floor():
    cfg = ConvergenceStudyConfig(
        model=make_zero_model(beta=1.0), method="mala", horizon=1.0,
        h_values=(2.0 ** -2, 2.0 ** -3, 2.0 ** -4), h_fine=2.0 ** -10,
        n_realizations=16, init="fixed", x0=[0.0], master_seed=3)
    report = strong_error_study(cfg)
    assert report.discarded == 0
    assert all(r < 1e-10 for r in report.rms)


def test_study_mala_reduced_scale_slope():
    cfg = ConvergenceStudyConfig(
        model=QUARTIC, method="mala", horizon=1.0,
        h_values=tuple(2.0 ** -k for k in range(4, 9)), h_fine=2.0 ** -13,
        n_realizations=800, init="equilibrium", master_seed=21)
    report = strong_error_study(cfg, threads=4)
    assert report.discarded == 0
    assert all(r > 0 for r in report.rms)
    assert np.all(np.diff(report.rms) < 0)  # error shrinks with h
    assert 0.60 <= report.slope <= 0.90


def test_study_magla_smoke():
    cfg = ConvergenceStudyConfig(
        model=INERTIAL, method="magla", horizon=1.0,
        h_values=(2.0 ** -2, 2.0 ** -3, 2.0 ** -4), h_fine=2.0 ** -9,
        n_realizations=64, init="fixed",
        x0=PhaseState([0.1], [0.0]), master_seed=5)
    report = strong_error_study(cfg, threads=2)
    assert report.discarded == 0
    assert all(r > 0 for r in report.rms)
    assert np.all(np.diff(report.rms) < 0)


def test_study_is_thread_count_invariant():
    cfg = ConvergenceStudyConfig(
        model=QUARTIC, method="malta", horizon=1.0,
        h_values=(2.0 ** -3, 2.0 ** -4, 2.0 ** -5), h_fine=2.0 ** -10,
        n_realizations=48, init="equilibrium", master_seed=9)
    serial = strong_error_study(cfg, threads=1)
    pooled = strong_error_study(cfg, threads=3)
    assert serial.rms == pooled.rms
    assert serial.stderr == pooled.stderr
    assert serial.slope == pooled.slope


def test_study_aborts_on_discard_budget():
    cfg = ConvergenceStudyConfig(
        model=QUARTIC, method="mala", horizon=1.0,
        h_values=(2.0 ** -3,), h_fine=2.0 ** -9,
        n_realizations=4, init="fixed", x0=[1e6], master_seed=1)
    with pytest.raises(StudyAbort):
        strong_error_study(cfg)


def test_study_config_validation():
    good = dict(model=QUARTIC, method="mala", horizon=1.0,
                h_values=(2.0 ** -3, 2.0 ** -4), h_fine=2.0 ** -10,
                n_realizations=8, init="fixed", x0=[0.0])
    with pytest.raises(ValueError):  # h does not divide T
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "h_values": (0.3, 0.15)}))
    with pytest.raises(ValueError):  # ratio below 64
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "h_fine": 2.0 ** -6}))
    with pytest.raises(ValueError):  # unknown init policy
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "init": "warm"}))
    with pytest.raises(ValueError):  # fixed policy needs x0
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "x0": None}))
    with pytest.raises(ValueError):  # overdamped method on inertial model
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "model": INERTIAL,
               "x0": PhaseState([0.0], [0.0])}))
    with pytest.raises(ValueError):  # too few realizations
        strong_error_study(ConvergenceStudyConfig(
            **{**good, "n_realizations": 1}))


# ----------------------------------------------------------- rejection rates

def test_rejection_rate_zero_potential_is_flat():
    report = rejection_rate_study(make_zero_model(beta=1.0), "mala",
                                  [0.25, 0.125, 0.0625], n_steps=256,
                                  init="fixed", x0=[0.0],
                                  n_realizations=8, master_seed=2)
    assert all(r == 0.0 for r in report.mean_rejection)
    assert math.isnan(report.slope)


def test_rejection_rate_thread_count_invariant():
    args = dict(n_steps=1024, n_realizations=16, master_seed=4)
    hs = [0.25, 0.125, 0.0625]
    serial = rejection_rate_study(QUARTIC, "mala", hs, threads=1, **args)
    pooled = rejection_rate_study(QUARTIC, "mala", hs, threads=3, **args)
    assert serial.mean_rejection == pooled.mean_rejection
    assert serial.stderr == pooled.stderr


def test_rejection_rate_rejects_unadjusted_methods():
    with pytest.raises(ValueError):
        rejection_rate_study(QUARTIC, "ula", [0.25], n_steps=16)
    with pytest.raises(ValueError):
        rejection_rate_study(INERTIAL, "gla", [0.25], n_steps=16)


# ------------------------------------------------------------- long chains

def test_ergodicity_study_overdamped():
    report = ergodicity_study(QUARTIC, "mala", 0.1, 50_000, [0.0], 7)
    assert report.ks_position < 0.02
    assert report.burn == 5000
    assert report.position_counts.sum() == 50_000 - 5000
    assert report.momentum_edges is None


def test_ergodicity_study_inertial():
    report = ergodicity_study(INERTIAL, "magla", 0.25, 50_000,
                              PhaseState([0.0], [0.0]), 7)
    assert report.ks_position < 0.02
    assert report.ks_momentum < 0.02
    assert report.momentum_counts.sum() == 50_000 - 5000


def test_ergodicity_study_aborts_on_blowup():
    with pytest.raises(StudyAbort):
        ergodicity_study(QUARTIC, "ula", 0.3125, 1000, [4.0], 0)


def test_trajectory_study_zero_potential_tracks_reference():
    m = make_zero_model(beta=1.0)
    table = trajectory_study(m, ["ula", "mala"], 0.25, 64, [0.0], 11)
    assert table.times[0] == 0.0
    assert table.times[-1] == pytest.approx(16.0)
    for values, blow in zip(table.values, table.blowup_steps):
        assert blow is None
        assert_allclose(values, table.reference, atol=1e-10)
    assert table.accepted[0] is None  # ULA has no acceptance column
    assert np.all(table.accepted[1])


def test_trajectory_study_marks_ula_blowup():
    table = trajectory_study(QUARTIC, ["ula", "mala"], 0.3125, 50, [4.0], 0)
    ula_blow, mala_blow = table.blowup_steps
    assert ula_blow is not None and ula_blow <= 10
    assert mala_blow is None
    assert np.all(np.isfinite(table.reference))
