"""End-to-end acceptance checks.

Each test covers one numbered criterion and prints a single PASS/FAIL
line.  The two convergence sweeps are computed once per session and
shared between the rate and conservation criteria.
"""

import time

import numpy as np
import pytest

from maxhom.bloch import branch_fit, fiber_spectrum_sweep
from maxhom.cell import solve_cell_problems
from maxhom.coefficients import (
    ball_inclusion,
    constant_set,
    layered_coupled,
    layered_divergence_free,
    layered_harmonic,
    layered_isotropic,
    random_spd,
)
from maxhom.fields import grid_points, norm_hs, norm_l2
from maxhom.germ import (
    analyze_germ,
    f_coefficient_matrix,
    fibonacci_sphere,
    germ_spectrum,
    mu12_at_crossing,
    n_matrix,
    n_matrix_invariant,
)
from maxhom.harness import band_limited_field, sweep
from maxhom.lattice import cubic_lattice
from maxhom.wave import (
    TorusProblem,
    apply_smoothing,
    project_weighted,
    propagate_eps,
    propagate_homogenized,
)

SQRT3 = np.sqrt(3.0)


def _verdict(num, description, ok, elapsed=None):
    status = "PASS" if ok else "FAIL"
    timing = f"  ({elapsed:.1f}s)" if elapsed is not None else ""
    print(f"[{status}] criterion {num}: {description}{timing}")
    assert ok, f"criterion {num} failed: {description}"


@pytest.fixture(scope="module")
def sweep_general():
    """Rate sweep with nonzero initial field (criteria 7 and 10)."""
    t0 = time.time()
    report = sweep(
        "layered_isotropic",
        {"frequency": 2},
        n_list=(2, 4, 8, 16),
        tau=1.0,
        seed=0,
        phi_zero=False,
    )
    return report, time.time() - t0


@pytest.fixture(scope="module")
def sweep_phi_zero():
    """Rate sweep with zero initial field (criteria 8 and 10)."""
    t0 = time.time()
    report = sweep(
        "layered_isotropic",
        {"frequency": 2},
        n_list=(2, 4, 8, 16),
        tau=1.0,
        seed=0,
        phi_zero=True,
    )
    return report, time.time() - t0


def test_criterion_01_constant_coefficient_degeneracy():
    t0 = time.time()
    eta = np.diag([1.5, 2.0, 0.7])
    coeffs = constant_set(shape=(4, 4, 4), eta=eta, nu=1.3)
    corr = solve_cell_problems(coeffs)
    ok = all(
        np.max(np.abs(field)) <= 1e-10
        for field in (corr.phi, corr.psi, corr.sigma, corr.sigma_circ, corr.grad_rho)
    )
    ok = ok and np.allclose(corr.eta0, eta, atol=1e-12)
    ok = ok and abs(corr.nu_eff - 1.3) <= 1e-12
    F = f_coefficient_matrix(corr)
    ok = ok and np.linalg.norm(0.5 * (F + F.T)) <= 1e-14
    ok = ok and analyze_germ(corr, n_directions=64).f_vanishes

    lattice = coeffs.lattice
    shape = (8, 8, 8)
    f = band_limited_field(lattice, shape, seed=0, max_index=2)
    phi = project_weighted(
        lattice, shape, band_limited_field(lattice, shape, seed=1, max_index=2),
        eta0=coeffs.mu0,
    )
    for n in (2, 4):
        problem = TorusProblem(coeffs, n, shape)
        state = propagate_eps(problem, phi, f, tau=1.0, dt=2e-4)
        ref = propagate_homogenized(coeffs, corr.eta0, corr.nu_eff, shape, phi, f, 1.0)
        rel = norm_l2(lattice, state.v - ref.v) / norm_l2(lattice, ref.v)
        ok = ok and rel <= 1e-6
    elapsed = time.time() - t0
    _verdict(1, "constant coefficients degenerate exactly", ok and elapsed < 60, elapsed)


def test_criterion_02_voigt_reuss_bracketing():
    t0 = time.time()
    ok = True
    for seed in range(20):
        coeffs = random_spd(seed, shape=(16, 16, 16))
        corr = solve_cell_problems(coeffs, tol=1e-9)
        upper = np.linalg.eigvalsh(coeffs.eta_mean() - corr.eta0).min()
        lower = np.linalg.eigvalsh(corr.eta0 - coeffs.eta_mean_harm()).min()
        ok = ok and upper >= -1e-8 and lower >= -1e-8
    elapsed = time.time() - t0
    _verdict(2, "effective matrix bracketed by mean and harmonic mean (20 seeds)",
             ok and elapsed < 120, elapsed)


def test_criterion_03_layered_oracle():
    t0 = time.time()
    coeffs = layered_isotropic(shape=(64, 4, 4))
    corr = solve_cell_problems(coeffs)
    ok = np.allclose(corr.eta0, np.diag([SQRT3, 2.0, 2.0]), atol=1e-8)
    x = grid_points(coeffs.lattice, corr.psi.shape[-3:])
    ok = ok and np.allclose(corr.psi[2, 1], 0.5 * np.cos(x[0]), atol=1e-8)
    ok = ok and np.max(np.abs(corr.psi[0, 1])) <= 1e-8
    ok = ok and np.max(np.abs(corr.psi[1, 1])) <= 1e-8
    elapsed = time.time() - t0
    _verdict(3, "layered medium matches closed-form solution", ok and elapsed < 30, elapsed)


def test_criterion_04_germ_versus_band_dispersion():
    t0 = time.time()
    scenarios = [
        ("constant", constant_set(shape=(4, 4, 4), eta=np.diag([1.2, 2.0, 0.5])), (2, 2, 2)),
        ("layered", layered_isotropic(shape=(64, 4, 4)), (8, 2, 2)),
        ("divergence-free", layered_divergence_free(shape=(64, 4, 4)), (8, 2, 2)),
    ]
    ok = True
    for name, coeffs, cutoff in scenarios:
        corr = solve_cell_problems(coeffs)
        t_grid = np.linspace(coeffs.t0 / 16, coeffs.t0 / 4, 5)
        for theta in fibonacci_sphere(10):
            gammas, _, _ = germ_spectrum(theta, corr.eta0, corr.nu_eff, coeffs.mu0)
            vals, labels = fiber_spectrum_sweep(coeffs, theta, t_grid, cutoff=cutoff)
            fits = [branch_fit(t_grid, vals[:, j]) for j in range(3)]
            g_sorted = np.sort([f[0] for f in fits])
            ok = ok and np.all(np.abs(g_sorted - np.sort(gammas)) <= 1e-4 * np.sort(gammas))
            g_idx = labels[0].index("G")
            ok = ok and abs(fits[g_idx][1]) <= 1e-3 * gammas[2]
        if not ok:
            break
    elapsed = time.time() - t0
    _verdict(4, "quadratic germ and cubic gradient-branch terms match the band fits",
             ok and elapsed < 300, elapsed)


def test_criterion_05_cubic_operator_two_routes_and_crossing():
    t0 = time.time()
    coeffs = layered_coupled(shape=(64, 4, 4))
    corr = solve_cell_problems(coeffs)
    F = f_coefficient_matrix(corr)
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(50):
        theta = rng.normal(size=3)
        theta /= np.linalg.norm(theta)
        direct = n_matrix(theta, F, coeffs.mu0)
        invariant = n_matrix_invariant(theta, corr)
        ok = ok and np.linalg.norm(direct - invariant) <= 1e-7 * max(
            np.linalg.norm(direct), 1.0
        )

    report = analyze_germ(corr, n_directions=500)
    ok = ok and report.branch_relation == "crossing" and report.crossings
    theta0 = report.crossings[0]
    mu_plus, mu_minus = mu12_at_crossing(theta0, F, coeffs.mu0)
    t_grid = np.linspace(coeffs.t0 / 16, coeffs.t0 / 4, 7)
    vals, labels = fiber_spectrum_sweep(coeffs, theta0, t_grid, cutoff=(8, 2, 2))
    mus = sorted(
        branch_fit(t_grid, vals[:, j])[1]
        for j in range(3)
        if labels[0][j] == "J"
    )
    ok = ok and abs(mus[0] - mu_minus) <= 0.05 * abs(mu_minus)
    ok = ok and abs(mus[1] - mu_plus) <= 0.05 * abs(mu_plus)
    elapsed = time.time() - t0
    _verdict(5, "cubic operator agrees between routes; crossing coefficients match",
             ok and elapsed < 300, elapsed)


def test_criterion_06_vanishing_cubic_form_families():
    t0 = time.time()
    builders = [
        constant_set(shape=(4, 4, 4), eta=np.diag([1.2, 2.0, 0.5])),
        layered_divergence_free(shape=(64, 4, 4)),
        layered_harmonic(shape=(64, 4, 4)),
    ]
    ok = True
    for coeffs in builders:
        corr = solve_cell_problems(coeffs)
        F = f_coefficient_matrix(corr)
        scale = max(np.linalg.norm(corr.eta0), 1.0)
        ok = ok and np.linalg.norm(0.5 * (F + F.T)) <= 1e-10 * scale

    # smoothed ball inclusion: the exact value is zero by symmetry; the
    # measured norms either decrease under refinement or sit at the
    # roundoff floor (where monotonicity carries no information)
    norms = []
    for n in (16, 24, 32):
        coeffs = ball_inclusion(shape=(n, n, n), kappa=5.0, vartheta=0.3)
        corr = solve_cell_problems(coeffs, tol=1e-9)
        F = f_coefficient_matrix(corr)
        norms.append(np.linalg.norm(0.5 * (F + F.T)))
    floor = 1e-12 * max(np.linalg.norm(corr.eta0), 1.0)
    monotone = norms[0] > norms[1] > norms[2]
    at_floor = max(norms) <= floor
    ok = ok and (monotone or at_floor)
    elapsed = time.time() - t0
    _verdict(6, "cubic form vanishes for the special families and the smoothed ball",
             ok and elapsed < 300, elapsed)


def test_criterion_07_field_error_first_order(sweep_general):
    report, elapsed = sweep_general
    slope = report.slopes["e_v"]["slope"]
    ok = slope >= 0.9 and elapsed < 600
    _verdict(7, f"field error decays at first order (slope {slope:.3f})", ok, elapsed)


def test_criterion_08_corrected_and_recovered_rates(sweep_phi_zero):
    report, elapsed = sweep_phi_zero
    slopes = {m: report.slopes[m]["slope"] for m in ("e_corr_H1", "e_flux", "e_u", "e_w")}
    ok = all(s >= 0.9 for s in slopes.values()) and elapsed < 900
    summary = ", ".join(f"{m} {s:.3f}" for m, s in slopes.items())
    _verdict(8, f"corrected and recovered errors decay at first order ({summary})",
             ok, elapsed)


def test_criterion_09_smoothing_operator_bound():
    t0 = time.time()
    lat = cubic_lattice()
    shape = (16, 16, 16)
    rng = np.random.default_rng(9)
    ok = True
    for _ in range(20):
        u = rng.normal(size=shape)
        for s in (0.5, 1.0, 1.5, 2.0):
            for eps in (0.5, 0.25):
                lhs = norm_l2(lat, u - apply_smoothing(lat, shape, eps, u))
                rhs = lat.r0 ** (-s) * eps ** s * norm_hs(lat, u, s)
                ok = ok and lhs <= rhs * (1 + 1e-12)
    elapsed = time.time() - t0
    _verdict(9, "spectral smoothing obeys the fractional cutoff bound", ok and elapsed < 60,
             elapsed)


def test_criterion_10_conservation_suite(sweep_general, sweep_phi_zero):
    ok = True
    for report, _ in (sweep_general, sweep_phi_zero):
        for diag in report.diagnostics["per_eps"]:
            ok = ok and diag["div_mu0_v_max"] <= 1e-8
            ok = ok and diag["energy_drift"] <= 1e-6
    _verdict(10, "weighted divergence and energy conserved on every oscillating run", ok)
