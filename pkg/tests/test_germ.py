import numpy as np
import pytest

from maxhom.cell import solve_cell_problems
from maxhom.coefficients import (
    constant_set,
    layered_coupled,
    layered_divergence_free,
    layered_harmonic,
    layered_isotropic,
)
from maxhom.germ import (
    analyze_germ,
    f_coefficient_matrix,
    f_value,
    fibonacci_sphere,
    germ_matrix,
    germ_spectrum,
    mu12_at_crossing,
    n_matrix,
    n_matrix_invariant,
)


@pytest.fixture(scope="module")
def layered_corr():
    return solve_cell_problems(layered_isotropic(shape=(64, 4, 4)))


@pytest.fixture(scope="module")
def coupled_corr():
    return solve_cell_problems(layered_coupled(shape=(64, 4, 4)))


def test_germ_spectrum_constant_identity():
    theta = np.array([0.3, -0.5, 0.81])
    theta /= np.linalg.norm(theta)
    gammas, omegas, labels = germ_spectrum(theta, np.eye(3), 1.0, np.eye(3))
    assert np.allclose(gammas, 1.0, atol=1e-12)
    assert labels == ["J", "J", "G"]
    assert np.allclose(omegas.conj().T @ omegas, np.eye(3), atol=1e-12)


def test_germ_matrix_eigen_consistency(layered_corr):
    corr = layered_corr
    theta = np.array([0.2, 0.9, -0.4])
    theta /= np.linalg.norm(theta)
    coeffs = corr.coeffs
    s = germ_matrix(theta, corr.eta0, corr.nu_eff, coeffs.mu0_sqrt, coeffs.mu0_inv_sqrt)
    gammas, omegas, _ = germ_spectrum(theta, corr.eta0, corr.nu_eff, coeffs.mu0)
    # the reported pairs diagonalize the germ
    assert np.allclose(s @ omegas, omegas * gammas, atol=1e-10)


def test_gradient_branch_value(layered_corr):
    corr = layered_corr
    theta = np.array([0.0, 0.6, 0.8])
    gammas, omegas, labels = germ_spectrum(theta, corr.eta0, corr.nu_eff, np.eye(3))
    g_idx = labels.index("G")
    # the gradient branch carries nu_eff <mu0 theta, theta>
    assert np.isclose(gammas[g_idx], corr.nu_eff, atol=1e-12)
    assert np.allclose(omegas[:, g_idx], theta, atol=1e-12) or np.allclose(
        omegas[:, g_idx], -theta, atol=1e-12
    )


@pytest.mark.parametrize(
    "builder",
    [
        lambda: constant_set(shape=(4, 4, 4), eta=np.diag([1.2, 2.0, 0.5])),
        lambda: layered_divergence_free(shape=(64, 4, 4)),
        lambda: layered_harmonic(shape=(64, 4, 4)),
        lambda: layered_isotropic(shape=(64, 4, 4)),
    ],
)
def test_cubic_form_vanishes_for_special_families(builder):
    corr = solve_cell_problems(builder())
    F = f_coefficient_matrix(corr)
    scale = max(np.linalg.norm(corr.eta0), 1.0)
    assert np.linalg.norm(0.5 * (F + F.T)) <= 1e-10 * scale


def test_cubic_form_nonzero_for_coupled(coupled_corr):
    F = f_coefficient_matrix(coupled_corr)
    sym = 0.5 * (F + F.T)
    assert np.linalg.norm(sym) > 1e-4


def test_n_matrix_two_routes(coupled_corr):
    corr = coupled_corr
    F = f_coefficient_matrix(corr)
    rng = np.random.default_rng(11)
    for _ in range(20):
        theta = rng.normal(size=3)
        theta /= np.linalg.norm(theta)
        direct = n_matrix(theta, F, corr.coeffs.mu0)
        invariant = n_matrix_invariant(theta, corr)
        scale = max(np.linalg.norm(direct), 1e-12)
        assert np.linalg.norm(direct - invariant) <= 1e-7 * max(scale, 1.0)


def test_n_matrix_structure(coupled_corr):
    """N(theta) is Hermitian, and vanishes exactly when f does."""
    corr = coupled_corr
    F = f_coefficient_matrix(corr)
    theta = np.array([1.0, 0.0, 0.0])
    n = n_matrix(theta, F, np.eye(3))
    assert np.allclose(n, n.conj().T, atol=1e-14)
    fv = f_value(F, theta)
    if abs(fv) < 1e-14:
        assert np.allclose(n, 0.0, atol=1e-14)


def test_mu12_symmetry():
    F = np.array([[0.0, 0.3, 0.0], [0.1, 0.0, 0.0], [0.0, 0.0, 0.2]])
    theta = np.array([0.48, -0.6, 0.64])
    theta /= np.linalg.norm(theta)
    mu1, mu2 = mu12_at_crossing(theta, F, np.eye(3))
    assert np.isclose(mu1, -mu2, atol=1e-14)
    assert np.isclose(abs(mu1), abs(f_value(F, theta)), rtol=1e-12)


def test_fibonacci_sphere_unit_norms():
    pts = fibonacci_sphere(128)
    assert pts.shape == (128, 3)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)


def test_analyze_germ_isotropic_identical_branches():
    corr = solve_cell_problems(constant_set(shape=(4, 4, 4)))
    report = analyze_germ(corr, n_directions=200)
    assert report.branch_relation == "identical"
    assert report.f_vanishes
    assert report.gamma_bounds_ok


def test_analyze_germ_coupled_finds_crossing(coupled_corr):
    report = analyze_germ(coupled_corr, n_directions=400)
    assert report.branch_relation == "crossing"
    assert not report.f_vanishes
    assert report.crossings, "expected at least one refined crossing direction"
    theta0 = np.asarray(report.crossings[0])
    gammas, _, labels = germ_spectrum(
        theta0, coupled_corr.eta0, coupled_corr.nu_eff, coupled_corr.coeffs.mu0
    )
    j = [i for i, lbl in enumerate(labels) if lbl == "J"]
    assert abs(gammas[j[0]] - gammas[j[1]]) <= 1e-6 * max(gammas)


def test_gamma_bounds_hold_on_sphere(layered_corr):
    corr = layered_corr
    coeffs = corr.coeffs
    norm_eta_inv = coeffs.norm_eta_inv
    mu_inv_norm = np.linalg.norm(coeffs.mu0_inv, 2)
    lower_g = corr.nu_eff / mu_inv_norm
    for theta in fibonacci_sphere(64):
        gammas, _, labels = germ_spectrum(theta, corr.eta0, corr.nu_eff, coeffs.mu0)
        for g, lbl in zip(gammas, labels):
            if lbl == "J":
                assert g <= mu_inv_norm * norm_eta_inv + 1e-10
            else:
                assert g >= lower_g - 1e-10
