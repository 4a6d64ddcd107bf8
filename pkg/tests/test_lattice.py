import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxhom.lattice import Lattice, cross_matrix, cubic_lattice, symbol_b


def test_cubic_lattice_duals():
    lat = cubic_lattice()
    assert np.allclose(lat.basis, 2 * np.pi * np.eye(3))
    assert np.allclose(lat.dual_basis, np.eye(3))
    assert np.isclose(lat.cell_volume, (2 * np.pi) ** 3)
    # half the shortest nonzero dual vector
    assert np.isclose(lat.r0, 0.5)


def test_anisotropic_lattice_r0():
    lat = Lattice(np.diag([2 * np.pi, 4 * np.pi, 2 * np.pi]))
    # dual vectors have lengths 1, 1/2, 1; shortest is 1/2
    assert np.isclose(lat.r0, 0.25)
    assert np.isclose(lat.cell_volume, 2 * (2 * np.pi) ** 3)


def test_dual_basis_biorthogonality():
    rng = np.random.default_rng(3)
    basis = 2 * np.pi * (np.eye(3) + 0.2 * rng.normal(size=(3, 3)))
    lat = Lattice(basis)
    gram = lat.basis @ lat.dual_basis.T
    assert np.allclose(gram, 2 * np.pi * np.eye(3), atol=1e-12)


def test_cross_matrix_matches_cross_product():
    rng = np.random.default_rng(0)
    xi = rng.normal(size=3)
    v = rng.normal(size=3)
    assert np.allclose(cross_matrix(xi) @ v, np.cross(xi, v))
    assert np.allclose(cross_matrix(xi), -cross_matrix(xi).T)


def test_cross_matrix_broadcasts():
    xi = np.random.default_rng(1).normal(size=(3, 4, 5))
    r = cross_matrix(xi)
    assert r.shape == (3, 3, 4, 5)
    assert np.allclose(r[:, :, 2, 3] @ xi[:, 2, 3], 0.0, atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symbol_quadratic_form_bounds(seed):
    """b(xi)* b(xi) is pinned between alpha0 |xi|^2 and alpha1 |xi|^2 with
    alpha0, alpha1 the extreme eigenvalue bounds derived from mu0."""
    rng = np.random.default_rng(seed)
    q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    mu0 = q @ np.diag(rng.uniform(0.3, 3.0, size=3)) @ q.T
    w, vecs = np.linalg.eigh(mu0)
    mu0_sqrt = vecs @ np.diag(np.sqrt(w)) @ vecs.T
    mu0_inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(w)) @ vecs.T
    xi = rng.normal(size=3)
    b = symbol_b(xi, mu0_inv_sqrt, mu0_sqrt)
    assert b.shape == (4, 3)
    quad = b.conj().T @ b
    eigs = np.linalg.eigvalsh(quad)
    norm_mu = np.linalg.norm(mu0, 2)
    norm_mu_inv = np.linalg.norm(np.linalg.inv(mu0), 2)
    alpha0 = min(1.0 / norm_mu, 1.0 / norm_mu_inv)
    alpha1 = norm_mu + norm_mu_inv
    xi2 = float(xi @ xi)
    assert eigs.min() >= alpha0 * xi2 - 1e-9 * xi2
    assert eigs.max() <= alpha1 * xi2 + 1e-9 * xi2


def test_symbol_b_top_block_and_last_row():
    lat = cubic_lattice()
    xi = np.array([0.3, -1.2, 0.7])
    b = symbol_b(xi, np.eye(3), np.eye(3))
    v = np.array([1.0, 2.0, -1.0])
    assert np.allclose(b[:3] @ v, np.cross(xi, v))
    assert np.allclose(b[3], xi)
