"""Periodic cell problems and assembly of the effective coefficients.

All solvers work in Fourier space on the coefficient grid.  The scalar
diffusion problems with variable eta are solved by preconditioned
conjugate gradients (the constant-coefficient symbol serves as the
preconditioner); the curl-curl and constant-coefficient problems are
diagonal per Fourier mode and are solved directly.
"""

import numpy as np

from .fields import (
    DealiasedMultiplier,
    to_grid,
    wavevectors,
)
from .lattice import cross_matrix, symbol_b


class SolverError(RuntimeError):
    pass


def pcg(apply_a, rhs, apply_prec, tol=1e-10, maxiter=5000):
    """Conjugate gradients for a Hermitian positive (semi-)definite
    operator on arrays of Fourier coefficients.  Converges when the
    residual drops below ``tol`` times the right-hand side norm."""
    rhs_norm = np.linalg.norm(rhs.ravel())
    if rhs_norm == 0.0:
        return np.zeros_like(rhs)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = apply_prec(r)
    p = z.copy()
    rz = np.vdot(r.ravel(), z.ravel())
    for _ in range(maxiter):
        ap = apply_a(p)
        alpha = rz / np.vdot(p.ravel(), ap.ravel())
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r.ravel()) <= tol * rhs_norm:
            return x
        z = apply_prec(r)
        rz_new = np.vdot(r.ravel(), z.ravel())
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not reach tol={tol} in {maxiter} iterations"
    )


class ScalarDiffusionSolver:
    """Spectral solver for -div(eta grad u) = rhs, periodic, zero mean."""

    def __init__(self, lattice, eta_field, tol=1e-10, maxiter=5000):
        self.lattice = lattice
        self.shape = eta_field.grid_shape
        self.K = wavevectors(lattice, self.shape)
        self.k2 = np.sum(self.K ** 2, axis=0)
        self.mult = DealiasedMultiplier(eta_field.hat, self.shape)
        scale = float(np.trace(eta_field.mean()) / 3.0)
        with np.errstate(divide="ignore"):
            self.prec = np.where(self.k2 > 0, 1.0 / (scale * self.k2), 0.0)
        self.tol = tol
        self.maxiter = maxiter

    def apply(self, uhat):
        grad = 1j * self.K * uhat[None]
        flux = self.mult.apply(grad)
        out = -1j * np.sum(self.K * flux, axis=0)
        out[0, 0, 0] = 0.0
        return out

    def flux(self, uhat, const_vec=None):
        """eta * (grad u + const_vec), Fourier coefficients."""
        grad = 1j * self.K * uhat[None]
        if const_vec is not None:
            grad = grad.copy()
            grad[:, 0, 0, 0] += np.asarray(const_vec, dtype=complex)
        return self.mult.apply(grad)

    def solve(self, rhs_hat):
        rhs_hat = rhs_hat.copy()
        rhs_hat[0, 0, 0] = 0.0
        sol = pcg(
            self.apply,
            rhs_hat,
            lambda r: self.prec * r,
            tol=self.tol,
            maxiter=self.maxiter,
        )
        sol[0, 0, 0] = 0.0
        return sol

    def solve_with_slope(self, const_vec):
        """Zero-mean u with div(eta (grad u + const_vec)) = 0."""
        flux0 = self.flux(np.zeros(self.shape, dtype=complex), const_vec)
        rhs = 1j * np.sum(self.K * flux0, axis=0)
        return self.solve(rhs)


def _per_mode_pinv_curlcurl(lattice, shape, mu0_inv):
    """Batched pseudoinverse of the symbol of curl(mu0^{-1} curl .)."""
    K = wavevectors(lattice, shape)
    r = cross_matrix(K)  # (3, 3, N1, N2, N3)
    a = np.einsum("ab...,bc,cd...->ad...", -r, mu0_inv, r)
    a = np.moveaxis(a, (0, 1), (-2, -1))
    return np.linalg.pinv(a, rcond=1e-10, hermitian=True)


class CorrectorSet:
    """Solutions of the cell problems and the derived effective data.

    Attributes (grids match the coefficient grid; j indexes the three
    right-hand-side directions):

    - ``phi``: (3, N...) scalar potentials of the diffusion problems;
    - ``sigma_circ``: (3, 3, N...) with columns grad phi_j;
    - ``phi_tilde``, ``sigma``: renormalized analogues;
    - ``eta0``: 3x3 effective matrix; ``nu_eff``: harmonic mean of nu;
    - ``p``: (3, 3, N...) vector potentials p_j (first axis: component);
    - ``psi``: (3, 3, N...) with columns curl p_j;
    - ``rho``: (N...) scalar potential; ``grad_rho``: (3, N...);
    - ``lam``: (3, 4, N...) complex corrector matrix;
    - ``g_tilde``: (4, 4, N...) flux-corrector matrix; ``g0``: its mean;
    - ``eta_tilde``: (3, 3, N...) = eta (sigma_circ + 1).
    """

    def __init__(self, coeffs, tol=1e-10, maxiter=5000):
        self.coeffs = coeffs
        lattice = coeffs.lattice
        shape = coeffs.eta.grid_shape
        self.lattice = lattice
        self.shape = shape
        K = wavevectors(lattice, shape)
        solver = ScalarDiffusionSolver(lattice, coeffs.eta, tol=tol, maxiter=maxiter)
        self.solver = solver

        # diffusion potentials and the effective matrix
        phi_hat = np.stack([solver.solve_with_slope(np.eye(3)[j]) for j in range(3)])
        self.phi = to_grid(phi_hat).real
        grad_phi_hat = 1j * K[:, None] * phi_hat[None]
        self.sigma_circ = to_grid(grad_phi_hat).real  # [a, j] = d_a phi_j
        flux = np.stack(
            [to_grid(solver.flux(phi_hat[j], np.eye(3)[j])).real for j in range(3)],
            axis=1,
        )  # [a, j] = (eta (grad phi_j + e_j))_a
        self.eta0 = flux.mean(axis=(-3, -2, -1))
        self.eta0_inv = np.linalg.inv(self.eta0)
        self.eta_tilde = np.einsum(
            "ab...,bj...->aj...",
            coeffs.eta.values,
            self.sigma_circ + np.eye(3)[..., None, None, None],
        )

        # renormalized potentials (slopes are the columns of eta0^{-1})
        phi_tilde_hat = np.einsum("kj,k...->j...", self.eta0_inv, phi_hat)
        self.phi_tilde = to_grid(phi_tilde_hat).real
        self.sigma = np.einsum("ak...,kj->aj...", self.sigma_circ, self.eta0_inv)
        self.flux_tilde = np.stack(
            [
                to_grid(solver.flux(phi_tilde_hat[j], self.eta0_inv[:, j])).real
                for j in range(3)
            ],
            axis=1,
        )  # [a, j] = (eta (grad phi_tilde_j + c_j))_a

        # vector potentials for the rotational corrector
        rhs = self.flux_tilde - np.eye(3)[..., None, None, None]
        rhs_hat = np.fft.fftn(rhs, axes=(-3, -2, -1)) / np.prod(shape)
        rhs_hat[..., 0, 0, 0] = 0.0
        pinv = _per_mode_pinv_curlcurl(lattice, shape, coeffs.mu0_inv)
        p_hat = np.einsum(
            "...ab,bj...->aj...",
            pinv,
            rhs_hat,
        )
        self.p = to_grid(p_hat).real
        r = cross_matrix(K)
        psi_hat = 1j * np.einsum("ab...,bj...->aj...", r, p_hat)
        self.psi = to_grid(psi_hat).real

        # scalar potential for the divergence corrector
        self.nu_eff = coeffs.nu_mean_harm()
        rho_rhs = 1.0 - self.nu_eff / coeffs.nu.values
        rho_rhs_hat = np.fft.fftn(rho_rhs) / np.prod(shape)
        quad = np.einsum("a...,ab,b...->...", K, coeffs.mu0, K)
        with np.errstate(divide="ignore", invalid="ignore"):
            rho_hat = np.where(quad > 0, rho_rhs_hat / np.where(quad > 0, quad, 1.0), 0.0)
        self.rho = to_grid(rho_hat).real
        self.grad_rho = to_grid(1j * K * rho_hat[None]).real

        # combined corrector matrix and flux corrector
        lam = np.empty((3, 4) + shape, dtype=complex)
        lam[:, :3] = 1j * np.einsum("ab,bj...->aj...", coeffs.mu0_inv_sqrt, self.psi)
        lam[:, 3] = 1j * np.einsum("ab,b...->a...", coeffs.mu0_sqrt, self.grad_rho)
        self.lam = lam

        g_tilde = np.zeros((4, 4) + shape)
        g_tilde[:3, :3] = (
            self.eta0_inv[..., None, None, None]
            + self.sigma
        )
        g_tilde[3, 3] = self.nu_eff
        self.g_tilde = g_tilde
        self.g0 = np.zeros((4, 4))
        self.g0[:3, :3] = self.eta0_inv
        self.g0[3, 3] = self.nu_eff

    # ---- consistency checks ------------------------------------------

    def g_tilde_from_definition(self):
        """Flux corrector computed from its defining relation
        g (b(D) Lambda + 1): an independent route used for validation."""
        coeffs = self.coeffs
        K = wavevectors(self.lattice, self.shape)
        lam_hat = np.fft.fftn(self.lam, axes=(-3, -2, -1)) / np.prod(self.shape)
        b_k = symbol_b(K, coeffs.mu0_inv_sqrt, coeffs.mu0_sqrt)  # (4, 3, N...)
        bl_hat = np.einsum("ab...,bj...->aj...", b_k, lam_hat)
        bl = to_grid(bl_hat)
        bl[np.arange(4), np.arange(4)] += 1.0
        g = np.zeros((4, 4) + self.shape)
        g[:3, :3] = pointwise_eta_inv(coeffs)
        g[3, 3] = coeffs.nu.values
        return np.einsum("ab...,bj...->aj...", g, bl)

    def divergence_defect(self):
        """Max L2 norm of div(eta (grad phi_tilde_j + c_j)) over j,
        relative to the flux size (should be at solver tolerance)."""
        K = wavevectors(self.lattice, self.shape)
        flux_hat = np.fft.fftn(self.flux_tilde, axes=(-3, -2, -1)) / np.prod(self.shape)
        div = np.einsum("a...,aj...->j...", 1j * K, flux_hat)
        num = np.linalg.norm(div.reshape(3, -1), axis=1).max()
        den = np.linalg.norm(flux_hat.reshape(-1))
        return float(num / den)


def pointwise_eta_inv(coeffs):
    vals = np.moveaxis(coeffs.eta.values, (0, 1), (-2, -1))
    return np.moveaxis(np.linalg.inv(vals), (-2, -1), (0, 1))


def solve_cell_problems(coeffs, tol=1e-10, maxiter=5000):
    """Solve all cell problems for a coefficient set."""
    return CorrectorSet(coeffs, tol=tol, maxiter=maxiter)
