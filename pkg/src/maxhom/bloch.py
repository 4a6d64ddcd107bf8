"""Fiber (Bloch) operators at fixed quasimomentum and band dispersion.

The fiber operator at quasimomentum k acts on lattice-periodic vector
fields as b(D + k)^* g(x) b(D + k).  It is represented matrix-free on a
truncated plane-wave basis: the symbol factors are diagonal per Fourier
mode, the material coefficients act by pointwise multiplication on a
padded physical grid.  The lowest eigenpairs are computed by Lanczos
iteration with full reorthogonalization applied to the shift-inverted
operator (A + sigma)^{-1}, whose action is evaluated by preconditioned
conjugate gradients.
"""

import numpy as np

from .cell import pcg, pointwise_eta_inv
from .fields import (
    dealias_shape,
    pad_hat,
    resample_hat,
    to_fourier,
    to_grid,
    truncate_hat,
    wavevectors,
)
from .lattice import symbol_b


class FiberOperator:
    """Matrix-free b(D + k)^* g b(D + k) on a truncated plane-wave basis.

    ``cutoff`` is a triple: modes with |m_i| <= cutoff_i are kept, so the
    basis holds 3 * prod(2 cutoff_i + 1) degrees of freedom.  Vectors are
    arrays of shape (3, M1, M2, M3) of Fourier coefficients.
    """

    def __init__(self, coeffs, k, cutoff):
        self.coeffs = coeffs
        self.k = np.asarray(k, dtype=float)
        self.cutoff = tuple(int(c) for c in cutoff)
        self.shape = tuple(2 * c + 1 for c in self.cutoff)
        # the physical grid must resolve both the dealiased working modes
        # and the material coefficients themselves
        self.pad_shape = tuple(
            max(d, c)
            for d, c in zip(dealias_shape(self.shape), coeffs.eta.grid_shape)
        )
        lattice = coeffs.lattice
        self.lattice = lattice

        xi = wavevectors(lattice, self.shape) + self.k[:, None, None, None]
        self.xi = xi
        self.b = symbol_b(xi, coeffs.mu0_inv_sqrt, coeffs.mu0_sqrt)  # (4,3,M..)

        # material coefficients sampled on the padded grid
        eta_inv_hat = to_fourier(pointwise_eta_inv(coeffs))
        nu_hat = coeffs.nu.hat
        self.eta_inv_pad = to_grid(resample_hat(eta_inv_hat, self.pad_shape)).real
        self.nu_pad = to_grid(resample_hat(nu_hat, self.pad_shape)).real

        # constant-coefficient symbol for preconditioning
        eta_inv_mean = eta_inv_hat[..., 0, 0, 0].real
        nu_mean = float(nu_hat[0, 0, 0].real)
        gbar = np.zeros((4, 4))
        gbar[:3, :3] = eta_inv_mean
        gbar[3, 3] = nu_mean
        self.symbol_mean = np.einsum(
            "ba...,bc,cd...->...ad", np.conj(self.b), gbar, self.b
        ).real

    @property
    def dim(self):
        return 3 * int(np.prod(self.shape))

    def apply(self, u_hat):
        """A u for u of shape (3, M1, M2, M3)."""
        q = np.einsum("ab...,b...->a...", self.b, u_hat)  # (4, M..)
        q_grid = to_grid(pad_hat(q, self.pad_shape))
        out = np.empty_like(q_grid)
        out[:3] = np.einsum("ab...,b...->a...", self.eta_inv_pad, q_grid[:3])
        out[3] = self.nu_pad * q_grid[3]
        q2 = truncate_hat(to_fourier(out), self.shape)
        return np.einsum("ba...,b...->a...", np.conj(self.b), q2)

    def rayleigh(self, u_hat):
        return float(np.real(np.vdot(u_hat.ravel(), self.apply(u_hat).ravel())))

    def divergence_weighted(self, u_hat):
        """Fourier coefficients of (div + i k.) applied to mu0^{1/2} u:
        zero exactly on the divergence-free ("J") subspace."""
        w = np.einsum("ab,b...->a...", self.coeffs.mu0_sqrt, u_hat)
        return 1j * np.einsum("a...,a...->...", self.xi, w)

    def project_gradient(self, u_hat):
        """Per-mode projection onto the weighted gradient ("G") subspace
        spanned by mu0^{1/2} (k + K)."""
        g_dir = np.einsum("ab,b...->a...", self.coeffs.mu0_sqrt, self.xi + 0j)
        norms = np.linalg.norm(g_dir, axis=0)
        norms = np.where(norms > 0, norms, 1.0)
        g_dir = g_dir / norms
        coef = np.einsum("a...,a...->...", np.conj(g_dir), u_hat)
        return coef * g_dir

    def gradient_fraction(self, u_hat):
        g_part = self.project_gradient(u_hat)
        return float(np.linalg.norm(g_part.ravel()) / np.linalg.norm(u_hat.ravel()))


def fiber_eigs(op, m=3, sigma=None, tol=1e-9, maxiter=400, seed=0,
               cg_tol=1e-12, cg_maxiter=5000):
    """Lowest ``m`` eigenpairs of a fiber operator.

    Lanczos with full reorthogonalization on (A + sigma)^{-1}; each
    inverse application is a preconditioned conjugate-gradient solve with
    the averaged-coefficient symbol as preconditioner.  Eigenvalues are
    accepted when the residual ||A v - lambda v|| drops below
    ``tol * max(lambda, sigma)``.
    """
    coeffs = op.coeffs
    if sigma is None:
        sigma = max(coeffs.delta, 1e-8)

    ident = np.eye(3)
    prec_mat = np.linalg.inv(op.symbol_mean + sigma * ident)  # (M.., 3, 3)

    def apply_shifted(u):
        return op.apply(u) + sigma * u

    def apply_prec(u):
        return np.einsum("...ab,b...->a...", prec_mat, u)

    def apply_inverse(u):
        return pcg(apply_shifted, u, apply_prec, tol=cg_tol, maxiter=cg_maxiter)

    dim = op.dim
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3,) + op.shape) + 1j * rng.normal(size=(3,) + op.shape)
    v /= np.linalg.norm(v.ravel())

    basis = []
    alphas, betas = [], []
    beta = 0.0
    v_prev = None
    max_steps = min(maxiter, dim)
    for step in range(max_steps):
        basis.append(v)
        w = apply_inverse(v)
        alpha = float(np.real(np.vdot(v.ravel(), w.ravel())))
        w = w - alpha * v
        if v_prev is not None:
            w = w - beta * v_prev
        # full reorthogonalization (twice for safety)
        for _ in range(2):
            for u in basis:
                w = w - np.vdot(u.ravel(), w.ravel()) * u
        alphas.append(alpha)
        beta = float(np.linalg.norm(w.ravel()))
        if step + 1 >= m + 2 or beta < 1e-14:
            theta, z, ok = _ritz_converged(alphas, betas, beta, m, tol, sigma)
            if ok or beta < 1e-14 or step + 1 == max_steps:
                vals, vecs = _assemble_ritz(op, basis, theta, z, m, sigma)
                res = _residuals(op, vals, vecs)
                if np.all(res <= tol * np.maximum(vals, sigma)) or beta < 1e-14:
                    return vals, vecs
        if beta < 1e-14:
            break
        betas.append(beta)
        v_prev = basis[-1]
        v = w / beta
    raise RuntimeError("Lanczos iteration did not converge")


def _ritz_converged(alphas, betas, beta_next, m, tol, sigma):
    n = len(alphas)
    t = np.diag(np.asarray(alphas))
    if n > 1:
        off = np.asarray(betas[: n - 1])
        t += np.diag(off, 1) + np.diag(off, -1)
    theta, z = np.linalg.eigh(t)
    # largest Ritz values of the inverse <-> smallest eigenvalues
    idx = np.argsort(theta)[::-1][:m]
    bounds = beta_next * np.abs(z[-1, idx])
    ok = n >= m and np.all(bounds <= tol * np.abs(theta[idx]))
    return theta, z, ok


def _assemble_ritz(op, basis, theta, z, m, sigma):
    idx = np.argsort(theta)[::-1][:m]
    vals = []
    vecs = []
    vb = np.stack(basis)  # (n, 3, M..)
    for j in idx:
        y = np.einsum("n,n...->...", z[:, j], vb)
        y /= np.linalg.norm(y.ravel())
        lam = float(np.real(np.vdot(y.ravel(), op.apply(y).ravel())))
        vals.append(lam)
        vecs.append(y)
    order = np.argsort(vals)
    vals = np.asarray(vals)[order]
    vecs = [vecs[i] for i in order]
    return vals, vecs


def _residuals(op, vals, vecs):
    res = []
    for lam, v in zip(vals, vecs):
        r = op.apply(v) - lam * v
        res.append(np.linalg.norm(r.ravel()))
    return np.asarray(res)


def split_degenerate(op, vals, vecs, reltol=1e-8):
    """Rotate eigenvectors within (near-)degenerate clusters so that the
    weighted gradient and divergence-free polarizations separate.

    Inside a degenerate eigenvalue cluster any basis is an eigenbasis;
    diagonalizing the Gram matrix of the gradient-projections picks the
    combinations of pure polarization."""
    vals = np.asarray(vals)
    scale = max(abs(vals).max(), 1e-300)
    out_vecs = list(vecs)
    i = 0
    n = len(vals)
    while i < n:
        j = i + 1
        while j < n and vals[j] - vals[j - 1] <= reltol * scale:
            j += 1
        if j - i > 1:
            cluster = out_vecs[i:j]
            proj = [op.project_gradient(v) for v in cluster]
            gram = np.array(
                [[np.vdot(pa.ravel(), pb.ravel()) for pb in proj] for pa in proj]
            )
            _, rot = np.linalg.eigh(gram)
            rotated = []
            for col in rot.T:
                w = sum(c * v for c, v in zip(col, cluster))
                w /= np.linalg.norm(w.ravel())
                rotated.append(w)
            out_vecs[i:j] = rotated
        i = j
    return vals, out_vecs


def classify_fiber_vector(op, v, tol=1e-6):
    """Label an eigenvector as divergence-free ("J"), gradient ("G"), or
    "mixed" by how much of it lies in each weighted subspace."""
    dv = op.divergence_weighted(v)
    grad_norm = np.linalg.norm(
        (np.linalg.norm(op.xi, axis=0) * np.abs(v)).ravel()
    )
    div_rel = np.linalg.norm(dv.ravel()) / max(grad_norm, 1e-300)
    g_frac = op.gradient_fraction(v)
    if div_rel <= tol:
        return "J"
    if 1.0 - g_frac <= tol:
        return "G"
    return "mixed"


def fiber_spectrum_sweep(coeffs, theta, t_grid, cutoff, m=3, seed=0, tol=1e-9,
                         extra=0):
    """Eigenvalues/eigenvectors of the fiber operators at k = t * theta.

    Branches are matched across the t grid by eigenvector overlap
    (greedy optimal assignment).  Returns (values, labels) with values of
    shape (len(t_grid), m + extra).
    """
    from scipy.optimize import linear_sum_assignment

    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    n_eig = m + extra
    values = np.zeros((len(t_grid), n_eig))
    labels = []
    prev_vecs = None
    for it, t in enumerate(t_grid):
        op = FiberOperator(coeffs, t * theta, cutoff)
        vals, vecs = fiber_eigs(op, m=n_eig, seed=seed, tol=tol)
        vals, vecs = split_degenerate(op, vals, vecs)
        if prev_vecs is not None:
            overlap = np.zeros((n_eig, n_eig))
            for i, pv in enumerate(prev_vecs):
                for j, v in enumerate(vecs):
                    overlap[i, j] = abs(np.vdot(pv.ravel(), v.ravel()))
            row, col = linear_sum_assignment(-overlap)
            perm = np.empty(n_eig, dtype=int)
            perm[row] = col
            vals = vals[perm]
            vecs = [vecs[j] for j in perm]
        values[it] = vals
        labels.append([classify_fiber_vector(op, v) for v in vecs])
        prev_vecs = vecs
    return values, labels


def branch_fit(t_grid, branch_values, quartic=True):
    """Least-squares fit lambda(t) ~ gamma t^2 + mu t^3 (+ nu t^4).

    Returns (gamma, mu, nu); the quartic term absorbs higher-order
    curvature so that the quadratic/cubic coefficients are unbiased on
    small fitting windows."""
    t = np.asarray(t_grid, dtype=float)
    y = np.asarray(branch_values, dtype=float)
    cols = [t ** 2, t ** 3]
    if quartic:
        cols.append(t ** 4)
    a = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    gamma, mu = coef[0], coef[1]
    nu4 = coef[2] if quartic else 0.0
    return float(gamma), float(mu), float(nu4)
