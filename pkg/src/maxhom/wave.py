"""Time evolution of the magnetic field on a torus with rapidly
oscillating coefficients, its homogenized counterpart, and the corrected
approximants.

The oscillating problem

    mu0 d^2/dtau^2 v = -curl (eta(x/eps))^{-1} curl v,
    v(0) = phi,   mu0 dv/dtau(0) = psi = -curl f,

is integrated by an explicit leapfrog scheme (curl evaluated spectrally,
the material coefficient applied pointwise).  The electric field and the
displacement fields are recovered from the running trapezoid integral of
the flux.  The homogenized problem has constant coefficients and is
solved exactly per Fourier mode through the matrix functions
cos(tau sqrt(S)) and sin(tau sqrt(S))/sqrt(S) of the 3x3 symbol.
"""

import numpy as np

from .cell import pcg
from .fields import resample_hat, to_fourier, to_grid, wavevectors
from .lattice import cross_matrix, symbol_b


def scale_to_torus(hat, n, torus_shape, drop_tol=1e-8):
    """Sample a cell-periodic field at the n-times contracted argument.

    The field with coefficients ``hat`` on its own cell grid is evaluated
    as x -> field(n x) on a torus covering one cell: mode m of the field
    becomes mode n*m of the torus.  Axes along which the field actually
    varies must keep at least 8 torus grid points per contracted period;
    scaled modes that fall outside the torus grid are discarded, which is
    accepted only while their joint weight stays below ``drop_tol``
    relative to the field."""
    from .fields import freq_indices

    hat = np.asarray(hat)
    torus_shape = tuple(torus_shape)
    shape = hat.shape[-3:]
    mags = np.abs(hat).reshape((-1,) + shape).max(axis=0)
    thresh = 1e-12 * max(mags.max(), 1e-300)

    freqs = [freq_indices(s) for s in shape]
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        active = mags.max(axis=other) > thresh
        max_mode = int(np.abs(freqs[axis][active]).max()) if active.any() else 0
        if max_mode > 0 and torus_shape[axis] < 8 * n:
            raise ValueError(
                f"fewer than 8 grid points per oscillation period on axis {axis}"
            )

    keep = [np.abs(n * fr) <= (ts - 1) // 2 for fr, ts in zip(freqs, torus_shape)]
    keep_mask = keep[0][:, None, None] & keep[1][None, :, None] & keep[2][None, None, :]
    total = np.linalg.norm(hat.ravel())
    dropped = np.linalg.norm((hat * ~keep_mask).ravel())
    if total > 0 and dropped > drop_tol * total:
        raise ValueError(
            f"torus grid too coarse: dropping {dropped / total:.2e} of the "
            "field's spectral weight"
        )

    out = np.zeros(hat.shape[:-3] + torus_shape, dtype=complex)
    dst = [(n * fr) % ts for fr, ts in zip(freqs, torus_shape)]
    sel = np.ix_(*[np.where(k)[0] for k in keep])
    dsel = np.ix_(*[d[k] for d, k in zip(dst, keep)])
    out[(Ellipsis,) + dsel] = hat[(Ellipsis,) + sel]
    return to_grid(out).real


class TorusProblem:
    """Oscillating Maxwell problem on one lattice cell with eps = 1/n."""

    def __init__(self, coeffs, n, grid_shape):
        self.coeffs = coeffs
        self.n = int(n)
        self.eps = 1.0 / self.n
        self.shape = tuple(grid_shape)
        self.lattice = coeffs.lattice
        self.K = wavevectors(self.lattice, self.shape)
        self.eta_eps = scale_to_torus(coeffs.eta.hat, self.n, self.shape)
        self.eta_eps_inv = np.moveaxis(
            np.linalg.inv(np.moveaxis(self.eta_eps, (0, 1), (-2, -1))), (-2, -1), (0, 1)
        )
        self.mu0 = coeffs.mu0
        self.mu0_inv = coeffs.mu0_inv

    def curl_flux(self, v):
        """(eta^eps)^{-1} curl v for grid values v (real)."""
        v_hat = to_fourier(v)
        curl = to_grid(1j * np.cross(self.K, v_hat, axis=0)).real
        return np.einsum("ab...,b...->a...", self.eta_eps_inv, curl)

    def accel(self, v):
        """-mu0^{-1} curl (eta^eps)^{-1} curl v."""
        flux_hat = to_fourier(self.curl_flux(v))
        curl2 = to_grid(1j * np.cross(self.K, flux_hat, axis=0)).real
        return -np.einsum("ab,b...->a...", self.mu0_inv, curl2)

    def clean_divergence(self, v):
        """Remove the weighted-gradient part of v so that div(mu0 v) = 0.

        The exact flow preserves div(mu0 v); in the leapfrog recurrence
        any roundoff injected into that component grows linearly in time,
        so the update is re-projected each step."""
        v_hat = to_fourier(np.asarray(v, dtype=float))
        K = self.K
        mu_v = np.einsum("ab,b...->a...", self.mu0, v_hat)
        num = np.einsum("a...,a...->...", K, mu_v)
        den = np.einsum("a...,ab,bc,c...->...", K, self.mu0, self.mu0, K)
        with np.errstate(divide="ignore", invalid="ignore"):
            omega = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        v_hat = v_hat - np.einsum("ab,b...->a...", self.mu0, K * omega[None])
        return to_grid(v_hat).real

    def cfl_dt(self, factor=0.2):
        spacings = [
            np.linalg.norm(self.lattice.basis[j]) / self.shape[j] for j in range(3)
        ]
        return factor * min(spacings) / np.sqrt(self.coeffs.c1)

    def norm_l2(self, values):
        npts = np.prod(self.shape)
        return float(
            np.sqrt(self.lattice.cell_volume / npts * np.sum(np.abs(values) ** 2))
        )


class FieldState:
    """Fields at a fixed time: magnetic intensity v, its time derivative,
    the flux (eta^eps)^{-1} curl v, and the accumulated increments of the
    electric intensity u and of the displacement fields w, z."""

    def __init__(self, v, v_dot, flux, u_delta, w_delta, diagnostics):
        self.v = v
        self.v_dot = v_dot
        self.flux = flux
        self.u_delta = u_delta
        self.w_delta = w_delta
        self.diagnostics = diagnostics


def propagate_eps(problem, phi, f, tau, dt=None, energy_guard=1e-3):
    """Leapfrog integration of the oscillating problem up to time tau.

    Initial data are assumed weighted-divergence-free (div mu0 phi = 0);
    each update is re-projected onto that subspace, which the exact flow
    preserves.  Returns a FieldState; ``diagnostics`` holds the relative
    drift of the conserved discrete energy and the maximum of
    ||div mu0 v|| over the run.  A drift beyond ``energy_guard`` raises."""
    if dt is None:
        dt = problem.cfl_dt()
    nsteps = max(1, int(np.ceil(tau / dt)))
    dt = tau / nsteps

    K = problem.K
    f_hat = to_fourier(np.asarray(f, dtype=float))
    psi = to_grid(-1j * np.cross(K, f_hat, axis=0)).real
    v = np.asarray(phi, dtype=float).copy()
    v_dot0 = np.einsum("ab,b...->a...", problem.mu0_inv, psi)

    a0 = problem.accel(v)
    v_prev = v
    v = problem.clean_divergence(v + dt * v_dot0 + 0.5 * dt ** 2 * a0)

    # running trapezoid integral of the flux: u_eps(tau) - u_eps(0)
    flux_prev = problem.curl_flux(v_prev)
    u_delta = 0.5 * dt * flux_prev
    curl_prev = np.einsum("ab...,b...->a...", problem.eta_eps, flux_prev)
    w_delta = 0.5 * dt * curl_prev

    energy0 = None
    energy_drift = 0.0
    div_max = 0.0
    vol_w = problem.lattice.cell_volume / np.prod(problem.shape)

    for step in range(1, nsteps + 1):
        flux = problem.curl_flux(v)
        weight = 1.0 if step < nsteps else 0.5
        u_delta += weight * dt * flux
        curl_v = np.einsum("ab...,b...->a...", problem.eta_eps, flux)
        w_delta += weight * dt * curl_v

        # leapfrog-conserved energy at the half step behind v
        dv = (v - v_prev) / dt
        kinetic = 0.5 * vol_w * np.sum(dv * np.einsum("ab,b...->a...", problem.mu0, dv))
        potential = 0.5 * vol_w * np.sum(curl_prev * flux)
        energy = kinetic + potential
        if energy0 is None:
            energy0 = energy
        energy_drift = max(energy_drift, abs(energy - energy0) / abs(energy0))
        if energy_drift > energy_guard:
            raise RuntimeError(
                f"energy drift {energy_drift:.3e} exceeds guard {energy_guard:.1e}"
            )

        v_hat = to_fourier(v)
        div_mu_v = 1j * np.einsum(
            "a...,ab,b...->...", K, problem.mu0, v_hat
        )
        div_max = max(
            div_max,
            float(np.linalg.norm(div_mu_v.ravel()) / max(np.linalg.norm(v_hat.ravel()), 1e-300)),
        )

        if step < nsteps:
            accel = -np.einsum(
                "ab,b...->a...",
                problem.mu0_inv,
                to_grid(1j * np.cross(K, to_fourier(flux), axis=0)).real,
            )
            v_next = problem.clean_divergence(2.0 * v - v_prev + dt ** 2 * accel)
            v_prev, v = v, v_next
            flux_prev, curl_prev = flux, curl_v
        else:
            v_dot = (v - v_prev) / dt  # midpoint derivative, first order only
            diagnostics = {
                "energy_drift": energy_drift,
                "div_mu0_v_max": div_max,
                "dt": dt,
                "nsteps": nsteps,
            }
            return FieldState(v, v_dot, flux, u_delta, w_delta, diagnostics)


def _sym_eigh_per_mode(coeffs, lattice, shape, eta0, nu_eff):
    """Eigendecomposition of the homogenized 3x3 symbol S(K) per mode."""
    K = wavevectors(lattice, shape)
    b = symbol_b(K, coeffs.mu0_inv_sqrt, coeffs.mu0_sqrt)  # (4, 3, N..)
    g0 = np.zeros((4, 4))
    g0[:3, :3] = np.linalg.inv(eta0)
    g0[3, 3] = nu_eff
    s = np.einsum("ba...,bc,cd...->...ad", b, g0, b)  # real symmetric
    w, vmat = np.linalg.eigh(s)
    return K, np.clip(w, 0.0, None), vmat


def _apply_modefunc(w, vmat, vec_hat, func):
    """func(S) applied per mode to vec_hat of shape (3, N...)."""
    coef = np.einsum("...ab,a...->...b", np.conj(vmat), vec_hat)
    coef = func(w) * coef
    return np.einsum("...ab,...b->a...", vmat, coef)


def propagate_homogenized(coeffs, eta0, nu_eff, shape, phi, f, tau):
    """Exact per-mode solution of the homogenized problem at time tau.

    Returns a FieldState with v0(tau), its time derivative, the flux
    (eta0)^{-1} curl v0, and the closed-form increments of u0 and w0."""
    lattice = coeffs.lattice
    K, w, vmat = _sym_eigh_per_mode(coeffs, lattice, shape, eta0, nu_eff)

    phi_hat = to_fourier(np.asarray(phi, dtype=float))
    f_hat = to_fourier(np.asarray(f, dtype=float))
    psi_hat = -1j * np.cross(K, f_hat, axis=0)

    z0 = np.einsum("ab,b...->a...", coeffs.mu0_sqrt, phi_hat)
    zdot0 = np.einsum("ab,b...->a...", coeffs.mu0_inv_sqrt, psi_hat)

    sqw = np.sqrt(w)
    cos_t = np.cos(tau * sqw)
    sinc_t = tau * np.sinc(tau * sqw / np.pi)
    small = w < 1e-12
    cos_int = np.where(
        small, 0.5 * tau ** 2 * (1.0 - w * tau ** 2 / 12.0), (1.0 - cos_t) / np.where(small, 1.0, w)
    )

    z_tau = _apply_modefunc(w, vmat, z0, lambda _: cos_t) + _apply_modefunc(
        w, vmat, zdot0, lambda _: sinc_t
    )
    zdot_tau = -_apply_modefunc(w, vmat, z0, lambda _: w * sinc_t) + _apply_modefunc(
        w, vmat, zdot0, lambda _: cos_t
    )
    z_int = _apply_modefunc(w, vmat, z0, lambda _: sinc_t) + _apply_modefunc(
        w, vmat, zdot0, lambda _: cos_int
    )

    v_hat = np.einsum("ab,b...->a...", coeffs.mu0_inv_sqrt, z_tau)
    v_dot_hat = np.einsum("ab,b...->a...", coeffs.mu0_inv_sqrt, zdot_tau)
    v_int_hat = np.einsum("ab,b...->a...", coeffs.mu0_inv_sqrt, z_int)

    curl_int = 1j * np.cross(K, v_int_hat, axis=0)
    eta0_inv = np.linalg.inv(eta0)
    u_delta_hat = np.einsum("ab,b...->a...", eta0_inv, curl_int)
    curl_v = 1j * np.cross(K, v_hat, axis=0)
    flux = np.einsum("ab,b...->a...", eta0_inv, curl_v)

    return FieldState(
        v=to_grid(v_hat).real,
        v_dot=to_grid(v_dot_hat).real,
        flux=to_grid(flux).real,
        u_delta=to_grid(u_delta_hat).real,
        w_delta=to_grid(curl_int).real,
        diagnostics={"modes": int(np.prod(shape))},
    )


def project_weighted(lattice, shape, f, eta=None, eta0=None, tol=1e-10, maxiter=5000):
    """Remove the weighted gradient part of f: returns f - grad omega with
    div(eta (f - grad omega)) = 0.

    Pass ``eta`` (grid values, 3x3 pointwise) for a variable weight
    (iterative solve) or ``eta0`` (constant matrix) for the direct one."""
    f = np.asarray(f, dtype=float)
    K = wavevectors(lattice, shape)
    f_hat = to_fourier(f)
    if eta0 is not None:
        quad = np.einsum("a...,ab,b...->...", K, np.asarray(eta0), K)
        rhs = 1j * np.einsum("a...,ab,b...->...", K, np.asarray(eta0), f_hat)
        with np.errstate(divide="ignore", invalid="ignore"):
            omega_hat = np.where(quad > 0, rhs / np.where(quad > 0, quad, 1.0), 0.0)
        # sign: div(eta0 grad omega) = div(eta0 f) <=> -quad*omega = i K.eta0 f
        omega_hat = -omega_hat
        return f - to_grid(1j * K * omega_hat[None]).real

    eta = np.asarray(eta)
    # Zero the derivative on unpaired Nyquist modes: K(-m) = -K(m) fails
    # there, which would break conjugation symmetry of the operator and
    # leave the solve with a spurious imaginary part.
    Kd = K.copy()
    for axis, n in enumerate(shape):
        if n % 2 == 0:
            idx = [slice(None)] * 3
            idx[axis] = n // 2
            Kd[(slice(None),) + tuple(idx)] = 0.0

    def apply_a(omega_hat):
        grad = to_grid(1j * Kd * omega_hat[None])
        flux = np.einsum("ab...,b...->a...", eta, grad)
        out = -1j * np.einsum("a...,a...->...", Kd, to_fourier(flux))
        out[0, 0, 0] = 0.0
        return out

    flux_f = np.einsum("ab...,b...->a...", eta, f)
    rhs = -1j * np.einsum("a...,a...->...", Kd, to_fourier(flux_f))
    rhs[0, 0, 0] = 0.0
    scale = float(np.einsum("aa...", eta).mean() / 3.0)
    k2 = np.sum(Kd ** 2, axis=0)
    with np.errstate(divide="ignore"):
        prec = np.where(k2 > 0, 1.0 / (scale * k2), 0.0)
    omega_hat = pcg(apply_a, rhs, lambda r: prec * r, tol=tol, maxiter=maxiter)
    return f - to_grid(1j * Kd * omega_hat[None]).real


def smoothing_mask(lattice, shape, eps, window=2):
    """Boolean mask over Fourier modes keeping those whose scaled
    wavevector eps*K lies strictly inside the central Brillouin zone
    (closer to 0 than to any nonzero dual lattice vector)."""
    K = wavevectors(lattice, shape)
    scaled = eps * K
    k2 = np.sum(scaled ** 2, axis=0)
    mask = np.ones(shape, dtype=bool)
    rng = range(-window, window + 1)
    for q1 in rng:
        for q2 in rng:
            for q3 in rng:
                if (q1, q2, q3) == (0, 0, 0):
                    continue
                bvec = lattice.dual_vector((q1, q2, q3))
                shifted = np.sum(
                    (scaled - bvec[:, None, None, None]) ** 2, axis=0
                )
                mask &= k2 < shifted
    return mask


def apply_smoothing(lattice, shape, eps, values):
    """Sharp spectral cutoff of grid values to the scaled Brillouin zone."""
    mask = smoothing_mask(lattice, shape, eps)
    hat = to_fourier(np.asarray(values, dtype=float)) * mask
    return to_grid(hat).real


class CorrectorOnTorus:
    """Cell correctors rescaled to x/eps on the torus grid."""

    def __init__(self, corr, n, shape):
        self.corr = corr
        self.n = n
        self.shape = tuple(shape)
        lattice = corr.lattice
        self.lattice = lattice
        self.eps = 1.0 / n
        self.psi = scale_to_torus(to_fourier(corr.psi), n, shape)
        self.sigma = scale_to_torus(to_fourier(corr.sigma), n, shape)
        self.sigma_circ = scale_to_torus(to_fourier(corr.sigma_circ), n, shape)
        self.eta_tilde = scale_to_torus(to_fourier(corr.eta_tilde), n, shape)
        self.eta0 = corr.eta0
        self.eta0_inv = corr.eta0_inv
        self.mu0_inv = corr.coeffs.mu0_inv

    def _maybe_smooth(self, values, smoothed):
        if not smoothed:
            return np.asarray(values, dtype=float)
        return apply_smoothing(self.lattice, self.shape, self.eps, values)

    def corrected_v(self, v0, smoothed=False):
        """v0 + eps mu0^{-1} Psi^eps curl v0 (optionally smoothed)."""
        K = wavevectors(self.lattice, self.shape)
        curl_v0 = to_grid(1j * np.cross(K, to_fourier(v0), axis=0)).real
        curl_v0 = self._maybe_smooth(curl_v0, smoothed)
        corr_term = np.einsum(
            "ab,bj...,j...->a...", self.mu0_inv, self.psi, curl_v0
        )
        return v0 + self.eps * corr_term

    def corrected_flux(self, v0, smoothed=False):
        """((eta0)^{-1} + Sigma^eps) curl v0."""
        K = wavevectors(self.lattice, self.shape)
        curl_v0 = to_grid(1j * np.cross(K, to_fourier(v0), axis=0)).real
        base = np.einsum("ab,b...->a...", self.eta0_inv, curl_v0)
        curl_s = self._maybe_smooth(curl_v0, smoothed)
        return base + np.einsum("aj...,j...->a...", self.sigma, curl_s)

    def corrected_u(self, u0_delta, smoothed=False):
        """(1 + Sigma_circ^eps) (u0(tau) - u0(0))."""
        u_s = self._maybe_smooth(u0_delta, smoothed)
        return u0_delta + np.einsum("aj...,j...->a...", self.sigma_circ, u_s)

    def corrected_w(self, w0_delta, smoothed=False):
        """eta_tilde^eps (eta0)^{-1} (w0(tau) - w0(0)); with smoothing the
        deviation from the identity acts on the filtered field."""
        mat = np.einsum("ab...,bc->ac...", self.eta_tilde, self.eta0_inv)
        if not smoothed:
            return np.einsum("ab...,b...->a...", mat, w0_delta)
        w_s = self._maybe_smooth(w0_delta, smoothed)
        dev = mat - np.eye(3)[..., None, None, None]
        return w0_delta + np.einsum("ab...,b...->a...", dev, w_s)
