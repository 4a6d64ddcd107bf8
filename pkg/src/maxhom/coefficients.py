"""Material coefficient sets and the constants derived from them.

A coefficient set bundles a periodic symmetric positive matrix field
eta(x), a periodic positive scalar field nu(x), and a constant symmetric
positive matrix mu0.  The combined coefficient of the second-order
operator is the 4x4 block matrix g(x) = diag(eta(x)^{-1}, nu(x)).
"""

import numpy as np
from scipy.linalg import sqrtm

from .fields import PeriodicField, grid_points
from .lattice import cubic_lattice


def matrix_field_norm_inf(values):
    """Essential sup of the pointwise spectral norm of a matrix field."""
    vals = np.moveaxis(values.reshape(3, 3, -1), (0, 1), (-2, -1))
    return float(np.linalg.norm(vals, ord=2, axis=(-2, -1)).max())


def pointwise_inverse(values):
    vals = np.moveaxis(values, (0, 1), (-2, -1))
    inv = np.linalg.inv(vals)
    return np.moveaxis(inv, (-2, -1), (0, 1))


def matrix_mean(field):
    """Plain cell average of a matrix field."""
    return field.mean()


def harmonic_matrix_mean(field):
    """Inverse of the cell average of the pointwise inverse."""
    inv = pointwise_inverse(field.values)
    return np.linalg.inv(inv.mean(axis=(-3, -2, -1)))


class CoefficientSet:
    def __init__(self, lattice, eta, nu, mu0):
        """eta: PeriodicField (3,3,...); nu: PeriodicField scalar; mu0: (3,3)."""
        self.lattice = lattice
        self.eta = eta
        self.nu = nu
        self.mu0 = np.asarray(mu0, dtype=float)
        self._check()
        self.mu0_inv = np.linalg.inv(self.mu0)
        self.mu0_sqrt = np.real(sqrtm(self.mu0))
        self.mu0_inv_sqrt = np.linalg.inv(self.mu0_sqrt)

    def _check(self):
        if self.mu0.shape != (3, 3) or not np.allclose(self.mu0, self.mu0.T):
            raise ValueError("mu0 must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(self.mu0).min() <= 0:
            raise ValueError("mu0 must be positive definite")
        ev = self.eta.values
        if not np.allclose(ev, np.swapaxes(ev, 0, 1), atol=1e-12 * abs(ev).max()):
            raise ValueError("eta must be symmetric pointwise")
        w = np.linalg.eigvalsh(np.moveaxis(ev, (0, 1), (-2, -1)))
        if w.min() <= 0:
            raise ValueError("eta must be positive definite pointwise")
        if self.nu.values.min() <= 0:
            raise ValueError("nu must be positive pointwise")

    # ---- bounds and constants -------------------------------------------

    @property
    def norm_eta(self):
        return matrix_field_norm_inf(self.eta.values)

    @property
    def norm_eta_inv(self):
        return matrix_field_norm_inf(pointwise_inverse(self.eta.values))

    @property
    def norm_g(self):
        return max(self.norm_eta_inv, float(self.nu.values.max()))

    @property
    def norm_g_inv(self):
        return max(self.norm_eta, float(1.0 / self.nu.values.min()))

    @property
    def alpha0(self):
        n = np.linalg.norm(self.mu0, 2)
        ninv = np.linalg.norm(self.mu0_inv, 2)
        return min(1.0 / n, 1.0 / ninv)

    @property
    def alpha1(self):
        return np.linalg.norm(self.mu0, 2) + np.linalg.norm(self.mu0_inv, 2)

    @property
    def c0(self):
        return self.alpha0 / self.norm_g_inv

    @property
    def c1(self):
        return self.alpha1 * self.norm_g

    @property
    def delta(self):
        """Spectral threshold: the three lowest fiber eigenvalues stay
        below delta for small quasimomentum, the rest stay above 3*delta."""
        return 0.25 * self.lattice.r0 ** 2 * self.c0

    @property
    def t0(self):
        """Quasimomentum radius on which the threshold picture is uniform."""
        return (
            0.5
            * self.lattice.r0
            * np.sqrt(self.alpha0 / self.alpha1)
            / np.sqrt(self.norm_g * self.norm_g_inv)
        )

    def nu_mean_harm(self):
        """Harmonic mean of nu (the effective scalar coefficient)."""
        return float(1.0 / (1.0 / self.nu.values).mean())

    def eta_mean(self):
        return self.eta.mean()

    def eta_mean_harm(self):
        return harmonic_matrix_mean(self.eta)


# ---- coefficient families -----------------------------------------------


def from_callables(lattice, shape, eta_fn, nu_fn, mu0):
    """Sample eta(x), nu(x) on the cell grid.  eta_fn maps an array of
    points with shape (3, ...) to matrix values (3, 3, ...)."""
    x = grid_points(lattice, shape)
    eta = PeriodicField(lattice, np.asarray(eta_fn(x), dtype=float))
    nu = PeriodicField(lattice, np.asarray(nu_fn(x), dtype=float))
    return CoefficientSet(lattice, eta, nu, mu0)


def constant_set(shape=(4, 4, 4), eta=None, nu=1.0, mu0=None, lattice=None):
    lattice = lattice or cubic_lattice()
    eta = np.eye(3) if eta is None else np.asarray(eta, dtype=float)
    mu0 = np.eye(3) if mu0 is None else np.asarray(mu0, dtype=float)
    return from_callables(
        lattice,
        shape,
        lambda x: np.broadcast_to(eta[..., None, None, None], (3, 3) + x.shape[1:]).copy(),
        lambda x: np.full(x.shape[1:], float(nu)),
        mu0,
    )


def _ones_like_grid(x):
    return np.ones(x.shape[1:])


def layered_set(eta_entries, nu_fn=None, mu0=None, shape=(64, 4, 4), lattice=None):
    """Coefficients depending on x1 only (stratified medium).

    ``eta_entries`` is a callable s -> (3, 3, ...) matrix values, where s
    is the first Cartesian coordinate.
    """
    lattice = lattice or cubic_lattice()
    nu_fn = nu_fn or (lambda s: np.ones_like(s))
    mu0 = np.eye(3) if mu0 is None else np.asarray(mu0, dtype=float)
    return from_callables(
        lattice,
        shape,
        lambda x: eta_entries(x[0]),
        lambda x: nu_fn(x[0]),
        mu0,
    )


def layered_isotropic(shape=(64, 4, 4), mu0=None, frequency=1):
    """eta = (2 + sin(frequency*x1)) * I, nu likewise; cubic cell 2*pi.

    Closed forms: the effective matrix is diag(sqrt(3), 2, 2) and the
    effective scalar coefficient is sqrt(3) (harmonic mean of 2 + sin).
    ``frequency`` > 1 packs several coefficient periods into one cell,
    which widens the scale separation from the data at moderate 1/eps."""

    def eta(s):
        a = 2.0 + np.sin(frequency * s)
        return np.eye(3)[..., None, None, None] * a

    return layered_set(
        eta, nu_fn=lambda s: 2.0 + np.sin(frequency * s), mu0=mu0, shape=shape
    )


def layered_divergence_free(shape=(64, 4, 4), c=1.5):
    """eta = diag(c, b(x1), b(x1)) with b = 2 + sin x1.

    The columns of eta are divergence free, so the auxiliary potentials
    vanish and the effective matrix is the plain mean diag(c, 2, 2)."""

    def eta(s):
        b = 2.0 + np.sin(s)
        out = np.zeros((3, 3) + s.shape)
        out[0, 0] = c
        out[1, 1] = b
        out[2, 2] = b
        return out

    return layered_set(eta, shape=shape)


def layered_harmonic(shape=(64, 4, 4), c=0.8):
    """eta = diag(a(x1), 1/c, 1/c) with a = 2 + sin x1.

    Here the effective matrix coincides with the harmonic mean
    diag(sqrt(3), 1/c, 1/c)."""

    def eta(s):
        a = 2.0 + np.sin(s)
        out = np.zeros((3, 3) + s.shape)
        out[0, 0] = a
        out[1, 1] = 1.0 / c
        out[2, 2] = 1.0 / c
        return out

    return layered_set(eta, shape=shape)


def layered_coupled(shape=(64, 4, 4), c12=0.45, mu0=None, nu_fn=None):
    """Stratified medium with off-diagonal coupling between the first two
    axes.  Generic representative of the class where the cubic branch
    corrections at a spectral crossing do not vanish."""

    def eta(s):
        out = np.zeros((3, 3) + s.shape)
        out[0, 0] = 1.2 + 0.4 * np.sin(s)
        out[1, 1] = 2.5 + 1.0 * np.sin(s)
        out[2, 2] = 0.7 + 0.2 * np.cos(s)
        out[0, 1] = out[1, 0] = c12 * (1.0 + 0.5 * np.cos(s))
        return out

    return layered_set(eta, nu_fn=nu_fn, mu0=mu0, shape=shape)


def ball_inclusion(shape=(48, 48, 48), kappa=5.0, vartheta=0.3, smooth_cells=2.0):
    """Isotropic two-phase ball-in-shell medium on the cubic cell of
    period 2*pi, centered at the cell midpoint.

    Scalar profile: kappa inside the ball of volume fraction
    ``vartheta`` of the unit ball, 1 in the remaining unit ball, and
    1 + 3*vartheta*(kappa - 1) / (3 + (1 - vartheta)*(kappa - 1)) outside;
    the outer value makes the medium behave like a homogeneous one at
    leading order.  The jumps are mollified over ``smooth_cells`` grid
    cells so that spectral evaluation converges under refinement."""
    lattice = cubic_lattice()
    r_in = vartheta ** (1.0 / 3.0)
    outer = 1.0 + 3.0 * vartheta * (kappa - 1.0) / (3.0 + (1.0 - vartheta) * (kappa - 1.0))
    width = smooth_cells * 2.0 * np.pi / min(shape)

    def profile(x):
        r = np.sqrt(np.sum((x - np.pi) ** 2, axis=0))
        # smooth step from `a` (r < r0) to `b` (r > r0)
        def step(r0, a, b):
            t = 0.5 * (1.0 + np.tanh((r - r0) / width))
            return a + (b - a) * t

        inner = step(r_in, kappa, 1.0)
        return step(1.0, inner, outer)

    return from_callables(
        lattice,
        shape,
        lambda x: np.eye(3)[..., None, None, None] * profile(x),
        lambda x: np.ones(x.shape[1:]),
        np.eye(3),
    )


def random_spd(seed, shape=(16, 16, 16), degree=1, contrast=0.6, mu0=None):
    """Seeded random trigonometric coefficients, positive by construction.

    eta(x) = A + sum of symmetric cosine modes whose total amplitude is a
    fraction ``contrast`` of the smallest eigenvalue of the base matrix A.
    """
    rng = np.random.default_rng(seed)
    lattice = cubic_lattice()
    base = rng.normal(size=(3, 3))
    base = base @ base.T + 3.0 * np.eye(3)
    modes = []
    for m in _nonzero_modes(degree):
        amp = rng.normal(size=(3, 3))
        amp = 0.5 * (amp + amp.T)
        phase = rng.uniform(0, 2 * np.pi)
        modes.append((np.asarray(m, dtype=float), amp, phase))
    total = sum(np.linalg.norm(a, 2) for _, a, _ in modes)
    scale = contrast * np.linalg.eigvalsh(base).min() / max(total, 1e-300)

    nu_base = 1.0 + rng.uniform(0.0, 2.0)
    nu_modes = [
        (np.asarray(m, dtype=float), rng.normal(), rng.uniform(0, 2 * np.pi))
        for m in _nonzero_modes(degree)
    ]
    nu_total = sum(abs(a) for _, a, _ in nu_modes)
    nu_scale = contrast * nu_base / max(nu_total, 1e-300)

    def eta_fn(x):
        out = np.broadcast_to(base[..., None, None, None], (3, 3) + x.shape[1:]).copy()
        for m, amp, phase in modes:
            c = np.cos(np.einsum("a,a...->...", m, x) + phase)
            out += scale * amp[..., None, None, None] * c
        return out

    def nu_fn(x):
        out = np.full(x.shape[1:], nu_base)
        for m, a, phase in nu_modes:
            out += nu_scale * a * np.cos(np.einsum("a,a...->...", m, x) + phase)
        return out

    if mu0 is None:
        q = rng.normal(size=(3, 3))
        mu0 = q @ q.T + 3.0 * np.eye(3)
    return from_callables(lattice, shape, eta_fn, nu_fn, mu0)


def _nonzero_modes(degree):
    out = []
    for m1 in range(-degree, degree + 1):
        for m2 in range(-degree, degree + 1):
            for m3 in range(-degree, degree + 1):
                m = (m1, m2, m3)
                if m == (0, 0, 0):
                    continue
                # keep one representative of each +/- pair (cosine is even)
                if m < (0, 0, 0):
                    continue
                out.append(m)
    return out


FAMILIES = {
    "constant": constant_set,
    "layered_isotropic": layered_isotropic,
    "layered_divergence_free": layered_divergence_free,
    "layered_harmonic": layered_harmonic,
    "layered_coupled": layered_coupled,
    "ball_inclusion": ball_inclusion,
    "random_spd": random_spd,
}
