"""Periodic fields on a lattice cell, stored on uniform grids.

Conventions
-----------
A field is sampled on an N1 x N2 x N3 grid of the elementary cell,
x(n) = (n1/N1) a_1 + (n2/N2) a_2 + (n3/N3) a_3.  Component axes (if any)
come first, the three grid axes last.  Fourier coefficients use the
normalized transform

    fhat(m) = (1/N) sum_n f(x(n)) exp(-2*pi*i <m, n/N>),

so that f(x) = sum_m fhat(m) exp(i <K_m, x>) with K_m = m1 b_1 + m2 b_2 +
m3 b_3, and fhat(0) is the cell mean.  Parseval: ||f||_{L2}^2 =
|cell| * sum |fhat|^2.
"""

import numpy as np


def freq_indices(n):
    """Integer mode numbers in FFT order for an n-point axis."""
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def to_fourier(values):
    """Grid samples -> normalized Fourier coefficients (last 3 axes)."""
    values = np.asarray(values)
    npts = np.prod(values.shape[-3:])
    return np.fft.fftn(values, axes=(-3, -2, -1)) / npts


def to_grid(hat):
    """Normalized Fourier coefficients -> grid samples (complex)."""
    hat = np.asarray(hat)
    npts = np.prod(hat.shape[-3:])
    return np.fft.ifftn(hat * npts, axes=(-3, -2, -1))


def wavevectors(lattice, shape):
    """Array K of shape (3, N1, N2, N3): K[:, m] = m1 b_1 + m2 b_2 + m3 b_3."""
    m1, m2, m3 = np.meshgrid(
        freq_indices(shape[0]),
        freq_indices(shape[1]),
        freq_indices(shape[2]),
        indexing="ij",
    )
    b = lattice.dual_basis
    return (
        m1[None] * b[0][:, None, None, None]
        + m2[None] * b[1][:, None, None, None]
        + m3[None] * b[2][:, None, None, None]
    )


def grid_points(lattice, shape):
    """Array X of shape (3, N1, N2, N3) with the cell sample points."""
    f1, f2, f3 = [np.arange(n) / n for n in shape]
    t1, t2, t3 = np.meshgrid(f1, f2, f3, indexing="ij")
    a = lattice.basis
    return (
        t1[None] * a[0][:, None, None, None]
        + t2[None] * a[1][:, None, None, None]
        + t3[None] * a[2][:, None, None, None]
    )


def _axis_slots(n, n_pad):
    """Positions of the n FFT modes inside an n_pad-point axis."""
    return freq_indices(n) % n_pad


def pad_hat(hat, pad_shape):
    """Embed Fourier coefficients into a finer grid (zero-padding)."""
    hat = np.asarray(hat)
    shape = hat.shape[-3:]
    out = np.zeros(hat.shape[:-3] + tuple(pad_shape), dtype=complex)
    s1, s2, s3 = [_axis_slots(n, p) for n, p in zip(shape, pad_shape)]
    out[..., s1[:, None, None], s2[None, :, None], s3[None, None, :]] = hat
    return out


def truncate_hat(hat_pad, shape):
    """Keep only the modes representable on the coarser grid."""
    hat_pad = np.asarray(hat_pad)
    pad_shape = hat_pad.shape[-3:]
    s1, s2, s3 = [_axis_slots(n, p) for n, p in zip(shape, pad_shape)]
    return hat_pad[..., s1[:, None, None], s2[None, :, None], s3[None, None, :]]


def resample_hat(hat, new_shape):
    """Move Fourier coefficients to a grid of a different size, padding
    with zeros or discarding the modes that do not fit, per axis."""
    hat = np.asarray(hat)
    old = hat.shape[-3:]
    keep = [min(o, n) for o, n in zip(old, new_shape)]
    src = [freq_indices(k) % o for k, o in zip(keep, old)]
    dst = [freq_indices(k) % n for k, n in zip(keep, new_shape)]
    out = np.zeros(hat.shape[:-3] + tuple(new_shape), dtype=complex)
    out[..., dst[0][:, None, None], dst[1][None, :, None], dst[2][None, None, :]] = hat[
        ..., src[0][:, None, None], src[1][None, :, None], src[2][None, None, :]
    ]
    return out


def dealias_shape(shape):
    """3/2-rule padded grid shape for alias-free quadratic products."""
    return tuple(-(-3 * n // 2) for n in shape)


class PeriodicField:
    """A (scalar / vector / matrix valued) periodic field on a lattice cell.

    Stores grid samples; Fourier coefficients are computed lazily and
    cached.  ``values.shape[:-3]`` is the component shape, e.g. () for a
    scalar, (3,) for a vector, (3, 3) for a matrix field.
    """

    def __init__(self, lattice, values):
        values = np.asarray(values)
        if values.ndim < 3:
            raise ValueError("field values need three trailing grid axes")
        self.lattice = lattice
        self.values = values
        self._hat = None

    @classmethod
    def from_fourier(cls, lattice, hat, real=True):
        vals = to_grid(hat)
        if real:
            vals = vals.real
        f = cls(lattice, vals)
        if not real:
            f._hat = np.asarray(hat, dtype=complex)
        return f

    @property
    def grid_shape(self):
        return self.values.shape[-3:]

    @property
    def comp_shape(self):
        return self.values.shape[:-3]

    @property
    def hat(self):
        if self._hat is None:
            self._hat = to_fourier(self.values)
        return self._hat

    def mean(self):
        """Cell average (zeroth Fourier coefficient)."""
        return self.values.mean(axis=(-3, -2, -1))

    def wavevectors(self):
        return wavevectors(self.lattice, self.grid_shape)

    def norm_l2(self):
        vol = self.lattice.cell_volume
        npts = np.prod(self.grid_shape)
        return float(np.sqrt(vol / npts * np.sum(np.abs(self.values) ** 2)))

    def norm_hs(self, s):
        """Sobolev norm of order s, computed spectrally."""
        k2 = np.sum(self.wavevectors() ** 2, axis=0)
        w = (1.0 + k2) ** s
        sq = np.sum(np.abs(self.hat) ** 2, axis=tuple(range(len(self.comp_shape))))
        return float(np.sqrt(self.lattice.cell_volume * np.sum(w * sq)))

    def hermitian_defect(self):
        """Deviation of the coefficients from the real-field symmetry
        fhat(-m) = conj(fhat(m)), relative to the field size."""
        hat = self.hat
        flipped = hat.copy()
        for ax in (-3, -2, -1):
            flipped = np.flip(flipped, axis=ax)
            flipped = np.roll(flipped, 1, axis=ax)
        num = np.linalg.norm((hat - np.conj(flipped)).ravel())
        den = max(np.linalg.norm(hat.ravel()), 1e-300)
        return float(num / den)


def norm_l2(lattice, values):
    return PeriodicField(lattice, values).norm_l2()


def norm_hs(lattice, values, s):
    return PeriodicField(lattice, values).norm_hs(s)


class DealiasedMultiplier:
    """Pointwise multiplication by a fixed coefficient, alias-controlled.

    The coefficient is sampled once on a 3/2-padded grid; ``apply`` takes
    Fourier coefficients on the working grid, pads, multiplies in physical
    space and truncates back.  For a Hermitian (real symmetric positive)
    coefficient this composite operator is exactly Hermitian on the
    working grid.
    """

    def __init__(self, coeff_hat, work_shape, pad=True):
        self.work_shape = tuple(work_shape)
        self.pad_shape = dealias_shape(work_shape) if pad else self.work_shape
        self.coeff = to_grid(pad_hat(coeff_hat, self.pad_shape)).real

    def apply(self, hat):
        """hat: (..., 3 grid axes) with component axes contracted against
        the coefficient's trailing component axis if the coefficient is a
        matrix field."""
        big = to_grid(pad_hat(hat, self.pad_shape))
        if self.coeff.ndim == 3:  # scalar coefficient
            prod = self.coeff * big
        elif self.coeff.ndim == 5:  # matrix coefficient acting on a vector
            prod = np.einsum("ab...,b...->a...", self.coeff, big)
        else:
            raise ValueError("coefficient must be scalar or matrix valued")
        return truncate_hat(to_fourier(prod), self.work_shape)
