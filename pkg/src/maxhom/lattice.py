"""Lattices in R^3, their dual lattices, and the first-order symbol.

A lattice is given by three basis vectors a_1, a_2, a_3 (rows of ``basis``).
The dual basis b_1, b_2, b_3 satisfies <b_i, a_j> = 2*pi*delta_ij.  The
elementary cell has volume |det(basis)|.
"""

import itertools

import numpy as np


class Lattice:
    """Periodicity lattice with its dual and basic geometric constants.

    Attributes
    ----------
    basis : (3, 3) ndarray
        Rows are the primitive vectors a_1, a_2, a_3.
    dual_basis : (3, 3) ndarray
        Rows are the dual primitive vectors b_1, b_2, b_3.
    cell_volume : float
        Volume of the elementary cell.
    r0 : float
        Half the length of the shortest nonzero dual lattice vector; the
        ball of radius 2*r0 around the origin contains no other dual
        lattice point, so |k| <= r0 stays strictly inside the central
        Brillouin zone.
    """

    def __init__(self, basis):
        basis = np.asarray(basis, dtype=float)
        if basis.shape != (3, 3):
            raise ValueError("lattice basis must be a 3x3 matrix")
        det = np.linalg.det(basis)
        if abs(det) < 1e-14:
            raise ValueError("lattice basis is singular")
        self.basis = basis
        self.dual_basis = 2.0 * np.pi * np.linalg.inv(basis).T
        self.cell_volume = abs(det)
        self.r0 = 0.5 * self._min_dual_norm()

    def _min_dual_norm(self):
        best = np.inf
        for q in itertools.product(range(-3, 4), repeat=3):
            if q == (0, 0, 0):
                continue
            best = min(best, np.linalg.norm(np.asarray(q) @ self.dual_basis))
        return best

    def dual_vector(self, q):
        """Dual lattice point q_1*b_1 + q_2*b_2 + q_3*b_3 for integer q."""
        return np.asarray(q, dtype=float) @ self.dual_basis

    def __repr__(self):
        return f"Lattice(basis={self.basis.tolist()})"


def cubic_lattice(a=2.0 * np.pi):
    """Simple cubic lattice with period a along each axis."""
    return Lattice(a * np.eye(3))


def cross_matrix(xi):
    """Matrix r(xi) with r(xi) v = xi x v.

    Antisymmetric, r(xi) xi = 0, and r(xi)^T r(xi) = |xi|^2 I - xi xi^T.
    Broadcasts over trailing axes: xi may have shape (3,) or (3, ...).
    """
    xi = np.asarray(xi)
    z = np.zeros_like(xi[0])
    return np.stack([
        np.stack([z, -xi[2], xi[1]]),
        np.stack([xi[2], z, -xi[0]]),
        np.stack([-xi[1], xi[0], z]),
    ])


def symbol_b(xi, mu0_inv_sqrt, mu0_sqrt):
    """4x3 symbol of the first-order operator underlying the Maxwell block.

    Rows 0..2: r(xi) mu0^{-1/2} (the rotational part), row 3:
    xi^T mu0^{1/2} (the divergence part).  b(xi)^* b(xi) is bounded above
    and below by multiples of |xi|^2 I.

    ``xi`` may have shape (3,) or (3, ...); the result then has shape
    (4, 3) or (4, 3, ...).
    """
    xi = np.asarray(xi, dtype=float)
    r = cross_matrix(xi)
    top = np.einsum("ab...,bc->ac...", r, mu0_inv_sqrt)
    bottom = np.einsum("b...,bc->c...", xi, mu0_sqrt)
    return np.concatenate([top, bottom[None]], axis=0)
