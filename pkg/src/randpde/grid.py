"""Periodic bilinear-quadrilateral FEM infrastructure on the n x n box.

The box is split into n*r x n*r square elements (r fine cells per unit cell),
with periodic identification of opposite faces, so elements and DOFs both
number (n*r)^2. Coefficients are constant per unit cell, hence constant per
element, and all element integrals below are exact for that data.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ParameterError, SolverError

# Exact element matrices for Q1 on a square (size-independent in 2D):
# K_e = a11*KXX + a22*KYY + a12*(KXY + KXY^T), node order SW, SE, NE, NW.
KXX = np.array([[2, -2, -1, 1],
                [-2, 2, 1, -1],
                [-1, 1, 2, -2],
                [1, -1, -2, 2]], dtype=float) / 6.0
KYY = np.array([[2, 1, -1, -2],
                [1, 2, -2, -1],
                [-1, -2, 2, 1],
                [-2, -1, 1, 2]], dtype=float) / 6.0
KXY = np.array([[1, 1, -1, -1],
                [-1, -1, 1, 1],
                [-1, -1, 1, 1],
                [1, 1, -1, -1]], dtype=float) / 4.0
# Integrals of shape-function gradients over a square of side h: h/2 * these.
GX = np.array([-1.0, 1.0, 1.0, -1.0])
GY = np.array([-1.0, -1.0, 1.0, 1.0])
# Q1 mass matrix on a square of side h: h^2 * MASS.
MASS = np.array([[4, 2, 1, 2],
                 [2, 4, 2, 1],
                 [1, 2, 4, 2],
                 [2, 1, 2, 4]], dtype=float) / 36.0


class PeriodicGrid:
    """Uniform periodic quad grid with element-node connectivity and cell map."""

    def __init__(self, n: int, r: int):
        if n < 1 or r < 1:
            raise ParameterError(f"grid needs n >= 1 and r >= 1, got n={n}, r={r}")
        self.n = n
        self.r = r
        self.size = n * r
        self.h = 1.0 / r
        self.ndof = self.size ** 2

        g = self.size
        ex, ey = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
        ex = ex.ravel()
        ey = ey.ravel()
        exp = (ex + 1) % g
        eyp = (ey + 1) % g
        # node id (ix, iy) -> ix * g + iy; corners ordered SW, SE, NE, NW
        self.elem_nodes = np.stack([ex * g + ey,
                                    exp * g + ey,
                                    exp * g + eyp,
                                    ex * g + eyp], axis=1)
        self.elem_cell = (ex // r, ey // r)

    def element_coefficients(self, cells: np.ndarray) -> np.ndarray:
        """Per-element 2x2 coefficient matrices from cell-wise field values."""
        cx, cy = self.elem_cell
        return cells[cx, cy]

    def assemble_stiffness(self, cells: np.ndarray) -> sp.csr_matrix:
        """Stiffness matrix for grad(v).A.grad(u) with element-constant A."""
        a = self.element_coefficients(cells)
        ke = (np.einsum("e,ij->eij", a[:, 0, 0], KXX)
              + np.einsum("e,ij->eij", a[:, 1, 1], KYY)
              + np.einsum("e,ij->eij", a[:, 0, 1], KXY + KXY.T))
        rows = np.repeat(self.elem_nodes, 4, axis=1).ravel()
        cols = np.tile(self.elem_nodes, (1, 4)).ravel()
        k = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(self.ndof, self.ndof))
        return k.tocsr()

    def corrector_rhs(self, cells: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Load vector of -int grad(v).A.p (consistent with the stiffness)."""
        a = self.element_coefficients(cells)
        ap = a @ np.asarray(p, dtype=float)
        half_h = 0.5 * self.h
        fe = -(np.outer(ap[:, 0], GX) + np.outer(ap[:, 1], GY)) * half_h
        return np.bincount(self.elem_nodes.ravel(), weights=fe.ravel(),
                           minlength=self.ndof)

    def element_gradient_integrals(self, w: np.ndarray) -> np.ndarray:
        """Per-element exact integral of grad(w), shape (n_elements, 2)."""
        we = w[self.elem_nodes]
        half_h = 0.5 * self.h
        return np.stack([we @ GX, we @ GY], axis=1) * half_h

    def average_flux(self, cells: np.ndarray, w: np.ndarray, p: np.ndarray) -> np.ndarray:
        """(1/|Q_N|) int A (p + grad w) as a length-2 vector."""
        a = self.element_coefficients(cells)
        grads = self.element_gradient_integrals(w)
        p = np.asarray(p, dtype=float)
        flux = np.einsum("eij,ej->i", a, grads)
        flux += (a.sum(axis=0) @ p) * self.h ** 2
        return flux / self.n ** 2

    def energy_product(self, cells: np.ndarray,
                       w1: np.ndarray, p1: np.ndarray,
                       w2: np.ndarray, p2: np.ndarray) -> float:
        """(1/|Q_N|) int (p1 + grad w1)^T A (p2 + grad w2), exact quadrature."""
        a = self.element_coefficients(cells)
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        ke = (np.einsum("e,ij->eij", a[:, 0, 0], KXX)
              + np.einsum("e,ij->eij", a[:, 1, 1], KYY)
              + np.einsum("e,ij->eij", a[:, 0, 1], KXY + KXY.T))
        w1e = w1[self.elem_nodes]
        w2e = w2[self.elem_nodes]
        total = np.einsum("ei,eij,ej->", w1e, ke, w2e)
        g1 = self.element_gradient_integrals(w1)
        g2 = self.element_gradient_integrals(w2)
        total += np.einsum("eij,ej->i", a, g2) @ p1
        total += np.einsum("eij,ei->j", a, g1) @ p2
        total += (a.sum(axis=0) @ p2) @ p1 * self.h ** 2
        return float(total) / self.n ** 2


@lru_cache(maxsize=16)
def periodic_grid(n: int, r: int) -> PeriodicGrid:
    """Cached grid factory; grids are immutable after construction."""
    return PeriodicGrid(n, r)


def solve_singular_system(K: sp.csr_matrix, b: np.ndarray, tol: float = 1e-9,
                          maxiter: int | None = None, method: str = "cg"):
    """Solve K x = b where K is SPD up to the 1D kernel of constants.

    Returns (x, iterations, relative_residual) with mean(x) = 0. The "cg"
    method is diagonally preconditioned conjugate gradients with the residual
    projected to mean zero at every iteration; "direct" pins one DOF and
    factorizes the reduced system.
    """
    ndof = K.shape[0]
    b = b - b.mean()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(ndof), 0, 0.0

    if method == "direct":
        reduced = K[1:, :][:, 1:].tocsc()
        lu = spla.splu(reduced)
        x = np.concatenate(([0.0], lu.solve(b[1:])))
        x -= x.mean()
        res = float(np.linalg.norm(K @ x - b)) / bnorm
        return x, 1, res
    if method != "cg":
        raise ParameterError(f"unknown solver method {method!r}")

    if maxiter is None:
        maxiter = int(50 * np.sqrt(ndof)) + 10
    inv_diag = 1.0 / K.diagonal()
    x = np.zeros(ndof)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        q = K @ p
        alpha = rz / float(p @ q)
        x += alpha * p
        r -= alpha * q
        r -= r.mean()  # project out the kernel of constants
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            x -= x.mean()
            return x, it, rnorm / bnorm
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach tol={tol:g} within {maxiter} iterations "
        f"(relative residual {rnorm / bnorm:.3e})",
        iterations=maxiter, residual=rnorm / bnorm)
