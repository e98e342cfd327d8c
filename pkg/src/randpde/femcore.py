"""Square-grid Q1 building blocks shared by the reference solver and the
multiscale basis constructions: connectivity, element matrices, trace rows,
penalty assembly and masked energy products on an fn x fn cell grid."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import SolverError
from .grid import KXX, KYY, MASS

KLAP = KXX + KYY
SIDES = ("S", "E", "N", "W")


class SquareGrid:
    """Connectivity and cached Laplace stiffness for a square Q1 grid."""

    def __init__(self, fn: int):
        self.fn = fn
        self.nn = (fn + 1) ** 2
        ex, ey = np.meshgrid(np.arange(fn), np.arange(fn), indexing="ij")
        ex = ex.ravel()
        ey = ey.ravel()
        stride = fn + 1
        self.elem_nodes = np.stack([ex * stride + ey,
                                    (ex + 1) * stride + ey,
                                    (ex + 1) * stride + ey + 1,
                                    ex * stride + ey + 1], axis=1)
        self.cell_xy = (ex, ey)
        self._k0 = None

    def laplace(self) -> sp.csr_matrix:
        if self._k0 is None:
            rows = np.repeat(self.elem_nodes, 4, axis=1).ravel()
            cols = np.tile(self.elem_nodes, (1, 4)).ravel()
            data = np.tile(KLAP.ravel(), len(self.elem_nodes))
            self._k0 = sp.coo_matrix((data, (rows, cols)),
                                     shape=(self.nn, self.nn)).tocsr()
        return self._k0

    def penalty_mass(self, mask: np.ndarray, kappa: float, h: float) -> sp.csr_matrix:
        """kappa * int_{masked cells} u v, exact Q1 mass on masked cells."""
        masked = np.flatnonzero(mask.ravel())
        if masked.size == 0:
            return sp.csr_matrix((self.nn, self.nn))
        en = self.elem_nodes[masked]
        rows = np.repeat(en, 4, axis=1).ravel()
        cols = np.tile(en, (1, 4)).ravel()
        data = np.tile((kappa * h * h * MASS).ravel(), masked.size)
        return sp.coo_matrix((data, (rows, cols)), shape=(self.nn, self.nn)).tocsr()

    def side_nodes(self, side: str) -> np.ndarray:
        fn = self.fn
        stride = fn + 1
        idx = np.arange(fn + 1)
        if side == "S":
            return idx * stride
        if side == "N":
            return idx * stride + fn
        if side == "W":
            return idx
        if side == "E":
            return fn * stride + idx
        raise ValueError(f"unknown side {side!r}")

    def trace_row(self, side: str, h: float) -> np.ndarray:
        """Composite-trapezoid weights of int_side u over the fine trace."""
        row = np.zeros(self.nn)
        nodes = self.side_nodes(side)
        row[nodes] = h
        row[nodes[0]] = 0.5 * h
        row[nodes[-1]] = 0.5 * h
        return row

    def boundary_nodes(self, sides) -> np.ndarray:
        if not sides:
            return np.array([], dtype=int)
        return np.unique(np.concatenate([self.side_nodes(s) for s in sides]))

    def cell_centers(self, origin: tuple[float, float], h: float):
        ex, ey = self.cell_xy
        return origin[0] + (ex + 0.5) * h, origin[1] + (ey + 0.5) * h

    def load_vector(self, cell_values: np.ndarray, keep: np.ndarray, h: float) -> np.ndarray:
        """int f v with f constant per cell (midpoint values), restricted to
        kept cells; exact for bilinear v given the per-cell constants."""
        w = np.where(keep.ravel(), cell_values.ravel(), 0.0) * (h * h / 4.0)
        return np.bincount(self.elem_nodes.ravel(),
                           weights=np.repeat(w, 4), minlength=self.nn)

    def energy_products(self, values: np.ndarray, keep: np.ndarray) -> np.ndarray:
        """Gram matrix of grad-grad products over kept cells (h-independent)."""
        ve = values[:, self.elem_nodes]
        ve = ve[:, keep.ravel(), :]
        return np.einsum("aei,ij,bej->ab", ve, KLAP, ve, optimize=True)

    def l2_products(self, values: np.ndarray, keep: np.ndarray, h: float) -> np.ndarray:
        ve = values[:, self.elem_nodes]
        ve = ve[:, keep.ravel(), :]
        return h * h * np.einsum("aei,ij,bej->ab", ve, MASS, ve, optimize=True)


@lru_cache(maxsize=8)
def square_grid(fn: int) -> SquareGrid:
    return SquareGrid(fn)


def cg_spd(K: sp.csr_matrix, b: np.ndarray, tol: float = 1e-10,
           maxiter: int | None = None) -> tuple[np.ndarray, int, float]:
    """Jacobi-preconditioned CG for a symmetric positive definite system."""
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0
    if maxiter is None:
        maxiter = max(10000, 40 * int(np.sqrt(K.shape[0])))
    inv_diag = 1.0 / K.diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxiter + 1):
        q = K @ p
        alpha = rz / float(p @ q)
        x += alpha * p
        r -= alpha * q
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            return x, it, rnorm / bnorm
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG did not reach tol={tol:g} within {maxiter} iterations",
                      iterations=maxiter, residual=rnorm / bnorm)
