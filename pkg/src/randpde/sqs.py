"""Auxiliary integrals and condition values for selection (SQS) sampling.

Writing the coefficient as a constant background C0 plus per-cell occupancies
times a perturbation C1, the first two moment-matching conditions on a finite
box involve the solution phi of -div[C0 grad phi] = div[1_Q C1 p] with
periodic boundary conditions. The per-cell integrals of C1 grad phi enter a
quadratic form in the centered occupancies; configurations are selected so the
form matches its infinite-volume expectation. (The zero-order condition holds
automatically for integer box sizes under periodic truncation, so only the
first two moments need checking.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correctors import E1, E2
from .errors import GridMismatchError, ParameterError
from .fields import Configuration, _as_symmetric_matrix
from .grid import GX, GY, periodic_grid, solve_singular_system


def _cell_flux_integrals(c0: np.ndarray, c1: np.ndarray, n: int, r: int,
                         tol: float, method: str) -> tuple[np.ndarray, int]:
    """I[j] = int_{Q+j} C1 grad phi_p for p = e1, e2, as an (n, n, 2, 2) array
    with columns indexed by the direction p; plus the solve count."""
    grid = periodic_grid(n, r)
    cells = np.broadcast_to(c0, (n, n, 2, 2)).copy()
    K = grid.assemble_stiffness(cells)
    half_h = 0.5 * grid.h
    cell_of_elem = grid.elem_cell  # (cx, cy) arrays
    in_origin = (cell_of_elem[0] == 0) & (cell_of_elem[1] == 0)
    out = np.zeros((n, n, 2, 2))
    solves = 0
    for col, p in enumerate((E1, E2)):
        c1p = c1 @ p
        fe = -(c1p[0] * GX + c1p[1] * GY) * half_h
        b = np.bincount(grid.elem_nodes[in_origin].ravel(),
                        weights=np.tile(fe, (int(in_origin.sum()), 1)).ravel(),
                        minlength=grid.ndof)
        phi, _, _ = solve_singular_system(K, b, tol=tol, method=method)
        solves += 1
        grads = grid.element_gradient_integrals(phi.astype(float))
        flux = grads @ c1.T  # (n_elements, 2): C1 grad phi integrated per element
        np.add.at(out[:, :, 0, col], (cell_of_elem[0], cell_of_elem[1]), flux[:, 0])
        np.add.at(out[:, :, 1, col], (cell_of_elem[0], cell_of_elem[1]), flux[:, 1])
    return out, solves


@dataclass(frozen=True)
class SqsAuxiliary:
    """Per-offset flux integrals on the working box and on an enlarged box
    used as a whole-space proxy (the gradient of phi decays fast, so periodic
    truncation at n_big >= 3n is a documented, testable approximation)."""

    n: int
    r: int
    c0: np.ndarray
    c1: np.ndarray
    i_n: np.ndarray        # (n, n, 2, 2), offset-indexed
    n_big: int
    i_inf_box: np.ndarray  # (n_big, n_big, 2, 2)
    solves: int = 0

    def i_inf(self, k: tuple[int, int]) -> np.ndarray:
        """Whole-space integral I_k (periodic-box proxy), offset mod n_big."""
        return self.i_inf_box[k[0] % self.n_big, k[1] % self.n_big]

    def rhs_second_moment(self, var_x: float) -> np.ndarray:
        """Right-hand side of the second condition for i.i.d. centered draws."""
        return var_x * self.i_inf_box[0, 0]


def sqs_auxiliary(c0, c1, n: int, r: int, n_big: int | None = None,
                  tol: float = 1e-9, method: str = "cg") -> SqsAuxiliary:
    """Build the offset-indexed integrals for the selection conditions."""
    c0 = _as_symmetric_matrix(c0, "c0")
    c1 = np.asarray(c1, dtype=float)
    if c1.ndim == 0:
        c1 = float(c1) * np.eye(2)
    if np.linalg.eigvalsh(c0)[0] <= 0:
        raise ParameterError("c0 must be symmetric positive definite")
    if n_big is None:
        n_big = max(3 * n, 24)
    i_n, s1 = _cell_flux_integrals(c0, c1, n, r, tol, method)
    i_big, s2 = _cell_flux_integrals(c0, c1, n_big, r, tol, method)
    return SqsAuxiliary(n=n, r=r, c0=c0, c1=c1, i_n=i_n, n_big=n_big,
                        i_inf_box=i_big, solves=s1 + s2)


def pair_correlation_sums(x: np.ndarray) -> np.ndarray:
    """S[d] = sum_k x_k * x_{k+d} over the periodic lattice (via FFT)."""
    f = np.fft.fft2(x)
    return np.real(np.fft.ifft2(f * np.conj(f)))


def sqs_condition_values(cfg: Configuration, aux: SqsAuxiliary) -> tuple[float, float]:
    """(first-moment value, second-moment residual) of a configuration.

    The first value is the box average of the centered draws (exactly zero
    for balanced configurations); the second is the Frobenius norm, over both
    directions, of the mismatch between the empirical pair form and its
    i.i.d. infinite-volume target.
    """
    if cfg.n != aux.n:
        raise GridMismatchError(f"configuration n={cfg.n} does not match auxiliary n={aux.n}")
    p = cfg.p
    x = cfg.draws.astype(float) - p
    s1 = float(x.sum()) / cfg.n ** 2
    s = pair_correlation_sums(x)
    lhs = np.einsum("ab,abij->ij", s, aux.i_n) / cfg.n ** 2
    rhs = aux.rhs_second_moment(p * (1.0 - p))
    s2_residual = float(np.linalg.norm(lhs - rhs))
    return s1, s2_residual
