"""Periodic corrector problems and the homogenized tensor on the truncated box.

For a coefficient field A on the periodic n x n box and a direction p, the
corrector w_p solves -div[A (p + grad w_p)] = 0 with periodic boundary
conditions and zero mean. Averaging the flux A (e_j + grad w_j) over the box
yields the (random, truncated) homogenized tensor.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, ParameterError
from .fields import CoefficientField
from .grid import periodic_grid, solve_singular_system

E1 = np.array([1.0, 0.0])
E2 = np.array([0.0, 1.0])


@dataclass(frozen=True)
class CorrectorSolution:
    """Nodal values of one corrector on the periodic fine grid (mean zero)."""

    n: int
    r: int
    p: np.ndarray
    values: np.ndarray
    iterations: int
    residual: float
    method: str = "cg"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        values = np.asarray(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "values", values)

    def dump_csv(self, path) -> None:
        """Node-ordered debug dump; header row carries n, r and the direction."""
        buf = io.StringIO()
        buf.write("n,r,p0,p1\n")
        buf.write(f"{self.n},{self.r},{self.p[0]:.17g},{self.p[1]:.17g}\n")
        buf.write("node,value\n")
        for i, v in enumerate(self.values):
            buf.write(f"{i},{v:.17g}\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


def solve_corrector(field: CoefficientField, p, r: int, tol: float = 1e-9,
                    method: str = "cg", maxiter: int | None = None) -> CorrectorSolution:
    """Galerkin solution of the periodic corrector problem for direction p."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    grid = periodic_grid(field.n, r)
    p = np.asarray(p, dtype=float)
    K = grid.assemble_stiffness(field.cells)
    b = grid.corrector_rhs(field.cells, p)
    w, iterations, residual = solve_singular_system(K, b, tol=tol, maxiter=maxiter,
                                                    method=method)
    return CorrectorSolution(n=field.n, r=r, p=p, values=w,
                             iterations=iterations, residual=residual, method=method)


def homogenized_tensor(field: CoefficientField, correctors) -> np.ndarray:
    """Volume-averaged flux tensor: column j is (1/|Q_N|) int A (p_j + grad w_j).

    The correctors must have been solved on the same grid as the field; the
    usual call passes the two canonical directions e_1, e_2 so the result is
    the full 2x2 homogenized tensor.
    """
    correctors = list(correctors)
    if not correctors:
        raise ParameterError("need at least one corrector")
    grid = periodic_grid(field.n, correctors[0].r)
    tensor = np.zeros((2, len(correctors)))
    for j, w in enumerate(correctors):
        if w.n != field.n or w.r != correctors[0].r:
            raise GridMismatchError(
                f"corrector grid ({w.n}, {w.r}) does not match field "
                f"({field.n}, {correctors[0].r})")
        tensor[:, j] = grid.average_flux(field.cells, w.values, w.p)
    return tensor


def energy_tensor(field: CoefficientField, correctors) -> np.ndarray:
    """Same tensor via the Dirichlet-energy form (algebraically identical
    for symmetric A and exactly solved correctors); used as a cross-check."""
    correctors = list(correctors)
    grid = periodic_grid(field.n, correctors[0].r)
    k = len(correctors)
    out = np.zeros((k, k))
    for i, wi in enumerate(correctors):
        for j, wj in enumerate(correctors):
            out[i, j] = grid.energy_product(field.cells, wi.values, wi.p,
                                            wj.values, wj.p)
    return out


def homogenize(field: CoefficientField, r: int, tol: float = 1e-9,
               method: str = "cg") -> tuple[np.ndarray, tuple[CorrectorSolution, CorrectorSolution]]:
    """Solve both canonical correctors and return (tensor, (w_1, w_2))."""
    w1 = solve_corrector(field, E1, r, tol=tol, method=method)
    w2 = solve_corrector(field, E2, r, tol=tol, method=method)
    return homogenized_tensor(field, (w1, w2)), (w1, w2)


def check_voigt_reuss(field: CoefficientField, tensor: np.ndarray,
                      rtol: float = 1e-7) -> bool:
    """True when the tensor eigenvalues sit inside the harmonic/arithmetic
    mean bounds of the field's cells (up to relative slack rtol)."""
    lo, hi = field.voigt_reuss_bounds()
    eigs = np.linalg.eigvalsh(0.5 * (tensor + tensor.T))
    slack = rtol * hi
    return bool(eigs[0] >= lo - slack and eigs[-1] <= hi + slack)
