"""Defect cell problems: the offline coefficients behind the control variate.

The perturbed-periodic law differs from the unperturbed material on Bernoulli
cells ("defects"). Solving the periodic problem with exactly one defect (and,
for the second order, with two defects at a given offset) yields deterministic
expansion coefficients; a cheap surrogate for the homogenized tensor of any
configuration is then assembled from per-cell occupancies, and its expectation
is analytically available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .correctors import E1, E2, homogenized_tensor, solve_corrector
from .errors import ParameterError
from .fields import CoefficientField, PerturbedPeriodic
from .grid import periodic_grid

# The 8 lattice symmetries of the square (used only for isotropic materials).
_D4 = [np.array(m, dtype=int) for m in (
    [[1, 0], [0, 1]], [[-1, 0], [0, 1]], [[1, 0], [0, -1]], [[-1, 0], [0, -1]],
    [[0, 1], [1, 0]], [[0, -1], [1, 0]], [[0, 1], [-1, 0]], [[0, -1], [-1, 0]])]


def _is_isotropic(a: np.ndarray) -> bool:
    return abs(a[0, 1]) < 1e-14 and abs(a[0, 0] - a[1, 1]) < 1e-14


def _minimal_offset(dx: int, dy: int, n: int) -> tuple[int, int]:
    """Offset representative with components in (-n/2, n/2]."""
    mx = dx % n
    my = dy % n
    mx = mx - n if mx > n / 2 else mx
    my = my - n if my > n / 2 else my
    return mx, my


def sign_canonical_offsets(n: int, cutoff: float):
    """Distinct unordered pair offsets on the n-torus within the cutoff
    distance: one representative per {delta, -delta (mod n)} class, paired
    with the weight 1/2 for self-inverse offsets (delta == -delta mod n),
    so that summing B_k * B_{k+delta} over all k and all returned offsets
    with these weights counts every unordered defect pair exactly once."""
    seen = set()
    out = []
    for dx in range(n):
        for dy in range(n):
            if dx == 0 and dy == 0:
                continue
            neg = ((n - dx) % n, (n - dy) % n)
            key = min((dx, dy), neg)
            if key in seen:
                continue
            seen.add(key)
            mx, my = _minimal_offset(*key, n)
            if mx * mx + my * my > cutoff * cutoff + 1e-12:
                continue
            out.append(((mx, my), 0.5 if (dx, dy) == neg else 1.0))
    return out


@dataclass(frozen=True)
class DefectCoefficients:
    """Offline expansion coefficients of the perturbed-periodic law at size n."""

    law: PerturbedPeriodic
    n: int
    r: int
    order: int
    a_per_star: np.ndarray          # homogenized tensor of the unperturbed material
    a_1def: np.ndarray              # one-defect contribution (columns = directions)
    a_2def: dict = field(default_factory=dict)  # offset -> pair correction matrix
    pair_weights: dict = field(default_factory=dict)
    solves: int = 0


def _defect_field(law: PerturbedPeriodic, n: int, defect_cells) -> CoefficientField:
    cells = np.broadcast_to(law.a_per, (n, n, 2, 2)).copy()
    for (kx, ky) in defect_cells:
        cells[kx % n, ky % n] = law.a_per + law.c_per
    return CoefficientField(n=n, cells=cells)


def _box_flux_excess(law: PerturbedPeriodic, n: int, r: int, defect_cells,
                     tol: float, method: str) -> tuple[np.ndarray, int]:
    """int_{Q_N} [A_def (e_i + grad w_i) - A_per (e_i + grad w_i^0)] per direction.

    With the (constant) unperturbed material the reference corrector w^0
    vanishes, so the subtracted term is just A_per integrated over the box.
    """
    fld = _defect_field(law, n, defect_cells)
    grid = periodic_grid(n, r)
    out = np.zeros((2, 2))
    solves = 0
    for j, p in enumerate((E1, E2)):
        w = solve_corrector(fld, p, r, tol=tol, method=method)
        solves += 1
        out[:, j] = n * n * grid.average_flux(fld.cells, w.values, p) - n * n * (law.a_per @ p)
    return out, solves


def defect_coefficients(law: PerturbedPeriodic, n: int, r: int, order: int = 1,
                        tol: float = 1e-9, method: str = "cg",
                        defect_cell: tuple[int, int] = (0, 0),
                        cutoff: float | None = None) -> DefectCoefficients:
    """Solve the unperturbed, one-defect and (order 2) two-defect cell problems.

    The one-defect coefficient is independent of the defect position by
    periodicity; ``defect_cell`` exists so that tests can verify this. The
    two-defect catalog covers pair offsets up to Euclidean distance ``cutoff``
    (default n/2) on the periodic lattice, solved once per symmetry class when
    the material is isotropic and mapped back by conjugation.
    """
    if not isinstance(law, PerturbedPeriodic):
        raise ParameterError("defect coefficients are defined for the perturbed-periodic law")
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if order not in (1, 2):
        raise ParameterError(f"order must be 1 or 2, got {order}")

    # Unperturbed material is constant, so its corrector vanishes and the
    # homogenized tensor is the material itself; solve anyway as a check.
    uniform = CoefficientField(n=n, cells=np.broadcast_to(law.a_per, (n, n, 2, 2)).copy())
    w1 = solve_corrector(uniform, E1, r, tol=tol, method=method)
    w2 = solve_corrector(uniform, E2, r, tol=tol, method=method)
    a_per_star = homogenized_tensor(uniform, (w1, w2))
    solves = 2

    a_1def, used = _box_flux_excess(law, n, r, [defect_cell], tol, method)
    solves += used

    a_2def: dict = {}
    weights: dict = {}
    if order == 2:
        if cutoff is None:
            cutoff = n / 2
        offsets = sign_canonical_offsets(n, cutoff)
        isotropic = _is_isotropic(law.a_per) and _is_isotropic(law.c_per)
        class_values: dict = {}
        for (off, w) in offsets:
            weights[off] = w
            if isotropic:
                key = (max(abs(off[0]), abs(off[1])), min(abs(off[0]), abs(off[1])))
                if key not in class_values:
                    e2_val, used = _box_flux_excess(law, n, r, [(0, 0), key], tol, method)
                    solves += used
                    class_values[key] = e2_val - 2.0 * a_1def
                base = class_values[key]
                rot = _find_d4(key, off)
                a_2def[off] = rot @ base @ rot.T
            else:
                e2_val, used = _box_flux_excess(law, n, r, [(0, 0), off], tol, method)
                solves += used
                a_2def[off] = e2_val - 2.0 * a_1def
    return DefectCoefficients(law=law, n=n, r=r, order=order, a_per_star=a_per_star,
                              a_1def=a_1def, a_2def=a_2def, pair_weights=weights,
                              solves=solves)


def _find_d4(canonical: tuple[int, int], target: tuple[int, int]) -> np.ndarray:
    v = np.array(canonical, dtype=int)
    t = np.array(target, dtype=int)
    for rot in _D4:
        if np.array_equal(rot @ v, t):
            return rot.astype(float)
    raise ParameterError(f"offset {target} is not a lattice image of {canonical}")
