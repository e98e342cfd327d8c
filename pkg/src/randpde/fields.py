"""Random coefficient-field laws and reproducible configuration sampling.

A configuration is the lattice of per-cell Bernoulli outcomes on the n x n
periodic box; a law turns each outcome into a 2x2 conductivity matrix.
Sampling is counter-based (Philox keyed by seed and index) so that the same
(seed, index, n, law) always yields the same configuration no matter in which
order, or on how many threads, configurations are generated.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .errors import EllipticityError, InfeasibilityError, ParameterError

_IDENTITY = np.eye(2)


def _as_symmetric_matrix(value, name: str) -> np.ndarray:
    """Coerce to a symmetric 2x2 array; scalars become multiples of Id."""
    a = np.asarray(value, dtype=float)
    if a.ndim == 0:
        a = float(a) * _IDENTITY
    if a.shape != (2, 2):
        raise ParameterError(f"{name} must be a scalar or a 2x2 matrix, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise ParameterError(f"{name} must be symmetric")
    return 0.5 * (a + a.T)


def _min_eigenvalue(a: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(a)[0])


@dataclass(frozen=True)
class Checkerboard:
    """Two-phase isotropic law: each cell is alpha*Id or beta*Id with prob 1/2."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterError("checkerboard conductivities alpha, beta must be positive")

    @property
    def bernoulli_p(self) -> float:
        return 0.5

    def phase_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """(draw-0 matrix, draw-1 matrix)."""
        return self.alpha * _IDENTITY, self.beta * _IDENTITY

    def describe(self) -> str:
        return f"checkerboard(alpha={self.alpha:g},beta={self.beta:g})"


@dataclass(frozen=True)
class PerturbedPeriodic:
    """Constant background a_per, perturbed to a_per + c_per on Bernoulli(eta) cells."""

    a_per: np.ndarray
    c_per: np.ndarray
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "a_per", _as_symmetric_matrix(self.a_per, "a_per"))
        object.__setattr__(self, "c_per", _as_symmetric_matrix(self.c_per, "c_per"))
        if not 0.0 <= self.eta <= 1.0:
            raise ParameterError(f"eta must lie in [0, 1], got {self.eta}")
        if _min_eigenvalue(self.a_per) <= 0.0:
            raise EllipticityError("a_per is not positive definite")
        if _min_eigenvalue(self.a_per + self.c_per) <= 0.0:
            raise EllipticityError("a_per + c_per is not positive definite")

    @property
    def bernoulli_p(self) -> float:
        return self.eta

    def phase_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        return self.a_per, self.a_per + self.c_per

    def describe(self) -> str:
        a = ",".join(f"{v:g}" for v in self.a_per.ravel())
        c = ",".join(f"{v:g}" for v in self.c_per.ravel())
        return f"perturbed(a_per=[{a}],c_per=[{c}],eta={self.eta:g})"


FieldLaw = Union[Checkerboard, PerturbedPeriodic]


@dataclass(frozen=True)
class Configuration:
    """One realization: the n x n lattice of Bernoulli outcomes in {0, 1}."""

    n: int
    draws: np.ndarray
    seed: int
    index: int
    p: float = 0.5
    antithetic: bool = False
    balanced: bool = False

    def __post_init__(self):
        draws = np.ascontiguousarray(self.draws, dtype=np.uint8)
        if draws.shape != (self.n, self.n):
            raise ParameterError(f"draws must have shape ({self.n}, {self.n}), got {draws.shape}")
        if draws.size and draws.max() > 1:
            raise ParameterError("draws must take values in {0, 1}")
        draws.flags.writeable = False
        object.__setattr__(self, "draws", draws)

    @property
    def ones_fraction(self) -> float:
        return float(self.draws.mean())


@dataclass(frozen=True)
class CoefficientField:
    """Cell-wise constant 2x2 symmetric coefficient field on the n x n box."""

    n: int
    cells: np.ndarray  # shape (n, n, 2, 2), indexed [kx, ky]

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=float)
        if cells.shape != (self.n, self.n, 2, 2):
            raise ParameterError(f"cells must have shape ({self.n}, {self.n}, 2, 2)")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    def eigenvalue_range(self) -> tuple[float, float]:
        """(min, max) eigenvalue over all cells."""
        eigs = np.linalg.eigvalsh(self.cells.reshape(-1, 2, 2))
        return float(eigs.min()), float(eigs.max())

    def voigt_reuss_bounds(self) -> tuple[float, float]:
        """Harmonic-mean lower and arithmetic-mean upper eigenvalue bounds."""
        flat = self.cells.reshape(-1, 2, 2)
        arith = flat.mean(axis=0)
        harm = np.linalg.inv(np.linalg.inv(flat).mean(axis=0))
        return float(np.linalg.eigvalsh(harm)[0]), float(np.linalg.eigvalsh(arith)[1])


def _philox(seed: int, index: int) -> np.random.Generator:
    key = ((int(seed) % (1 << 64)) << 64) | (int(index) % (1 << 64))
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_lattice(n: int, seed: int, index: int) -> np.ndarray:
    """The deterministic uniform lattice behind configuration (seed, index)."""
    return _philox(seed, index).random((n, n))


def sample_configuration(law: FieldLaw, n: int, seed: int, index: int) -> Configuration:
    """Draw one i.i.d. Bernoulli configuration for the given law.

    The Bernoulli parameter is 1/2 for the checkerboard law and eta for the
    perturbed-periodic law. Pure function of (law, n, seed, index).
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    p = law.bernoulli_p
    draws = (_uniform_lattice(n, seed, index) < p).astype(np.uint8)
    return Configuration(n=n, draws=draws, seed=seed, index=index, p=p)


def antithetic_transform(c: Configuration) -> Configuration:
    """The law-preserving antithetic partner of a configuration.

    For p = 1/2 this is the plain bit flip (heads become tails). For general
    p the flip happens in uniform space (U -> 1-U) before thresholding, which
    preserves the Bernoulli(p) law; that path regenerates the underlying
    uniforms from (seed, index) and is therefore only available for
    Bernoulli-sampled configurations.
    """
    if c.p == 0.5:
        flipped = (1 - c.draws).astype(np.uint8)
    else:
        if c.balanced:
            raise ParameterError("antithetic transform of a balanced configuration needs p = 1/2")
        u = _uniform_lattice(c.n, c.seed, c.index)
        want_antithetic = not c.antithetic
        draws = ((1.0 - u) < c.p) if want_antithetic else (u < c.p)
        flipped = draws.astype(np.uint8)
    return replace(c, draws=flipped, antithetic=not c.antithetic)


def realize_field(law: FieldLaw, c: Configuration) -> CoefficientField:
    """Turn a configuration into the cell-wise constant coefficient field."""
    if abs(law.bernoulli_p - c.p) > 1e-12:
        raise ParameterError(
            f"configuration was drawn with p={c.p} but law has p={law.bernoulli_p}")
    a0, a1 = law.phase_matrices()
    if _min_eigenvalue(a0) <= 0.0 or _min_eigenvalue(a1) <= 0.0:
        raise EllipticityError("phase matrix is not positive definite")
    cells = np.where(c.draws[:, :, None, None].astype(bool), a1, a0)
    return CoefficientField(n=c.n, cells=cells)


def sqs1_exact_sample(n: int, seed: int, index: int, p: float = 0.5) -> Configuration:
    """A configuration drawn uniformly among those with exactly round(p*n^2) ones.

    The centered first-moment condition sum_k (X_k - p) = 0 then holds exactly
    (integer arithmetic). Implemented as a random permutation of the balanced
    multiset rather than by rejection.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    total = n * n
    m_ones = p * total
    if abs(m_ones - round(m_ones)) > 1e-9:
        raise InfeasibilityError(
            f"p*n^2 = {m_ones} is not an integer; exact first-moment balance is infeasible "
            f"(with p=1/2 this requires n^2 even)")
    m_ones = int(round(m_ones))
    flat = np.zeros(total, dtype=np.uint8)
    flat[:m_ones] = 1
    _philox(seed, index).shuffle(flat)
    return Configuration(n=n, draws=flat.reshape(n, n), seed=seed, index=index,
                         p=p, balanced=True)
