"""Exception and warning types shared across the package."""


class RandpdeError(Exception):
    """Base class for all errors raised by randpde."""


class ParameterError(RandpdeError, ValueError):
    """An input parameter violates its contract (range, sign, shape)."""


class EllipticityError(RandpdeError):
    """A coefficient matrix is not symmetric positive definite."""


class InfeasibilityError(RandpdeError):
    """A requested exact-constraint sample does not exist (e.g. odd cell count)."""


class SolverError(RandpdeError):
    """An iterative solve did not converge within its iteration cap."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class GridMismatchError(RandpdeError):
    """Two discrete objects live on incompatible grids."""


class GeometryError(RandpdeError):
    """A perforation specification is degenerate (e.g. covers the whole domain)."""


class LocalSolveError(RandpdeError):
    """A local basis-function problem is singular; carries the element/edge id."""

    def __init__(self, message, kind=None, index=None):
        super().__init__(message)
        self.kind = kind
        self.index = index


class AssemblyError(RandpdeError):
    """The coarse system is singular (all basis functions annihilated)."""


class ComparabilityError(RandpdeError):
    """Estimator reports with mismatched settings cannot be compared."""


class ConfigError(RandpdeError):
    """An experiment configuration is invalid; message names the offending key."""


class InvariantError(RandpdeError):
    """A numerical invariant (Voigt-Reuss bounds, symmetry) was violated."""


class ResolutionWarning(UserWarning):
    """A fine grid under-resolves a perforation (fewer than 4 cells across)."""


class DegenerateControlWarning(UserWarning):
    """A control variate had (numerically) zero variance; fell back to rho = 0."""
