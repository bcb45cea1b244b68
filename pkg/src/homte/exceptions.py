"""Exception hierarchy shared across the package."""


class HomteError(Exception):
    """Base class for all errors raised by homte."""


class DiscretizationError(HomteError):
    """Invalid mesh resolution or a period that does not tile the domain."""


class UnknownMarkerError(HomteError):
    """A boundary tag that does not exist on the mesh."""


class UnknownPhaseError(HomteError):
    """A phase id with no material law attached."""


class EllipticityError(HomteError):
    """A conductivity that is not strictly positive where it must be."""


class SolverError(HomteError):
    """Linear solver failure. Carries the final residual when available."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IncompatibleRhsError(HomteError):
    """Pure-Neumann/periodic right-hand side with a non-zero mean component."""


class ProvenanceError(HomteError):
    """Inputs that do not belong together (mesh/field/table mismatch)."""


class InvalidTensorError(HomteError):
    """A coefficient tensor violating symmetry or definiteness checks."""


class TableError(HomteError):
    """Missing, stale or corrupt offline table data."""


class GeometryError(HomteError):
    """Point location outside the source mesh."""


class UndefinedRelativeError(HomteError):
    """Relative error against a reference with zero norm."""
