"""Exception hierarchy shared across the carimorph modules."""


class CarimorphError(Exception):
    """Base class for all domain errors raised by this package."""


class MeshFormatError(CarimorphError):
    """Malformed mesh file (bad OBJ/PLY syntax, non-triangle face, ...)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DegenerateGeometryError(CarimorphError):
    """Geometry too degenerate for the requested operation (coincident
    points, collinear landmarks, coplanar calibration targets, ...)."""


class ShapeMismatchError(CarimorphError):
    """Operands do not share connectivity / vector length."""


class DimensionError(CarimorphError):
    """Coefficient or component count out of range."""


class ModelFormatError(CarimorphError):
    """Model file has a bad magic number or unsupported version."""


class ModelCorruptionError(CarimorphError):
    """Model file is truncated or fails its checksum."""


class UndefinedIdentityError(CarimorphError):
    """A zero-norm feature vector has no identity direction."""


class BatchError(CarimorphError):
    """Empty or inconsistent batch passed to a loss function."""


class TrainingError(CarimorphError):
    """Toy training diverged (non-finite loss)."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


class RegistrationError(CarimorphError):
    """Non-rigid registration could not proceed (no correspondences, ...)."""


class SolverError(CarimorphError):
    """A linear system in the registration / completion pipeline is singular."""


class BoundaryError(CarimorphError):
    """Color completion lacks boundary data (empty known set)."""


class DisconnectedBoundaryError(BoundaryError):
    """Some unknown vertices have no path to any known vertex."""


class TallyError(CarimorphError):
    """Vote tally violates its contract (votes exceed s_max, ...)."""


class AggregationError(CarimorphError):
    """Per-photo score maps disagree on the candidate set."""
