"""Exceptions raised by the imputation library.

Every error raised on purpose by this package derives from
:class:`ImputationError`, so callers (and the command line front end) can
catch one type and still branch on the specific failure.
"""

from __future__ import annotations


class ImputationError(RuntimeError):
    """Base exception for imputation errors.

    Inherits from RuntimeError: these errors describe a problem with the
    data or the numerical setting, not with the calling code.

    Subclass this for specific failure conditions:
        - MarginViolation
        - NonUniqueMinimizer
        - DegenerateFit
        - ...
    """

    def to_dict(self) -> dict[str, object]:
        """Machine-readable form used by the CLI error report."""
        payload: dict[str, object] = {"error": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if not key.startswith("_"):
                payload[key] = value
        return payload


class GridShapeError(ImputationError, ValueError):
    """Grid, mask or values disagree on shape, or the grid is anisotropic."""


class UnknownValueError(ImputationError):
    """A value at an unknown (not yet imputed) grid point was read."""


class StencilSupportError(ImputationError, IndexError):
    """A difference stencil reaches outside the available samples.

    Example:
        A 2k-th central difference at position 0 of a sequence needs k
        samples on the left, which do not exist.
    """


class EmptyHoleError(ImputationError):
    """The mask has no unknown points, so there is no hole to bound."""


class MarginViolation(ImputationError):
    """The hole lies too close to the grid boundary along some axis.

    The padded patch must keep every unknown point more than k grid steps
    away from its boundary. For manifold hole filling the usual remedy is a
    larger reference cube R (or a finer mesh).

    Attributes:
        axis: The offending axis (0-based).
    """

    def __init__(self, message: str, axis: int):
        super().__init__(message)
        self.axis = axis


class NothingToImpute(ImputationError):
    """All grid points are already known."""


class DegenerateSystem(ImputationError):
    """The assembled system has no rows (for example all weights are zero)."""


class UndefinedFrequency(ImputationError, ValueError):
    """The decay bound is undefined because some frequency component is zero."""


class HypothesisViolation(ImputationError):
    """Input coefficients exceed the decay envelope assumed by the inverse estimate.

    Attributes:
        frequency: The first offending frequency multi-index.
    """

    def __init__(self, message: str, frequency: tuple[int, ...]):
        super().__init__(message)
        self.frequency = frequency


class NonUniqueMinimizer(ImputationError):
    """The difference functional has no unique minimizer.

    Raised when the stencil matrix is rank deficient, that is when some
    nonzero grid function supported on the hole has vanishing differences.

    Attributes:
        nullity: Numerical dimension of the null space.
    """

    def __init__(self, message: str, nullity: int):
        super().__init__(message)
        self.nullity = nullity


class SingularMatrixError(ImputationError):
    """A matrix that must be inverted is singular at the given tolerance."""


class SamplingDeficiency(ImputationError):
    """Too few samples near a query point to fit a local frame.

    Solutions:
        - Increase the neighborhood radius
        - Provide denser samples
    """


class DegenerateFit(ImputationError):
    """The local polynomial fit is rank deficient.

    Attributes:
        monomials: Number of monomials of the configured degree.
        neighbors: Number of neighbors with positive weight.
    """

    def __init__(self, message: str, monomials: int, neighbors: int):
        super().__init__(message)
        self.monomials = monomials
        self.neighbors = neighbors


class UnstablePlane(ImputationError):
    """Local tangent planes around the hole disagree too much to be averaged.

    Usually means the hole spans a region of high curvature (a ridge or a
    tight bend) and cannot be filled over a single reference plane.
    """


class ComponentImputationError(ImputationError):
    """Imputation of one ambient component failed during manifold hole filling.

    Attributes:
        component: Index of the ambient coordinate whose grid failed.
    """

    def __init__(self, message: str, component: int):
        super().__init__(message)
        self.component = component


class ConfigurationError(ImputationError, ValueError):
    """Run configuration is invalid (unknown key, wrong type, out of range)."""


class InputFormatError(ImputationError, ValueError):
    """An input file could not be parsed.

    Attributes:
        path: File being read.
        line: 1-based line number of the offending row (0 if not line related).
    """

    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(message)
        self.path = path
        self.line = line
