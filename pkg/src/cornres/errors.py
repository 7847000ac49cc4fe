"""Exception types shared across the package.

Every error raised on a contract violation derives from CornresError so
callers can catch the package's failures with a single except clause while
still discriminating the precise cause.
"""


class CornresError(Exception):
    """Base class for all package-specific errors."""


class RegimeError(CornresError):
    """The contrast lies in a regime where the requested quantity is undefined."""


class NormalizationError(CornresError):
    """The weighted eigenfunction integral is non-positive; no normalization exists."""


class DomainError(CornresError):
    """A coordinate argument lies outside the geometric domain."""


class ResonanceError(CornresError):
    """The matching system is singular (resonant inner radius)."""


class IoError(CornresError):
    """Serialized data could not be written or parsed."""


class ParamError(CornresError):
    """A structural parameter violates its documented constraint."""


class DegenerateError(CornresError):
    """Geometry has degenerated below usable floating-point resolution."""


class SingularSystemError(CornresError):
    """Direct factorization hit a pivot below the admissible floor.

    The offending pivot magnitude is kept for diagnostics.
    """

    def __init__(self, message: str, pivot_floor: float | None = None):
        super().__init__(message)
        self.pivot_floor = pivot_floor


class ConvergenceError(CornresError):
    """An iterative method exhausted its iteration budget."""


class FitError(CornresError):
    """The ring fit is rank-deficient or otherwise unusable."""


class MeshKindError(CornresError):
    """The operation requires a mesh kind or variant the given mesh lacks."""


class NotResonantError(CornresError):
    """The requested kernel mode does not exist at this inner radius."""


class InsufficientDataError(CornresError):
    """Too few usable records to perform the analysis."""


class ConfigError(CornresError):
    """A configuration file or option set is invalid.

    Carries the 1-based line number when the failure is tied to a line.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
