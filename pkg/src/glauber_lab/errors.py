"""Exception hierarchy shared by all modules."""


class GlauberLabError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(GlauberLabError, ValueError):
    """An argument is outside its documented domain."""


class SizeCapError(GlauberLabError):
    """An exact computation would exceed its configured size cap."""


class FeasibilityError(GlauberLabError, ValueError):
    """A pinning has empty support (two adjacent sites pinned occupied)."""


class TruncationError(GlauberLabError):
    """A construction hit its depth cap before terminating naturally."""


class ConvergenceError(GlauberLabError):
    """An iterative method failed to converge within its iteration cap."""


class FormatError(GlauberLabError, ValueError):
    """A text file does not follow its documented format."""
