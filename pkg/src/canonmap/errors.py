"""Exception hierarchy shared by all canonmap modules.

Every error raised on purpose by this package derives from CanonmapError so
callers (CLI, HTTP server) can map failures to exit codes / status codes in
one place.
"""


class CanonmapError(Exception):
    """Base class for all canonmap errors."""


# --- input / file errors -------------------------------------------------

class ParseError(CanonmapError):
    """Malformed mesh or JSON input. Carries file path and line when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}: "
        if line is not None:
            loc = f"{loc}line {line}: "
        super().__init__(f"{loc}{message}")
        self.path = path
        self.line = line


class SchemaError(CanonmapError):
    """A JSON document does not match the expected schema."""


class ValidationError(CanonmapError):
    """Structurally parsed data violates an invariant (bad index, NaN, ...)."""


class StaleDefinition(CanonmapError):
    """A parts file no longer matches the mesh it was authored against."""


# --- geometry / numeric errors -------------------------------------------

class DegenerateGeometry(CanonmapError):
    """Vertex distribution has insufficient rank for frame assignment."""


class DegenerateTriangle(CanonmapError):
    """Zero-area face encountered where a proper triangle is required."""

    def __init__(self, face_index, message=None):
        super().__init__(message or f"face {face_index} has zero area")
        self.face_index = face_index


class UnreachableVertex(CanonmapError):
    """Shortest-path query hit a disconnected vertex."""


class EigensolveFailure(CanonmapError):
    """Spectral decomposition did not converge."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class DegenerateConfiguration(CanonmapError):
    """Point sets too thin (collinear/coincident) for a stable rigid fit."""


class ConvergenceFailure(CanonmapError):
    """Iterative solver stopped without meeting its tolerance.

    Carries the best iterate seen and solver diagnostics so callers can
    inspect or reuse the partial result.
    """

    def __init__(self, message, best=None, diagnostics=None):
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


# --- correspondence / observation errors ----------------------------------

class DimensionMismatch(CanonmapError):
    """Embedding dimensions of observation and vertex table disagree."""


class EmptyCorrespondenceSet(CanonmapError):
    """No pixel survived match filtering."""


class MissingDepth(CanonmapError):
    """Depth requested for an observation that carries none."""


class NonPositiveDepth(CanonmapError):
    """Depth value <= 0 where a positive range is required."""


class InsufficientPixels(CanonmapError):
    """Too few correspondences for the requested solve."""


class NothingVisible(CanonmapError):
    """No mesh vertex projects into the camera image."""


# --- parts / grasp errors -------------------------------------------------

class InvalidSeed(CanonmapError):
    """Seed vertex index out of range."""


class UnknownPart(CanonmapError):
    """Referenced part name is not in the registry."""


class DuplicatePart(CanonmapError):
    """A part with this name already exists."""


class MissingPart(CanonmapError):
    """A grasp strategy requires a part that was not supplied."""


class DegenerateOrientation(CanonmapError):
    """Object axes are vertical; no horizontal gripper yaw can be derived."""


# CLI exit codes. 2 = could not parse input, 3 = input parsed but invalid,
# 4 = numeric/geometric failure while computing.
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NUMERIC = 4

_VALIDATION_ERRORS = (
    SchemaError,
    ValidationError,
    StaleDefinition,
    DimensionMismatch,
    InvalidSeed,
    UnknownPart,
    DuplicatePart,
    MissingPart,
)


def exit_code_for(err: CanonmapError) -> int:
    """Map an error to the documented CLI exit code."""
    if isinstance(err, ParseError):
        return EXIT_PARSE
    if isinstance(err, _VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return EXIT_NUMERIC
