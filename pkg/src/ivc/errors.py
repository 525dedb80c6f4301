"""Exception taxonomy shared by all engine modules.

Every operation that can reject its input raises one of these instead of a
bare ValueError, so callers (CLI, session loop, server) can map failures to
log entries and wire error frames without string matching.
"""


class IvcError(Exception):
    """Base class for all engine errors."""


# --- volume ---------------------------------------------------------------

class MalformedHeader(IvcError):
    """Volume/mask header is missing fields or carries invalid values."""


class SizeMismatch(IvcError):
    """Raw data byte count disagrees with the header dims."""


class IoFailure(IvcError):
    """Underlying file I/O failed."""


class OutOfBounds(IvcError):
    """World point falls outside the volume grid."""


class InvalidWindow(IvcError):
    """Slice window width must be positive."""


class SeedNotInLumen(IvcError):
    """Segmentation seed voxel is not below the air threshold."""


# --- surface / rays -------------------------------------------------------

class EmptyMask(IvcError):
    """Operation requires at least one foreground voxel."""


class MaskTouchesBoundary(IvcError):
    """Isosurface would be open because the mask reaches the grid edge."""


class InvalidDirection(IvcError):
    """Direction vector is not unit length."""


# --- centerline -----------------------------------------------------------

class AllForeground(IvcError):
    """Distance transform requires at least one background voxel."""


class SeedOutsideLumen(IvcError):
    """Path seed does not land on a lumen voxel."""


class SeedsNotConnected(IvcError):
    """No lumen-interior path exists between the two seeds."""


class SeedsCoincident(IvcError):
    """Start and end seeds resolve to the same voxel (or a sub-sample path)."""


class OutOfRange(IvcError):
    """Arc-length parameter outside [0, total length]."""


# --- navigation -----------------------------------------------------------

class InvalidLevel(IvcError):
    """Velocity level outside {0..4}."""


# --- coverage -------------------------------------------------------------

class InvalidSaturation(IvcError):
    """Heatmap saturation time must be positive."""


# --- annotations ----------------------------------------------------------

class RayMiss(IvcError):
    """A pointing ray required to hit the mesh missed it."""

    def __init__(self, message: str = "ray missed the mesh", which: str | None = None):
        super().__init__(message)
        self.which = which


class StaleBookmark(IvcError):
    """Bookmark refers to an arc length outside the loaded centerline."""


# --- session / server -----------------------------------------------------

class OutOfOrderEvent(IvcError):
    """Event timestamp precedes the engine's current tick."""


class CorruptLog(IvcError):
    """Event log line failed to parse."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ProtocolViolation(IvcError):
    """Malformed wire message; the connection is closed."""


class BindFailure(IvcError):
    """Server socket could not bind to the requested port."""


# --- phantom --------------------------------------------------------------

class UnresolvablePolyp(IvcError):
    """Voxel spacing too coarse to resolve the smallest polyp."""
