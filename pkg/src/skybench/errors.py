"""Shared exception types. The CLI maps these onto exit codes."""


class SkybenchError(Exception):
    """Base class for every error raised by this package."""


class InputError(SkybenchError, ValueError):
    """A caller-supplied argument is malformed or out of range."""


class DataError(SkybenchError):
    """Persisted data (manifest, raster, cache, tile bytes) failed validation."""


class NetworkError(SkybenchError):
    """A remote fetch failed."""


class DegenerateConfiguration(InputError):
    """Point set too small or rank-deficient for a similarity fit."""


class OutOfProjection(InputError):
    """Latitude/longitude outside the Web Mercator domain."""


class InvalidQuadkey(InputError):
    """Quadkey string contains characters outside 0-3."""


class TileUnavailable(NetworkError):
    """Tile server returned a non-200 status."""


class CorruptTile(DataError):
    """Tile bytes did not decode as JPEG."""


class InvalidTile(DataError):
    """Tile decoded but is not a 256x256 image."""


class ManifestParseError(DataError):
    """Site manifest JSON is missing fields or fails validation."""


class InsufficientViews(InputError):
    """A sampler asked for more views than a modality holds."""


class InvalidBatch(InputError):
    """A batch request is too small or empty to be satisfiable."""


class InvalidTaps(InputError):
    """Per-block feature taps do not line up with the encoder depth."""


class InvalidShape(InputError):
    """Array arguments have mismatched or unsupported shapes."""


class InvalidPairing(InputError):
    """Predicted and ground-truth frame lists do not line up."""


class InvalidCamera(InputError):
    """Camera placement or intrinsics are unusable (e.g. below terrain)."""
