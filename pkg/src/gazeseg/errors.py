"""Exception hierarchy shared across the pipeline."""


class GazeSegError(Exception):
    """Base class for all pipeline errors."""


class GazeLogParseError(GazeSegError):
    """A gaze log record could not be decoded.

    Carries the 1-based line number (or array index) of the offending record.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyLogError(GazeSegError):
    """The gaze log contains no records."""


class InsufficientDataError(GazeSegError):
    """Too few valid samples to interpolate."""


class HomographyEstimationError(GazeSegError):
    """RANSAC could not find a homography supported by enough inliers."""


class ConfigError(GazeSegError):
    """Invalid or inconsistent configuration."""


class ManifestError(GazeSegError):
    """A dataset manifest entry failed validation."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SegmenterProtocolError(GazeSegError):
    """The segmenter adapter violated the wire protocol."""


class SegmenterTimeoutError(GazeSegError):
    """The segmenter adapter did not answer within the timeout."""


class SegmentationError(GazeSegError):
    """The segmenter adapter reported a per-request failure."""
