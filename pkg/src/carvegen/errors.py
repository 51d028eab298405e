"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own class here;
plumbing errors (filesystem, permissions) propagate as OSError.
"""


class CarvingError(Exception):
    """Base class for all toolkit errors."""


# bitmap codec

class BmpError(CarvingError):
    pass


class MalformedHeaderError(BmpError):
    """Header bytes are inconsistent or not a bitmap at all."""


class UnsupportedVariantError(BmpError):
    """Valid bitmap, but outside the uncompressed 24-bit subset."""


class TruncatedFileError(BmpError):
    """Declared size exceeds the bytes actually present."""


class OffsetOutOfRangeError(BmpError):
    pass


# fragmenter

class FragmentError(CarvingError):
    pass


class DegenerateSliceError(FragmentError):
    """Cut position would leave an empty input or real fragment."""


class InsufficientCorpusError(FragmentError):
    pass


class PoolError(CarvingError):
    pass


class SourceTooSmallError(PoolError):
    """A decoy source is shorter than the fragment length it must supply."""


class InsufficientSourcesError(PoolError):
    pass


class DuplicateTrueFragmentError(PoolError):
    """Decoy slices kept colliding with the true fragment after the retry budget."""


# predictor

class PredictorError(CarvingError):
    pass


class EmptyCorpusError(PredictorError):
    pass


class CorruptModelError(PredictorError):
    """Model file failed magic, checksum, or structural validation."""


class VersionMismatchError(PredictorError):
    pass


# wire protocol

class ProtocolError(CarvingError):
    """Peer sent a frame that does not conform to the wire format."""


class PredictorTimeoutError(ProtocolError):
    pass


class ShortResponseError(ProtocolError):
    """Predictor answered with fewer bytes than requested."""

    def __init__(self, message: str, requested: int, received: int):
        super().__init__(message)
        self.requested = requested
        self.received = received


class PredictorCrashedError(ProtocolError):
    pass


# metrics

class MetricError(CarvingError):
    pass


class EmptyInputError(MetricError):
    pass


class ZeroVectorError(MetricError):
    pass


class DimensionMismatchError(MetricError):
    pass


class WindowTooLargeError(MetricError):
    pass


class ReconstructionUnparseableError(MetricError):
    pass


class LengthMismatchError(MetricError):
    pass


# statistics

class StatsError(CarvingError):
    pass


class TooFewSamplesError(StatsError):
    pass


class NonFiniteValueError(StatsError):
    pass


class ConfigError(CarvingError):
    """The run configuration is malformed or references missing paths."""
