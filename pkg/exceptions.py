from typing import Optional


class AECError(Exception):
    """Base class for every error raised by the AEC toolkit"""


class RecordParseError(AECError):
    """A vibration record file could not be parsed"""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        prefix = f"{source}: " if source else ""
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{where}{message}")


class CatalogError(AECError):
    """Catalog assembly failed (bad filename, channel, duplicate timestamp)"""


class ScalingError(AECError):
    """Input scaling is undefined for the given data"""


class DimensionError(AECError):
    """Array shapes disagree with the autoencoder configuration"""


class NonFiniteError(AECError):
    """A NaN or infinity showed up in an intermediate result"""


class ZeroVarianceError(AECError):
    """Correlation or kurtosis requested for a constant vector"""

    def __init__(self, message: str, role: Optional[str] = None, ordinal: Optional[int] = None):
        self.role = role
        self.ordinal = ordinal
        super().__init__(message)


class DetectionError(AECError):
    """Detector preconditions violated"""


class ConfigError(AECError):
    """Run configuration is inconsistent"""


class PipelineError(AECError):
    """Failure inside a pipeline stage, labelled with that stage"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
