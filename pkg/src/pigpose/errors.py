"""Exception hierarchy shared across the toolkit."""


class PigposeError(Exception):
    """Base class for all toolkit errors (CLI maps these to exit code 2)."""


class SkeletonError(PigposeError):
    """Malformed skeleton definition."""


class DatasetError(PigposeError):
    """Dataset layout, manifest or annotation problems."""


class SamplerError(PigposeError):
    """Invalid clustering configuration or inputs."""


class AugmentError(PigposeError):
    """Invalid augmentation parameters."""


class HeatmapError(PigposeError):
    """Confidence-map encoding/decoding problems."""


class NetworkError(PigposeError):
    """Model configuration, shape or checkpoint problems."""


class AnalysisError(PigposeError):
    """Evaluation or outlier-mining input problems."""
