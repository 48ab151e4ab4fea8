"""
Exception hierarchy for featuresort.

Everything raised on purpose derives from FeatureSortError so the entry point
can log it and map it to an exit code.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class FeatureSortError(Exception):
    exit_code = EXIT_DATA


class ConfigError(FeatureSortError):
    exit_code = EXIT_USAGE


class DataError(FeatureSortError):
    pass


class InvalidBoxError(DataError):
    pass


class DetectionError(DataError):
    pass


class ZeroNormEmbeddingError(DetectionError):
    """
    Raised when a detection arrives with an all-zero embedding. Such a
    detection can't be normalized and is rejected rather than guessed at.
    """


class MalformedRowError(DataError):
    def __init__(self, path, line_number, message):
        self.path = path
        self.line_number = line_number
        super().__init__('{}:{}: {}'.format(path, line_number, message))


class MissingSidecarError(DataError):
    pass


class SidecarMismatchError(DataError):
    pass


class ScenarioError(DataError):
    pass


class UnknownScenarioError(ScenarioError):
    def __init__(self, name, available):
        self.name = name
        self.available = sorted(available)
        super().__init__('unknown scenario {!r}; available presets: {}'.format(name, ', '.join(self.available)))


class ClassMismatchError(FeatureSortError):
    """
    Tracks and detections of different classes are never compared. Getting
    one of these means a caller skipped the per-class partition.
    """
