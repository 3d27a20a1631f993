from typing import Optional, Tuple


class EpoError(Exception):
    """Base class for every error raised by the training engine"""


class ShapeError(EpoError):
    """An array did not have the shape an operation requires"""

    def __init__(self, layer: str, expected: Tuple, actual: Tuple):
        self.layer = layer
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{layer}: expected shape {self.expected}, got {self.actual}")


class StaleCacheError(EpoError):
    """A forward cache was used with parameters it was not produced from"""


class NonFiniteError(EpoError):
    """A NaN or Inf showed up where training cannot continue"""

    def __init__(self, what: str, index: Optional[int] = None):
        self.what = what
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"Non-finite value in {what}{where}")


class ConfigError(EpoError):
    """Invalid configuration, reported against the first offending key"""

    def __init__(self, key: str, message: str):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


class CheckpointError(EpoError):
    """A checkpoint file could not be read or does not match its manifest"""

    def __init__(self, path: str, message: str):
        self.path = str(path)
        super().__init__(f"{path}: {message}")
