from __future__ import annotations

from typing import Any


class FlaSltException(Exception):
    pass


class ConfigValidationError(FlaSltException):
    """Invalid config value exception."""


class ConfigSaveError(FlaSltException):
    pass


class CorpusError(FlaSltException):
    pass


class CorpusFormatError(CorpusError):
    pass


class MissingFrameError(CorpusError):
    def __init__(self, message: str, sample_id: str, *args: Any) -> None:
        super().__init__(message, *args)
        self.sample_id: str = sample_id


class VocabularyError(FlaSltException):
    pass


class ShapeError(FlaSltException):
    pass


class FeatureTapError(FlaSltException):
    pass


class CheckpointError(FlaSltException):
    pass


class ConfigHashMismatchError(CheckpointError):
    pass


class ManifestTamperedError(CheckpointError):
    pass


class DivergenceError(FlaSltException):
    def __init__(self, message: str, step: int, dump_path: Any = None, *args: Any) -> None:
        super().__init__(message, *args)
        self.step: int = step
        self.dump_path = dump_path


class FreezeViolationError(FlaSltException):
    """A frozen parameter or running statistic changed during training."""


class DiagnosticsError(FlaSltException):
    pass


class DecodingError(FlaSltException):
    pass


class MetricError(FlaSltException):
    pass


class AblationError(FlaSltException):
    pass
