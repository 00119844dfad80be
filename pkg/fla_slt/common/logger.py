import logging
from collections import deque
from datetime import datetime
from pathlib import Path
from typing import Any, Optional, Tuple

LOG_FORMAT = "%(asctime)s %(levelname)s: %(name)s: %(message)s"
CONSOLE_FORMAT = "%(levelname)s: %(name)s: %(message)s"
DATE_FORMAT = "%m.%d.%Y %H:%M:%S"
WARNINGS_FILE_NAME = "warnings.log"


class LineBuffer(deque):
    def __init__(self, size: int) -> None:
        super().__init__(maxlen=size)

    def push(self, item: str) -> None:
        if not isinstance(item, str):
            raise ValueError(f"Item has to be of type str, but is of type {type(item)}")
        self.append(item)

    @property
    def content(self) -> Tuple[str, ...]:
        return tuple(self)


class CachingFileHandler(logging.FileHandler):
    """Run log that also remembers its last formatted messages for divergence dumps."""

    def __init__(self, *args: Any, cache_size: int = 20, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs)
        self._message_cache = LineBuffer(cache_size)

    def emit(self, record: logging.LogRecord) -> None:
        self._message_cache.push(record.getMessage())
        super().emit(record)

    @property
    def message_cache(self) -> Tuple[str, ...]:
        return self._message_cache.content


class WarningFileHandler(logging.FileHandler):
    """Warnings of all runs sharing a logs directory; the count includes earlier runs."""

    def __init__(self, log_path: Path, *args: Any, **kwargs: Any) -> None:
        existing = log_path.read_text().count("\n") if log_path.is_file() else 0
        super().__init__(log_path, *args, **kwargs)
        self._warning_counter = existing

    def emit(self, record: logging.LogRecord) -> None:
        self._warning_counter += 1
        super().emit(record)

    @property
    def warning_count(self) -> int:
        return self._warning_counter


class LoggerFactory:
    __instance = None
    __parent_logger_name: Optional[str] = None
    __file_handler: Optional[CachingFileHandler] = None
    __warning_file_handler: Optional[WarningFileHandler] = None

    def __init__(self, log_path: Path, parent_logger_name: str, development_mode: bool = False) -> None:
        """Virtually private constructor."""
        if LoggerFactory.__instance is not None:
            raise RuntimeError(f"{self.__class__.__name__} is a singleton and was already instantiated!")
        self._logs_directory = Path(log_path)
        self._logs_directory.mkdir(parents=True, exist_ok=True)
        self._development_mode = development_mode
        self._current_log_name = self._logs_directory / self.log_file_name()
        self.__class__.__parent_logger_name = parent_logger_name
        self._parent_logger = logging.getLogger(parent_logger_name)
        self._parent_logger.setLevel(self._verbose_level)

        self.__class__.__file_handler = CachingFileHandler(self._current_log_name)
        self._attach(self.__class__.__file_handler, logging.DEBUG, LOG_FORMAT)
        self.__class__.__warning_file_handler = WarningFileHandler(self._logs_directory / WARNINGS_FILE_NAME)
        self._attach(self.__class__.__warning_file_handler, logging.WARNING, LOG_FORMAT)
        self._attach(logging.StreamHandler(), self._verbose_level, CONSOLE_FORMAT)
        LoggerFactory.__instance = self

    @property
    def _verbose_level(self) -> int:
        return logging.DEBUG if self._development_mode else logging.INFO

    def _attach(self, handler: logging.Handler, level: int, fmt: str) -> None:
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(fmt, datefmt=DATE_FORMAT))
        self._parent_logger.addHandler(handler)

    @classmethod
    def is_instantiated(cls) -> bool:
        return cls.__instance is not None

    @classmethod
    def get_last_lines(cls) -> Tuple[str, ...]:
        assert isinstance(cls.__file_handler, CachingFileHandler)
        return cls.__file_handler.message_cache

    @classmethod
    def get_warning_count(cls) -> int:
        assert isinstance(cls.__warning_file_handler, WarningFileHandler)
        return cls.__warning_file_handler.warning_count

    @property
    def current_log_name(self) -> Path:
        return self._current_log_name

    @staticmethod
    def log_file_name() -> str:
        return datetime.now().strftime("%Y-%m-%d_%H-%M-%S.log")

    @classmethod
    def get_logger(cls, module_name: str) -> logging.Logger:
        if cls.__instance is None:
            raise RuntimeError(f"Instantiate {cls.__name__} first.")
        return logging.getLogger(f"{cls.__parent_logger_name}.{module_name}")
