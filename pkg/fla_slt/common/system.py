import os
import random

import numpy as np
import torch

from fla_slt.common.constants import THREADS_ENVIRONMENT_VARIABLE
from fla_slt.common.exceptions import ConfigValidationError
from fla_slt.common.logger import LoggerFactory

LOG = LoggerFactory.get_logger(__name__)


class System:
    @staticmethod
    def requested_threads() -> int:
        """0 means strict single-threaded reproducibility mode, unset means torch's default."""
        raw = os.environ.get(THREADS_ENVIRONMENT_VARIABLE)
        if raw is None or raw.strip() == "":
            return torch.get_num_threads()
        try:
            threads = int(raw)
        except ValueError as e:
            raise ConfigValidationError(f"{THREADS_ENVIRONMENT_VARIABLE} must be an integer, got {raw!r}") from e
        if threads < 0:
            raise ConfigValidationError(f"{THREADS_ENVIRONMENT_VARIABLE} must be >= 0, got {threads}")
        return threads

    @classmethod
    def strict_mode(cls) -> bool:
        return cls.requested_threads() == 0

    @classmethod
    def configure_threads(cls) -> int:
        threads = cls.requested_threads()
        if threads == 0:
            torch.set_num_threads(1)
            torch.use_deterministic_algorithms(True)
            LOG.info("strict single-threaded mode")
            return 1
        torch.set_num_threads(threads)
        return threads

    @classmethod
    def loader_workers(cls) -> int:
        threads = cls.requested_threads()
        return 0 if threads <= 1 else min(2, threads - 1)

    @staticmethod
    def seed_everything(seed: int) -> None:
        random.seed(seed)
        np.random.seed(seed % 2**32)
        torch.manual_seed(seed)
