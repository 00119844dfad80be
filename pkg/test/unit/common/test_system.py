import random

import numpy as np
import pytest
import torch
from _pytest.monkeypatch import MonkeyPatch
from pytest_mock import MockFixture

from fla_slt.common.constants import THREADS_ENVIRONMENT_VARIABLE
from fla_slt.common.exceptions import ConfigValidationError
from fla_slt.common.system import System


@pytest.mark.parametrize("raw, threads", [("0", 0), ("3", 3), (" 2 ", 2)])
def test_requested_threads(monkeypatch: MonkeyPatch, raw: str, threads: int) -> None:
    monkeypatch.setenv(THREADS_ENVIRONMENT_VARIABLE, raw)
    assert System.requested_threads() == threads


def test_requested_threads_defaults_to_torch(monkeypatch: MonkeyPatch) -> None:
    monkeypatch.delenv(THREADS_ENVIRONMENT_VARIABLE, raising=False)
    assert System.requested_threads() == torch.get_num_threads()
    assert not System.strict_mode()


@pytest.mark.parametrize("raw", ["many", "-1", "1.5"])
def test_requested_threads_invalid(monkeypatch: MonkeyPatch, raw: str) -> None:
    monkeypatch.setenv(THREADS_ENVIRONMENT_VARIABLE, raw)
    with pytest.raises(ConfigValidationError):
        System.requested_threads()


def test_strict_mode_configures_one_deterministic_thread(monkeypatch: MonkeyPatch, mocker: MockFixture) -> None:
    monkeypatch.setenv(THREADS_ENVIRONMENT_VARIABLE, "0")
    set_threads = mocker.patch("fla_slt.common.system.torch.set_num_threads")
    deterministic = mocker.patch("fla_slt.common.system.torch.use_deterministic_algorithms")
    assert System.strict_mode()
    assert System.configure_threads() == 1
    set_threads.assert_called_once_with(1)
    deterministic.assert_called_once_with(True)
    assert System.loader_workers() == 0


def test_seed_everything_reseeds_every_generator() -> None:
    System.seed_everything(5)
    first = (random.random(), float(np.random.rand()), float(torch.rand(1)))
    System.seed_everything(5)
    assert (random.random(), float(np.random.rand()), float(torch.rand(1))) == first
