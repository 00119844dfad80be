from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional, Set
from weakref import WeakValueDictionary

from fla_slt.common.config.config_validator import ConfigValidator
from fla_slt.common.config.unbound import Config
from fla_slt.common.exceptions import ConfigSaveError, ConfigValidationError
from fla_slt.common.logger import LoggerFactory

LOG = LoggerFactory.get_logger(__name__)

DEFAULT_TEMPLATE_NAME = "experiment.json"


class BoundConfig(Config):
    base_path = Path(__file__).parents[2] / "config"
    template_directory = Path(__file__).parents[2] / "config" / "templates"
    __instances: WeakValueDictionary[str, BoundConfig] = WeakValueDictionary()

    def __new__(cls, config_file_name: str, *args: Any, **kwargs: Any) -> BoundConfig:
        if config_file_name in cls.__instances:
            return cls.__instances[config_file_name]
        self: BoundConfig = super().__new__(cls)
        cls.__instances[config_file_name] = self
        return self

    def __init__(
        self,
        config_file_name: str,
        read_only: bool = True,
        template_name: Optional[str] = DEFAULT_TEMPLATE_NAME,
        *args: Any,
        **kwargs: Any,
    ) -> None:
        super(Config, self).__init__(*args, **kwargs)
        self._read_only: bool = read_only
        self._config_path: Path = self.base_path / config_file_name
        self._location: str = str(self._config_path)
        self._template_path: Optional[Path] = (
            None if template_name is None else self.template_directory / template_name
        )
        self._initialized: bool = True
        self.reload()

    @property
    def config_path(self) -> str:
        return str(self._config_path)

    @property
    def template_path(self) -> Optional[Path]:
        return self._template_path

    @classmethod
    def set_config_base_path(cls, base_dir: Path) -> None:
        cls.base_path = Path(base_dir)

    @classmethod
    def reload_all(cls) -> None:
        for config in cls.__instances.values():
            config.reload()

    def reload(self, **kwargs):  # type: ignore
        LOG.info(f"reloading config: {self._config_path}")
        try:
            with open(self._config_path, "r") as jf:
                data = json.load(jf)
        except json.JSONDecodeError as e:
            raise ConfigValidationError(f"{self._config_path} is not valid JSON: {e}") from e
        if self._template_path is not None:
            template = ConfigValidator.get_template(self._template_path)
            ConfigValidator.fill_defaults(template, data)
        self.clear()
        self.update(data)
        self.validate()

    def validate(self) -> None:
        if self._template_path is None:
            return
        with ConfigValidator() as validator:
            validator.validate(self, self._template_path)

    def save(self) -> None:
        LOG.info(f"saving config: {self._config_path}")
        if self._read_only:
            raise ConfigSaveError("This config is read-only and is therefore not savable")
        with open(self._config_path, "w") as jf:
            json.dump(self, jf, indent=4)

    def assert_keys(self, keys: Set[str]) -> None:
        missing_keys = keys - set(self.keys())
        if missing_keys:
            raise ConfigValidationError(f"Keys {missing_keys} are missing in {self._config_path}.")


def validate_config(config: Config, template_name: str = DEFAULT_TEMPLATE_NAME) -> None:
    with ConfigValidator() as validator:
        validator.validate(config, BoundConfig.template_directory / template_name)
