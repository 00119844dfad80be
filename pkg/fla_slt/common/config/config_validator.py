from __future__ import annotations

import json
import re
from collections import namedtuple
from pathlib import Path
from pydoc import locate
from types import TracebackType
from typing import Any, Callable, Dict, List, Optional, Type

from fla_slt.common.config.unbound import Config
from fla_slt.common.exceptions import ConfigValidationError

ConfigError = namedtuple("ConfigError", "key message")


class ConfigValidator:
    type_to_check = {
        "str": str,
        "pathlib.Path": str,
        "int": int,
        "float": float,
        "bool": bool,
        "dict": dict,
        "list": list,
    }

    def __init__(self) -> None:
        self.invalid_keys: List[ConfigError] = []

    def __enter__(self) -> ConfigValidator:
        return self

    def __exit__(
        self, exc_type: Optional[Type[BaseException]], exc_val: Optional[BaseException], exc_tb: Optional[TracebackType]
    ) -> None:
        if self.invalid_keys and exc_type is None:
            raise ConfigValidationError(self.describe())

    def describe(self) -> str:
        return "; ".join(f"{error.key}: {error.message}" for error in self.invalid_keys)

    def _is_of_type(self, value: Any, type_name: str) -> bool:
        if type_name == "float":
            return type(value) in (int, float)
        return type(value) is self.type_to_check[type_name]

    def _check_type_validity(self, key: str, template_data: dict, config: Config) -> None:
        valid_type = locate(template_data["type"])
        if not self._is_of_type(config[key], template_data["type"]):
            self.invalid_keys.append(
                ConfigError(
                    key=key,
                    message=(
                        f"Value of key '{key}' has invalid type {type(config[key])} "
                        f"in config file {config.config_path}. Should be: {valid_type}"
                    ),
                )
            )

    def _check_regex(self, key: str, template_data: dict, config: Config) -> None:
        if not isinstance(config[key], str) or not re.fullmatch(pattern=template_data["regex"], string=config[key]):
            self.invalid_keys.append(
                ConfigError(
                    key=key,
                    message=(
                        f"Value {config[key]} of key {key} in config file {config.config_path} "
                        f"does not match the regex {template_data['regex']}"
                    ),
                )
            )

    def _check_range(self, key: str, template_data: dict, config: Config) -> None:
        values = config[key] if isinstance(config[key], list) else [config[key]]
        minimum = template_data["range"].get("min")
        maximum = template_data["range"].get("max")
        exclusive_minimum = template_data["range"].get("exclusive_min", False)
        for value in values:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                continue
            if minimum is not None and (value < minimum or (exclusive_minimum and value == minimum)):
                relation = "greater than" if exclusive_minimum else "at least"
                self.invalid_keys.append(
                    ConfigError(
                        key=key,
                        message=f"Value of key '{key}' in {config.config_path} must be {relation} {minimum}",
                    )
                )
            if maximum is not None and value > maximum:
                self.invalid_keys.append(
                    ConfigError(
                        key=key,
                        message=f"Value of key '{key}' in config file {config.config_path} must be at most {maximum}",
                    )
                )

    def _check_path_resolve(self, key: str, template_data: dict, config: Config) -> None:
        try:
            Path(config[key]).resolve()
        except (ValueError, TypeError):
            self.invalid_keys.append(
                ConfigError(
                    key=key,
                    message=(
                        f"Value {config[key]} of key {key} in config file {config.config_path} is not a valid path"
                    ),
                )
            )

    def _check_options(self, key: str, template_data: dict, config: Config) -> None:
        options = template_data["options"]
        values = config[key] if isinstance(config[key], list) else [config[key]]
        for value in values:
            if value not in options:
                self.invalid_keys.append(
                    ConfigError(
                        key=key,
                        message=(
                            f"Value {value} of key {key} in config file {config.config_path} is not one of {options}"
                        ),
                    )
                )

    def _check_element_type(self, key: str, template_data: dict, config: Config) -> None:
        if not isinstance(config[key], list):
            return
        for index, element in enumerate(config[key]):
            if not self._is_of_type(element, template_data["element_type"]):
                self.invalid_keys.append(
                    ConfigError(
                        key=f"{key}[{index}]",
                        message=(
                            f"Element {element!r} of key {key} in config file {config.config_path} "
                            f"is not of type {template_data['element_type']}"
                        ),
                    )
                )

    def _check_dict(self, key: str, template_data: dict, config: Config) -> None:
        """create a new config object from the dict and run the validation process"""
        if not isinstance(config[key], dict) or "items" not in template_data:
            return
        sub_config = Config(config[key], location=f"{config.config_path}:{key}")
        self._validate_items(template=template_data["items"], config=sub_config, prefix=f"{key}.")

    def validate(self, config: Config, template_path: Path) -> None:
        template = self.get_template(template_path)
        self._validate_items(template, config)

    @staticmethod
    def get_template(template_path: Path) -> dict:
        with open(template_path, "r") as template_file:
            result: dict = json.load(template_file)
            return result

    @classmethod
    def fill_defaults(cls, template: dict, data: Dict[str, Any]) -> Dict[str, Any]:
        """Insert template defaults for absent keys, recursing into dict sections."""
        for key, template_data in template.items():
            if key not in data and "default" in template_data:
                data[key] = json.loads(json.dumps(template_data["default"]))
            if template_data.get("type") == "dict" and "items" in template_data:
                if key not in data and not template_data.get("optional", False):
                    data[key] = {}
                if isinstance(data.get(key), dict):
                    cls.fill_defaults(template_data["items"], data[key])
        return data

    def _validate_items(self, template: dict, config: Config, prefix: str = "") -> None:
        for template_key, template_data in template.items():
            self._validate_item(config, template_key, template_data, prefix)
        for key in config.keys():
            if key not in template:
                self.invalid_keys.append(
                    ConfigError(key=f"{prefix}{key}", message=f"unknown key {key} in config file {config.config_path}")
                )

    def _validate_item(self, config: Config, template_key: str, template_data: dict, prefix: str = "") -> None:
        if self._check_validation_required(config, template_key, template_data, prefix):
            pipeline = self.infer_validation_steps(template_key, template_data)
            for step_func in pipeline:
                before = len(self.invalid_keys)
                step_func(template_key, template_data, config)
                for index in range(before, len(self.invalid_keys)):
                    error = self.invalid_keys[index]
                    self.invalid_keys[index] = ConfigError(key=f"{prefix}{error.key}", message=error.message)
                if len(self.invalid_keys) > before and step_func == self._check_type_validity:
                    break

    def infer_validation_steps(self, template_key: str, template_data: dict) -> List[Callable]:
        steps = []
        if "type" in template_data:
            steps.append(self._check_type_validity)
            if template_data["type"] == "pathlib.Path":
                steps.append(self._check_path_resolve)
            if template_data["type"] == "dict":
                steps.append(self._check_dict)
        if "element_type" in template_data:
            steps.append(self._check_element_type)
        if "regex" in template_data:
            steps.append(self._check_regex)
        if "range" in template_data:
            steps.append(self._check_range)
        if "options" in template_data:
            steps.append(self._check_options)
        return steps

    def _check_validation_required(
        self, config: Config, template_key: str, template_data: dict, prefix: str = ""
    ) -> bool:
        optional = self._check_optional(template_data)
        key_available = self._check_key_available(config, template_key)
        if key_available:
            return config[template_key] is not None or not optional
        if not key_available and optional:
            return False
        self.invalid_keys.append(
            ConfigError(
                key=f"{prefix}{template_key}",
                message=f"required key {template_key} is not in config file {config.config_path}",
            )
        )
        return False

    @staticmethod
    def _check_key_available(config: Config, key: str) -> bool:
        return key in config

    @staticmethod
    def _check_optional(template_data: dict) -> bool:
        return template_data.get("optional", False)
